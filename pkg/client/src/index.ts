export { backoffDelayMs, getStatus, submitArchive, uploadAndWait } from './client.js';
export type { ClientConfig, SubmissionRecord } from './client.js';
export { ConnectionError, ServerError, ValidationError } from './errors.js';
export type { FailureCode } from './errors.js';
export { pack } from './pack.js';
export type { PackedSubmission } from './pack.js';
export { parseReport, printReport } from './report.js';
export type { Report } from './report.js';
export { readDatasetDescriptor, validateSubmissionDir } from './validate.js';
export type { DatasetDescriptor, SubmissionMeta, ValidatedLayout } from './validate.js';
