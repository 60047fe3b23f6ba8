/** Shared failure vocabulary; codes match what the server returns. */
export type FailureCode =
  | 'MISSING_FRAME'
  | 'BAD_DIMENSIONS'
  | 'BAD_BITDEPTH'
  | 'NO_ENSEMBLE_FLAG'
  | 'BAD_ARCHIVE'
  | 'METADATA_MISMATCH'
  | 'PAYLOAD_TOO_LARGE'
  | 'NOT_FOUND'
  | 'CONFLICT'
  | 'BAD_REQUEST';

export class ValidationError extends Error {
  constructor(
    public readonly code: FailureCode,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = 'ValidationError';
  }
}

export class ServerError extends Error {
  constructor(
    public readonly code: string,
    public readonly status: number,
    detail: string,
  ) {
    super(`${code} (http ${status}): ${detail}`);
    this.name = 'ServerError';
  }
}

export class ConnectionError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = 'ConnectionError';
  }
}
