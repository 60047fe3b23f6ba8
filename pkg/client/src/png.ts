import { ValidationError } from './errors.js';

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export interface PngInfo {
  width: number;
  height: number;
  bitDepth: number;
  colorType: number;
}

/** Peek at the IHDR fields without decoding pixels. */
export function readPngInfo(data: Buffer, context: string): PngInfo {
  if (data.length < 33 || !data.subarray(0, 8).equals(PNG_SIGNATURE)) {
    throw new ValidationError('BAD_BITDEPTH', `${context}: not a PNG stream`);
  }
  const chunkType = data.subarray(12, 16).toString('latin1');
  if (chunkType !== 'IHDR') {
    throw new ValidationError('BAD_BITDEPTH', `${context}: first chunk is ${chunkType}, not IHDR`);
  }
  return {
    width: data.readUInt32BE(16),
    height: data.readUInt32BE(20),
    bitDepth: data.readUInt8(24),
    colorType: data.readUInt8(25),
  };
}

export function requireEightBitRgb(info: PngInfo, context: string): void {
  if (info.bitDepth !== 8 || info.colorType !== 2) {
    throw new ValidationError(
      'BAD_BITDEPTH',
      `${context}: expected 8-bit RGB, got depth ${info.bitDepth} color type ${info.colorType}`,
    );
  }
}
