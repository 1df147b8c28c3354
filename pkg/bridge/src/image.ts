/** Packed observation image decoding (see docs/PROTOCOL.md in the parent repo). */

export const IMAGE_SIZE = 75;
export const PACKED_BYTES_PER_ROW = 10;
export const PACKED_IMAGE_BYTES = IMAGE_SIZE * PACKED_BYTES_PER_ROW;

/**
 * Decode the base64 packed image (75 rows x 10 bytes, MSB-first) into a flat
 * row-major Uint8Array of 75*75 zeros and ones.
 */
export function decodeImage(payload: string): Uint8Array {
  const packed = Buffer.from(payload, "base64");
  if (packed.length !== PACKED_IMAGE_BYTES) {
    throw new Error(`packed image must be ${PACKED_IMAGE_BYTES} bytes, got ${packed.length}`);
  }
  const pixels = new Uint8Array(IMAGE_SIZE * IMAGE_SIZE);
  for (let row = 0; row < IMAGE_SIZE; row++) {
    for (let col = 0; col < IMAGE_SIZE; col++) {
      const byte = packed[row * PACKED_BYTES_PER_ROW + (col >> 3)];
      pixels[row * IMAGE_SIZE + col] = (byte >> (7 - (col & 7))) & 1;
    }
  }
  return pixels;
}
