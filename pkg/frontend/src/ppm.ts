// Binary PPM (P6, maxval 255) decoder. The service streams frames in this
// format; decoding to RGBA lets the player hand the result straight to
// ImageData/putImageData.

export interface PpmImage {
  width: number;
  height: number;
  /** RGBA, alpha forced to 255. Length = width * height * 4. */
  rgba: Uint8ClampedArray;
}

const SP = 32;
const TAB = 9;
const LF = 10;
const CR = 13;
const HASH = 35;

function isSpace(b: number): boolean {
  return b === SP || b === TAB || b === LF || b === CR;
}

/** Reads the next whitespace-delimited header token, skipping # comments. */
function nextToken(bytes: Uint8Array, pos: number): [string, number] {
  while (pos < bytes.length) {
    if (isSpace(bytes[pos])) {
      pos++;
    } else if (bytes[pos] === HASH) {
      while (pos < bytes.length && bytes[pos] !== LF) pos++;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < bytes.length && !isSpace(bytes[pos]) && bytes[pos] !== HASH) pos++;
  if (pos === start) throw new Error("ppm: truncated header");
  let tok = "";
  for (let i = start; i < pos; i++) tok += String.fromCharCode(bytes[i]);
  return [tok, pos];
}

export function parsePpm(bytes: Uint8Array): PpmImage {
  let pos = 0;
  let tok: string;
  [tok, pos] = nextToken(bytes, pos);
  if (tok !== "P6") throw new Error(`ppm: expected P6 magic, got ${JSON.stringify(tok)}`);
  const dims: number[] = [];
  for (let i = 0; i < 3; i++) {
    [tok, pos] = nextToken(bytes, pos);
    const n = Number(tok);
    if (!Number.isInteger(n) || n < 0) throw new Error(`ppm: bad header number ${JSON.stringify(tok)}`);
    dims.push(n);
  }
  const [width, height, maxval] = dims;
  if (width < 1 || height < 1) throw new Error(`ppm: bad dimensions ${width}x${height}`);
  if (maxval !== 255) throw new Error(`ppm: only maxval 255 supported, got ${maxval}`);
  // exactly one whitespace byte separates the header from the pixel data
  if (pos >= bytes.length || !isSpace(bytes[pos])) throw new Error("ppm: missing header terminator");
  pos++;
  const need = width * height * 3;
  if (bytes.length - pos < need) {
    throw new Error(`ppm: expected ${need} pixel bytes, got ${bytes.length - pos}`);
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let i = 0, j = 0; i < need; i += 3, j += 4) {
    rgba[j] = bytes[pos + i];
    rgba[j + 1] = bytes[pos + i + 1];
    rgba[j + 2] = bytes[pos + i + 2];
    rgba[j + 3] = 255;
  }
  return { width, height, rgba };
}
