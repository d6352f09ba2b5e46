/** Binary PGM (P5) reader for the harness spectrum heatmaps. */

export interface Pgm {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export function parsePgm(buf: Buffer, path = "<pgm>"): Pgm {
  const fields: string[] = [];
  let pos = 0;
  while (fields.length < 4 && pos < buf.length) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    const start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    fields.push(buf.subarray(start, pos).toString("ascii"));
  }
  pos++; // single whitespace after maxval
  const [magic, w, h, maxval] = [fields[0], Number(fields[1]), Number(fields[2]), Number(fields[3])];
  if (magic !== "P5" || maxval !== 255) {
    throw new Error(`${path}: unsupported PGM variant (${magic}, maxval ${maxval})`);
  }
  const need = w * h;
  if (buf.length - pos < need) {
    throw new Error(`${path}: truncated pixel data`);
  }
  return { width: w, height: h, pixels: new Uint8Array(buf.subarray(pos, pos + need)) };
}
