/** Tiny software rasterizer: rectangles, text from the embedded bitmap
 * font, and a diverging color ramp for heatmaps. */

import { FONT_HEIGHT, FONT_WIDTH, GLYPHS } from "./font.js";

export type Color = [number, number, number];

export const PALETTE: Color[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
];

export class Canvas {
  readonly pixels: Uint8Array;

  constructor(readonly width: number, readonly height: number, fill: Color = [255, 255, 255]) {
    this.pixels = new Uint8Array(width * height * 3);
    for (let i = 0; i < width * height; i++) {
      this.pixels[i * 3] = fill[0];
      this.pixels[i * 3 + 1] = fill[1];
      this.pixels[i * 3 + 2] = fill[2];
    }
  }

  set(x: number, y: number, c: Color): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 3;
    this.pixels[i] = c[0];
    this.pixels[i + 1] = c[1];
    this.pixels[i + 2] = c[2];
  }

  fillRect(x: number, y: number, w: number, h: number, c: Color): void {
    const x1 = Math.max(0, Math.round(x));
    const y1 = Math.max(0, Math.round(y));
    const x2 = Math.min(this.width, Math.round(x + w));
    const y2 = Math.min(this.height, Math.round(y + h));
    for (let yy = y1; yy < y2; yy++) {
      for (let xx = x1; xx < x2; xx++) {
        this.set(xx, yy, c);
      }
    }
  }

  strokeRect(x: number, y: number, w: number, h: number, c: Color): void {
    this.fillRect(x, y, w, 1, c);
    this.fillRect(x, y + h - 1, w, 1, c);
    this.fillRect(x, y, 1, h, c);
    this.fillRect(x + w - 1, y, 1, h, c);
  }

  text(x: number, y: number, s: string, c: Color = [0, 0, 0], scale = 1): void {
    let cx = Math.round(x);
    const cy = Math.round(y);
    for (const ch of s) {
      const glyph = GLYPHS[ch] ?? GLYPHS["?"];
      for (let gy = 0; gy < FONT_HEIGHT; gy++) {
        for (let gx = 0; gx < FONT_WIDTH; gx++) {
          if ((glyph[gy] >> gx) & 1) {
            for (let sy = 0; sy < scale; sy++) {
              for (let sx = 0; sx < scale; sx++) {
                this.set(cx + gx * scale + sx, cy + gy * scale + sy, c);
              }
            }
          }
        }
      }
      cx += (FONT_WIDTH - 1) * scale;
    }
  }

  textWidth(s: string, scale = 1): number {
    return s.length * (FONT_WIDTH - 1) * scale;
  }
}

/** Map t in [0,1] to a perceptually ordered blue->yellow ramp. */
export function heatColor(t: number): Color {
  const v = Math.max(0, Math.min(1, t));
  return [
    Math.round(255 * Math.min(1, 0.1 + 1.2 * v)),
    Math.round(255 * (0.1 + 0.8 * v)),
    Math.round(255 * (0.45 - 0.35 * v)),
  ];
}
