import { describe, expect, it } from "vitest";

import { parsePpm } from "../src/ppm.js";

function bytes(header: string, pixels: number[]): Uint8Array {
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + pixels.length);
  out.set(head);
  out.set(pixels, head.length);
  return out;
}

describe("parsePpm", () => {
  it("decodes a 2x1 image to RGBA", () => {
    const img = parsePpm(bytes("P6\n2 1\n255\n", [255, 0, 0, 0, 128, 255]));
    expect(img.width).toBe(2);
    expect(img.height).toBe(1);
    expect(Array.from(img.rgba)).toEqual([255, 0, 0, 255, 0, 128, 255, 255]);
  });

  it("skips comments and odd whitespace in the header", () => {
    const img = parsePpm(
      bytes("P6 # a comment\n# another\n 1\t1 # dims\n255\n", [9, 8, 7]),
    );
    expect(img.width).toBe(1);
    expect(Array.from(img.rgba)).toEqual([9, 8, 7, 255]);
  });

  it("rejects a bad magic", () => {
    expect(() => parsePpm(bytes("P5\n1 1\n255\n", [0, 0, 0]))).toThrow(/P6/);
  });

  it("rejects 16-bit maxval", () => {
    expect(() => parsePpm(bytes("P6\n1 1\n65535\n", [0, 0, 0]))).toThrow(/maxval/);
  });

  it("rejects truncated pixel data", () => {
    expect(() => parsePpm(bytes("P6\n2 2\n255\n", [1, 2, 3]))).toThrow(
      /expected 12 pixel bytes/,
    );
  });

  it("rejects a truncated header", () => {
    expect(() => parsePpm(bytes("P6\n2", []))).toThrow(/truncated|terminator/);
  });
});
