// Occupancy snapshots arrive run-length encoded, row-major:
// -1 unknown, 0 known free, 1 known occupied.

export function decodeRle(rle: [number, number][], expected: number): Int8Array {
  const out = new Int8Array(expected);
  let i = 0;
  for (const [value, count] of rle) {
    if (count < 0 || i + count > expected) {
      throw new Error(`rle overflows grid: ${i} + ${count} > ${expected}`);
    }
    out.fill(value, i, i + count);
    i += count;
  }
  if (i !== expected) {
    throw new Error(`rle covers ${i} cells, grid has ${expected}`);
  }
  return out;
}

export function countValues(cells: Int8Array): { free: number; occupied: number; unknown: number } {
  let free = 0;
  let occupied = 0;
  let unknown = 0;
  for (const v of cells) {
    if (v === 0) free++;
    else if (v === 1) occupied++;
    else unknown++;
  }
  return { free, occupied, unknown };
}
