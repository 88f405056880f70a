/** Numeric argument shapes accepted at the binding boundary. */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];
/** Rigid transform as `[tx, ty, tz, qx, qy, qz, qw]`. */
export type Se3 = number[];
/** Similarity transform as `[s, tx, ty, tz, qx, qy, qz, qw]`. */
export type Sim3 = number[];

/** An (N, cols) matrix: nested rows or a packed row-major buffer. */
export type Matrix = number[][] | Float64Array | Float32Array;

export function asRows(data: Matrix, cols: number, name: string): number[][] {
  if (data instanceof Float64Array || data instanceof Float32Array) {
    if (data.length % cols !== 0) {
      throw new RangeError(
        `${name}: buffer length ${data.length} is not a multiple of ${cols}`,
      );
    }
    const rows: number[][] = [];
    for (let i = 0; i < data.length; i += cols) {
      rows.push(Array.from(data.subarray(i, i + cols)));
    }
    return rows;
  }
  for (const row of data) {
    if (row.length !== cols) {
      throw new RangeError(`${name}: expected ${cols} columns, got ${row.length}`);
    }
  }
  return data;
}

export function asVector(data: number[] | Float64Array, length: number, name: string): number[] {
  const arr = Array.from(data);
  if (arr.length !== length) {
    throw new RangeError(`${name}: expected ${length} numbers, got ${arr.length}`);
  }
  return arr;
}
