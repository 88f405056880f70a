/** RANSAC-wrapped multi-view solvers on normalized image coordinates. */

import type { Bridge } from "./bridge.js";
import { asRows, type Matrix, type Se3, type Sim3 } from "./matrix.js";

export interface RansacOptions {
  threshold?: number;
  confidence?: number;
  maxIters?: number;
  seed?: number;
}

export interface RansacResult<M> {
  model: M;
  inlierMask: boolean[];
  iterations: number;
  inlierCount: number;
}

function ransacParams(options: RansacOptions): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  if (options.threshold !== undefined) out.threshold = options.threshold;
  if (options.confidence !== undefined) out.confidence = options.confidence;
  if (options.maxIters !== undefined) out.max_iters = options.maxIters;
  if (options.seed !== undefined) out.seed = options.seed;
  return out;
}

interface RawResult {
  model: unknown;
  inlier_mask: boolean[];
  iterations: number;
  inlier_count: number;
  relative_pose?: Se3;
}

function unpack<M>(raw: RawResult): RansacResult<M> {
  return {
    model: raw.model as M,
    inlierMask: raw.inlier_mask,
    iterations: raw.iterations,
    inlierCount: raw.inlier_count,
  };
}

export class EstimatorApi {
  constructor(private bridge: Bridge) {}

  async ransacFundamental(x1: Matrix, x2: Matrix,
                          options: RansacOptions = {}): Promise<RansacResult<number[][]>> {
    const raw = await this.bridge.call<RawResult>("ransac_fundamental", {
      x1: asRows(x1, 2, "x1"),
      x2: asRows(x2, 2, "x2"),
      ...ransacParams(options),
    });
    return unpack(raw);
  }

  async ransacEssential(x1: Matrix, x2: Matrix, options: RansacOptions = {},
                        decompose = false):
      Promise<RansacResult<number[][]> & { relativePose?: Se3 }> {
    const raw = await this.bridge.call<RawResult>("ransac_essential", {
      x1: asRows(x1, 2, "x1"),
      x2: asRows(x2, 2, "x2"),
      decompose,
      ...ransacParams(options),
    });
    return { ...unpack<number[][]>(raw), relativePose: raw.relative_pose };
  }

  async ransacHomography(x1: Matrix, x2: Matrix,
                         options: RansacOptions = {}): Promise<RansacResult<number[][]>> {
    const raw = await this.bridge.call<RawResult>("ransac_homography", {
      x1: asRows(x1, 2, "x1"),
      x2: asRows(x2, 2, "x2"),
      ...ransacParams(options),
    });
    return unpack(raw);
  }

  /** Absolute pose (camera-from-world) from 2D-3D correspondences. */
  async ransacPnp(world: Matrix, observed: Matrix,
                  options: RansacOptions = {}): Promise<RansacResult<Se3>> {
    const raw = await this.bridge.call<RawResult>("ransac_pnp", {
      world: asRows(world, 3, "world"),
      observed: asRows(observed, 2, "observed"),
      ...ransacParams(options),
    });
    return unpack(raw);
  }

  async ransacHorn(src: Matrix, dst: Matrix, withScale = true,
                   options: RansacOptions = {}): Promise<RansacResult<Sim3>> {
    const raw = await this.bridge.call<RawResult>("ransac_horn", {
      src: asRows(src, 3, "src"),
      dst: asRows(dst, 3, "dst"),
      with_scale: withScale,
      ...ransacParams(options),
    });
    return unpack(raw);
  }

  /** Closed-form similarity alignment of two point sets (no RANSAC). */
  async horn(src: Matrix, dst: Matrix, withScale = true): Promise<Sim3> {
    const r = await this.bridge.call<{ g: Sim3 }>("horn", {
      src: asRows(src, 3, "src"),
      dst: asRows(dst, 3, "dst"),
      with_scale: withScale,
    });
    return r.g;
  }
}
