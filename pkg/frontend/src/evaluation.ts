/** Trajectory loading, alignment and APE/RPE evaluation. */

import type { Bridge } from "./bridge.js";
import type { Se3, Sim3 } from "./matrix.js";

export interface TrajectoryData {
  timestamps: number[];
  poses: Se3[];
}

/** Either a trajectory file path or inline timestamp/pose arrays. */
export type TrajectoryRef = string | TrajectoryData;

export interface ErrorStats {
  rmse: number;
  mean: number;
  median: number;
  std: number;
  min: number;
  max: number;
  count: number;
}

export interface ApeOptions {
  mode?: "se3" | "sim3";
  alignFirst?: boolean;
  maxDt?: number;
}

export interface RpeOptions {
  delta?: number;
  deltaUnit?: "frames" | "seconds";
  maxDt?: number;
}

function trajectoryParams(key: string, ref: TrajectoryRef): Record<string, unknown> {
  if (typeof ref === "string") return { [`${key}_path`]: ref };
  return { [key]: ref };
}

export class EvaluationApi {
  constructor(private bridge: Bridge) {}

  async loadTrajectory(path: string): Promise<TrajectoryData> {
    return this.bridge.call<TrajectoryData>("trajectory_load", { path });
  }

  async align(est: TrajectoryRef, gt: TrajectoryRef,
              mode: "se3" | "sim3" = "se3", maxDt?: number): Promise<Sim3> {
    const r = await this.bridge.call<{ g: Sim3 }>("align", {
      ...trajectoryParams("est", est),
      ...trajectoryParams("gt", gt),
      mode,
      ...(maxDt !== undefined ? { max_dt: maxDt } : {}),
    });
    return r.g;
  }

  async ape(est: TrajectoryRef, gt: TrajectoryRef, options: ApeOptions = {}):
      Promise<{ translation: ErrorStats; rotation: ErrorStats; alignment: Sim3 }> {
    return this.bridge.call("ape", {
      ...trajectoryParams("est", est),
      ...trajectoryParams("gt", gt),
      ...(options.mode ? { mode: options.mode } : {}),
      ...(options.alignFirst !== undefined ? { align_first: options.alignFirst } : {}),
      ...(options.maxDt !== undefined ? { max_dt: options.maxDt } : {}),
    });
  }

  async rpe(est: TrajectoryRef, gt: TrajectoryRef, options: RpeOptions = {}):
      Promise<{ translation: ErrorStats; rotation: ErrorStats }> {
    return this.bridge.call("rpe", {
      ...trajectoryParams("est", est),
      ...trajectoryParams("gt", gt),
      ...(options.delta !== undefined ? { delta: options.delta } : {}),
      ...(options.deltaUnit ? { delta_unit: options.deltaUnit } : {}),
      ...(options.maxDt !== undefined ? { max_dt: options.maxDt } : {}),
    });
  }
}
