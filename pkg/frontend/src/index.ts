/**
 * Node.js bindings for the slamkit toolkit.
 *
 * A {@link Slamkit} instance owns one core subprocess (`slamkit rpc`) and
 * exposes the library surface under namespaces mirroring the core module
 * names: `transform`, `estimator`, `vocabulary`, `evaluation`.
 *
 * ```ts
 * const kit = new Slamkit();
 * const q = await kit.transform.so3Exp([0, 0, Math.PI / 2]);
 * await kit.close();
 * ```
 */

import { Bridge, type BridgeOptions, SlamkitError } from "./bridge.js";
import { EstimatorApi } from "./estimator.js";
import { EvaluationApi } from "./evaluation.js";
import { TransformApi } from "./transform.js";
import { VocabularyApi } from "./vocabulary.js";

export { SlamkitError } from "./bridge.js";
export type { BridgeOptions } from "./bridge.js";
export type { Matrix, Quat, Se3, Sim3, Vec3 } from "./matrix.js";
export type { RansacOptions, RansacResult } from "./estimator.js";
export type { ApeOptions, ErrorStats, RpeOptions, TrajectoryData, TrajectoryRef } from "./evaluation.js";
export type { BowVector, TransformOutput, Vocabulary, VocabularyInfo } from "./vocabulary.js";

export class Slamkit {
  private bridge: Bridge;
  readonly transform: TransformApi;
  readonly estimator: EstimatorApi;
  readonly vocabulary: VocabularyApi;
  readonly evaluation: EvaluationApi;

  constructor(options: BridgeOptions = {}) {
    this.bridge = new Bridge(options);
    this.transform = new TransformApi(this.bridge);
    this.estimator = new EstimatorApi(this.bridge);
    this.vocabulary = new VocabularyApi(this.bridge);
    this.evaluation = new EvaluationApi(this.bridge);
  }

  /** Core library version string. */
  async version(): Promise<string> {
    const r = await this.bridge.call<{ version: string }>("version");
    return r.version;
  }

  async close(): Promise<void> {
    await this.bridge.close();
  }
}
