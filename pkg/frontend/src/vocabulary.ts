/** Bag-of-words vocabulary queries against a loaded core-side vocabulary. */

import type { Bridge } from "./bridge.js";

export type BowVector = Record<string, number>;

export interface VocabularyInfo {
  handle: number;
  k: number;
  levels: number;
  descriptorType: string;
  descriptorLength: number;
  nodes: number;
  words: number;
}

export interface TransformOutput {
  bow: BowVector;
  featureVector: Record<string, number[]>;
}

export class Vocabulary {
  constructor(private bridge: Bridge, readonly info: VocabularyInfo) {}

  async transform(descriptors: number[][], featureLevel = 2): Promise<TransformOutput> {
    const r = await this.bridge.call<{ bow: BowVector; feature_vector: Record<string, number[]> }>(
      "vocab_transform",
      { handle: this.info.handle, descriptors, feature_level: featureLevel },
    );
    return { bow: r.bow, featureVector: r.feature_vector };
  }
}

export class VocabularyApi {
  constructor(private bridge: Bridge) {}

  /** Load a vocabulary file (binary format, see docs/formats.md). */
  async load(path: string): Promise<Vocabulary> {
    const r = await this.bridge.call<{
      handle: number; k: number; levels: number; descriptor_type: string;
      descriptor_length: number; nodes: number; words: number;
    }>("vocab_load", { path });
    return new Vocabulary(this.bridge, {
      handle: r.handle,
      k: r.k,
      levels: r.levels,
      descriptorType: r.descriptor_type,
      descriptorLength: r.descriptor_length,
      nodes: r.nodes,
      words: r.words,
    });
  }

  /** L1 similarity of two bag-of-words vectors, in [0, 1]. */
  async score(a: BowVector, b: BowVector): Promise<number> {
    const r = await this.bridge.call<{ score: number }>("vocab_score", { a, b });
    return r.score;
  }
}
