/**
 * Keyed, counter-based randomness for survival masks.
 *
 * This reimplements the codec side's wire convention without sharing code:
 *
 *     msg  = "maskrng-v1|<seed>|<field>|<field>|..."    (UTF-8)
 *     u64  = first 8 bytes of SHA-256(msg), big-endian
 *     unit = (u64 >> 11) / 2**53       (exact IEEE-754 double in [0, 1))
 *
 * Purpose tags: "iid" for per-block Bernoulli draws, "rank" for the ranking
 * draws behind fixed-count subsets.  Block indices are 1-based, matching the
 * manifest numbering.
 */

import { createHash } from "node:crypto";

export const STREAM_VERSION = "maskrng-v1";

export type KeyField = string | number;

export function keyedU64(seed: number, ...fields: KeyField[]): bigint {
  const msg = [STREAM_VERSION, String(seed), ...fields.map(String)].join("|");
  const digest = createHash("sha256").update(msg, "utf8").digest();
  return digest.readBigUInt64BE(0);
}

export function keyedUnit(seed: number, ...fields: KeyField[]): number {
  return Number(keyedU64(seed, ...fields) >> 11n) / 2 ** 53;
}

/** Unit draw for an independent per-block delivery decision. */
export function iidUnit(seed: number, sampleId: string, block: number, attempt: number): number {
  return keyedUnit(seed, "iid", sampleId, block, attempt);
}

/** Ranking draw used to pick fixed-size erasure subsets. */
export function rankU64(seed: number, sampleId: string, block: number, counter: number): bigint {
  return keyedU64(seed, "rank", sampleId, block, counter);
}
