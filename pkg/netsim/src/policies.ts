/**
 * Packet-level delivery policies over importance-tagged blocks.
 *
 * Every policy is a pure function of (manifest header, config): randomness
 * comes from the keyed hash stream, so two runs with the same seed and
 * sample id produce identical masks regardless of processing order.
 */

import { ConfigError, type BlockManifest } from "./manifest.js";
import { iidUnit, rankU64 } from "./maskrng.js";

export type PolicyName = "uep" | "congestion" | "random_subset" | "selective_retx";

export interface RetxConfig {
  eps: number; // per-attempt erasure probability
  importanceThreshold: number; // levels <= threshold may be retransmitted
  maxRetx: number; // extra attempts beyond the first
}

export interface PolicyConfig {
  policy: PolicyName;
  seed: number;
  uepMap?: Record<string, number>; // importance level -> erasure probability
  congestionKeep?: number; // m most important blocks are transmitted
  congestionResidualEps?: number; // i.i.d. erasure on transmitted blocks
  subsetErase?: number; // E blocks dropped uniformly at random
  retx?: RetxConfig;
}

export interface MaskRecord {
  sampleId: string;
  bits: boolean[]; // true = delivered
  attempts: number[]; // transmissions used; 0 = policy-dropped
  policyId: PolicyName;
  seed: number;
}

function checkProbability(value: number, what: string): number {
  if (!(value >= 0 && value <= 1)) {
    throw new ConfigError(`${what}: probability must be in [0, 1], got ${value}`);
  }
  return value;
}

/** Deliver each block with probability 1 - uepMap[importance]. */
export function runUep(manifest: BlockManifest, cfg: PolicyConfig): MaskRecord {
  const map = cfg.uepMap;
  if (!map) {
    throw new ConfigError("uep policy needs uep_map");
  }
  const bits: boolean[] = [];
  const attempts: number[] = [];
  for (const block of manifest.blocks) {
    const eps = map[String(block.importanceLevel)];
    if (eps === undefined) {
      throw new ConfigError(`uep_map does not cover importance level ${block.importanceLevel}`);
    }
    checkProbability(eps, `uep_map[${block.importanceLevel}]`);
    bits.push(!(iidUnit(cfg.seed, manifest.sampleId, block.index, 0) < eps));
    attempts.push(1);
  }
  return { sampleId: manifest.sampleId, bits, attempts, policyId: "uep", seed: cfg.seed };
}

/**
 * Transmit the m most important blocks (ties broken by position); each
 * transmitted block is still subject to i.i.d. residual erasure.
 */
export function runCongestion(manifest: BlockManifest, cfg: PolicyConfig): MaskRecord {
  const m = cfg.congestionKeep;
  if (m === undefined || m < 0 || m > manifest.k) {
    throw new ConfigError(`congestion_keep must be in [0, ${manifest.k}], got ${m}`);
  }
  const residual = checkProbability(cfg.congestionResidualEps ?? 0, "congestion_residual_eps");
  const ranked = [...manifest.blocks].sort(
    (a, b) => a.importanceLevel - b.importanceLevel || a.index - b.index,
  );
  const transmitted = new Set(ranked.slice(0, m).map((b) => b.index));
  const bits: boolean[] = [];
  const attempts: number[] = [];
  for (const block of manifest.blocks) {
    if (!transmitted.has(block.index)) {
      bits.push(false);
      attempts.push(0);
      continue;
    }
    bits.push(!(iidUnit(cfg.seed, manifest.sampleId, block.index, 0) < residual));
    attempts.push(1);
  }
  return { sampleId: manifest.sampleId, bits, attempts, policyId: "congestion", seed: cfg.seed };
}

/**
 * Drop a uniformly random E-subset: every block draws a ranking value and
 * the E smallest lose.  Bit-compatible with the codec side's fixed-count
 * masks under the shared (seed, sample_id, index) convention.
 */
export function runRandomSubset(manifest: BlockManifest, cfg: PolicyConfig): MaskRecord {
  const e = cfg.subsetErase;
  if (e === undefined || e < 0 || e > manifest.k) {
    throw new ConfigError(`subset_erase must be in [0, ${manifest.k}], got ${e}`);
  }
  const ranks = manifest.blocks.map((b) => ({
    index: b.index,
    value: rankU64(cfg.seed, manifest.sampleId, b.index, 0),
  }));
  ranks.sort((a, b) => (a.value < b.value ? -1 : a.value > b.value ? 1 : a.index - b.index));
  const dropped = new Set(ranks.slice(0, e).map((r) => r.index));
  const bits = manifest.blocks.map((b) => !dropped.has(b.index));
  const attempts = bits.map((b) => (b ? 1 : 0));
  return {
    sampleId: manifest.sampleId,
    bits,
    attempts,
    policyId: "random_subset",
    seed: cfg.seed,
  };
}

/**
 * Every attempt fails i.i.d. with probability eps; blocks at importance
 * levels <= threshold retry up to maxRetx extra times, the rest get one shot.
 */
export function runSelectiveRetx(manifest: BlockManifest, cfg: PolicyConfig): MaskRecord {
  const retx = cfg.retx;
  if (!retx) {
    throw new ConfigError("selective_retx policy needs retx settings");
  }
  checkProbability(retx.eps, "retx.eps");
  if (retx.maxRetx < 0) {
    throw new ConfigError(`retx.max_retx must be >= 0, got ${retx.maxRetx}`);
  }
  const bits: boolean[] = [];
  const attempts: number[] = [];
  for (const block of manifest.blocks) {
    const protectedBlock = block.importanceLevel <= retx.importanceThreshold;
    const maxAttempts = protectedBlock ? retx.maxRetx + 1 : 1;
    let used = 0;
    let delivered = false;
    while (used < maxAttempts) {
      const u = iidUnit(cfg.seed, manifest.sampleId, block.index, used);
      used += 1;
      if (!(u < retx.eps)) {
        delivered = true;
        break;
      }
    }
    bits.push(delivered);
    attempts.push(used);
  }
  return {
    sampleId: manifest.sampleId,
    bits,
    attempts,
    policyId: "selective_retx",
    seed: cfg.seed,
  };
}

export function runPolicy(manifest: BlockManifest, cfg: PolicyConfig): MaskRecord {
  switch (cfg.policy) {
    case "uep":
      return runUep(manifest, cfg);
    case "congestion":
      return runCongestion(manifest, cfg);
    case "random_subset":
      return runRandomSubset(manifest, cfg);
    case "selective_retx":
      return runSelectiveRetx(manifest, cfg);
    default:
      throw new ConfigError(`unknown policy ${JSON.stringify(cfg.policy)}`);
  }
}

/** Parse the JSON policy-config document (snake_case on the wire). */
export function parsePolicyConfig(text: string, source: string): PolicyConfig {
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(text) as Record<string, unknown>;
  } catch (err) {
    throw new ConfigError(`${source}: malformed policy config (${String(err)})`);
  }
  const policy = doc["policy"];
  if (
    policy !== "uep" &&
    policy !== "congestion" &&
    policy !== "random_subset" &&
    policy !== "selective_retx"
  ) {
    throw new ConfigError(`${source}: policy must be one of uep|congestion|random_subset|selective_retx`);
  }
  const seed = doc["seed"];
  if (typeof seed !== "number" || !Number.isInteger(seed)) {
    throw new ConfigError(`${source}: seed must be an integer`);
  }
  const cfg: PolicyConfig = { policy, seed };
  if (doc["uep_map"] !== undefined) {
    cfg.uepMap = doc["uep_map"] as Record<string, number>;
  }
  if (doc["congestion_keep"] !== undefined) {
    cfg.congestionKeep = Number(doc["congestion_keep"]);
  }
  if (doc["congestion_residual_eps"] !== undefined) {
    cfg.congestionResidualEps = Number(doc["congestion_residual_eps"]);
  }
  if (doc["subset_erase"] !== undefined) {
    cfg.subsetErase = Number(doc["subset_erase"]);
  }
  if (doc["retx"] !== undefined) {
    const r = doc["retx"] as Record<string, unknown>;
    cfg.retx = {
      eps: Number(r["eps"]),
      importanceThreshold: Number(r["importance_threshold"]),
      maxRetx: Number(r["max_retx"]),
    };
  }
  return cfg;
}
