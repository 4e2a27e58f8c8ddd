/**
 * Directory-level runner: one mask record per manifest header, plus an
 * aggregated stats document.  Unreadable manifests are skipped with a
 * warning; the run then reports partial success.
 */

import { readFileSync, readdirSync, writeFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import { parseManifestHeader, type BlockManifest } from "./manifest.js";
import { runPolicy, type MaskRecord, type PolicyConfig } from "./policies.js";
import { aggregateStats, type TransmissionStats } from "./stats.js";

export const HEADER_SUFFIX = ".manifest.json";
export const MASK_SUFFIX = ".mask.json";

export interface BatchResult {
  records: MaskRecord[];
  stats: TransmissionStats;
  skipped: string[];
}

/** Serialize a mask record in the shared on-disk schema (sorted keys). */
export function maskRecordJson(record: MaskRecord): string {
  const doc = {
    attempts: record.attempts,
    bits: record.bits,
    format: "jscckit-mask-record",
    format_version: 1,
    policy_id: record.policyId,
    sample_id: record.sampleId,
    seed: record.seed,
  };
  return JSON.stringify(doc, null, 2) + "\n";
}

export function batchRun(
  inDir: string,
  cfg: PolicyConfig,
  outDir: string,
  warn: (msg: string) => void = (msg) => console.error(msg),
): BatchResult {
  const headers = readdirSync(inDir)
    .filter((name) => name.endsWith(HEADER_SUFFIX))
    .sort();
  mkdirSync(outDir, { recursive: true });
  const pairs: Array<{ manifest: BlockManifest; record: MaskRecord }> = [];
  const skipped: string[] = [];
  for (const name of headers) {
    const path = join(inDir, name);
    let manifest: BlockManifest;
    try {
      manifest = parseManifestHeader(readFileSync(path, "utf8"), name);
    } catch (err) {
      warn(`skipping ${name}: ${err instanceof Error ? err.message : String(err)}`);
      skipped.push(name);
      continue;
    }
    const record = runPolicy(manifest, cfg);
    writeFileSync(join(outDir, `${manifest.sampleId}${MASK_SUFFIX}`), maskRecordJson(record));
    pairs.push({ manifest, record });
  }
  const stats = aggregateStats(pairs, skipped);
  if (stats.policy_id === null) {
    stats.policy_id = cfg.policy;
    stats.seed = cfg.seed;
  }
  writeFileSync(join(outDir, "stats.json"), JSON.stringify(stats, null, 2) + "\n");
  return { records: pairs.map((p) => p.record), stats, skipped };
}
