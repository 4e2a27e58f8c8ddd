#!/usr/bin/env node
/**
 * netsim --policy <name> --config <file> --in <dir> --out <dir> [--seed <n>]
 *
 * Reads block-manifest headers from --in, applies the policy, writes one
 * mask record per sample plus a stats summary to --out.  Exit code 0 on
 * full success, 2 when some manifests were skipped.
 */

import { readFileSync, realpathSync } from "node:fs";
import { exit } from "node:process";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { batchRun } from "./batch.js";
import { ConfigError, ManifestError } from "./manifest.js";
import { parsePolicyConfig, type PolicyName } from "./policies.js";

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      policy: { type: "string" },
      config: { type: "string" },
      in: { type: "string" },
      out: { type: "string" },
      seed: { type: "string" },
    },
  });
  const missing = ["policy", "config", "in", "out"].filter(
    (k) => (values as Record<string, unknown>)[k] === undefined,
  );
  if (missing.length) {
    console.error(`missing required flags: ${missing.map((m) => `--${m}`).join(", ")}`);
    return 1;
  }
  const cfg = parsePolicyConfig(readFileSync(values.config!, "utf8"), values.config!);
  cfg.policy = values.policy as PolicyName;
  if (values.seed !== undefined) {
    const seed = Number(values.seed);
    if (!Number.isInteger(seed)) {
      console.error(`--seed must be an integer, got ${values.seed}`);
      return 1;
    }
    cfg.seed = seed;
  }
  const result = batchRun(values.in!, cfg, values.out!);
  console.log(
    `processed ${result.records.length} manifests ` +
      `(${result.stats.blocks_delivered}/${result.stats.blocks_offered} blocks delivered, ` +
      `${result.stats.total_transmissions} transmissions)` +
      (result.skipped.length ? `, skipped ${result.skipped.length}` : ""),
  );
  return result.skipped.length > 0 ? 2 : 0;
}

function invokedDirectly(): boolean {
  if (!process.argv[1]) {
    return false;
  }
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  try {
    exit(main(process.argv.slice(2)));
  } catch (err) {
    if (err instanceof ConfigError || err instanceof ManifestError) {
      console.error(`error: ${err.message}`);
      exit(1);
    }
    throw err;
  }
}
