/** Delivery accounting aggregated over a batch of policy runs. */

import type { BlockManifest } from "./manifest.js";
import type { MaskRecord, PolicyName } from "./policies.js";

export interface TransmissionStats {
  format: string;
  format_version: number;
  policy_id: PolicyName | null;
  seed: number | null;
  samples: number;
  blocks_offered: number;
  blocks_delivered: number;
  total_transmissions: number;
  delivery_rate_by_importance: Record<string, number>;
  skipped: string[];
}

export function aggregateStats(
  pairs: Array<{ manifest: BlockManifest; record: MaskRecord }>,
  skipped: string[],
): TransmissionStats {
  let offered = 0;
  let delivered = 0;
  let transmissions = 0;
  const perLevel: Record<string, { offered: number; delivered: number }> = {};
  let policyId: PolicyName | null = null;
  let seed: number | null = null;
  for (const { manifest, record } of pairs) {
    policyId = record.policyId;
    seed = record.seed;
    offered += manifest.k;
    for (const block of manifest.blocks) {
      const level = String(block.importanceLevel);
      const cell = (perLevel[level] ??= { offered: 0, delivered: 0 });
      cell.offered += 1;
      if (record.bits[block.index - 1]) {
        cell.delivered += 1;
        delivered += 1;
      }
      transmissions += record.attempts[block.index - 1]!;
    }
  }
  const rates: Record<string, number> = {};
  for (const level of Object.keys(perLevel).sort((a, b) => Number(a) - Number(b))) {
    const cell = perLevel[level]!;
    rates[level] = cell.offered ? cell.delivered / cell.offered : 0;
  }
  return {
    format: "jscckit-transmission-stats",
    format_version: 1,
    policy_id: policyId,
    seed,
    samples: pairs.length,
    blocks_offered: offered,
    blocks_delivered: delivered,
    total_transmissions: transmissions,
    delivery_rate_by_importance: rates,
    skipped: [...skipped].sort(),
  };
}
