import { describe, expect, test } from "vitest";

import { ConfigError } from "../src/manifest.js";
import {
  runCongestion,
  runRandomSubset,
  runSelectiveRetx,
  runUep,
  type PolicyConfig,
} from "../src/policies.js";
import { makeManifest } from "./helpers.js";

const TRIALS = 10_000;

function uepCfg(map: Record<string, number>, seed = 1): PolicyConfig {
  return { policy: "uep", seed, uepMap: map };
}

describe("uep", () => {
  test("zero-probability map delivers everything", () => {
    const map = Object.fromEntries(Array.from({ length: 8 }, (_, i) => [String(i + 1), 0]));
    const rec = runUep(makeManifest("s"), uepCfg(map));
    expect(rec.bits).toEqual(Array(8).fill(true));
    expect(rec.attempts).toEqual(Array(8).fill(1));
  });

  test("uncovered importance level is a config error", () => {
    expect(() => runUep(makeManifest("s"), uepCfg({ "1": 0.1 }))).toThrow(ConfigError);
  });

  test("delivery rate matches 1 - eps within 3 sigma", () => {
    // eps = 0.2 for every level: expect 0.8 +- 0.012 over 10^4 runs
    const map = Object.fromEntries(Array.from({ length: 8 }, (_, i) => [String(i + 1), 0.2]));
    const delivered = Array(8).fill(0);
    for (let t = 0; t < TRIALS; t += 1) {
      const rec = runUep(makeManifest(`u-${t}`), uepCfg(map, 7));
      rec.bits.forEach((b, i) => {
        if (b) delivered[i] += 1;
      });
    }
    for (const count of delivered) {
      expect(Math.abs(count / TRIALS - 0.8)).toBeLessThanOrEqual(0.012);
    }
  });

  test("masks depend on block index, not on how many blocks exist", () => {
    const full = Object.fromEntries(Array.from({ length: 8 }, (_, i) => [String(i + 1), 0.5]));
    const a = runUep(makeManifest("same"), uepCfg(full, 3));
    const b = runUep(makeManifest("same", 3), uepCfg(full, 3));
    expect(a.bits.slice(0, 3)).toEqual(b.bits);
  });
});

describe("congestion", () => {
  test("full budget and zero residual deliver everything", () => {
    const rec = runCongestion(makeManifest("s"), {
      policy: "congestion",
      seed: 1,
      congestionKeep: 8,
      congestionResidualEps: 0,
    });
    expect(rec.bits).toEqual(Array(8).fill(true));
  });

  test("keeps exactly the m most important blocks when residual is zero", () => {
    const rec = runCongestion(makeManifest("s"), {
      policy: "congestion",
      seed: 1,
      congestionKeep: 5,
      congestionResidualEps: 0,
    });
    expect(rec.bits).toEqual([true, true, true, true, true, false, false, false]);
    expect(rec.attempts).toEqual([1, 1, 1, 1, 1, 0, 0, 0]);
  });

  test("importance ranking decides survival, not position", () => {
    // reversed importance: the last blocks are the most important ones
    const manifest = makeManifest("s", 8, [8, 7, 6, 5, 4, 3, 2, 1]);
    const rec = runCongestion(manifest, {
      policy: "congestion",
      seed: 1,
      congestionKeep: 3,
      congestionResidualEps: 0,
    });
    expect(rec.bits).toEqual([false, false, false, false, false, true, true, true]);
  });

  test("mean delivered under residual erasure matches 8 * 0.9 within 0.08", () => {
    let total = 0;
    for (let t = 0; t < TRIALS; t += 1) {
      const rec = runCongestion(makeManifest(`c-${t}`), {
        policy: "congestion",
        seed: 7,
        congestionKeep: 8,
        congestionResidualEps: 0.1,
      });
      total += rec.bits.filter(Boolean).length;
    }
    expect(Math.abs(total / TRIALS - 7.2)).toBeLessThanOrEqual(0.08);
  });
});

describe("random_subset", () => {
  test("extremes", () => {
    const all = runRandomSubset(makeManifest("s"), {
      policy: "random_subset",
      seed: 1,
      subsetErase: 0,
    });
    expect(all.bits).toEqual(Array(8).fill(true));
    const none = runRandomSubset(makeManifest("s"), {
      policy: "random_subset",
      seed: 1,
      subsetErase: 8,
    });
    expect(none.bits).toEqual(Array(8).fill(false));
  });

  test("drops exactly E blocks with zero attempts", () => {
    for (let e = 0; e <= 8; e += 1) {
      const rec = runRandomSubset(makeManifest(`e-${e}`), {
        policy: "random_subset",
        seed: 3,
        subsetErase: e,
      });
      expect(rec.bits.filter((b) => !b).length).toBe(e);
      rec.bits.forEach((b, i) => expect(rec.attempts[i]).toBe(b ? 1 : 0));
    }
  });

  test("subsets are uniform over all 56 three-element choices", () => {
    const counts = new Map<string, number>();
    for (let t = 0; t < 56_000; t += 1) {
      const rec = runRandomSubset(makeManifest(`u-${t}`), {
        policy: "random_subset",
        seed: 9,
        subsetErase: 3,
      });
      const key = rec.bits.map((b) => (b ? "1" : "0")).join("");
      counts.set(key, (counts.get(key) ?? 0) + 1);
    }
    expect(counts.size).toBe(56);
    for (const c of counts.values()) {
      expect(c).toBeGreaterThanOrEqual(880);
      expect(c).toBeLessThanOrEqual(1120);
    }
  });
});

describe("selective_retx", () => {
  const retxCfg = (eps: number, threshold: number, maxRetx: number, seed = 1): PolicyConfig => ({
    policy: "selective_retx",
    seed,
    retx: { eps, importanceThreshold: threshold, maxRetx },
  });

  test("zero retransmissions reduce to the plain i.i.d. channel", () => {
    let delivered = 0;
    for (let t = 0; t < TRIALS; t += 1) {
      const rec = runSelectiveRetx(makeManifest(`r-${t}`, 1), retxCfg(0.5, 0, 0, 5));
      if (rec.bits[0]) delivered += 1;
      expect(rec.attempts[0]).toBe(1);
    }
    expect(Math.abs(delivered / TRIALS - 0.5)).toBeLessThanOrEqual(0.015);
  });

  test("protected blocks reach 1 - eps^(R+1)", () => {
    // eps = 0.5, R = 1, all blocks protected: delivery 0.75 +- 0.013
    let delivered = 0;
    let transmissions = 0;
    for (let t = 0; t < TRIALS; t += 1) {
      const rec = runSelectiveRetx(makeManifest(`p-${t}`, 1), retxCfg(0.5, 8, 1, 11));
      if (rec.bits[0]) delivered += 1;
      transmissions += rec.attempts[0]!;
      expect(rec.attempts[0]).toBeGreaterThanOrEqual(1);
      expect(rec.attempts[0]).toBeLessThanOrEqual(2);
    }
    expect(Math.abs(delivered / TRIALS - 0.75)).toBeLessThanOrEqual(0.013);
    // expected attempts per block: 1 + eps = 1.5
    expect(Math.abs(transmissions / TRIALS - 1.5)).toBeLessThanOrEqual(0.02);
  });

  test("threshold zero never retransmits", () => {
    let delivered = 0;
    for (let t = 0; t < TRIALS; t += 1) {
      const rec = runSelectiveRetx(makeManifest(`z-${t}`, 1), retxCfg(0.5, 0, 3, 13));
      if (rec.bits[0]) delivered += 1;
      expect(rec.attempts[0]).toBe(1);
    }
    expect(Math.abs(delivered / TRIALS - 0.5)).toBeLessThanOrEqual(0.015);
  });

  test("only levels at or below the threshold retry", () => {
    const manifest = makeManifest("mix", 8);
    const rec = runSelectiveRetx(manifest, retxCfg(1.0, 4, 2, 17));
    // eps = 1: every attempt fails; protected blocks burn all attempts
    expect(rec.bits).toEqual(Array(8).fill(false));
    expect(rec.attempts).toEqual([3, 3, 3, 3, 1, 1, 1, 1]);
  });
});
