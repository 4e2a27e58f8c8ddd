import type { BlockEntry, BlockManifest } from "../src/manifest.js";

/** Fabricate a manifest header object; payload metadata is arbitrary. */
export function makeManifest(
  sampleId: string,
  k = 8,
  importance?: number[],
): BlockManifest {
  const blockLen = 2 * 8 * 8;
  const blocks: BlockEntry[] = [];
  for (let i = 1; i <= k; i += 1) {
    blocks.push({
      index: i,
      importanceLevel: importance ? importance[i - 1]! : i,
      payloadOffset: (i - 1) * blockLen,
      payloadLength: blockLen,
      checksum: 0,
    });
  }
  return {
    sampleId,
    k,
    blockDims: [2, 8, 8],
    blocks,
    payloadFile: `${sampleId}.payload.bin`,
    profileHint: null,
  };
}

export function manifestHeaderJson(manifest: BlockManifest): string {
  return JSON.stringify(
    {
      format: "jscckit-block-manifest",
      format_version: 1,
      sample_id: manifest.sampleId,
      k: manifest.k,
      block_dims: manifest.blockDims,
      payload_file: manifest.payloadFile,
      profile_hint: manifest.profileHint,
      blocks: manifest.blocks.map((b) => ({
        index: b.index,
        importance_level: b.importanceLevel,
        payload_offset: b.payloadOffset,
        payload_length: b.payloadLength,
        checksum: b.checksum,
      })),
    },
    null,
    2,
  );
}
