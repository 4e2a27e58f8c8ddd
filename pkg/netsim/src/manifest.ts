/**
 * Block-manifest headers: the only codec artifact the simulator reads.
 * Payload files are deliberately never opened here; policies operate on
 * importance metadata alone.
 */

export class ManifestError extends Error {}
export class ConfigError extends Error {}

export interface BlockEntry {
  index: number; // 1-based position
  importanceLevel: number; // lower = more important
  payloadOffset: number;
  payloadLength: number;
  checksum: number;
}

export interface BlockManifest {
  sampleId: string;
  k: number;
  blockDims: [number, number, number];
  blocks: BlockEntry[];
  payloadFile: string;
  profileHint: number[] | null;
}

const MANIFEST_FORMAT = "jscckit-block-manifest";
const FORMAT_VERSION = 1;

function asInt(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    throw new ManifestError(`${what}: expected an integer, got ${JSON.stringify(value)}`);
  }
  return value;
}

export function parseManifestHeader(text: string, source: string): BlockManifest {
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(text) as Record<string, unknown>;
  } catch (err) {
    throw new ManifestError(`${source}: malformed manifest header (${String(err)})`);
  }
  if (doc["format"] !== MANIFEST_FORMAT) {
    throw new ManifestError(`${source}: not a block manifest`);
  }
  if (doc["format_version"] !== FORMAT_VERSION) {
    throw new ManifestError(
      `${source}: unsupported manifest version ${JSON.stringify(doc["format_version"])}`,
    );
  }
  const rawBlocks = doc["blocks"];
  if (!Array.isArray(rawBlocks)) {
    throw new ManifestError(`${source}: blocks must be an array`);
  }
  const blocks: BlockEntry[] = rawBlocks.map((b, i) => {
    const e = b as Record<string, unknown>;
    return {
      index: asInt(e["index"], `${source}: blocks[${i}].index`),
      importanceLevel: asInt(e["importance_level"], `${source}: blocks[${i}].importance_level`),
      payloadOffset: asInt(e["payload_offset"], `${source}: blocks[${i}].payload_offset`),
      payloadLength: asInt(e["payload_length"], `${source}: blocks[${i}].payload_length`),
      checksum: asInt(e["checksum"], `${source}: blocks[${i}].checksum`),
    };
  });
  const k = asInt(doc["k"], `${source}: k`);
  if (blocks.length !== k) {
    throw new ManifestError(`${source}: k=${k} but ${blocks.length} blocks`);
  }
  const indices = blocks.map((b) => b.index).sort((a, b) => a - b);
  for (let i = 0; i < k; i += 1) {
    if (indices[i] !== i + 1) {
      throw new ManifestError(`${source}: block indices must be exactly 1..${k}`);
    }
  }
  const dims = doc["block_dims"];
  if (!Array.isArray(dims) || dims.length !== 3) {
    throw new ManifestError(`${source}: block_dims must have three entries`);
  }
  blocks.sort((a, b) => a.index - b.index);
  return {
    sampleId: String(doc["sample_id"]),
    k,
    blockDims: [asInt(dims[0], "dims"), asInt(dims[1], "dims"), asInt(dims[2], "dims")],
    blocks,
    payloadFile: String(doc["payload_file"]),
    profileHint: Array.isArray(doc["profile_hint"])
      ? (doc["profile_hint"] as number[]).map(Number)
      : null,
  };
}
