/**
 * GGFS binary writer (and a reader used by the tests).
 *
 * Version 1 layout, all integers little-endian:
 *   "GGFS", u32 version=1, u32 dim, u32 class count C, u64 record count R,
 *   C x (u16 length + UTF-8 class name), u16 length + UTF-8 provenance,
 *   R x (u64 record_id, u32 class_index, u16 patch count M,
 *        (1+M)*dim float32: totality first, then patches).
 */

export interface GgfsRecord {
  recordId: number;
  classIndex: number;
  totality: Float32Array;
  patches: Float32Array[];
}

export interface GgfsDataset {
  dim: number;
  classNames: string[];
  provenance: string;
  records: GgfsRecord[];
}

const MAGIC = "GGFS";
const VERSION = 1;

export function encodeGgfs(dataset: GgfsDataset): Buffer {
  const chunks: Buffer[] = [];
  const head = Buffer.alloc(24);
  head.write(MAGIC, 0, "ascii");
  head.writeUInt32LE(VERSION, 4);
  head.writeUInt32LE(dataset.dim, 8);
  head.writeUInt32LE(dataset.classNames.length, 12);
  head.writeBigUInt64LE(BigInt(dataset.records.length), 16);
  chunks.push(head);

  const pushString = (text: string) => {
    const raw = Buffer.from(text, "utf-8");
    if (raw.length > 0xffff) throw new RangeError(`string too long (${raw.length} bytes)`);
    const len = Buffer.alloc(2);
    len.writeUInt16LE(raw.length, 0);
    chunks.push(len, raw);
  };
  for (const name of dataset.classNames) pushString(name);
  pushString(dataset.provenance);

  for (const rec of dataset.records) {
    if (rec.totality.length !== dataset.dim) {
      throw new RangeError(`record ${rec.recordId}: totality has ${rec.totality.length} dims`);
    }
    const header = Buffer.alloc(14);
    header.writeBigUInt64LE(BigInt(rec.recordId), 0);
    header.writeUInt32LE(rec.classIndex, 8);
    header.writeUInt16LE(rec.patches.length, 12);
    chunks.push(header);
    const payload = Buffer.alloc(4 * dataset.dim * (1 + rec.patches.length));
    let off = 0;
    for (const vec of [rec.totality, ...rec.patches]) {
      if (vec.length !== dataset.dim) {
        throw new RangeError(`record ${rec.recordId}: patch has ${vec.length} dims`);
      }
      for (const v of vec) {
        if (!Number.isFinite(v)) {
          throw new RangeError(`record ${rec.recordId}: non-finite embedding value`);
        }
        payload.writeFloatLE(v, off);
        off += 4;
      }
    }
    chunks.push(payload);
  }
  return Buffer.concat(chunks);
}

export function decodeGgfs(buffer: Buffer): GgfsDataset {
  let pos = 0;
  const need = (n: number, what: string) => {
    if (pos + n > buffer.length) throw new RangeError(`truncated while reading ${what} at ${pos}`);
  };
  need(24, "header");
  if (buffer.toString("ascii", 0, 4) !== MAGIC) throw new RangeError("bad magic");
  if (buffer.readUInt32LE(4) !== VERSION) throw new RangeError("unsupported version");
  const dim = buffer.readUInt32LE(8);
  const nClasses = buffer.readUInt32LE(12);
  const nRecords = Number(buffer.readBigUInt64LE(16));
  pos = 24;

  const readString = (what: string): string => {
    need(2, what);
    const len = buffer.readUInt16LE(pos);
    pos += 2;
    need(len, what);
    const text = buffer.toString("utf-8", pos, pos + len);
    pos += len;
    return text;
  };
  const classNames = Array.from({ length: nClasses }, (_, i) => readString(`class ${i}`));
  const provenance = readString("provenance");

  const records: GgfsRecord[] = [];
  for (let r = 0; r < nRecords; r++) {
    need(14, `record ${r} header`);
    const recordId = Number(buffer.readBigUInt64LE(pos));
    const classIndex = buffer.readUInt32LE(pos + 8);
    const m = buffer.readUInt16LE(pos + 12);
    pos += 14;
    need(4 * dim * (1 + m), `record ${recordId} payload`);
    const vectors: Float32Array[] = [];
    for (let v = 0; v < 1 + m; v++) {
      const vec = new Float32Array(dim);
      for (let d = 0; d < dim; d++) {
        vec[d] = buffer.readFloatLE(pos);
        pos += 4;
      }
      vectors.push(vec);
    }
    records.push({ recordId, classIndex, totality: vectors[0], patches: vectors.slice(1) });
  }
  if (pos !== buffer.length) throw new RangeError(`${buffer.length - pos} trailing bytes`);
  return { dim, classNames, provenance, records };
}
