// Segments file in, logits file out: one record per segment, validated
// against the wire schema before writing.

import {
  LogitsRecord,
  SegmentRecord,
  packedLength,
  readSegments,
  validateLogits,
  writeLogits,
} from "./formats.js";
import { ScoringBackend } from "./backends.js";

export interface ExportConfig {
  backend: ScoringBackend;
  batchSize: number;
  warn?: (message: string) => void;
}

export interface ExportResult {
  written: number;
  skipped: number;
}

function round6(xs: number[]): number[] {
  return xs.map((x) => Math.round(x * 1e6) / 1e6);
}

export async function exportLogits(
  segmentsPath: string,
  outPath: string,
  cfg: ExportConfig
): Promise<ExportResult> {
  const warn = cfg.warn ?? ((message: string) => console.error(message));
  const segments = readSegments(segmentsPath);
  const records: LogitsRecord[] = [];
  let skipped = 0;

  for (let i = 0; i < segments.length; i += cfg.batchSize) {
    const batch = segments.slice(i, i + cfg.batchSize);
    let scores;
    try {
      scores = await cfg.backend.scoreBatch(batch);
    } catch (err) {
      // fall back to per-segment scoring so one bad segment only skips itself
      scores = [];
      for (const seg of batch) {
        try {
          scores.push((await cfg.backend.scoreBatch([seg]))[0]);
        } catch (inner) {
          scores.push(null as never);
          warn(`skipping ${seg.segment_uid}: ${String(inner)}`);
        }
      }
    }
    batch.forEach((seg: SegmentRecord, j: number) => {
      const score = scores[j];
      if (!score) {
        skipped += 1;
        return;
      }
      const record: LogitsRecord = {
        segment_uid: seg.segment_uid,
        qid: seg.qid,
        start_logits: round6(score.start),
        end_logits: round6(score.end),
        abstain_index: 0,
      };
      const problems = validateLogits(record, packedLength(seg));
      if (problems.length > 0) {
        skipped += 1;
        warn(`skipping ${seg.segment_uid}: ${problems.join("; ")}`);
        return;
      }
      records.push(record);
    });
  }

  writeLogits(records, outPath);
  return { written: records.length, skipped };
}
