// Wire formats shared with the Python toolkit: segments in, logits out.
// Both are JSONL, optionally gzipped (sniffed by magic bytes).

import * as fs from "node:fs";
import * as zlib from "node:zlib";

export type TokenPair = [string, number]; // [text, char offset]

export interface SegmentRecord {
  segment_uid: string;
  example_uid: string;
  qid: string;
  dataset: string;
  window_index: number;
  window_token_start: number;
  window_token_end: number;
  label_kind: "span" | "no_answer";
  label_start: number;
  label_end: number;
  question_tokens: TokenPair[];
  context_window_tokens: TokenPair[];
  window_text: string;
  window_char_start: number;
}

export interface LogitsRecord {
  segment_uid: string;
  qid: string;
  start_logits: number[];
  end_logits: number[];
  abstain_index: number;
}

const SPECIAL_BUDGET = 3; // sentinel + two separators in the packed layout

export function packedLength(seg: SegmentRecord): number {
  return (
    seg.question_tokens.length +
    (seg.window_token_end - seg.window_token_start) +
    SPECIAL_BUDGET
  );
}

export function contextOffset(seg: SegmentRecord): number {
  return seg.question_tokens.length + 2;
}

export function readJsonl(path: string): string[] {
  let buf = fs.readFileSync(path);
  if (buf.length >= 2 && buf[0] === 0x1f && buf[1] === 0x8b) {
    buf = zlib.gunzipSync(buf);
  }
  return buf
    .toString("utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0);
}

export function readSegments(path: string): SegmentRecord[] {
  return readJsonl(path).map((line, i) => {
    const record = JSON.parse(line) as SegmentRecord;
    for (const field of [
      "segment_uid",
      "qid",
      "window_token_start",
      "window_token_end",
      "question_tokens",
      "context_window_tokens",
    ]) {
      if (!(field in record)) {
        throw new Error(`${path}:${i + 1}: segment record missing ${field}`);
      }
    }
    const chunk = record.window_token_end - record.window_token_start;
    if (record.context_window_tokens.length !== chunk) {
      throw new Error(
        `${path}:${i + 1}: segment ${record.segment_uid} carries ` +
          `${record.context_window_tokens.length} tokens for a ${chunk}-token window`
      );
    }
    return record;
  });
}

export function validateLogits(rec: LogitsRecord, expectedLength: number): string[] {
  const problems: string[] = [];
  if (rec.start_logits.length !== expectedLength) {
    problems.push(`start_logits length ${rec.start_logits.length} != packed ${expectedLength}`);
  }
  if (rec.end_logits.length !== expectedLength) {
    problems.push(`end_logits length ${rec.end_logits.length} != packed ${expectedLength}`);
  }
  if (rec.abstain_index !== 0) {
    problems.push(`abstain_index must be 0, got ${rec.abstain_index}`);
  }
  for (const list of [rec.start_logits, rec.end_logits]) {
    if (!list.every((x) => Number.isFinite(x))) {
      problems.push("logits contain non-finite values");
      break;
    }
  }
  return problems;
}

export function writeLogits(records: LogitsRecord[], path: string): void {
  const text = records.map((r) => JSON.stringify(r)).join("\n") + (records.length ? "\n" : "");
  fs.writeFileSync(path, text, "utf-8");
}
