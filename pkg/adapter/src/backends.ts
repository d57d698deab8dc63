// Scoring backends. Each produces start/end logits at packed-token
// granularity for one segment: position 0 is the abstain sentinel,
// then question tokens, a separator, the context window, a separator.

import { SegmentRecord, contextOffset, packedLength } from "./formats.js";

export interface SegmentScores {
  start: number[];
  end: number[];
}

export interface ScoringBackend {
  readonly name: string;
  scoreBatch(segments: SegmentRecord[]): Promise<SegmentScores[]>;
}

const FLOOR = -30.0; // non-candidate positions (sentinel, question, separators)

const STOPWORDS = new Set(
  (
    "a an the of in on at to for with by from as is are was were be been being " +
    "do does did what which who whom whose when where why how and or but not no " +
    "it its this that these those his her their our your my he she they we you i"
  ).split(" ")
);

const PUNCT = /^[^\p{L}\p{N}]+$/u;

function fold(text: string): string {
  return text.toLowerCase();
}

/**
 * Deterministic lexical scorer, fully offline. A context token scores by
 * how many question content words sit within four positions of it
 * (closer neighbors weigh more), and is penalized for being a question
 * word, stopword, or punctuation itself — answers tend to sit next to
 * the question's words without repeating them. No randomness: repeated
 * runs emit identical bytes.
 */
export class OverlapBackend implements ScoringBackend {
  readonly name = "overlap";

  async scoreBatch(segments: SegmentRecord[]): Promise<SegmentScores[]> {
    return segments.map((seg) => this.scoreSegment(seg));
  }

  scoreSegment(seg: SegmentRecord): SegmentScores {
    const packed = packedLength(seg);
    const offset = contextOffset(seg);
    const start = new Array<number>(packed).fill(FLOOR);
    const end = new Array<number>(packed).fill(FLOOR);

    const questionWords = new Set(
      seg.question_tokens
        .map(([text]) => fold(text))
        .filter((w) => !STOPWORDS.has(w) && !PUNCT.test(w))
    );
    const tokens = seg.context_window_tokens.map(([text]) => fold(text));
    const match = tokens.map((t) => (questionWords.has(t) ? 1 : 0));

    for (let i = 0; i < tokens.length; i++) {
      let neighborhood = 0;
      for (let d = 1; d <= 4; d++) {
        if (i - d >= 0) neighborhood += match[i - d] / (1 + d);
        if (i + d < tokens.length) neighborhood += match[i + d] / (1 + d);
      }
      let score = 2 * neighborhood;
      if (match[i] === 1) score -= 6; // don't echo the question
      if (STOPWORDS.has(tokens[i])) score -= 3;
      if (PUNCT.test(tokens[i])) score -= 3;
      start[offset + i] = score;
      end[offset + i] = score;
    }
    return { start, end };
  }
}

/**
 * Stock extractive QA model via transformers.js. Loaded lazily: the
 * dependency is optional and model weights are fetched (or read from
 * the local cache) on first use. Question and window tokens are
 * sub-tokenized one packed token at a time so every model logit can be
 * pooled back (max over sub-tokens) to its packed position.
 */
const TRANSFORMERS_MODULE = "@xenova/transformers"; // resolved only at runtime

export class TransformersBackend implements ScoringBackend {
  readonly name = "transformers";
  private lib: any;
  private tokenizer: any;
  private model: any;

  constructor(
    private readonly modelId: string,
    private readonly batchSize: number,
  ) {}

  private async load(): Promise<void> {
    if (this.model) return;
    try {
      this.lib = await import(TRANSFORMERS_MODULE);
    } catch (err) {
      throw new Error(
        "the transformers backend needs the optional dependency " +
          `${TRANSFORMERS_MODULE} (npm install ${TRANSFORMERS_MODULE}): ${String(err)}`
      );
    }
    this.tokenizer = await this.lib.AutoTokenizer.from_pretrained(this.modelId);
    this.model = await this.lib.AutoModelForQuestionAnswering.from_pretrained(this.modelId, {
      quantized: true,
    });
  }

  async scoreBatch(segments: SegmentRecord[]): Promise<SegmentScores[]> {
    await this.load();
    const out: SegmentScores[] = [];
    for (let i = 0; i < segments.length; i += this.batchSize) {
      for (const seg of segments.slice(i, i + this.batchSize)) {
        out.push(await this.scoreSegment(seg));
      }
    }
    return out;
  }

  private subTokenIds(text: string): number[] {
    const encoded = this.tokenizer(text, { add_special_tokens: false });
    return Array.from(encoded.input_ids.data as BigInt64Array, (x: bigint) => Number(x));
  }

  private async scoreSegment(seg: SegmentRecord): Promise<SegmentScores> {
    const packed = packedLength(seg);
    const offset = contextOffset(seg);
    const clsId = Number(this.tokenizer.cls_token_id);
    const sepId = Number(this.tokenizer.sep_token_id);

    // packed position -> model sub-token positions
    const ids: number[] = [clsId];
    const owner: number[] = [0]; // packed position owning each sub-token
    const push = (packedPos: number, text: string) => {
      for (const id of this.subTokenIds(text)) {
        ids.push(id);
        owner.push(packedPos);
      }
    };
    seg.question_tokens.forEach(([text], i) => push(1 + i, text));
    ids.push(sepId);
    owner.push(offset - 1);
    seg.context_window_tokens.forEach(([text], i) => push(offset + i, text));
    ids.push(sepId);
    owner.push(packed - 1);

    const inputIds = new this.lib.Tensor("int64", BigInt64Array.from(ids.map(BigInt)), [1, ids.length]);
    const attention = new this.lib.Tensor("int64", BigInt64Array.from(ids.map(() => 1n)), [1, ids.length]);
    const output = await this.model({ input_ids: inputIds, attention_mask: attention });

    const startRaw = Array.from(output.start_logits.data as Float32Array);
    const endRaw = Array.from(output.end_logits.data as Float32Array);
    const start = new Array<number>(packed).fill(FLOOR);
    const end = new Array<number>(packed).fill(FLOOR);
    // sub-token scores max-pool back to packed granularity
    for (let pos = 0; pos < ids.length; pos++) {
      const packedPos = owner[pos];
      start[packedPos] = Math.max(start[packedPos], startRaw[pos]);
      end[packedPos] = Math.max(end[packedPos], endRaw[pos]);
    }
    start[0] = startRaw[0]; // sentinel keeps the [CLS] logit
    end[0] = endRaw[0];
    return { start, end };
  }
}

export function makeBackend(name: string, modelId: string, batchSize: number): ScoringBackend {
  if (name === "overlap") return new OverlapBackend();
  if (name === "transformers") return new TransformersBackend(modelId, batchSize);
  throw new Error(`unknown backend ${name} (expected overlap or transformers)`);
}
