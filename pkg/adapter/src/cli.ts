#!/usr/bin/env node
// qa-logits export --segments s.jsonl --out logits.jsonl
//   [--backend overlap|transformers] [--model ID] [--batch-size N] [--device cpu]

import { makeBackend } from "./backends.js";
import { exportLogits } from "./export.js";

const DEFAULT_MODEL = "Xenova/distilbert-base-cased-distilled-squad";

interface Args {
  segments: string;
  out: string;
  backend: string;
  model: string;
  batchSize: number;
  device: string;
}

function usage(): never {
  console.error(
    "usage: qa-logits export --segments <segments.jsonl[.gz]> --out <logits.jsonl>\n" +
      "  --backend overlap|transformers   scoring backend (default overlap)\n" +
      `  --model <id>                     model for the transformers backend (default ${DEFAULT_MODEL})\n` +
      "  --batch-size <n>                 segments per scoring batch (default 8)\n" +
      "  --device cpu                     inference device (cpu only)"
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Args {
  if (argv[0] !== "export") usage();
  const args: Args = {
    segments: "",
    out: "",
    backend: "overlap",
    model: DEFAULT_MODEL,
    batchSize: 8,
    device: "cpu",
  };
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) usage();
    switch (key) {
      case "--segments":
        args.segments = value;
        break;
      case "--out":
        args.out = value;
        break;
      case "--backend":
        args.backend = value;
        break;
      case "--model":
        args.model = value;
        break;
      case "--batch-size":
        args.batchSize = Number(value);
        break;
      case "--device":
        args.device = value;
        break;
      default:
        usage();
    }
  }
  if (!args.segments || !args.out) usage();
  if (!Number.isInteger(args.batchSize) || args.batchSize < 1) usage();
  if (args.device !== "cpu") {
    console.error(`unsupported device ${args.device}; only cpu is available`);
    process.exit(2);
  }
  return args;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const backend = makeBackend(args.backend, args.model, args.batchSize);
  const result = await exportLogits(args.segments, args.out, {
    backend,
    batchSize: args.batchSize,
  });
  console.error(
    `wrote ${result.written} logits records to ${args.out}` +
      (result.skipped ? ` (${result.skipped} skipped)` : "")
  );
}

main().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
