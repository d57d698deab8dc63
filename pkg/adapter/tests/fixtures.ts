// Synthetic SQuAD-style examples in the dataset wire format. Contexts
// follow "The <relation> of <subject> is <answer> ." so a lexical
// scorer can find the answer next to the question's content words.

import * as fs from "node:fs";
import * as zlib from "node:zlib";

export interface Fixture {
  qid: string;
  context: string;
  question: string;
  answer: string;
}

const TRIPLES: Array<[string, string, string]> = [
  ["capital", "France", "Paris"],
  ["capital", "Japan", "Tokyo"],
  ["currency", "Brazil", "real"],
  ["author", "Hamlet", "Shakespeare"],
  ["inventor", "dynamite", "Nobel"],
  ["composer", "Requiem", "Mozart"],
  ["director", "Jaws", "Spielberg"],
  ["founder", "Microsoft", "Gates"],
  ["discoverer", "radium", "Curie"],
  ["architect", "Fallingwater", "Wright"],
  ["painter", "Guernica", "Picasso"],
  ["sculptor", "David", "Michelangelo"],
  ["longest", "river", "Nile"],
  ["tallest", "mountain", "Everest"],
  ["largest", "ocean", "Pacific"],
  ["fastest", "animal", "cheetah"],
  ["brightest", "star", "Sirius"],
  ["hardest", "mineral", "diamond"],
  ["smallest", "planet", "Mercury"],
];

const FILLER =
  "Several unrelated sentences pad this passage considerably . " +
  "Nothing here mentions anything relevant whatsoever . " +
  "More padding words occupy additional space today .";

export function makeFixtures(): Fixture[] {
  const fixtures: Fixture[] = TRIPLES.map(([relation, subject, answer], i) => {
    const fact = `The ${relation} of ${subject} is ${answer} .`;
    // every third context is long enough to need several windows
    const padding = i % 3 === 0 ? `${FILLER} ${FILLER} ${FILLER} ` : `${FILLER} `;
    return {
      qid: `fx${i}`,
      context: `${padding}${fact} ${FILLER}`,
      question: `What is the ${relation} of ${subject} ?`,
      answer,
    };
  });
  // a fabricated one-token context: the best span can only be that token
  fixtures.push({
    qid: "fx-single",
    context: "42",
    question: "What number ?",
    answer: "42",
  });
  return fixtures;
}

function tokenize(text: string): Array<[string, number]> {
  const tokens: Array<[string, number]> = [];
  const re = /\S+/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(text)) !== null) {
    tokens.push([m[0], m.index]);
  }
  return tokens;
}

export function writeDatasetFile(fixtures: Fixture[], path: string, dataset = "synthdev"): void {
  const lines = [JSON.stringify({ header: { dataset } })];
  for (const fx of fixtures) {
    const tokens = tokenize(fx.context);
    const tokenIndex = tokens.findIndex(([text]) => text === fx.answer);
    if (tokenIndex < 0) throw new Error(`answer ${fx.answer} not in context for ${fx.qid}`);
    const charStart = tokens[tokenIndex][1];
    const charEnd = charStart + fx.answer.length - 1;
    lines.push(
      JSON.stringify({
        context: fx.context,
        context_tokens: tokens,
        qas: [
          {
            qid: fx.qid,
            question: fx.question,
            question_tokens: tokenize(fx.question),
            detected_answers: [
              {
                text: fx.answer,
                char_spans: [[charStart, charEnd]],
                token_spans: [[tokenIndex, tokenIndex]],
              },
            ],
            answers: [fx.answer],
          },
        ],
      })
    );
  }
  const body = lines.join("\n") + "\n";
  if (path.endsWith(".gz")) {
    fs.writeFileSync(path, zlib.gzipSync(Buffer.from(body, "utf-8")));
  } else {
    fs.writeFileSync(path, body, "utf-8");
  }
}
