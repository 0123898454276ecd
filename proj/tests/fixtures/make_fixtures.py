#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the synthetic mock-endpoint fixtures from crt_items.jsonl.

The values are synthetic: "oldcrt" questions get near-zero log-probabilities
(a model that knows them by heart), "newcrt" questions get surprising ones.
Completions are arranged so the fixture run exercises all four combinations
of question-based and answer-based verdicts.

Outputs (all deterministic):
  mock_responses.json   prompt -> echo tokens/logprobs and completions
  crt_dump.jsonl        the same log-probabilities as an offline dump
  crt_completions.jsonl the same completions as an offline dump
"""

import json
import random
import re
from pathlib import Path

HERE = Path(__file__).resolve().parent
MODEL = "fixture-model"
NUM_SAMPLES = 50

# Items whose sampled answers collapse onto the greedy answer.
PEAKED = {"oldcrt-1", "oldcrt-2", "oldcrt-3", "oldcrt-4", "oldcrt-5", "newcrt-1", "newcrt-2"}


def tokenize(text):
    tokens = re.findall(r"\s*\S+", text)
    assert "".join(tokens) == text
    return tokens


def logprobs_for(item, rng, n):
    if item["split"] == "oldcrt":
        values = [round(-rng.uniform(0.005, 0.06), 6) for _ in range(n - 1)]
    else:
        values = [round(-rng.uniform(0.5, 4.0), 6) for _ in range(n - 1)]
    return [None] + values


def completions_for(item, rng):
    greedy = "Answer for " + item["id"]
    if item["id"] in PEAKED:
        samples = [greedy] * NUM_SAMPLES
    else:
        samples = []
        for _ in range(NUM_SAMPLES):
            k = rng.randint(8, 20)
            samples.append("".join(rng.choice("abcdefghijklmnopqrstuvwxyz ") for _ in range(k)))
    return greedy, samples


def main():
    rng = random.Random(20240901)
    items = [json.loads(line) for line in (HERE / "crt_items.jsonl").read_text("utf-8").splitlines() if line]
    responses = {"model": MODEL, "prompts": {}}
    dump_lines, completion_lines = [], []
    for item in items:
        tokens = tokenize(item["question"])
        lps = logprobs_for(item, rng, len(tokens))
        greedy, samples = completions_for(item, rng)
        responses["prompts"][item["question"]] = {
            "tokens": tokens,
            "token_logprobs": lps,
            "greedy": greedy,
            "samples": samples,
        }
        dump_lines.append(json.dumps({"id": item["id"], "model": MODEL, "tokens": tokens, "logprobs": lps},
                                     ensure_ascii=False, sort_keys=True))
        completion_lines.append(json.dumps({"id": item["id"], "model": MODEL, "greedy": greedy, "samples": samples},
                                           ensure_ascii=False, sort_keys=True))

    (HERE / "mock_responses.json").write_text(
        json.dumps(responses, ensure_ascii=False, indent=1, sort_keys=True) + "\n", "utf-8")
    (HERE / "crt_dump.jsonl").write_text("\n".join(dump_lines) + "\n", "utf-8")
    (HERE / "crt_completions.jsonl").write_text("\n".join(completion_lines) + "\n", "utf-8")


if __name__ == "__main__":
    main()
