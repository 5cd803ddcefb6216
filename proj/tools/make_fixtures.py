#!/usr/bin/env python3
"""Writes the small synthetic CSV fixtures used by the CLI and acceptance tests.

The tweets are invented. Each class has its own keyword pool so a small model
can separate them; shared filler words, mentions, hashtags, links and
elongated words exercise the normalizer.
"""
import csv
import random
import sys
from pathlib import Path

FILLER = ["the", "so", "just", "today", "this", "really", "people", "when", "all", "what"]
DECOR = ["@user1", "@someone", "#notsexist", "#mondaymood", "http://t.co/abc", "www.example.com",
         "soooo", "lol", ":)", "!!!", "123", "yeeeessss"]

DAVIDSON_WORDS = {
    0: ["vermin", "subhuman", "exterminate", "invaders", "filth"],
    1: ["bitch", "hoe", "trash", "stupid", "damn"],
    2: ["music", "coffee", "weekend", "football", "garden"],
}
WASEEM_WORDS = {
    "racism": ["islam", "muslims", "terrorists", "invasion", "religion"],
    "sexism": ["women", "girls", "kitchen", "feminazi", "females"],
    "none": ["music", "coffee", "weekend", "football", "garden"],
}


def tweet(rng, words):
    parts = rng.sample(words, 2) + rng.sample(FILLER, 2)
    rng.shuffle(parts)
    if rng.random() < 0.7:
        parts.insert(rng.randrange(len(parts) + 1), rng.choice(DECOR))
    text = " ".join(parts)
    if rng.random() < 0.3:
        text = text.capitalize()
    return text


def davidson(path, per_class, seed):
    rng = random.Random(seed)
    rows = []
    for code, words in DAVIDSON_WORDS.items():
        for _ in range(per_class[code]):
            votes = [0, 0, 0]
            votes[code] = 3
            rows.append([*votes, code, tweet(rng, words)])
    rng.shuffle(rows)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["", "count", "hate_speech", "offensive_language", "neither", "class", "tweet"])
        for i, (h, o, n, code, text) in enumerate(rows):
            w.writerow([i, 3, h, o, n, code, text])


def waseem(path, per_class, seed, with_both):
    rng = random.Random(seed)
    rows = []
    next_id = 5000
    for label, words in WASEEM_WORDS.items():
        for _ in range(per_class):
            rows.append([str(next_id), tweet(rng, words), label])
            next_id += 1
    if with_both:
        rows.append([str(next_id), tweet(rng, WASEEM_WORDS["racism"] + WASEEM_WORDS["sexism"]), "both"])
    rng.shuffle(rows)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "text", "label"])
        w.writerows(rows)


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("tests/fixtures")
    out.mkdir(parents=True, exist_ok=True)
    davidson(out / "davidson_small.csv", {0: 11, 1: 11, 2: 10}, seed=11)
    davidson(out / "davidson_medium.csv", {0: 20, 1: 40, 2: 20}, seed=12)
    waseem(out / "waseem_small.csv", 10, seed=13, with_both=True)


if __name__ == "__main__":
    main()
