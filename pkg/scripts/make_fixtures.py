#!/usr/bin/env python3
"""Regenerate the bundled fixtures deterministically.

Writes the 10-review toy corpus (5 products, each reviewed once at
rating 5 and once at rating 1, sharing one 32-dim feature per product),
the 3-record edge-case corpus for loader stats, and the two sentiment
lexicons.  Run from the repo root: python3 scripts/make_fixtures.py
"""

import json
from pathlib import Path

from reviewgen.numerics import RngState
from reviewgen.textdata import write_features

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
FEATURE_DIM = 32
SEED = 2024

REVIEWS = [
    ("cam-001", 5, "I love this camera. The pictures are sharp and the "
                   "battery lasts forever!"),
    ("cam-001", 1, "I hate this camera. The pictures are blurry and the "
                   "battery dies fast."),
    ("hp-002", 5, "These headphones sound amazing and feel great to wear."),
    ("hp-002", 1, "These headphones sound terrible and hurt my ears."),
    ("bl-003", 5, "Excellent blender, it crushes ice perfectly every time."),
    ("bl-003", 1, "Awful blender, it leaks and smells like burning plastic."),
    ("bp-004", 5, "Wonderful backpack with great pockets, totally worth "
                  "the price."),
    ("bp-004", 1, "Worthless backpack, the zipper broke on the first day."),
    ("lm-005", 5, "This lamp looks beautiful and the light is warm and "
                  "pleasant."),
    ("lm-005", 1, "This lamp flickers constantly and the switch feels "
                  "cheap."),
]

POSITIVE = ["amazing", "beautiful", "best", "excellent", "fantastic", "good",
            "great", "love", "nice", "perfectly", "pleasant", "sharp",
            "warm", "wonderful", "worth"]
NEGATIVE = ["awful", "bad", "blurry", "broke", "burning", "cheap", "dies",
            "flickers", "hate", "hurt", "leaks", "terrible", "worst",
            "worthless"]


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for pid, rating, review in rows:
            fh.write(json.dumps({"product_id": pid, "rating": rating,
                                 "review": review}) + "\n")


def main():
    FIXTURES.mkdir(exist_ok=True)
    rng = RngState(SEED)
    features = {}
    for pid, _, _ in REVIEWS:
        if pid not in features:
            features[pid] = rng.uniform(FEATURE_DIM, -1.0, 1.0)
    write_jsonl(FIXTURES / "reviews.jsonl", REVIEWS)
    write_features(FIXTURES / "features.bin", features)

    # Loader edge cases: one good record, one past the length cap, one
    # whose product has no feature.
    tiny = [
        ("t-1", 5, "Simple and good."),
        ("t-2", 3, "word " * 150),
        ("t-3", 1, "No feature for this one."),
    ]
    write_jsonl(FIXTURES / "tiny_reviews.jsonl", tiny)
    tiny_rng = RngState(SEED + 1)
    write_features(FIXTURES / "tiny_features.bin",
                   {"t-1": tiny_rng.uniform(FEATURE_DIM, -1.0, 1.0),
                    "t-2": tiny_rng.uniform(FEATURE_DIM, -1.0, 1.0)})

    (FIXTURES / "lexicon_pos.txt").write_text("\n".join(POSITIVE) + "\n",
                                              encoding="utf-8")
    (FIXTURES / "lexicon_neg.txt").write_text("\n".join(NEGATIVE) + "\n",
                                              encoding="utf-8")
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
