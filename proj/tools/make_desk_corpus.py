#!/usr/bin/env python3
"""Regenerates data/desk_corpus.csv, the synthetic corpus used by the end-to-end test.

Each hypothesis is a reference sentence damaged by three kinds of edits:
  - substitutions: a word replaced by another vocabulary word
  - splits: a space inserted inside a word, invisible to chrF (which drops
    whitespace) but a full token miss for BLEU
  - typos: one changed letter, a full token miss for BLEU but only a few
    character n-grams for chrF
Humans penalize substitutions and splits heavily and typos lightly, so BLEU
over-penalizes typos while chrF misses splits.
"""
import csv
import math
import random
import sys

WORDS = (
    "the a small large old new quick quiet bright dark red green river city house market road garden "
    "teacher doctor child farmer writer engineer walks reads builds opens finds carries watches follows "
    "near behind under across through beside yesterday today slowly carefully again together early late "
    "window letter bridge station morning evening story problem answer question music picture"
).split()

DATASETS = ["desk-a", "desk-b"]
SYSTEMS = ["sys1", "sys2", "sys3", "sys4"]
SEGMENTS = 25
# Mean edit counts per system: (substitutions, splits, typos).
PROFILES = {
    "sys1": (0.4, 0.6, 0.8),
    "sys2": (0.8, 0.4, 1.6),
    "sys3": (0.5, 1.6, 0.6),
    "sys4": (1.2, 1.0, 2.0),
}
W_SUB, W_SPLIT, W_TYPO = 12.0, 6.0, 1.0
SEED = 20240917


def poisson(rng, lam):
    # Knuth's method; lam is small.
    limit, k, p = math.exp(-lam), 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def typo(rng, word):
    i = rng.randrange(len(word))
    return word[:i] + rng.choice("bcdfghjklmnpqrstvwxz") + word[i + 1:]


def damage(rng, ref, subs, splits, typos):
    hyp = list(ref)
    for _ in range(subs):
        hyp[rng.randrange(len(hyp))] = rng.choice(WORDS)
    for _ in range(typos):
        i = rng.randrange(len(hyp))
        hyp[i] = typo(rng, hyp[i])
    for _ in range(splits):
        long_words = [i for i, w in enumerate(hyp) if len(w) >= 4]
        if long_words:
            i = rng.choice(long_words)
            cut = rng.randrange(2, len(hyp[i]) - 1)
            hyp[i : i + 1] = [hyp[i][:cut], hyp[i][cut:]]
    return hyp


def main(path):
    rng = random.Random(SEED)
    rows = []
    for dataset in DATASETS:
        refs = [[rng.choice(WORDS) for _ in range(rng.randint(8, 16))] for _ in range(SEGMENTS)]
        for system in SYSTEMS:
            sub_mean, split_mean, typo_mean = PROFILES[system]
            for seg, ref in enumerate(refs):
                subs = poisson(rng, sub_mean)
                splits = poisson(rng, split_mean)
                typos = poisson(rng, typo_mean)
                hyp = damage(rng, ref, subs, splits, typos)
                human = 100.0 - W_SUB * subs - W_SPLIT * splits - W_TYPO * typos + rng.gauss(0.0, 2.0)
                rows.append([dataset, system, f"s{seg:02d}", " ".join(hyp), " ".join(ref), f"{human:.4f}"])
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "system", "segment", "hypothesis", "reference", "human"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/desk_corpus.csv")
