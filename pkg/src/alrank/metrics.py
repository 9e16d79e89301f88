"""Corpus-free BLEU for token-id sequences."""

from __future__ import annotations

import math
from collections import Counter


def _ngrams(seq, n: int):
    return [tuple(seq[i:i + n]) for i in range(len(seq) - n + 1)]


class ReferenceNgrams:
    """Pre-tabulated reference n-gram counts, for scoring many candidates
    against the same reference set."""

    def __init__(self, references, max_n: int = 4):
        self.max_n = max_n
        self.lengths = [len(ref) for ref in references]
        self.counts = []
        for n in range(1, max_n + 1):
            merged: dict = {}
            for ref in references:
                for gram, count in Counter(_ngrams(list(ref), n)).items():
                    if count > merged.get(gram, 0):
                        merged[gram] = count
            self.counts.append(merged)

    def score(self, candidate) -> float:
        candidate = list(candidate)
        if not candidate:
            return 0.0
        log_sum = 0.0
        for n in range(1, self.max_n + 1):
            counts = Counter(_ngrams(candidate, n))
            ref_counts = self.counts[n - 1]
            clipped = sum(min(c, ref_counts.get(g, 0)) for g, c in counts.items())
            total = len(candidate) - n + 1
            if n == 1:
                if clipped == 0:
                    return 0.0
                precision = clipped / total
            else:
                precision = (clipped + 1) / (max(total, 0) + 1)
            log_sum += math.log(precision)
        c = len(candidate)
        r = min(self.lengths, key=lambda rl: (abs(rl - c), rl))
        bp = math.exp(min(0.0, 1.0 - r / c))
        return bp * math.exp(log_sum / self.max_n)


def bleu(candidate, references, max_n: int = 4) -> float:
    """Geometric mean of clipped n-gram precisions times the brevity penalty.

    Unigram precision is unsmoothed; higher orders get add-1 smoothing on both
    the clipped and total counts. The brevity penalty compares against the
    reference length closest to the candidate's (ties to the shorter
    reference). An empty candidate scores 0.
    """
    return ReferenceNgrams(references, max_n).score(candidate)
