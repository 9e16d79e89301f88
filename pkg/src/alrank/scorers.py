"""Per-item acquisition scores over ensemble caption samples.

The committee ranking functions: Monte-Carlo and full-distribution entropy,
summed log-likelihood, mean pairwise cross-likelihood (agreement), and mean
pairwise per-token KL divergence along sampled captions (divergence).

Next-token distributions are stored sparsely: explicit ``(token_id, prob)``
entries plus a ``remainder`` bucket holding the mass of every unlisted token.
KL treats the remainder as one pseudo-token on each side; chosen-token lookups
spread it uniformly over the unlisted ids. Both conventions are exact when the
entries cover the whole vocabulary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .seeds import substream

# Floor applied to every q-side probability in KL and to unlisted-token
# lookups; keeps every log finite.
EPS_FLOOR = 1e-10

SCORER_STRATEGIES = ("random", "entropy", "entropy-mc", "likelihood", "agreement", "divergence")

DIRECTION = {
    "random": "maximize",
    "entropy": "maximize",
    "entropy-mc": "maximize",
    "likelihood": "minimize",
    "agreement": "minimize",
    "divergence": "maximize",
}

# Strategies whose score needs L >= 2 ensemble members.
PAIRWISE_STRATEGIES = ("agreement", "divergence")


@dataclass(frozen=True)
class TokenDistribution:
    """Sparse categorical distribution over ``vocab_size`` token ids.

    ``token_ids`` are unique and sorted ascending; ``probs`` aligns with them
    and is strictly positive; ``remainder`` is the total mass of all unlisted
    ids. Listed mass + remainder must be 1 within 1e-6.
    """

    token_ids: np.ndarray
    probs: np.ndarray
    remainder: float
    vocab_size: int

    def __post_init__(self):
        ids = np.asarray(self.token_ids, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "token_ids", ids)
        object.__setattr__(self, "probs", probs)
        if ids.ndim != 1 or probs.ndim != 1 or len(ids) != len(probs):
            raise ValueError("token_ids and probs must be aligned 1-D sequences")
        if len(ids) > 0:
            if np.any(np.diff(ids) <= 0):
                raise ValueError("token_ids must be unique and sorted ascending")
            if ids[0] < 0 or ids[-1] >= self.vocab_size:
                raise ValueError("token_ids out of range for vocab_size")
            if np.any(probs <= 0.0):
                raise ValueError("listed probabilities must be > 0")
        if self.remainder < 0.0:
            raise ValueError("remainder must be >= 0")
        total = float(probs.sum()) + self.remainder
        if not (1.0 - 1e-6 <= total <= 1.0 + 1e-6):
            raise ValueError(f"probability mass {total!r} not within 1e-6 of 1")

    @classmethod
    def from_pairs(cls, pairs, remainder: float, vocab_size: int) -> "TokenDistribution":
        """Build from an unsorted iterable of (token_id, prob) pairs."""
        pairs = sorted(pairs)
        ids = np.array([t for t, _ in pairs], dtype=np.int64)
        probs = np.array([p for _, p in pairs], dtype=np.float64)
        return cls(ids, probs, float(remainder), vocab_size)

    def lookup(self, token: int) -> float | None:
        """Listed probability of ``token``, or None if unlisted."""
        pos = int(np.searchsorted(self.token_ids, token))
        if pos < len(self.token_ids) and self.token_ids[pos] == token:
            return float(self.probs[pos])
        return None


@dataclass(frozen=True)
class CaptionSample:
    """One sampled token sequence plus every member's conditionals along it.

    ``cond[q][w]`` is model q's next-token distribution given the sample's
    prefix before position w. The grid has L rows and W = len(tokens) columns.
    """

    producer: int
    tokens: tuple
    cond: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "cond", tuple(tuple(row) for row in self.cond))
        if len(self.tokens) < 1:
            raise ValueError("sample must contain at least one token")
        width = len(self.tokens)
        for row in self.cond:
            if len(row) != width:
                raise ValueError("cond rows must have one column per token")


@dataclass(frozen=True)
class EnsembleCaptionSet:
    """K samples from each of L ensemble members for one pool item."""

    item_id: str
    L: int
    K: int
    samples: tuple

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.L < 1 or self.K < 1:
            raise ValueError("L and K must be >= 1")
        if len(self.samples) != self.L * self.K:
            raise ValueError(f"expected {self.L * self.K} samples, got {len(self.samples)}")
        per_producer = {}
        for s in self.samples:
            if not (0 <= s.producer < self.L):
                raise ValueError(f"producer {s.producer} out of range")
            if len(s.cond) != self.L:
                raise ValueError("cond must have one row per ensemble member")
            per_producer[s.producer] = per_producer.get(s.producer, 0) + 1
        if any(count != self.K for count in per_producer.values()) or len(per_producer) != self.L:
            raise ValueError("each member must produce exactly K samples")

    def samples_from(self, model: int) -> list:
        out = [s for s in self.samples if s.producer == model]
        if not out:
            raise ValueError(f"no samples produced by model {model}")
        return out


@dataclass(frozen=True)
class ScoreReport:
    item_id: str
    strategy: str
    value: float
    direction: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"score for {self.item_id!r} is not finite")


def token_kl(p: TokenDistribution, q: TokenDistribution) -> float:
    """KL(p || q) over the union support, remainder as one pseudo-token.

    Every q-side probability is floored at EPS_FLOOR, so the result is finite;
    it is >= 0 up to floating error because q's effective mass never exceeds 1.
    """
    if p.vocab_size != q.vocab_size:
        raise ValueError(f"vocabulary size mismatch: {p.vocab_size} vs {q.vocab_size}")
    kl = 0.0
    if len(p.token_ids) > 0:
        pos = np.searchsorted(q.token_ids, p.token_ids)
        pos_c = np.minimum(pos, max(len(q.token_ids) - 1, 0))
        if len(q.token_ids) > 0:
            listed = q.token_ids[pos_c] == p.token_ids
            q_side = np.where(listed, q.probs[pos_c], EPS_FLOOR)
        else:
            q_side = np.full(len(p.token_ids), EPS_FLOOR)
        q_side = np.maximum(q_side, EPS_FLOOR)
        kl += float(np.sum(p.probs * (np.log(p.probs) - np.log(q_side))))
    if p.remainder > 0.0:
        kl += p.remainder * (math.log(p.remainder) - math.log(max(q.remainder, EPS_FLOOR)))
    return kl


def chosen_token_logprob(d: TokenDistribution, token: int) -> float:
    """Log-probability of ``token`` under ``d``.

    Unlisted tokens get the remainder spread uniformly over the unlisted ids,
    floored at EPS_FLOOR so the result is always finite.
    """
    listed = d.lookup(token)
    if listed is not None:
        return math.log(listed)
    unlisted = d.vocab_size - len(d.token_ids)
    share = d.remainder / unlisted if unlisted > 0 else 0.0
    return math.log(max(share, EPS_FLOOR))


def shannon_entropy(d: TokenDistribution) -> float:
    """Entropy of the sparse distribution, remainder as one pseudo-token."""
    h = float(-np.sum(d.probs * np.log(d.probs))) if len(d.probs) else 0.0
    if d.remainder > 0.0:
        h -= d.remainder * math.log(d.remainder)
    return h


def kl_dense(p: np.ndarray, q: np.ndarray) -> float:
    """KL between dense probability vectors, same q-side floor as token_kl."""
    mask = p > 0.0
    pm = p[mask]
    return float(np.sum(pm * (np.log(pm) - np.log(np.maximum(q[mask], EPS_FLOOR)))))


def entropy_dense(p: np.ndarray) -> float:
    mask = p > 0.0
    pm = p[mask]
    return float(-np.sum(pm * np.log(pm)))


def entropy_score_mc(cset: EnsembleCaptionSet, model: int) -> ScoreReport:
    """Point-mass entropy estimate: mean over samples of sum_w -P log P.

    P is the probability the producer model assigned to the token it sampled.
    """
    total = 0.0
    for s in cset.samples_from(model):
        for w, t in enumerate(s.tokens):
            lp = chosen_token_logprob(s.cond[model][w], t)
            total += -math.exp(lp) * lp
    return ScoreReport(cset.item_id, "entropy-mc", total / cset.K, "maximize")


def entropy_score_full(cset: EnsembleCaptionSet, model: int) -> ScoreReport:
    """Mean over samples of the summed Shannon entropy of each step's distribution."""
    total = 0.0
    for s in cset.samples_from(model):
        for w in range(len(s.tokens)):
            total += shannon_entropy(s.cond[model][w])
    return ScoreReport(cset.item_id, "entropy", total / cset.K, "maximize")


def likelihood_score(cset: EnsembleCaptionSet, model: int) -> ScoreReport:
    """Mean over samples of the summed (not length-normalized) log-likelihood."""
    total = 0.0
    for s in cset.samples_from(model):
        for w, t in enumerate(s.tokens):
            total += chosen_token_logprob(s.cond[model][w], t)
    return ScoreReport(cset.item_id, "likelihood", total / cset.K, "minimize")


def agreement_score(cset: EnsembleCaptionSet) -> ScoreReport:
    """Mean pairwise cross-likelihood of each member's samples under the others.

    Each sample's summed cross log-probability is normalized by K*|c| before
    the 1/(L(L-1)) pair average.
    """
    if cset.L < 2:
        raise ValueError("agreement needs an ensemble of at least 2 members")
    total = 0.0
    for s in cset.samples:
        width = len(s.tokens)
        for q in range(cset.L):
            if q == s.producer:
                continue
            ssum = 0.0
            for w, t in enumerate(s.tokens):
                ssum += chosen_token_logprob(s.cond[q][w], t)
            total += ssum / (cset.K * width)
    value = total / (cset.L * (cset.L - 1))
    return ScoreReport(cset.item_id, "agreement", value, "minimize")


def divergence_score(cset: EnsembleCaptionSet) -> ScoreReport:
    """Mean pairwise per-token KL divergence along each member's samples.

    For a sample produced by p, the (p, q) term is the per-position mean of
    KL(cond[p][w] || cond[q][w]); terms average over K samples and all ordered
    member pairs.
    """
    if cset.L < 2:
        raise ValueError("divergence needs an ensemble of at least 2 members")
    total = 0.0
    for s in cset.samples:
        width = len(s.tokens)
        p = s.producer
        for q in range(cset.L):
            if q == p:
                continue
            dsum = 0.0
            for w in range(width):
                dsum += token_kl(s.cond[p][w], s.cond[q][w])
            total += (dsum / width) / cset.K
    value = total / (cset.L * (cset.L - 1))
    return ScoreReport(cset.item_id, "divergence", value, "maximize")


def _mean_over_members(cset: EnsembleCaptionSet, score_fn) -> float:
    return sum(score_fn(cset, m).value for m in range(cset.L)) / cset.L


def score_ids(ids, sets, strategy: str, seed: int = 0) -> list:
    """One ScoreReport per id, in the given order.

    The random strategy draws one seeded uniform value per id and ignores
    ``sets``; every other strategy requires a caption set for every id.
    """
    if strategy not in SCORER_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    ids = list(ids)
    direction = DIRECTION[strategy]
    if strategy == "random":
        rng = substream(seed, "random-strategy", "scores")
        values = rng.random(len(ids))
        return [ScoreReport(i, strategy, float(v), direction) for i, v in zip(ids, values)]
    reports = []
    for item_id in ids:
        cset = sets.get(item_id)
        if cset is None:
            raise ValueError(f"missing ensemble captions for item {item_id!r}")
        if strategy == "entropy":
            value = _mean_over_members(cset, entropy_score_full)
        elif strategy == "entropy-mc":
            value = _mean_over_members(cset, entropy_score_mc)
        elif strategy == "likelihood":
            value = _mean_over_members(cset, likelihood_score)
        elif strategy == "agreement":
            value = agreement_score(cset).value
        else:
            value = divergence_score(cset).value
        reports.append(ScoreReport(item_id, strategy, value, direction))
    return reports


def score_pool(pool, sets, strategy: str, seed: int = 0) -> list:
    """Score every unlabeled pool item, ascending id order."""
    return score_ids(pool.unlabeled, sets, strategy, seed=seed)


def sort_reports(reports) -> list:
    """Best-first ordering for a single-strategy report list, ties by id."""
    directions = {r.direction for r in reports}
    strategies = {r.strategy for r in reports}
    if len(directions) > 1 or len(strategies) > 1:
        raise ValueError("reports must share one strategy and direction")
    if not reports:
        return []
    reverse = next(iter(directions)) == "maximize"
    if reverse:
        return sorted(reports, key=lambda r: (-r.value, r.item_id))
    return sorted(reports, key=lambda r: (r.value, r.item_id))


# --- ensemble-scores JSONL -------------------------------------------------
#
# One object per (item, sample):
#   {"id": str, "producer": int, "tokens": [int],
#    "cond": [[{"t": [int], "p": [float], "rem": float} x W] x L]}


def _dist_to_obj(d: TokenDistribution) -> dict:
    return {"t": [int(t) for t in d.token_ids],
            "p": [float(p) for p in d.probs],
            "rem": float(d.remainder)}


def _obj_to_dist(obj: dict, vocab_size: int) -> TokenDistribution:
    return TokenDistribution(np.asarray(obj["t"], dtype=np.int64),
                             np.asarray(obj["p"], dtype=np.float64),
                             float(obj["rem"]), vocab_size)


def caption_set_to_records(cset: EnsembleCaptionSet) -> list:
    records = []
    for s in cset.samples:
        records.append({
            "id": cset.item_id,
            "producer": s.producer,
            "tokens": list(s.tokens),
            "cond": [[_dist_to_obj(d) for d in row] for row in s.cond],
        })
    return records


def write_caption_sets(sets, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item_id in sorted(sets):
            for rec in caption_set_to_records(sets[item_id]):
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def infer_vocab_size(records) -> int:
    """1 + the largest token id appearing anywhere in the records."""
    top = 0
    for rec in records:
        if rec["tokens"]:
            top = max(top, max(rec["tokens"]))
        for row in rec["cond"]:
            for cell in row:
                if cell["t"]:
                    top = max(top, max(cell["t"]))
    return top + 1


def records_to_caption_sets(records, vocab_size: int | None = None) -> dict:
    """Group raw sample records into EnsembleCaptionSet objects keyed by id."""
    records = list(records)
    if vocab_size is None:
        vocab_size = infer_vocab_size(records)
    by_id: dict = {}
    for rec in records:
        by_id.setdefault(rec["id"], []).append(rec)
    sets = {}
    for item_id, recs in by_id.items():
        samples = []
        for rec in recs:
            cond = tuple(
                tuple(_obj_to_dist(cell, vocab_size) for cell in row) for row in rec["cond"]
            )
            samples.append(CaptionSample(int(rec["producer"]), tuple(rec["tokens"]), cond))
        L = len(samples[0].cond)
        if len(samples) % L != 0:
            raise ValueError(f"item {item_id!r}: {len(samples)} samples not divisible by L={L}")
        sets[item_id] = EnsembleCaptionSet(item_id, L, len(samples) // L, tuple(samples))
    return sets


def read_caption_sets(path, vocab_size: int | None = None) -> dict:
    from .jsonl import iter_jsonl

    return records_to_caption_sets((obj for _, obj in iter_jsonl(path)), vocab_size)
