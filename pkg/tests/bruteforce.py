"""Independent brute-force recomputation of every acquisition score.

Plain nested loops over raw JSONL dictionaries, stdlib only. This module
deliberately shares no code with the engine so it can serve as an oracle:
it re-derives the sparse-distribution conventions (remainder as one
pseudo-token for KL, uniform remainder spread for chosen-token lookups,
1e-10 floors, vocabulary inferred as 1 + max token id) from scratch.
"""

import json
import math

FLOOR = 1e-10


def read_records(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def infer_vocab(records):
    top = 0
    for rec in records:
        for t in rec["tokens"]:
            top = max(top, t)
        for row in rec["cond"]:
            for cell in row:
                for t in cell["t"]:
                    top = max(top, t)
    return top + 1


def group_by_id(records):
    by_id = {}
    for rec in records:
        by_id.setdefault(rec["id"], []).append(rec)
    return by_id


def dist_lookup(cell, token):
    for t, p in zip(cell["t"], cell["p"]):
        if t == token:
            return p
    return None


def logprob(cell, token, vocab):
    listed = dist_lookup(cell, token)
    if listed is not None:
        return math.log(listed)
    unlisted = vocab - len(cell["t"])
    share = cell["rem"] / unlisted if unlisted > 0 else 0.0
    return math.log(max(share, FLOOR))


def kl(p_cell, q_cell):
    total = 0.0
    for t, p in zip(p_cell["t"], p_cell["p"]):
        q = dist_lookup(q_cell, t)
        if q is None:
            q = FLOOR
        total += p * (math.log(p) - math.log(max(q, FLOOR)))
    if p_cell["rem"] > 0.0:
        total += p_cell["rem"] * (math.log(p_cell["rem"])
                                  - math.log(max(q_cell["rem"], FLOOR)))
    return total


def entropy(cell):
    h = 0.0
    for p in cell["p"]:
        h -= p * math.log(p)
    if cell["rem"] > 0.0:
        h -= cell["rem"] * math.log(cell["rem"])
    return h


def dense_kl(p_vec, q_vec):
    total = 0.0
    for p, q in zip(p_vec, q_vec):
        if p > 0.0:
            total += p * (math.log(p) - math.log(max(q, FLOOR)))
    return total


def _ensemble_shape(recs):
    L = len(recs[0]["cond"])
    K = len(recs) // L
    return L, K


def score_likelihood(recs, vocab):
    L, K = _ensemble_shape(recs)
    per_model = []
    for m in range(L):
        total = 0.0
        for rec in recs:
            if rec["producer"] != m:
                continue
            for w, tok in enumerate(rec["tokens"]):
                total += logprob(rec["cond"][m][w], tok, vocab)
        per_model.append(total / K)
    return sum(per_model) / L


def score_entropy_full(recs, vocab):
    L, K = _ensemble_shape(recs)
    per_model = []
    for m in range(L):
        total = 0.0
        for rec in recs:
            if rec["producer"] != m:
                continue
            for w in range(len(rec["tokens"])):
                total += entropy(rec["cond"][m][w])
        per_model.append(total / K)
    return sum(per_model) / L


def score_entropy_mc(recs, vocab):
    L, K = _ensemble_shape(recs)
    per_model = []
    for m in range(L):
        total = 0.0
        for rec in recs:
            if rec["producer"] != m:
                continue
            for w, tok in enumerate(rec["tokens"]):
                lp = logprob(rec["cond"][m][w], tok, vocab)
                total += -math.exp(lp) * lp
        per_model.append(total / K)
    return sum(per_model) / L


def score_agreement(recs, vocab):
    L, K = _ensemble_shape(recs)
    total = 0.0
    for rec in recs:
        p = rec["producer"]
        width = len(rec["tokens"])
        for q in range(L):
            if q == p:
                continue
            ssum = 0.0
            for w, tok in enumerate(rec["tokens"]):
                ssum += logprob(rec["cond"][q][w], tok, vocab)
            total += ssum / (K * width)
    return total / (L * (L - 1))


def score_divergence(recs, vocab):
    L, K = _ensemble_shape(recs)
    total = 0.0
    for rec in recs:
        p = rec["producer"]
        width = len(rec["tokens"])
        for q in range(L):
            if q == p:
                continue
            dsum = 0.0
            for w in range(width):
                dsum += kl(rec["cond"][p][w], rec["cond"][q][w])
            total += (dsum / width) / K
    return total / (L * (L - 1))


SCORE_FNS = {
    "likelihood": score_likelihood,
    "entropy": score_entropy_full,
    "entropy-mc": score_entropy_mc,
    "agreement": score_agreement,
    "divergence": score_divergence,
}


def score_file(path, strategy):
    """All item scores for one strategy, straight from the raw records."""
    records = read_records(path)
    vocab = infer_vocab(records)
    by_id = group_by_id(records)
    return {item_id: SCORE_FNS[strategy](recs, vocab) for item_id, recs in by_id.items()}
