"""Pair classification, time-shifted training sets, and evaluation pair files.

A candidate pair is typed by the degrees of its endpoints in the input
snapshot: type 0 (both nonzero), type 1 (exactly one nonzero), type 2 (both
zero).  Training sets are balanced between future links and enduring
non-links, and exclude type-2 pairs, about which the input snapshot carries
no information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph_store import GraphSnapshot, ParseError


class SampleSpaceExhausted(RuntimeError):
    """Not enough eligible pairs of the requested class."""


@dataclass(frozen=True)
class LabeledPair:
    u: int
    v: int
    label: int       # 1 iff the pair is linked in the target snapshot
    pair_type: int   # degree class in the input snapshot


@dataclass(frozen=True)
class SplitSpec:
    """Year bookkeeping for the 3-year-ahead prediction task."""

    input_year: int
    target_year: int
    training_input_year: int
    training_target_year: int


def make_split(input_year: int) -> SplitSpec:
    """Target = input + 3; training uses the same gap shifted back 3 years."""
    if input_year - 3 < 1990:
        raise ValueError(f"training input year {input_year - 3} precedes 1990")
    return SplitSpec(
        input_year=input_year,
        target_year=input_year + 3,
        training_input_year=input_year - 3,
        training_target_year=input_year,
    )


def classify_pair(snapshot: GraphSnapshot, u: int, v: int) -> int:
    if u == v:
        raise ValueError("pair endpoints must differ")
    nonzero = int(snapshot.degree(u) > 0) + int(snapshot.degree(v) > 0)
    return {2: 0, 1: 1, 0: 2}[nonzero]


def label_pair(target_snapshot: GraphSnapshot, u: int, v: int) -> int:
    return int(target_snapshot.has_edge(u, v))


def sample_training_pairs(input_snapshot: GraphSnapshot,
                          target_snapshot: GraphSnapshot,
                          n_pairs: int, seed: int,
                          retry_factor: int = 1000) -> list[LabeledPair]:
    """Balanced labeled pairs: ceil(n/2) future links, floor(n/2) non-links.

    Positives are drawn uniformly (without replacement) from the realized
    new-link set; negatives by rejection sampling over node pairs.  Every
    pair is absent from the input snapshot and is type 0 or 1 there; type-2
    pairs are ineligible.  Deterministic for a fixed seed.
    """
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    if input_snapshot.num_nodes != target_snapshot.num_nodes:
        raise ValueError("snapshots must share a node universe")
    if input_snapshot.cutoff_day >= target_snapshot.cutoff_day:
        raise ValueError("input cutoff must precede target cutoff")
    n_pos = math.ceil(n_pairs / 2)
    n_neg = n_pairs // 2
    rng = np.random.default_rng(seed)
    n = input_snapshot.num_nodes

    target_edges = target_snapshot.edge_list()
    new_mask = ~input_snapshot.has_edges(target_edges[:, 0], target_edges[:, 1])
    new_links = target_edges[new_mask]
    deg_in = np.diff(input_snapshot.indptr)
    eligible_mask = (deg_in[new_links[:, 0]] > 0) | (deg_in[new_links[:, 1]] > 0)
    eligible_pos = new_links[eligible_mask]
    if len(eligible_pos) < n_pos:
        raise SampleSpaceExhausted(
            f"need {n_pos} positives but only {len(eligible_pos)} eligible new links exist")
    chosen = rng.choice(len(eligible_pos), size=n_pos, replace=False)
    positives = eligible_pos[chosen]

    negatives = []
    seen: set[int] = set()
    attempts = 0
    max_attempts = retry_factor * n_pairs
    while len(negatives) < n_neg and attempts < max_attempts:
        batch = min(max(4 * (n_neg - len(negatives)), 64), max_attempts - attempts)
        us = rng.integers(0, n, size=batch)
        vs = rng.integers(0, n, size=batch)
        attempts += batch
        ok = us != vs
        ok &= ~input_snapshot.has_edges(us, vs)
        ok &= ~target_snapshot.has_edges(us, vs)
        ok &= (deg_in[us] > 0) | (deg_in[vs] > 0)
        for u, v in zip(us[ok], vs[ok]):
            u, v = (int(u), int(v)) if u < v else (int(v), int(u))
            key = u * n + v
            if key in seen:
                continue
            seen.add(key)
            negatives.append((u, v))
            if len(negatives) == n_neg:
                break
    if len(negatives) < n_neg:
        raise SampleSpaceExhausted(
            f"found only {len(negatives)} of {n_neg} negatives "
            f"after {attempts} attempts")

    pairs = [LabeledPair(int(u), int(v), 1, classify_pair(input_snapshot, int(u), int(v)))
             for u, v in positives]
    pairs += [LabeledPair(u, v, 0, classify_pair(input_snapshot, u, v))
              for u, v in negatives]
    return pairs


# ---------------------------------------------------------------------------
# pair / truth / training-set files


def load_eval_pairs(path) -> list[tuple[int, int]]:
    """Pair file: one 'u<TAB>v' line per candidate pair."""
    pairs = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer field") from None
    return pairs


def load_ground_truth(path) -> list[int]:
    """Truth file: one 0/1 per line, aligned with the pair file by index."""
    labels = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: expected 0 or 1, got {line!r}")
            labels.append(int(line))
    return labels


def check_alignment(pairs, labels, pairs_path="pairs", truth_path="truth"):
    if len(pairs) != len(labels):
        raise ParseError(
            f"length mismatch: {pairs_path} has {len(pairs)} lines, "
            f"{truth_path} has {len(labels)}")


def save_labeled_pairs(pairs: list[LabeledPair], path):
    """Training-set text form: 'u<TAB>v<TAB>label' per line."""
    with open(path, "w", encoding="ascii") as fh:
        for p in pairs:
            fh.write(f"{p.u}\t{p.v}\t{p.label}\n")


def load_labeled_pairs(path, input_snapshot: GraphSnapshot) -> list[LabeledPair]:
    """Read a training-set file; pair types are recomputed from the snapshot."""
    pairs = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'u<TAB>v<TAB>label'")
            try:
                u, v, label = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer field") from None
            if label not in (0, 1):
                raise ParseError(f"{path}:{lineno}: label must be 0 or 1")
            pairs.append(LabeledPair(u, v, label, classify_pair(input_snapshot, u, v)))
    return pairs
