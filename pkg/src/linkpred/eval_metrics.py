"""ROC-AUC via the rank statistic, with a per-pair-type breakdown."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedAUCError(ValueError):
    """AUC asked for on a single-class input."""


@dataclass
class EvalReport:
    overall_auc: float
    per_type_auc: dict[int, float | None]  # None when a type lacks both classes
    type_counts: dict[int, tuple[int, int]]  # type -> (positives, negatives)

    def format(self) -> str:
        lines = [f"overall_auc: {self.overall_auc:.6f}"]
        total = sum(p + n for p, n in self.type_counts.values())
        lines.append(f"count_total: {total}")
        for t in sorted(self.type_counts):
            pos, neg = self.type_counts[t]
            lines.append(f"type_{t}_positives: {pos}")
            lines.append(f"type_{t}_negatives: {neg}")
            a = self.per_type_auc.get(t)
            lines.append(f"type_{t}_auc: {'undefined' if a is None else f'{a:.6f}'}")
        return "\n".join(lines) + "\n"


def _tied_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties given the average rank of their run."""
    order = np.argsort(x, kind="stable")
    sorted_x = x[order]
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(sorted_x):
        j = i
        while j + 1 < len(sorted_x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: (wins + 0.5 * ties) / (positives * negatives).

    Computed from a single sort-and-rank pass, so large inputs avoid the
    quadratic pairwise comparison.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and aligned")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != len(labels):
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError(
            f"undefined AUC: {n_pos} positives and {n_neg} negatives")
    ranks = _tied_ranks(scores)
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(scores, labels, types=None) -> EvalReport:
    """Overall AUC plus per-type AUCs; a type with one class is undefined."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if types is None:
        types = np.zeros(len(labels), dtype=np.int64)
    types = np.asarray(types, dtype=np.int64)
    if not (len(scores) == len(labels) == len(types)):
        raise ValueError("scores, labels and types must be aligned")
    overall = auc(scores, labels)
    per_type: dict[int, float | None] = {}
    counts: dict[int, tuple[int, int]] = {}
    for t in sorted(set(types.tolist())):
        mask = types == t
        sub_labels = labels[mask]
        pos = int((sub_labels == 1).sum())
        neg = int((sub_labels == 0).sum())
        counts[t] = (pos, neg)
        if pos == 0 or neg == 0:
            per_type[t] = None
        else:
            per_type[t] = auc(scores[mask], sub_labels)
    return EvalReport(overall_auc=overall, per_type_auc=per_type, type_counts=counts)
