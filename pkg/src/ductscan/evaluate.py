"""Type, location and dimension accuracy of extracted objects against ground truth.

Predictions are paired with truth objects greedily by centre distance, at
most ``2 * loc_tol_mm`` apart. Candidate pairs are visited in order of
distance, with ties settled by object content rather than list position, so
the scores do not depend on the order of either input list.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .objects import KINDS, HvacObject
from .synthgen import GroundTruth

DEFAULT_LOC_TOL_MM = 10.0
DEFAULT_DIM_TOL_REL = 0.02
DIMENSIONS = ("width_mm", "height_mm", "length_mm")
METRICS = ("type", "location", "dimensions")


@dataclass
class ClassScore:
    n_truth: int = 0
    type_ok: int = 0
    loc_ok: int = 0
    dim_ok: int = 0

    def add(self, other: "ClassScore") -> None:
        self.n_truth += other.n_truth
        self.type_ok += other.type_ok
        self.loc_ok += other.loc_ok
        self.dim_ok += other.dim_ok

    def accuracies(self) -> tuple[float, float, float]:
        if self.n_truth == 0:
            return (0.0, 0.0, 0.0)
        n = self.n_truth
        return (self.type_ok / n, self.loc_ok / n, self.dim_ok / n)


@dataclass
class MatchReport:
    counts: dict[str, ClassScore] = field(default_factory=dict)
    unmatched_truth: int = 0
    unmatched_pred: int = 0
    pairs: list[tuple[int, int, float]] = field(default_factory=list)  # truth id, pred id, distance

    @property
    def per_class(self) -> dict[str, tuple[float, float, float]]:
        return {k: s.accuracies() for k, s in self.counts.items() if s.n_truth}

    @property
    def overall(self) -> tuple[float, float, float]:
        total = ClassScore()
        for s in self.counts.values():
            total.add(s)
        return total.accuracies()

    @property
    def n_truth(self) -> int:
        return sum(s.n_truth for s in self.counts.values())

    def merge(self, other: "MatchReport") -> "MatchReport":
        out = MatchReport({k: ClassScore() for k in set(self.counts) | set(other.counts)})
        for src in (self, other):
            for k, s in src.counts.items():
                out.counts[k].add(s)
        out.unmatched_truth = self.unmatched_truth + other.unmatched_truth
        out.unmatched_pred = self.unmatched_pred + other.unmatched_pred
        return out

    def to_dict(self) -> dict:
        def row(acc, n):
            return {"type": acc[0], "location": acc[1], "dimensions": acc[2], "n": n}

        return {
            "per_class": {k: row(s.accuracies(), s.n_truth) for k, s in sorted(self.counts.items()) if s.n_truth},
            "overall": row(self.overall, self.n_truth),
            "unmatched_truth": self.unmatched_truth,
            "unmatched_pred": self.unmatched_pred,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "n", *METRICS])
        for k, s in sorted(self.counts.items()):
            if s.n_truth:
                w.writerow([k, s.n_truth, *(f"{a:.4f}" for a in s.accuracies())])
        w.writerow(["overall", self.n_truth, *(f"{a:.4f}" for a in self.overall)])
        return buf.getvalue()


def _key(o: HvacObject) -> tuple:
    return (o.kind, o.center_mm, tuple(-1.0 if v is None else v for v in (o.width_mm, o.height_mm, o.length_mm)))


def dims_match(pred: HvacObject, truth: HvacObject, tol_rel: float) -> bool:
    """Every dimension the truth specifies is reproduced within ``tol_rel``."""
    for name in DIMENSIONS:
        t = getattr(truth, name)
        if t is None:
            continue
        p = getattr(pred, name)
        if p is None or abs(p - t) > tol_rel * abs(t) + 1e-9:
            return False
    return True


def greedy_match(pred: list[HvacObject], truth: list[HvacObject], max_dist: float) -> list[tuple[int, int, float]]:
    """Index pairs (truth, pred, distance), nearest first, one-to-one."""
    cands = []
    for ti, t in enumerate(truth):
        for pi, p in enumerate(pred):
            d = math.dist(t.center_mm, p.center_mm)
            if d <= max_dist:
                cands.append((d, _key(t), _key(p), ti, pi))
    cands.sort(key=lambda c: c[:3])
    used_t, used_p, pairs = set(), set(), []
    for d, _, _, ti, pi in cands:
        if ti in used_t or pi in used_p:
            continue
        used_t.add(ti)
        used_p.add(pi)
        pairs.append((ti, pi, d))
    return pairs


def match_and_score(
    pred: list[HvacObject],
    truth: GroundTruth | list[HvacObject],
    loc_tol_mm: float = DEFAULT_LOC_TOL_MM,
    dim_tol_rel: float = DEFAULT_DIM_TOL_REL,
) -> MatchReport:
    truth_objs = truth.objects if isinstance(truth, GroundTruth) else list(truth)
    pairs = greedy_match(pred, truth_objs, 2.0 * loc_tol_mm)
    report = MatchReport({k: ClassScore() for k in KINDS})
    for t in truth_objs:
        report.counts[t.kind].n_truth += 1
    for ti, pi, d in pairs:
        t, p = truth_objs[ti], pred[pi]
        s = report.counts[t.kind]
        s.type_ok += p.kind == t.kind
        s.loc_ok += d <= loc_tol_mm
        s.dim_ok += dims_match(p, t, dim_tol_rel)
    report.unmatched_truth = len(truth_objs) - len(pairs)
    report.unmatched_pred = len(pred) - len(pairs)
    report.pairs = [(truth_objs[ti].id, pred[pi].id, d) for ti, pi, d in pairs]
    return report


def aggregate(reports: list[MatchReport]) -> MatchReport:
    out = MatchReport({k: ClassScore() for k in KINDS})
    for r in reports:
        out = out.merge(r)
    return out
