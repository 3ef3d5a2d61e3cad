"""Cosine trial scoring and equal-error-rate computation.

The EER sweep walks the sorted distinct scores, computing at each threshold t
the false acceptance rate (impostor scores >= t) and false rejection rate
(genuine scores < t). FAR falls and FRR rises with t, so their difference
changes sign exactly once; the EER is read off at an exact crossing when one
exists and is otherwise linearly interpolated between the two adjacent sweep
points. A virtual point just above the maximum score (FAR 0, FRR 1) closes the
sweep so a crossing always exists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._fileio import atomic_write_text, comment_block, fmt_float
from ._kernels import far_frr_counts, rowwise_cosine
from .vectorstore import GENUINE, IMPOSTOR, TrialSet, VectorSet

SCORING_BACKEND = "cosine"

ScoredTrial = tuple[str, str, str, float]


def score_trials(enroll: VectorSet, test: VectorSet, trials: TrialSet) -> list[ScoredTrial]:
    """Cosine similarity for every trial pair; ids resolve in their own side's set."""
    if enroll.dimension != test.dimension:
        raise ValueError(
            f"dimension mismatch: enroll {enroll.dimension}, test {test.dimension}")
    e_rows = np.empty((len(trials), enroll.dimension))
    t_rows = np.empty((len(trials), enroll.dimension))
    for i, (e, t, _) in enumerate(trials):
        e_rows[i] = enroll.get(e).values
        t_rows[i] = test.get(t).values
    scores = rowwise_cosine(e_rows, t_rows)
    return [(e, t, label, float(s)) for (e, t, label), s in zip(trials, scores)]


def eer_from_scores(genuine: Sequence[float], impostor: Sequence[float]) -> tuple[float, float]:
    """EER and the threshold where FAR meets FRR, from raw per-class scores."""
    g = np.sort(np.asarray(genuine, dtype=np.float64))
    i = np.sort(np.asarray(impostor, dtype=np.float64))
    if g.size == 0 or i.size == 0:
        raise ValueError("EER needs at least one genuine and one impostor score")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(i))):
        raise ValueError("scores must be finite")

    thresholds = np.unique(np.concatenate([g, i]))
    imp_ge, gen_lt = far_frr_counts(g, i, thresholds)
    far = imp_ge / i.size
    frr = gen_lt / g.size
    # close the sweep just above the max score: everything rejected
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)
    thresholds = np.append(thresholds, np.nextafter(thresholds[-1], np.inf))

    diff = far - frr
    k = int(np.argmax(diff <= 0.0))
    if diff[k] == 0.0:
        return float(far[k]), float(thresholds[k])
    # diff[k-1] > 0 > diff[k]; interpolate the crossing
    alpha = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = (1.0 - alpha) * far[k - 1] + alpha * far[k]
    threshold = (1.0 - alpha) * thresholds[k - 1] + alpha * thresholds[k]
    return float(eer), float(threshold)


def compute_eer(scored: Sequence[ScoredTrial]) -> tuple[float, float]:
    """EER over scored trials; requires both labels to be present."""
    genuine = [s for _, _, label, s in scored if label == GENUINE]
    impostor = [s for _, _, label, s in scored if label == IMPOSTOR]
    return eer_from_scores(genuine, impostor)


@dataclass(frozen=True)
class ScoreReport:
    """Scored trials plus the EER operating point."""

    scores: tuple[ScoredTrial, ...]
    eer: float
    threshold: float
    n_genuine: int
    n_impostor: int

    def __post_init__(self):
        if not 0.0 <= self.eer <= 1.0:
            raise ValueError(f"eer must be in [0, 1], got {self.eer}")


def make_report(enroll: VectorSet, test: VectorSet, trials: TrialSet) -> ScoreReport:
    scored = score_trials(enroll, test, trials)
    eer, threshold = compute_eer(scored)
    return ScoreReport(scores=tuple(scored), eer=eer, threshold=threshold,
                       n_genuine=trials.n_genuine, n_impostor=trials.n_impostor)


def save_report(report: ScoreReport, path, comments: Iterable[str] = ()) -> None:
    """TSV score lines followed by a one-line summary block."""
    lines = comment_block(comments)
    for e, t, label, s in report.scores:
        lines.append(f"{e}\t{t}\t{label}\t{fmt_float(s)}")
    lines.append(f"eer={fmt_float(report.eer)} threshold={fmt_float(report.threshold)} "
                 f"n_genuine={report.n_genuine} n_impostor={report.n_impostor} "
                 f"scoring={SCORING_BACKEND}")
    atomic_write_text(path, "\n".join(lines) + "\n")
