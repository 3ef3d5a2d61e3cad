import numpy as np
import pytest

from vecanon.metrics import (ScoreReport, compute_eer, eer_from_scores, make_report,
                             save_report, score_trials)
from vecanon.vectorstore import GENUINE, IMPOSTOR, SpeakerVector, TrialSet, VectorSet

from conftest import random_vector_set


def eer_oracle(genuine, impostor):
    """Brute-force sweep at midpoints between consecutive sorted scores.

    Counts FAR/FRR by explicit loops and interpolates the sign change of their
    difference; endpoints below the min and above the max close the sweep.
    """
    genuine = sorted(float(s) for s in genuine)
    impostor = sorted(float(s) for s in impostor)
    scores = sorted(set(genuine) | set(impostor))
    thresholds = [scores[0] - 1.0]
    thresholds += [(a + b) / 2.0 for a, b in zip(scores, scores[1:])]
    thresholds += [scores[-1] + 1.0]
    pts = []
    for t in thresholds:
        far = sum(1 for s in impostor if s >= t) / len(impostor)
        frr = sum(1 for s in genuine if s < t) / len(genuine)
        pts.append((far, frr))
    for (far0, frr0), (far1, frr1) in zip(pts, pts[1:]):
        d0, d1 = far0 - frr0, far1 - frr1
        if d0 == 0.0:
            return far0
        if d0 > 0.0 >= d1:
            if d1 == 0.0:
                return far1
            alpha = d0 / (d0 - d1)
            return (1 - alpha) * far0 + alpha * far1
    return pts[-1][0]


class TestScoreTrials:
    def test_identical_vector_scores_one(self):
        v = SpeakerVector("u1", "s1", "d", [1.0, 2.0])
        w = SpeakerVector("u2", "s1", "d", [1.0, 2.0])
        enroll, test = VectorSet(2, (v,)), VectorSet(2, (w,))
        scored = score_trials(enroll, test, TrialSet((("u1", "u2", GENUINE),)))
        assert scored[0][3] == pytest.approx(1.0)

    def test_orthogonal_scores_zero(self):
        enroll = VectorSet(2, (SpeakerVector("e", "s1", "d", [1.0, 0.0]),))
        test = VectorSet(2, (SpeakerVector("t", "s2", "d", [0.0, 1.0]),))
        scored = score_trials(enroll, test, TrialSet((("e", "t", IMPOSTOR),)))
        assert scored[0][3] == pytest.approx(0.0, abs=1e-15)

    def test_matches_formula_oracle(self, rng):
        enroll = random_vector_set(rng, n=8, d=5, prefix="e")
        test = random_vector_set(rng, n=8, d=5, prefix="t")
        pairs = tuple((e, t, GENUINE if i % 2 else IMPOSTOR)
                      for i, (e, t) in enumerate(zip(enroll.utterance_ids(),
                                                     test.utterance_ids())))
        scored = score_trials(enroll, test, TrialSet(pairs))
        for (e, t, _, s) in scored:
            a = enroll.get(e).values
            b = test.get(t).values
            expected = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
            assert s == pytest.approx(expected, rel=1e-12)

    def test_unresolved_id(self, rng):
        enroll = random_vector_set(rng, n=2, d=3, prefix="e")
        test = random_vector_set(rng, n=2, d=3, prefix="t")
        with pytest.raises(KeyError, match="ghost"):
            score_trials(enroll, test, TrialSet((("ghost", "t000", GENUINE),)))


class TestComputeEER:
    def test_perfectly_separable(self):
        eer, thr = eer_from_scores([0.9, 0.8], [0.1, 0.2])
        assert eer == 0.0
        assert 0.2 < thr <= 0.8

    def test_identical_distributions(self, rng):
        for n in (3, 10, 57):
            vals = rng.normal(size=n).tolist()
            eer, _ = eer_from_scores(vals, list(vals))
            assert abs(eer - 0.5) <= 1.0 / (2 * n) + 1e-12

    def test_gaussian_separation_analytic(self, rng):
        n = 100_000
        genuine = rng.normal(1.0, 1.0, size=n)
        impostor = rng.normal(-1.0, 1.0, size=n)
        eer, _ = eer_from_scores(genuine, impostor)
        assert eer == pytest.approx(0.15866, abs=0.005)

    def test_matches_midpoint_sweep_oracle(self, rng):
        for _ in range(200):
            n_g = int(rng.integers(1, 30))
            n_i = int(rng.integers(1, 30))
            # mix continuous scores with a coarse grid to exercise ties
            if rng.random() < 0.5:
                genuine = rng.normal(0.3, 1.0, size=n_g)
                impostor = rng.normal(-0.3, 1.0, size=n_i)
            else:
                genuine = rng.integers(-3, 4, size=n_g) / 4.0
                impostor = rng.integers(-4, 3, size=n_i) / 4.0
            eer, _ = eer_from_scores(genuine, impostor)
            assert eer == pytest.approx(eer_oracle(genuine, impostor), abs=1e-12)

    def test_hand_listed_twenty_scores(self):
        genuine = [0.93, 0.88, 0.86, 0.81, 0.77, 0.74, 0.52, 0.44, 0.31, 0.12]
        impostor = [0.71, 0.63, 0.55, 0.48, 0.40, 0.33, 0.27, 0.21, 0.15, 0.02]
        eer, _ = eer_from_scores(genuine, impostor)
        assert eer == pytest.approx(eer_oracle(genuine, impostor), abs=1e-12)
        assert 0.0 < eer < 0.5

    def test_invariant_under_increasing_transform(self, rng):
        for _ in range(25):
            genuine = rng.normal(0.5, 1.0, size=int(rng.integers(2, 40)))
            impostor = rng.normal(-0.5, 1.0, size=int(rng.integers(2, 40)))
            base, _ = eer_from_scores(genuine, impostor)
            warped, _ = eer_from_scores(np.exp(genuine) + 3, np.exp(impostor) + 3)
            assert warped == pytest.approx(base, abs=1e-12)

    def test_symmetric_under_class_swap_with_score_negation(self, rng):
        # swapping genuine/impostor while reversing the score axis preserves EER
        for _ in range(25):
            genuine = rng.normal(0.5, 1.0, size=int(rng.integers(2, 40)))
            impostor = rng.normal(-0.5, 1.0, size=int(rng.integers(2, 40)))
            base, _ = eer_from_scores(genuine, impostor)
            swapped, _ = eer_from_scores(-impostor, -genuine)
            assert swapped == pytest.approx(base, abs=1e-12)

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            eer_from_scores([], [0.5])
        with pytest.raises(ValueError, match="at least one"):
            eer_from_scores([0.5], [])

    def test_compute_eer_splits_by_label(self):
        scored = [("e", "t1", GENUINE, 0.9), ("e", "t2", GENUINE, 0.8),
                  ("e", "t3", IMPOSTOR, 0.1), ("e", "t4", IMPOSTOR, 0.2)]
        eer, _ = compute_eer(scored)
        assert eer == 0.0


class TestScoreReport:
    def test_report_counts_and_eer(self, rng):
        enroll = random_vector_set(rng, n=6, d=4, n_speakers=3, prefix="e")
        test = random_vector_set(rng, n=6, d=4, n_speakers=3, prefix="t")
        pairs = []
        for e in enroll:
            for t in test:
                label = GENUINE if e.speaker_id == t.speaker_id else IMPOSTOR
                pairs.append((e.utterance_id, t.utterance_id, label))
        trials = TrialSet(tuple(pairs))
        report = make_report(enroll, test, trials)
        assert report.n_genuine == trials.n_genuine
        assert report.n_impostor == trials.n_impostor
        assert len(report.scores) == len(trials)
        assert 0.0 <= report.eer <= 1.0

    def test_every_pair_scored_once(self, rng):
        enroll = random_vector_set(rng, n=4, d=3, prefix="e")
        test = random_vector_set(rng, n=4, d=3, prefix="t")
        trials = TrialSet((("e000", "t001", GENUINE), ("e001", "t000", IMPOSTOR)))
        report = make_report(enroll, test, trials)
        assert [(e, t) for e, t, _, _ in report.scores] == [(e, t) for e, t, _ in trials]

    def test_save_report_summary_line(self, rng, tmp_path):
        enroll = random_vector_set(rng, n=4, d=3, n_speakers=2, prefix="e")
        test = random_vector_set(rng, n=4, d=3, n_speakers=2, prefix="t")
        pairs = tuple((e.utterance_id, t.utterance_id,
                       GENUINE if e.speaker_id == t.speaker_id else IMPOSTOR)
                      for e in enroll for t in test)
        report = make_report(enroll, test, TrialSet(pairs))
        p = tmp_path / "report.tsv"
        save_report(report, p, comments=["format_version=1"])
        lines = p.read_text().splitlines()
        assert lines[0] == "# format_version=1"
        summary = lines[-1]
        assert summary.startswith("eer=")
        assert "scoring=cosine" in summary
        assert f"n_genuine={report.n_genuine}" in summary
        score_lines = [l for l in lines if "\t" in l]
        assert len(score_lines) == len(pairs)

    def test_report_validates_eer_range(self):
        with pytest.raises(ValueError):
            ScoreReport(scores=(), eer=1.5, threshold=0.0, n_genuine=1, n_impostor=1)
