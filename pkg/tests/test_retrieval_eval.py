import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.analysis.protocols import (
    average_over_protocols,
    average_runs,
    min_pairwise_distance,
    protocol_all,
    protocol_all_threshold,
    protocol_dissimilar,
    protocol_small_batches,
    select_dissimilar,
)
from src.analysis.report import render_table, result_records, write_records
from src.analysis.retrieval_metrics import (
    average_precision,
    best_ranks,
    cosine_scores,
    eval_m2m,
    ndcg,
    rank_all,
    recall_metrics,
)
from src.common.errors import ConfigError, DataError


def _brute_rank(scores_row, relevant_row):
    """1-based rank of the best relevant candidate, ties broken by candidate index."""
    best = None
    for j in np.flatnonzero(relevant_row):
        rank = 1 + sum(1 for c in range(len(scores_row))
                       if scores_row[c] > scores_row[j] or (scores_row[c] == scores_row[j] and c < j))
        best = rank if best is None else min(best, rank)
    return best


def _brute_ap(relevant):
    hits, total = 0, 0.0
    for i, r in enumerate(relevant, start=1):
        if r:
            hits += 1
            total += hits / i
    return total / hits


def _brute_ndcg(relevant):
    dcg = sum(1.0 / np.log2(i + 1) for i, r in enumerate(relevant, start=1) if r)
    ideal = sum(1.0 / np.log2(i + 1) for i in range(1, int(sum(relevant)) + 1))
    return dcg / ideal


def _aligned(seed: int, N: int = 10, d: int = 6, noise: float = 0.0):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(N, d))
    t = m + noise * rng.normal(size=(N, d))
    return t, m


class TestMetrics:

    def test_recall_oracle(self):
        recalls, medr, meanr = recall_metrics([1, 3, 12])
        assert recalls[1] == pytest.approx(33.333, abs=1e-3)
        assert recalls[3] == pytest.approx(66.667, abs=1e-3)
        assert recalls[10] == pytest.approx(66.667, abs=1e-3)
        assert medr == 3.0
        assert meanr == pytest.approx(16 / 3)

    def test_even_count_median(self):
        assert recall_metrics([1, 2, 5, 9])[1] == 3.5

    def test_bad_ranks(self):
        with pytest.raises(DataError):
            recall_metrics([])
        with pytest.raises(DataError):
            recall_metrics([0, 1])

    def test_ap_and_ndcg_oracles(self):
        assert average_precision(np.array([False, True, False])) == pytest.approx(0.5)
        assert ndcg(np.array([False, True, False])) == pytest.approx(0.6309, abs=1e-4)
        assert average_precision(np.ones(4, dtype=bool)) == 1.0
        assert ndcg(np.ones(4, dtype=bool)) == pytest.approx(1.0)

    def test_no_relevant_item(self):
        with pytest.raises(DataError):
            average_precision(np.zeros(3, dtype=bool))

    def test_rank_all_orders_by_score(self):
        q = np.array([[1.0, 0.0]])
        db = np.array([[0.0, 1.0], [1.0, 0.1], [1.0, 1.0]])
        ranked = rank_all(q, db)[0]
        assert ranked.indices.tolist() == [1, 2, 0]
        assert np.all(np.diff(ranked.scores) <= 0)

    def test_ties_keep_candidate_order(self):
        scores = np.array([[0.5, 0.5, 0.5]])
        assert best_ranks(scores, np.array([[False, False, True]])).tolist() == [3]

    def test_zero_norm_feature(self):
        with pytest.raises(DataError):
            cosine_scores(np.zeros((1, 2)), np.ones((1, 2)))

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), Q=st.integers(1, 16), M=st.integers(1, 16))
    def test_ranks_match_brute_force(self, seed, Q, M):
        rng = np.random.default_rng(seed)
        # coarse grid values so that ties actually occur
        scores = rng.integers(-3, 4, size=(Q, M)).astype(np.float64)
        relevance = rng.random((Q, M)) < 0.3
        relevance[np.arange(Q), rng.integers(0, M, size=Q)] = True
        expected = [_brute_rank(scores[q], relevance[q]) for q in range(Q)]
        assert best_ranks(scores, relevance).tolist() == expected

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 64))
    def test_ap_ndcg_match_brute_force(self, seed, n):
        rng = np.random.default_rng(seed)
        relevant = rng.random(n) < 0.4
        relevant[rng.integers(n)] = True
        assert average_precision(relevant) == pytest.approx(_brute_ap(relevant), abs=1e-9)
        assert ndcg(relevant) == pytest.approx(_brute_ndcg(relevant), abs=1e-9)


class TestMotionToMotion:

    def test_perfect_clusters(self):
        feats = np.array([[1.0, 0.01], [1.0, -0.01], [0.01, 1.0], [-0.01, 1.0]])
        mAP, nDCG = eval_m2m(feats, ["walk", "walk", "jump", "jump"])
        assert mAP == pytest.approx(1.0)
        assert nDCG == pytest.approx(1.0)

    def test_self_is_excluded(self):
        feats = np.array([[1.0, 0.0], [0.0, 1.0], [0.9, 0.1]])
        # query 0: candidates ranked [2, 1]; the only same-label item (1) is second
        mAP, _ = eval_m2m(feats, ["a", "a", "b"], skip_unmatched=True)
        assert mAP == pytest.approx(0.5)

    def test_missing_label(self):
        with pytest.raises(DataError):
            eval_m2m(np.eye(2), ["a", None])

    def test_unmatched_query(self):
        with pytest.raises(DataError):
            eval_m2m(np.eye(3), ["a", "a", "b"])


class TestProtocols:

    def test_identical_features_are_perfect(self):
        t, m = _aligned(0)
        result = protocol_all(t, m)
        assert result.t2m.recalls[1] == 100.0
        assert result.m2t.medr == 1.0
        assert result.rsum == pytest.approx(1000.0)

    def test_m2m_added_with_labels(self):
        t, m = _aligned(1, N=6)
        result = protocol_all(t, m, labels=["a", "b", "c"] * 2)
        assert result.m2m is not None
        assert 0.0 < result.m2m.map <= 1.0

    def test_misaligned_features(self):
        with pytest.raises(DataError):
            protocol_all(np.ones((3, 2)), np.ones((4, 2)))

    def test_inactive_threshold_equals_all(self):
        t, m = _aligned(2, noise=1.0)
        teacher = np.eye(10) + 0.5 * (1 - np.eye(10))
        plain = protocol_all(t, m)
        thresholded = protocol_all_threshold(t, m, teacher, threshold=0.95)
        assert thresholded.t2m.recalls == plain.t2m.recalls
        assert thresholded.m2t.recalls == plain.m2t.recalls
        assert thresholded.t2m.medr == plain.t2m.medr

    def test_threshold_accepts_near_duplicates(self):
        t = np.array([[1.0, 0.0], [0.0, 1.0]])
        m = np.array([[0.0, 1.0], [1.0, 0.0]])
        teacher = np.array([[1.0, 0.97], [0.97, 1.0]])
        assert protocol_all(t, m).t2m.recalls[1] == 0.0
        assert protocol_all_threshold(t, m, teacher, 0.95).t2m.recalls[1] == 100.0

    def test_threshold_range(self):
        t, m = _aligned(3, N=3)
        with pytest.raises(ConfigError):
            protocol_all_threshold(t, m, np.eye(3), threshold=1.5)

    def test_small_batches(self):
        t, m = _aligned(4, N=10)
        result = protocol_small_batches(t, m, batch=4, seed=0, reps=3)
        assert result.details["batches"] == 6
        assert result.t2m.recalls[1] == 100.0

    def test_small_batches_need_enough_pairs(self):
        t, m = _aligned(4, N=3)
        with pytest.raises(DataError):
            protocol_small_batches(t, m, batch=4)

    def test_small_batches_seeded(self):
        t, m = _aligned(5, N=20, noise=1.0)
        a = protocol_small_batches(t, m, batch=5, seed=3, reps=2)
        b = protocol_small_batches(t, m, batch=5, seed=3, reps=2)
        assert a.t2m.recalls == b.t2m.recalls

    def test_dissimilar_subset(self):
        t, m = _aligned(6, N=8)
        rng = np.random.default_rng(0)
        a = rng.random((8, 8))
        teacher = 0.5 * (a + a.T)
        np.fill_diagonal(teacher, 1.0)
        result = protocol_dissimilar(t, m, teacher, n=4)
        assert len(result.details["indices"]) == 4
        assert result.t2m.n_queries == 4

    def test_dissimilar_subset_too_large(self):
        t, m = _aligned(6, N=5)
        with pytest.raises(DataError):
            protocol_dissimilar(t, m, np.eye(5), n=6)


class TestDissimilarSelection:

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(2, 12), n=st.integers(2, 4))
    def test_small_instances_are_exact(self, seed, N, n):
        n = min(n, N)
        rng = np.random.default_rng(seed)
        a = rng.random((N, N))
        sim = 0.5 * (a + a.T)
        np.fill_diagonal(sim, 1.0)
        distance = 1.0 - sim
        best = max(min_pairwise_distance(distance, s) for s in itertools.combinations(range(N), n))
        for method in ("exhaustive", "auto"):
            chosen = select_dissimilar(sim, n, method=method)
            assert len(chosen) == n == len(set(chosen))
            assert min_pairwise_distance(distance, chosen) == pytest.approx(best, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), N=st.integers(3, 12), n=st.integers(2, 4))
    def test_greedy_never_beats_exhaustive(self, seed, N, n):
        n = min(n, N - 1)
        rng = np.random.default_rng(seed)
        a = rng.random((N, N))
        sim = 0.5 * (a + a.T)
        np.fill_diagonal(sim, 1.0)
        distance = 1.0 - sim
        greedy = select_dissimilar(sim, n, method="greedy")
        exact = select_dissimilar(sim, n, method="exhaustive")
        assert min_pairwise_distance(distance, greedy) <= min_pairwise_distance(distance, exact) + 1e-12

    @pytest.mark.parametrize("method", ["greedy", "exhaustive", "auto"])
    def test_two_clusters_give_one_pair_each(self, method):
        # captions 0-2 and 3-5 form two tight clusters
        sim = np.full((6, 6), 0.05)
        sim[:3, :3] = 0.9
        sim[3:, 3:] = 0.9
        sim[1, 4] = sim[4, 1] = 0.2
        np.fill_diagonal(sim, 1.0)
        chosen = select_dissimilar(sim, 2, method=method)
        assert len(chosen) == 2
        assert chosen[0] < 3 <= chosen[1]
        distance = 1.0 - sim
        best = max(min_pairwise_distance(distance, s) for s in itertools.combinations(range(6), 2))
        assert min_pairwise_distance(distance, chosen) == pytest.approx(best)

    def test_greedy_starts_at_least_similar_caption(self):
        sim = np.array([
            [1.0, 0.8, 0.7, 0.1],
            [0.8, 1.0, 0.6, 0.2],
            [0.7, 0.6, 1.0, 0.3],
            [0.1, 0.2, 0.3, 1.0],
        ])
        # pair 3 has the lowest mean similarity; pair 0 is farthest from it
        assert select_dissimilar(sim, 2, method="greedy") == [0, 3]

    def test_auto_falls_back_to_greedy_over_limit(self):
        rng = np.random.default_rng(4)
        a = rng.random((10, 10))
        sim = 0.5 * (a + a.T)
        np.fill_diagonal(sim, 1.0)
        assert select_dissimilar(sim, 3, exhaustive_limit=1) == select_dissimilar(sim, 3, method="greedy")

    def test_greedy_returns_sorted_unique(self):
        rng = np.random.default_rng(1)
        a = rng.random((30, 30))
        sim = 0.5 * (a + a.T)
        chosen = select_dissimilar(sim, 10, method="greedy")
        assert chosen == sorted(set(chosen))
        assert len(chosen) == 10

    def test_whole_set(self):
        assert select_dissimilar(np.eye(4), 4) == [0, 1, 2, 3]

    def test_bad_arguments(self):
        with pytest.raises(DataError):
            select_dissimilar(np.eye(3), 0)
        with pytest.raises(ConfigError):
            select_dissimilar(np.eye(3), 2, method="random")


class TestAveragingAndReports:

    def test_average_of_identical_results(self):
        t, m = _aligned(7, noise=0.8)
        r = protocol_all(t, m)
        avg = average_over_protocols([r, r])
        assert avg.protocol == "average"
        assert avg.rsum == pytest.approx(r.rsum)

    def test_average_runs_needs_matching_protocols(self):
        t, m = _aligned(8)
        r = protocol_all(t, m)
        assert average_runs([[r], [r]])[0].rsum == pytest.approx(r.rsum)
        with pytest.raises(DataError):
            average_runs([[r], []])

    def test_table_and_records(self, tmp_path):
        t, m = _aligned(9, noise=0.5)
        results = [protocol_all(t, m, labels=["a", "b"] * 5), protocol_small_batches(t, m, batch=5, reps=1)]
        table = render_table(results)
        assert "Rsum" in table and "small_batches" in table
        records = result_records(results)
        assert {(r["protocol"], r["direction"]) for r in records} >= {("all", "t2m"), ("all", "m2m")}
        path = write_records(tmp_path / "out" / "records.jsonl", results)
        assert len(path.read_text().splitlines()) == len(records)
