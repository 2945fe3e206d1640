"""
Unit tests for fedpoison/aggregation.py - server aggregation rules

Tests:
- FedAvg, KRUM and Trimmed Mean against examples and brute-force oracles
- COPOD outlier scores
- DOS weighting
- Order independence and the defense registry
"""

import itertools

import numpy as np
import pytest

from fedpoison.aggregation import (
    ClientUpdate,
    DefenseRegistry,
    FedAvgRule,
    copod_scores,
    cosine_distance_matrix,
    create_default_registry,
    dos_aggregate,
    fedavg,
    krum,
    trimmed_mean,
)
from fedpoison.errors import AggregationError


def _updates(vectors, kind="parameters", ids=None):
    ids = list(range(len(vectors))) if ids is None else ids
    return [
        ClientUpdate(cid, kind, np.atleast_1d(np.asarray(v, dtype=np.float64)), 10)
        for cid, v in zip(ids, vectors)
    ]


def _krum_oracle(matrix: np.ndarray, f: int) -> int:
    n = matrix.shape[0]
    m = n - f - 2
    scores = []
    for i in range(n):
        dists = sorted(
            float(np.sum((matrix[i] - matrix[j]) ** 2)) for j in range(n) if j != i
        )
        scores.append(sum(dists[:m]))
    return int(np.argmin(scores))


def _trimmed_mean_oracle(matrix: np.ndarray, k: int) -> np.ndarray:
    out = []
    for column in matrix.T:
        kept = sorted(column.tolist())[k : len(column) - k]
        out.append(sum(kept) / len(kept))
    return np.array(out)


class TestValidation:
    """Test shared input checks."""

    def test_empty_updates(self):
        """Test that no updates raises AggregationError."""
        with pytest.raises(AggregationError):
            fedavg([])

    def test_ragged_updates(self):
        """Test that mixed vector lengths are rejected."""
        with pytest.raises(AggregationError):
            fedavg(_updates([[1.0, 2.0], [1.0]]))

    def test_mixed_kinds(self):
        """Test that parameters and gradients cannot be mixed."""
        updates = _updates([[1.0], [2.0]])
        updates[1] = ClientUpdate(1, "gradients", np.array([2.0]), 10)
        with pytest.raises(AggregationError):
            fedavg(updates)


class TestFedAvg:
    """Test the unweighted mean."""

    def test_mean(self):
        """Test [1,3] and [3,5] average to [2,4]."""
        outcome = fedavg(_updates([[1, 3], [3, 5]]))
        assert outcome.aggregate.tolist() == [2.0, 4.0]
        assert outcome.weights.tolist() == [0.5, 0.5]

    def test_single_update(self):
        """Test a single update is returned as is."""
        outcome = fedavg(_updates([[1.5, -2.0]]))
        assert outcome.aggregate.tolist() == [1.5, -2.0]

    def test_permutation_bit_identical(self):
        """Test shuffled input order gives a bit-identical aggregate."""
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((7, 5))
        updates = _updates(vectors)
        shuffled = [updates[i] for i in rng.permutation(7)]
        assert np.array_equal(fedavg(updates).aggregate, fedavg(shuffled).aggregate)


class TestKrum:
    """Test KRUM selection."""

    def test_example_tie_goes_to_lowest_id(self):
        """Test [0, 0.1, 0.2, 0.3, 10] with f=1 selects client 1."""
        outcome = krum(_updates([0.0, 0.1, 0.2, 0.3, 10.0]), f=1)
        assert outcome.selected == 1
        assert outcome.weights.tolist() == [0.0, 1.0, 0.0, 0.0, 0.0]
        assert outcome.diagnostics["scores"][4] == pytest.approx(190.13)
        assert outcome.aggregate.tolist() == [0.1]

    def test_identical_updates_select_first(self):
        """Test all-equal updates select client 0."""
        assert krum(_updates([[2.0, 2.0]] * 5), f=1).selected == 0

    def test_translation_invariant(self):
        """Test adding a constant vector keeps the selection."""
        rng = np.random.default_rng(1)
        vectors = rng.standard_normal((6, 3))
        base = krum(_updates(vectors), f=1).selected
        assert krum(_updates(vectors + np.array([5.0, -3.0, 2.0])), f=1).selected == base

    def test_output_is_an_input(self):
        """Test the aggregate is exactly the selected client's vector."""
        rng = np.random.default_rng(2)
        vectors = rng.standard_normal((6, 4))
        outcome = krum(_updates(vectors), f=2)
        assert np.array_equal(outcome.aggregate, vectors[outcome.selected])

    def test_matches_brute_force(self):
        """Test agreement with an exhaustive oracle on 200 random instances."""
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(3, 8))
            f = int(rng.integers(0, n - 2))
            d = int(rng.integers(1, 4))
            matrix = rng.standard_normal((n, d))
            assert krum(_updates(matrix), f).selected == _krum_oracle(matrix, f)

    def test_permutation_reports_same_client(self):
        """Test shuffling inputs selects the same client and permutes weights."""
        rng = np.random.default_rng(4)
        updates = _updates(rng.standard_normal((6, 2)))
        order = [3, 0, 5, 1, 4, 2]
        shuffled = [updates[i] for i in order]
        a = krum(updates, f=1)
        b = krum(shuffled, f=1)
        assert a.selected == b.selected
        assert b.weights.tolist() == [a.weights[i] for i in order]

    def test_too_few_clients(self):
        """Test n < f + 3 raises AggregationError."""
        with pytest.raises(AggregationError):
            krum(_updates([[0.0]] * 4), f=2)


class TestTrimmedMean:
    """Test coordinate-wise trimmed mean."""

    def test_scalar_example(self):
        """Test [1,2,3,4,100] with k=1 gives 3."""
        assert trimmed_mean(_updates([1, 2, 3, 4, 100]), 1).aggregate.tolist() == [3.0]

    def test_two_dimensional_example(self):
        """Test per-coordinate trimming on 2-D updates."""
        vectors = [(0, 10), (1, 20), (2, 30), (3, 40), (100, -5)]
        assert trimmed_mean(_updates(vectors), 1).aggregate.tolist() == [2.0, 20.0]

    def test_identical_updates(self):
        """Test equal updates return the common vector."""
        outcome = trimmed_mean(_updates([[1.25, -4.0]] * 5), 2)
        assert outcome.aggregate.tolist() == [1.25, -4.0]

    def test_matches_brute_force(self):
        """Test agreement with a per-coordinate sort oracle on 200 random instances."""
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 8))
            k = int(rng.integers(0, (n - 1) // 2 + 1))
            d = int(rng.integers(1, 4))
            matrix = rng.standard_normal((n, d))
            assert np.allclose(
                trimmed_mean(_updates(matrix), k).aggregate,
                _trimmed_mean_oracle(matrix, k),
                rtol=1e-12,
                atol=1e-12,
            )

    def test_weights_are_retained_share(self):
        """Test weights sum to one and an always-trimmed client gets zero."""
        outcome = trimmed_mean(_updates([[0.0], [1.0], [2.0], [100.0]]), 1)
        assert outcome.weights.sum() == pytest.approx(1.0)
        assert outcome.weights[3] == 0.0

    def test_invalid_trim(self):
        """Test 2 * trim_k >= n raises AggregationError."""
        with pytest.raises(AggregationError):
            trimmed_mean(_updates([[0.0]] * 4), 2)


class TestCopodScores:
    """Test COPOD outlier scoring."""

    def test_outlier_scores_highest(self):
        """Test the row holding 100 in [1,2,3,100] is the strict maximum."""
        scores = copod_scores(np.array([[1.0], [2.0], [3.0], [100.0]]))
        assert np.argmax(scores) == 3
        assert scores[3] > np.max(scores[:3])

    def test_identical_rows_equal_scores(self):
        """Test identical rows get identical scores."""
        scores = copod_scores(np.ones((5, 3)))
        assert np.all(scores == scores[0])

    def test_scores_non_negative_and_finite(self):
        """Test scores are finite and >= 0."""
        scores = copod_scores(np.random.default_rng(6).standard_normal((20, 4)))
        assert np.all(np.isfinite(scores))
        assert np.all(scores >= 0.0)

    def test_affine_transform_invariance(self):
        """Test positive affine per-column transforms leave scores unchanged."""
        x = np.random.default_rng(7).standard_normal((12, 3)) ** 3
        transformed = x * np.array([2.0, 0.5, 10.0]) + np.array([1.0, -3.0, 7.0])
        assert np.allclose(copod_scores(x), copod_scores(transformed))

    def test_needs_two_rows(self):
        """Test a single row raises AggregationError."""
        with pytest.raises(AggregationError):
            copod_scores(np.ones((1, 3)))


class TestCosineDistance:
    """Test the cosine distance matrix."""

    def test_zero_vector_rules(self):
        """Test zero vectors are at 1 from non-zero vectors and 0 from each other."""
        dist = cosine_distance_matrix(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]))
        assert dist[0, 1] == 1.0
        assert dist[1, 2] == 1.0
        assert dist[0, 2] == 0.0
        assert dist[0, 0] == 0.0

    def test_opposite_vectors(self):
        """Test opposite directions are at distance 2."""
        dist = cosine_distance_matrix(np.array([[1.0, 1.0], [-2.0, -2.0]]))
        assert dist[0, 1] == pytest.approx(2.0)


class TestDos:
    """Test Distance-based Outlier Suppression."""

    def test_identical_updates_uniform_weights(self):
        """Test equal updates get weights exactly 1/n and return the common vector."""
        outcome = dos_aggregate(_updates([[3.0, -1.0, 0.5]] * 10))
        assert np.all(outcome.weights == 1.0 / 10)
        assert np.allclose(outcome.aggregate, [3.0, -1.0, 0.5], rtol=1e-12)

    def test_weights_on_simplex(self):
        """Test weights are positive and sum to 1 for random inputs."""
        rng = np.random.default_rng(8)
        for _ in range(20):
            outcome = dos_aggregate(_updates(rng.standard_normal((7, 5))))
            assert np.all(outcome.weights > 0.0)
            assert outcome.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_outlier_gets_minimum_weight(self):
        """Test a far outlier next to a tight cluster is down-weighted most."""
        rng = np.random.default_rng(9)
        cluster = 10.0 + 0.01 * rng.standard_normal((9, 5))
        diameter = max(
            np.linalg.norm(a - b) for a, b in itertools.combinations(cluster, 2)
        )
        direction = np.array([1.0, -1.0, 0.0, 0.0, 0.0]) / np.sqrt(2.0)
        outlier = cluster.mean(axis=0) + 100.0 * diameter * direction
        vectors = np.vstack([cluster[:4], outlier, cluster[4:]])
        outcome = dos_aggregate(_updates(vectors))
        assert int(np.argmin(outcome.weights)) == 4
        assert outcome.weights[4] < np.min(np.delete(outcome.weights, 4))

    def test_aggregate_within_envelope(self):
        """Test the weighted mean stays inside the coordinate-wise range."""
        matrix = np.random.default_rng(10).standard_normal((6, 3))
        aggregate = dos_aggregate(_updates(matrix)).aggregate
        assert np.all(aggregate >= matrix.min(axis=0) - 1e-12)
        assert np.all(aggregate <= matrix.max(axis=0) + 1e-12)

    def test_permutation_equivariant(self):
        """Test shuffling inputs permutes weights and keeps the aggregate bit-identical."""
        rng = np.random.default_rng(11)
        updates = _updates(rng.standard_normal((5, 4)))
        order = [2, 4, 0, 3, 1]
        shuffled = [updates[i] for i in order]
        a = dos_aggregate(updates)
        b = dos_aggregate(shuffled)
        assert np.array_equal(a.aggregate, b.aggregate)
        assert b.weights.tolist() == [a.weights[i] for i in order]

    def test_needs_three_updates(self):
        """Test n < 3 raises AggregationError."""
        with pytest.raises(AggregationError):
            dos_aggregate(_updates([[0.0], [1.0]]))


class TestDefenseRegistry:
    """Test rule registration and lookup."""

    def test_default_registry(self):
        """Test the default registry holds all four rules."""
        registry = create_default_registry(f=1)
        assert registry.available() == ["dos", "fedavg", "krum", "trimmed_mean"]
        assert registry.get("krum").f == 1
        assert registry.get("trimmed_mean").trim_k == 1

    def test_trim_k_override(self):
        """Test an explicit trim_k wins over f."""
        assert create_default_registry(f=3, trim_k=1).get("trimmed_mean").trim_k == 1

    def test_unknown_rule(self):
        """Test that an unregistered name raises KeyError."""
        with pytest.raises(KeyError):
            DefenseRegistry().get("median")

    def test_rules_dispatch(self):
        """Test registered rules aggregate through the protocol."""
        registry = DefenseRegistry()
        registry.register(FedAvgRule())
        assert registry.has_rule("fedavg")
        outcome = registry.get("fedavg").aggregate(_updates([[1.0], [3.0]]))
        assert outcome.aggregate.tolist() == [2.0]
