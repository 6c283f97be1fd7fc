import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_sparse_dataset, synthetic_logistic_dataset
from flexatc.problem import (
    LogisticLoss,
    ParseError,
    ProblemError,
    ProxSpec,
    QuadraticLoss,
    build_instance,
    constants,
    normalize_features,
    parse_libsvm,
    partition,
    quadratic_instance,
    serialize_libsvm,
)


class TestParseLibsvm:
    def test_two_line_example(self):
        ds = parse_libsvm("+1 1:0.5 3:-0.2\n-1 2:1.0\n")
        assert len(ds) == 2
        assert ds.d == 3
        idx0, val0, lab0 = ds.sample(0)
        assert lab0 == 1.0
        assert np.array_equal(idx0, [0, 2])
        assert np.array_equal(val0, [0.5, -0.2])
        idx1, val1, lab1 = ds.sample(1)
        assert lab1 == -1.0
        assert np.array_equal(idx1, [1])

    def test_empty_input(self):
        ds = parse_libsvm("")
        assert len(ds) == 0
        assert ds.d == 0

    def test_blank_lines_skipped(self):
        ds = parse_libsvm("\n+1 1:1.0\n\n-1 1:2.0\n\n")
        assert len(ds) == 2

    def test_malformed_token_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_libsvm("+1 1:0.5\n-1 2:oops\n")
        with pytest.raises(ParseError, match="line 1"):
            parse_libsvm("+1 nocolon\n")

    def test_label_handling(self):
        with pytest.raises(ParseError, match="not \\+1/-1"):
            parse_libsvm("0 1:1.0\n")
        ds = parse_libsvm("0 1:1.0\n1 2:2.0\n", map_01_labels=True)
        assert np.array_equal(ds.labels, [-1.0, 1.0])

    def test_accepts_bytes(self):
        ds = parse_libsvm(b"+1 1:0.5\n")
        assert len(ds) == 1

    def test_round_trip_bit_exact(self):
        ds = random_sparse_dataset(40, 9, seed=12)
        back = parse_libsvm(serialize_libsvm(ds))
        assert back.d == ds.d
        assert np.array_equal(back.labels, ds.labels)
        assert np.array_equal(back.indptr, ds.indptr)
        assert np.array_equal(back.indices, ds.indices)
        assert np.array_equal(back.values, ds.values)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 8))
    @settings(max_examples=30, deadline=None)
    def test_round_trip_property(self, seed, m, d):
        ds = random_sparse_dataset(m, d, seed=seed, density=0.7)
        back = parse_libsvm(serialize_libsvm(ds))
        assert np.array_equal(back.labels, ds.labels)
        assert np.array_equal(back.values, ds.values)
        assert np.array_equal(back.indices, ds.indices)

    def test_normalize_features(self):
        ds = parse_libsvm("+1 1:4.0\n-1 1:-2.0 2:0.5\n")
        scaled = normalize_features(ds)
        assert np.max(np.abs(scaled.values)) <= 1.0
        assert scaled.values[0] == 1.0


class TestPartition:
    def test_even_split(self):
        ds = random_sparse_dataset(10, 4, seed=0)
        parts = partition(ds, 2, seed=1)
        assert [len(p) for p in parts] == [5, 5]

    def test_sizes_differ_by_at_most_one(self):
        ds = random_sparse_dataset(23, 4, seed=0)
        sizes = [len(p) for p in partition(ds, 5, seed=2)]
        assert sum(sizes) == 23
        assert max(sizes) - min(sizes) <= 1

    def test_union_preserved(self):
        ds = random_sparse_dataset(17, 3, seed=3)
        parts = partition(ds, 4, seed=9)
        seen = sorted(
            (tuple(p.sample(i)[0]), tuple(p.sample(i)[1]), p.sample(i)[2])
            for p in parts
            for i in range(len(p))
        )
        want = sorted(
            (tuple(ds.sample(i)[0]), tuple(ds.sample(i)[1]), ds.sample(i)[2])
            for i in range(len(ds))
        )
        assert seen == want

    def test_deterministic(self):
        ds = random_sparse_dataset(30, 5, seed=4)
        a = partition(ds, 7, seed=11)
        b = partition(ds, 7, seed=11)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.labels, pb.labels)
            assert np.array_equal(pa.values, pb.values)

    def test_too_many_agents(self):
        ds = random_sparse_dataset(3, 2, seed=5)
        with pytest.raises(ProblemError):
            partition(ds, 4, seed=0)


class TestGradients:
    def test_quadratic_zero_target(self):
        loss = QuadraticLoss(np.zeros(3))
        v = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(loss.grad(v), v)

    def test_logistic_single_sample_at_origin(self):
        # one sample X = e_1, Y = +1, no ridge: gradient at 0 is -e_1 / 2
        loss = LogisticLoss(np.array([[1.0, 0.0]]), np.array([1.0]))
        assert np.allclose(loss.grad(np.zeros(2)), [-0.5, 0.0], atol=1e-15)

    @pytest.mark.parametrize("variant", ["quadratic", "logistic"])
    def test_finite_difference_agreement(self, variant):
        rng = np.random.default_rng(21)
        if variant == "quadratic":
            loss = QuadraticLoss(rng.standard_normal(6), np.geomspace(0.5, 3.0, 6))
        else:
            ds = synthetic_logistic_dataset(40, 6, seed=2)
            loss = LogisticLoss.from_dataset(ds, ridge=0.05)
        h = 1e-6
        for _ in range(50):
            x = rng.standard_normal(6)
            g = loss.grad(x)
            fd = np.empty(6)
            for j in range(6):
                e = np.zeros(6)
                e[j] = h
                fd[j] = (loss.value(x + e) - loss.value(x - e)) / (2.0 * h)
            denom = max(np.linalg.norm(g), 1e-8)
            assert np.linalg.norm(fd - g) / denom <= 1e-6

    def test_dimension_mismatch(self):
        loss = QuadraticLoss(np.zeros(3))
        with pytest.raises(ProblemError):
            loss.grad(np.zeros(4))


class TestProx:
    def test_soft_threshold_example(self):
        prox = ProxSpec("l1", 0.1)
        assert prox.apply(np.array([0.5]), alpha=1.0)[0] == pytest.approx(0.4)
        assert prox.apply(np.array([-0.5]), alpha=1.0)[0] == pytest.approx(-0.4)

    def test_zero_is_fixed(self):
        prox = ProxSpec("l1", 0.3)
        assert np.array_equal(prox.apply(np.zeros(4), alpha=2.0), np.zeros(4))

    def test_none_is_identity(self):
        v = np.array([1.0, -2.0])
        assert np.array_equal(ProxSpec().apply(v, alpha=0.7), v)

    def test_nonexpansive_over_random_pairs(self):
        rng = np.random.default_rng(31)
        prox = ProxSpec("l1", 0.2)
        for _ in range(100):
            u, v = rng.standard_normal((2, 8))
            du = prox.apply(u, 0.5) - prox.apply(v, 0.5)
            assert np.linalg.norm(du) <= np.linalg.norm(u - v) + 1e-12

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.01, 5.0), st.floats(0.01, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_soft_threshold_nonexpansive_and_shrinking(self, a, b, weight, alpha):
        prox = ProxSpec("l1", weight)
        pa = prox.apply(np.array([a]), alpha)[0]
        pb = prox.apply(np.array([b]), alpha)[0]
        assert abs(pa - pb) <= abs(a - b) + 1e-12
        assert abs(pa) <= abs(a)

    def test_invalid_specs(self):
        with pytest.raises(ProblemError):
            ProxSpec("l1", 0.0)
        with pytest.raises(ProblemError):
            ProxSpec("l2", 1.0)
        with pytest.raises(ProblemError):
            ProxSpec().apply(np.zeros(2), alpha=0.0)


class TestConstants:
    def test_unit_quadratic(self):
        loss = QuadraticLoss(np.zeros(4))
        assert loss.constants() == (1.0, 1.0)

    def test_logistic_single_sample(self):
        # 1x1 Gram is 1, so L = 1/4 + ridge
        loss = LogisticLoss(np.array([[1.0]]), np.array([1.0]), ridge=0.01)
        big_l, mu = loss.constants()
        assert big_l == pytest.approx(0.25 + 0.01, abs=1e-9)
        assert mu == 0.01

    def test_logistic_without_ridge_is_merely_convex(self):
        ds = synthetic_logistic_dataset(30, 4, seed=3)
        loss = LogisticLoss.from_dataset(ds, ridge=0.0)
        assert loss.constants()[1] == 0.0

    def test_power_iteration_matches_lapack(self):
        ds = synthetic_logistic_dataset(60, 5, seed=4)
        loss = LogisticLoss.from_dataset(ds, ridge=0.0)
        gram = loss.features.T @ loss.features / (4.0 * loss.m)
        assert loss.constants()[0] == pytest.approx(np.linalg.eigvalsh(gram)[-1], rel=1e-7)

    def test_common_constants_max_min(self):
        losses = [
            QuadraticLoss(np.zeros(2), np.array([0.5, 2.0])),
            QuadraticLoss(np.zeros(2), np.array([1.0, 3.0])),
        ]
        assert constants(losses) == (3.0, 0.5)

    def test_smoothness_bounds_lipschitz_ratio(self):
        rng = np.random.default_rng(41)
        ds = synthetic_logistic_dataset(50, 5, seed=6)
        loss = LogisticLoss.from_dataset(ds, ridge=0.02)
        big_l = loss.constants()[0]
        for _ in range(100):
            x, y = rng.standard_normal((2, 5))
            num = np.linalg.norm(loss.grad(x) - loss.grad(y))
            assert num <= big_l * np.linalg.norm(x - y) * (1.0 + 1e-9)


class TestInstances:
    def test_quadratic_instance_kappa(self):
        inst = quadratic_instance(4, 6, seed=0, curvature_min=0.01, curvature_max=1.0)
        assert inst.L == pytest.approx(1.0)
        assert inst.mu == pytest.approx(0.01)
        assert inst.n == 4

    def test_dimension_mismatch_detected(self):
        with pytest.raises(ProblemError, match="dimension"):
            build_instance(
                [QuadraticLoss(np.zeros(2)), QuadraticLoss(np.zeros(3))], ProxSpec()
            )

    def test_objective_and_mean_grad(self):
        inst = quadratic_instance(3, 2, seed=1)
        point = np.zeros(2)
        manual = sum(l.value(point) for l in inst.losses) / 3.0
        assert inst.objective(point) == pytest.approx(manual)
        manual_g = sum(l.grad(point) for l in inst.losses) / 3.0
        assert np.allclose(inst.mean_grad(point), manual_g)
