import numpy as np
import pytest

from gspcd.spectral import (
    FilterSpec,
    SpectralBasis,
    apply_poly_filter,
    design_filter,
    eigendecompose,
    energy_profile,
    gft,
    ideal_split,
    igft,
    quadratic_tv_edgewise,
    spectral_projection_regression,
    total_variation,
)


class TestEigendecompose:
    def test_descending_orthonormal_small_residual(self, make_graph):
        graph = make_graph(n=80, k=10)
        basis = eigendecompose(graph.laplacian)
        lam, u = basis.eigenvalues, basis.eigenvectors
        assert np.all(np.diff(lam) <= 1e-12)
        assert np.abs(u.T @ u - np.eye(80)).max() < 1e-10
        resid = graph.laplacian_dense() @ u - u * lam
        assert np.abs(resid).max() < 1e-6
        # smallest eigenvalue is 0 with the constant eigenvector
        assert abs(lam[-1]) < 1e-9

    def test_sign_convention_is_deterministic(self, make_graph):
        graph = make_graph(n=40, k=6)
        a = eigendecompose(graph.laplacian)
        b = eigendecompose(graph.laplacian)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)
        lead = np.argmax(np.abs(a.eigenvectors), axis=0)
        assert np.all(a.eigenvectors[lead, np.arange(40)] > 0)

    def test_rejects_asymmetric_and_oversized(self):
        with pytest.raises(ValueError, match="symmetric"):
            eigendecompose(np.array([[0.0, 1.0], [0.5, 0.0]]))
        with pytest.raises(ValueError, match="budget"):
            eigendecompose(np.eye(12), budget=10)
        with pytest.raises(ValueError, match="square"):
            eigendecompose(np.zeros((3, 4)))


class TestTransform:
    def test_round_trip_and_parseval(self, make_graph, rng):
        graph = make_graph(n=60, k=8)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal((60, 3))
        f_hat = gft(basis, f)
        assert np.abs(igft(basis, f_hat) - f).max() < 1e-10
        assert abs(np.linalg.norm(f_hat) - np.linalg.norm(f)) < 1e-10

    def test_accepts_vectors(self, make_graph, rng):
        graph = make_graph(n=30, k=5)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal(30)
        assert gft(basis, f).shape == (30,)
        assert np.abs(igft(basis, gft(basis, f)) - f).max() < 1e-10

    def test_shape_mismatch_raises(self, make_graph, rng):
        graph = make_graph(n=20, k=4)
        basis = eigendecompose(graph.laplacian)
        with pytest.raises(ValueError):
            gft(basis, rng.standard_normal(19))
        with pytest.raises(ValueError):
            igft(basis, rng.standard_normal(21))


class TestTotalVariation:
    def test_quadratic_equals_spectral_weighting(self, make_graph, rng):
        graph = make_graph(n=50, k=7)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal((50, 2))
        tv = total_variation(graph, f)
        norms, weighted = energy_profile(basis, f)
        assert tv == pytest.approx(weighted, abs=1e-8)
        assert tv == pytest.approx(float((basis.eigenvalues * norms**2).sum()),
                                   abs=1e-8)

    def test_quadratic_matches_edgewise_sum(self, make_graph, rng):
        graph = make_graph(n=50, k=7)
        f = rng.standard_normal((50, 3))
        a = total_variation(graph, f)
        b = quadratic_tv_edgewise(graph, f)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)

    def test_constant_signal_has_zero_variation(self, make_graph):
        graph = make_graph(n=30, k=5)
        ones = np.ones((30, 2))
        assert abs(total_variation(graph, ones)) < 1e-9
        assert abs(total_variation(graph, ones, form="l1")) < 1e-7

    def test_l1_form_and_validation(self, make_graph, rng):
        graph = make_graph(n=25, k=4)
        f = rng.standard_normal(25)
        w = graph.affinity.weights
        expect = float(np.abs(f - w @ f).sum())
        assert total_variation(graph, f, form="l1") == pytest.approx(expect)
        with pytest.raises(ValueError):
            total_variation(graph, f, form="l2")


class TestIdealSplit:
    def test_parts_sum_back_exactly(self, make_graph, rng):
        graph = make_graph(n=40, k=6)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal((40, 3))
        low, high = ideal_split(basis, f, k_c=15)
        assert np.abs(low + high - f).max() < 1e-12

    def test_split_zeroes_the_right_rows(self, make_graph, rng):
        graph = make_graph(n=40, k=6)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal(40)
        k_c = 12
        low, high = ideal_split(basis, f, k_c)
        low_hat = gft(basis, low)
        high_hat = gft(basis, high)
        assert np.abs(low_hat[:k_c - 1]).max() < 1e-10  # high block removed
        assert np.abs(high_hat[k_c - 1:]).max() < 1e-10

    def test_low_part_is_smoother(self, make_graph, rng):
        graph = make_graph(n=40, k=6)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal((40, 2))
        low, _ = ideal_split(basis, f, k_c=20)
        assert total_variation(graph, low) <= total_variation(graph, f) + 1e-12

    def test_boundary_cutoffs(self, make_graph, rng):
        graph = make_graph(n=20, k=4)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal(20)
        low, high = ideal_split(basis, f, k_c=1)
        assert np.abs(low - f).max() < 1e-12 and np.abs(high).max() < 1e-12
        with pytest.raises(ValueError):
            ideal_split(basis, f, k_c=0)
        with pytest.raises(ValueError):
            ideal_split(basis, f, k_c=21)


class TestPolyFilter:
    def test_matches_eigendomain_evaluation(self, make_graph, rng):
        graph = make_graph(n=40, k=6)
        basis = eigendecompose(graph.laplacian)
        f = rng.standard_normal((40, 2))
        fspec = FilterSpec(kind="polynomial", coeffs=(0.3, 1.2, 0.5), h0=0.25)
        out = apply_poly_filter(graph, fspec, f)
        gains = fspec.evaluate(basis.eigenvalues)
        expect = igft(basis, gains[:, None] * gft(basis, f))
        assert np.abs(out - expect).max() < 1e-8

    def test_filterspec_evaluate_is_horner_consistent(self):
        fspec = FilterSpec(kind="polynomial", coeffs=(1.0, 1.0, 1.0))
        lam = np.array([0.0, 0.5, 2.0])
        assert np.allclose(fspec.evaluate(lam), lam + lam**2 + lam**3)

    def test_requires_polynomial_kind(self, make_graph, rng):
        graph = make_graph(n=10, k=3)
        ideal = FilterSpec(kind="ideal_low", cutoff_index=3)
        with pytest.raises(ValueError):
            apply_poly_filter(graph, ideal, rng.standard_normal(10))
        with pytest.raises(ValueError):
            ideal.evaluate(np.array([0.5]))

    def test_filterspec_validation(self):
        with pytest.raises(ValueError):
            FilterSpec(kind="polynomial")
        with pytest.raises(ValueError):
            FilterSpec(kind="ideal_low")
        with pytest.raises(ValueError):
            FilterSpec(kind="ideal_high", cutoff_index=0)
        with pytest.raises(ValueError):
            FilterSpec(kind="bandpass", coeffs=(1.0,))


class TestDesignFilter:
    def test_exact_fit_for_polynomial_targets(self, rng):
        lam = np.linspace(0.0, 2.0, 25)
        target = 0.7 * lam + 0.1 * lam**2
        fspec, err = design_filter(lam, target, degree=2)
        assert err < 1e-8
        assert np.allclose(fspec.coeffs, (0.7, 0.1), atol=1e-8)
        assert fspec.h0 == 0.0

    def test_include_constant_recovers_offset(self):
        lam = np.linspace(0.1, 1.9, 30)
        target = 0.4 + 0.2 * lam
        fspec, err = design_filter(lam, target, degree=1, include_constant=True)
        assert err < 1e-8
        assert fspec.h0 == pytest.approx(0.4, abs=1e-8)

    def test_chebyshev_carries_constant_term(self):
        lam = np.linspace(0.0, 2.0, 40)
        target = np.exp(-2.0 * lam)
        fspec, err = design_filter(lam, target, degree=6, method="chebyshev")
        assert err < 0.01
        assert fspec.h0 != 0.0

    def test_validation(self):
        lam = np.linspace(0.0, 2.0, 10)
        with pytest.raises(ValueError):
            design_filter(lam, lam[:-1], degree=2)
        with pytest.raises(ValueError):
            design_filter(lam, lam, degree=0)
        with pytest.raises(ValueError):
            design_filter(lam, lam, degree=2, method="remez")


def test_spectral_projection_regression_splits_signal(make_graph, rng):
    graph = make_graph(n=30, k=5)
    basis = eigendecompose(graph.laplacian)
    y = rng.standard_normal((30, 3))
    z, delta = spectral_projection_regression(basis, y, k_c=10)
    assert np.abs(z + delta - y).max() < 1e-12
    assert total_variation(graph, z) <= total_variation(graph, y) + 1e-12
