import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_jacobi

from pstlattice import (
    LatticeError,
    LatticeSpec,
    analytic_eigenvalues,
    analytic_eigenvector,
    build_coupling_matrix,
    jacobi_at_zero,
    jx_couplings,
    numeric_eigendecomposition,
)
from pstlattice.lattice import CouplingMatrix, exchange_matrix


def jacobi_recurrence(n, a, b, x):
    # three-term recurrence, valid for a, b >= 0
    if n == 0:
        return 1.0
    p0, p1 = 1.0, 0.5 * (a - b + (a + b + 2.0) * x)
    for k in range(2, n + 1):
        apb = a + b
        a1 = 2.0 * k * (k + apb) * (2.0 * k + apb - 2.0)
        a2 = (2.0 * k + apb - 1.0) * (a * a - b * b)
        a3 = (2.0 * k + apb - 2.0) * (2.0 * k + apb - 1.0) * (2.0 * k + apb)
        a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * (2.0 * k + apb)
        p0, p1 = p1, ((a2 + a3 * x) * p1 - a4 * p0) / a1
    return p1


class TestCouplings:
    def test_two_sites(self):
        assert jx_couplings(2, 1.0) == pytest.approx([math.pi / 2], abs=1e-15)

    def test_nineteen_sites(self):
        j = jx_couplings(19, 10.0)
        assert j[0] == pytest.approx(0.6664, abs=5e-5)
        assert j[8] == j[9] == pytest.approx(math.pi * math.sqrt(90) / 20, rel=1e-15)
        assert j[8] == pytest.approx(1.4902, abs=5e-5)

    def test_mirror_symmetric(self):
        for n in range(2, 40):
            j = jx_couplings(n, 3.0)
            assert np.array_equal(j, j[::-1])

    @pytest.mark.parametrize("n,zf", [(1, 1.0), (0, 1.0), (5, 0.0), (5, -1.0)])
    def test_rejects(self, n, zf):
        with pytest.raises(LatticeError):
            jx_couplings(n, zf)


class TestSpec:
    def test_validation(self):
        with pytest.raises(LatticeError):
            LatticeSpec(3, 1.0, [1.0])
        with pytest.raises(LatticeError):
            LatticeSpec(3, 1.0, [1.0, 1.0], [0.0, 0.0])
        with pytest.raises(LatticeError):
            LatticeSpec(3, 0.0, [1.0, 1.0])

    def test_immutable(self):
        spec = LatticeSpec.ideal(5, 1.0)
        with pytest.raises(ValueError):
            spec.couplings[0] = 3.0

    def test_json_round_trip(self):
        spec = LatticeSpec(4, 2.5, [0.1, 0.2, 0.3], [8.7, 0, 0, 1.0])
        back = LatticeSpec.from_json(spec.to_json())
        assert back.n_sites == 4 and back.transfer_length == 2.5
        assert np.array_equal(back.couplings, spec.couplings)
        assert np.array_equal(back.detunings, spec.detunings)
        assert set(spec.to_dict()) == {"n_sites", "transfer_length_cm", "couplings_per_cm", "detunings_per_cm"}

    def test_default_detunings(self):
        assert np.array_equal(LatticeSpec.ideal(4, 1.0).detunings, np.zeros(4))


class TestCouplingMatrix:
    def test_two_site(self):
        h = build_coupling_matrix(LatticeSpec(2, 1.0, [0.7])).dense()
        assert np.array_equal(h, [[0, 0.7], [0.7, 0]])

    def test_three_site_ideal(self):
        h = build_coupling_matrix(LatticeSpec.ideal(3, 1.0)).dense()
        off = math.pi * math.sqrt(2) / 2
        assert np.allclose(np.diag(h, 1), [off, off], atol=1e-15)
        assert np.array_equal(np.diag(h), np.zeros(3))

    def test_detuned(self):
        spec = LatticeSpec(3, 1.0, [1.0, 1.0], [8.7, 0.0, 0.0])
        h = build_coupling_matrix(spec).dense()
        assert np.array_equal(np.diag(h), [8.7, 0, 0])
        assert np.array_equal(h, h.T)
        assert np.all(np.triu(h, 2) == 0)

    def test_exchange_commutes(self):
        for n in (2, 5, 19, 64):
            h = build_coupling_matrix(LatticeSpec.ideal(n, 10.0)).dense()
            r = exchange_matrix(n)
            assert np.max(np.abs(r @ h - h @ r)) <= 1e-12


class TestEigen:
    def test_analytic_ladder_small(self):
        zf = 2.0
        assert np.allclose(analytic_eigenvalues(2, zf), [-math.pi / (2 * zf), math.pi / (2 * zf)])
        assert np.allclose(analytic_eigenvalues(3, zf), [-math.pi / zf, 0, math.pi / zf])

    def test_analytic_ladder_19(self):
        lam = analytic_eigenvalues(19, 10.0)
        assert lam[0] == pytest.approx(-2.827, abs=5e-4)
        assert lam[-1] == pytest.approx(2.827, abs=5e-4)
        assert np.allclose(np.diff(lam), 0.3142, atol=5e-5)

    def test_numeric_two_site(self):
        dec = numeric_eigendecomposition(build_coupling_matrix(LatticeSpec(2, 1.0, [1.0])))
        assert np.allclose(dec.eigenvalues, [-1, 1], atol=1e-15)

    def test_numeric_diagonal(self):
        beta = np.array([3.0, -1.0, 2.0, 0.5])
        dec = numeric_eigendecomposition(CouplingMatrix(beta, np.zeros(3)))
        order = np.argsort(beta)
        assert np.array_equal(dec.eigenvalues, beta[order])
        assert np.array_equal(np.abs(dec.eigenvectors), np.eye(4)[:, order])

    @pytest.mark.parametrize("n", [2, 3, 8, 19, 33, 64])
    def test_invariants(self, n):
        spec = LatticeSpec.ideal(n, 10.0)
        h = build_coupling_matrix(spec).dense()
        dec = numeric_eigendecomposition(build_coupling_matrix(spec))
        v, lam = dec.eigenvectors, dec.eigenvalues
        assert np.max(np.abs(v.T @ v - np.eye(n))) <= 1e-12
        assert np.max(np.abs(h @ v - v * lam)) <= 1e-10 * np.max(np.abs(lam))
        assert np.all(np.diff(lam) > 0)
        gap = math.pi / 10.0
        assert np.max(np.abs(np.diff(lam) - gap)) <= 1e-10 * gap
        assert np.max(np.abs(lam - analytic_eigenvalues(n, 10.0))) <= 1e-9

    def test_sign_convention(self):
        dec = numeric_eigendecomposition(build_coupling_matrix(LatticeSpec.ideal(9, 1.0)))
        for col in dec.eigenvectors.T:
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0

    def test_non_finite_rejected(self):
        from pstlattice import EigensolverError

        with pytest.raises(EigensolverError):
            numeric_eigendecomposition(CouplingMatrix(np.array([np.nan, 0.0]), np.array([1.0])))


class TestJacobi:
    def test_examples(self):
        assert jacobi_at_zero(0, 3, 5) == 1.0
        assert jacobi_at_zero(1, 1, 0) == 0.5
        assert jacobi_at_zero(2, 0, 0) == -0.5

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 30), st.integers(0, 12), st.integers(0, 12))
    def test_matches_recurrence(self, order, a, b):
        ref = jacobi_recurrence(order, a, b, 0.0)
        assert jacobi_at_zero(order, a, b) == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert jacobi_at_zero(order, a, b) == pytest.approx(eval_jacobi(order, a, b, 0.0), rel=1e-9, abs=1e-12)


class TestAnalyticEigenvector:
    def test_two_sites(self):
        s = 1 / math.sqrt(2)
        assert np.allclose(analytic_eigenvector(1, 2), [s, -s])
        assert np.allclose(analytic_eigenvector(2, 2), [s, s])

    def test_three_site_middle(self):
        assert np.allclose(analytic_eigenvector(2, 3), [1 / math.sqrt(2), 0, -1 / math.sqrt(2)], atol=1e-15)

    @pytest.mark.parametrize("n", [2, 3, 4, 7, 19, 25, 40, 64])
    def test_matches_numeric(self, n):
        dec = numeric_eigendecomposition(build_coupling_matrix(LatticeSpec.ideal(n, 10.0)))
        for k in range(1, n + 1):
            u = analytic_eigenvector(k, n)
            assert np.max(np.abs(u - dec.eigenvectors[:, k - 1])) <= 1e-8

    def test_range(self):
        with pytest.raises(LatticeError):
            analytic_eigenvector(0, 4)
        with pytest.raises(LatticeError):
            analytic_eigenvector(5, 4)
        with pytest.raises(LatticeError):
            analytic_eigenvector(1, 10_000)
