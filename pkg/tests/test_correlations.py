import numpy as np
import pytest

from conftest import two_particle_oracle
from pstlattice import (
    DataQualityError,
    LatticeError,
    LatticeSpec,
    NonUnitaryError,
    PhaseAveragingPlan,
    TwoParticleInput,
    classical_emulated_correlation,
    classical_intensity,
    correlation_closed_form,
    propagator,
    two_particle_correlation,
)
from pstlattice.correlations import CorrelationMatrix, correlation_closed_form_matrix
from pstlattice.propagation import Propagator


def random_pst_spec(rng, n, zf=10.0):
    half = rng.uniform(0.3, 2.0, (n - 1 + 1) // 2)
    couplings = np.concatenate([half, half[::-1][(n - 1) % 2:]])
    return LatticeSpec(n, zf, couplings)


class TestTwoParticle:
    def test_identity(self):
        t = Propagator(np.eye(3, dtype=complex), 0.0)
        g = two_particle_correlation(t, TwoParticleInput(1, 2, "boson")).values
        expect = np.zeros((3, 3))
        expect[0, 1] = expect[1, 0] = 1
        assert np.array_equal(g, expect)

    def test_two_site_coupler(self):
        t = propagator(LatticeSpec.ideal(2, 1.0), 0.5)
        b = two_particle_correlation(t, TwoParticleInput(1, 2, "boson")).values
        f = two_particle_correlation(t, TwoParticleInput(1, 2, "fermion")).values
        assert np.allclose(b, [[1, 0], [0, 1]], atol=1e-14)
        assert np.allclose(f, [[0, 1], [1, 0]], atol=1e-14)

    def test_n21_corner(self):
        t = propagator(LatticeSpec.ideal(21, 10.0), 5.0)
        g = two_particle_correlation(t, TwoParticleInput(1, 21, "boson")).values
        assert g[0, 0] == pytest.approx(2.0 ** -38, rel=1e-8)

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    @pytest.mark.parametrize("stats", ["boson", "fermion"])
    def test_brute_force_oracle(self, n, stats):
        rng = np.random.default_rng(n)
        spec = LatticeSpec(n, 1.0, rng.uniform(0.2, 1.5, n - 1), rng.normal(0, 0.5, n))
        for z in (0.3, 1.7):
            q, r = sorted(rng.choice(np.arange(1, n + 1), 2, replace=False))
            g = two_particle_correlation(propagator(spec, z), TwoParticleInput(q, r, stats)).values
            assert np.allclose(g, two_particle_oracle(spec, z, q, r, stats), atol=1e-10)

    @pytest.mark.parametrize("stats", ["boson", "fermion"])
    def test_invariants(self, stats):
        rng = np.random.default_rng(11)
        spec = LatticeSpec.ideal(12, 3.0)
        for z in rng.uniform(0, 6, 5):
            t = propagator(spec, z)
            g = two_particle_correlation(t, TwoParticleInput(2, 9, stats)).values
            assert np.array_equal(g, g.T)
            assert g.sum() == pytest.approx(2.0, abs=1e-10)
            assert np.all(g >= 0)
            if stats == "fermion":
                assert np.max(np.abs(np.diag(g))) <= 1e-14
            swapped = two_particle_correlation(t, TwoParticleInput(9, 2, stats)).values
            assert np.allclose(g, swapped, atol=1e-15)

    def test_rejects_non_unitary(self):
        with pytest.raises(NonUnitaryError):
            two_particle_correlation(Propagator(2 * np.eye(3, dtype=complex), 0.0), TwoParticleInput(1, 2))

    def test_input_validation(self):
        with pytest.raises(LatticeError):
            TwoParticleInput(2, 2)
        with pytest.raises(LatticeError):
            TwoParticleInput(1, 2, "anyon")


class TestClosedForm:
    def test_examples(self):
        assert correlation_closed_form(4, 1, 2, "fermion") == pytest.approx(3 / 16)
        assert correlation_closed_form(4, 1, 1, "fermion") == 0
        assert correlation_closed_form(4, 1, 3, "boson") == pytest.approx(3 / 16)
        assert correlation_closed_form(4, 1, 2, "boson") == 0
        for n in (3, 10, 21):
            assert correlation_closed_form(n, 1, 1, "boson") == 2.0 ** -(2 * n - 4)

    @pytest.mark.parametrize("n", [4, 5])
    @pytest.mark.parametrize("stats", ["boson", "fermion"])
    def test_brute_force_oracle(self, n, stats):
        spec = LatticeSpec.ideal(n, 10.0)
        assert np.allclose(correlation_closed_form_matrix(n, stats),
                           two_particle_oracle(spec, 5.0, 1, n, stats), atol=1e-12)

    @pytest.mark.parametrize("n", list(range(3, 25)))
    def test_matches_propagation(self, n):
        t = propagator(LatticeSpec.ideal(n, 10.0), 5.0)
        for stats in ("boson", "fermion"):
            g = two_particle_correlation(t, TwoParticleInput(1, n, stats)).values
            assert np.max(np.abs(g - correlation_closed_form_matrix(n, stats))) <= 1e-10


class TestClassical:
    def test_identity(self):
        t = Propagator(np.eye(5, dtype=complex), 0.0)
        for phi in (0.0, 1.0, 4.0):
            assert np.allclose(classical_intensity(t, phi), [1, 0, 0, 0, 1])

    def test_two_site(self):
        t = propagator(LatticeSpec.ideal(2, 1.0), 0.5)
        assert np.allclose(classical_intensity(t, 0.0), [1, 1], atol=1e-14)

    def test_power(self):
        t = propagator(LatticeSpec.ideal(9, 2.0), 0.77)
        for phi in np.linspace(0, 2 * np.pi, 9):
            assert classical_intensity(t, phi).sum() == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("m", [3, 4, 7])
    def test_exact_grid_equals_boson(self, m):
        rng = np.random.default_rng(m)
        for n in (2, 5, 13, 22):
            spec = random_pst_spec(rng, n)
            t = propagator(spec, rng.uniform(0, 20))
            c = classical_emulated_correlation(t, PhaseAveragingPlan("exact_grid", m)).values
            b = two_particle_correlation(t, TwoParticleInput(1, n, "boson")).values
            assert np.max(np.abs(c - b)) <= 1e-12
            assert np.array_equal(c, c.T)

    def test_two_site_dip(self):
        t = propagator(LatticeSpec.ideal(2, 1.0), 0.5)
        c = classical_emulated_correlation(t, PhaseAveragingPlan("exact_grid", 4)).values
        assert abs(c[0, 1]) <= 1e-14

    def test_random_mode(self):
        t = propagator(LatticeSpec.ideal(21, 10.0), 5.0)
        exact = two_particle_correlation(t, TwoParticleInput(1, 21, "boson")).values
        res = classical_emulated_correlation(t, PhaseAveragingPlan("random", 3600, 2024))
        assert np.max(np.abs(res.values - exact)) < 0.05 * exact.max()
        again = classical_emulated_correlation(t, PhaseAveragingPlan("random", 3600, 2024))
        assert np.array_equal(res.values, again.values)

    def test_random_phases_partition_independent(self):
        plan = PhaseAveragingPlan("random", 50, 9)
        head = PhaseAveragingPlan("random", 20, 9).phases()
        assert np.array_equal(plan.phases()[:20], head)

    def test_plan_validation(self):
        with pytest.raises(LatticeError):
            PhaseAveragingPlan("exact_grid", 2)
        with pytest.raises(LatticeError):
            PhaseAveragingPlan("random", 10)

    def test_significant_negative_raises(self, monkeypatch):
        from pstlattice import correlations

        def fake(a, b, phases):
            n = a.shape[0]
            return -np.ones((n, n)), np.ones((n, n))

        monkeypatch.setattr(correlations.kernels, "phase_moments", fake)
        t = propagator(LatticeSpec.ideal(3, 1.0), 0.3)
        with pytest.raises(DataQualityError):
            classical_emulated_correlation(t, PhaseAveragingPlan("random", 5, 1))


def test_serialisation_round_trip():
    t = propagator(LatticeSpec.ideal(4, 1.0), 0.5)
    c = two_particle_correlation(t, TwoParticleInput(1, 4, "fermion"))
    back = CorrelationMatrix.from_dict(c.to_dict())
    assert np.array_equal(back.values, c.values)
    assert back.statistics == "fermion" and back.input_sites == (1, 4)
    rows = c.to_csv().splitlines()
    assert rows[0] == "row,col,value" and len(rows) == 17
