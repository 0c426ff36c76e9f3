"""Two-particle arrival correlations and their classical emulation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import DataQualityError, LatticeError, NonUnitaryError
from .propagation import Propagator

STATISTICS = ("boson", "fermion")
UNITARY_TOL = 1e-8
EXACT_CLAMP = 1e-12


@dataclass(frozen=True)
class TwoParticleInput:
    site_a: int
    site_b: int
    statistics: str = "boson"

    def __post_init__(self):
        if self.site_a == self.site_b:
            raise LatticeError("two-particle input needs two distinct sites")
        if self.statistics not in STATISTICS:
            raise LatticeError(f"statistics must be one of {STATISTICS}")


@dataclass(frozen=True)
class PhaseAveragingPlan:
    mode: str = "exact_grid"
    sample_count: int = 4
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact_grid", "random"):
            raise LatticeError(f"unknown phase-averaging mode {self.mode!r}")
        if self.mode == "exact_grid" and self.sample_count < 3:
            raise LatticeError("exact_grid averaging needs at least 3 phases")
        if self.sample_count < 1:
            raise LatticeError("sample_count must be positive")
        if self.mode == "random" and self.seed is None:
            raise LatticeError("random mode needs a seed")

    def phases(self) -> np.ndarray:
        m = self.sample_count
        if self.mode == "exact_grid":
            return 2.0 * np.pi * np.arange(m) / m
        # one independent stream per sample index: any partition of the
        # samples reproduces the same phases
        return np.array(
            [np.random.default_rng([self.seed, k]).uniform(0.0, 2.0 * np.pi) for k in range(m)]
        )


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    values: np.ndarray
    distance: float | None
    statistics: str
    input_sites: tuple
    mode: str | None = None
    seed: int | None = None
    clamped: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.values.shape[0]

    def metadata(self) -> dict:
        return {
            "z_cm": self.distance,
            "statistics": self.statistics,
            "input_sites": list(self.input_sites),
            "mode": self.mode,
            "seed": self.seed,
            "clamped_entries": self.clamped,
            **self.meta,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "value"])
        for i in range(self.n):
            for j in range(self.n):
                w.writerow([i + 1, j + 1, repr(float(self.values[i, j]))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {**self.metadata(), "matrix": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationMatrix":
        return cls(
            np.asarray(data["matrix"], dtype=float),
            data.get("z_cm"),
            data["statistics"],
            tuple(data["input_sites"]),
            data.get("mode"),
            data.get("seed"),
            data.get("clamped_entries", 0),
        )


def _check_unitary(t: Propagator):
    err = t.unitarity_error()
    if err > UNITARY_TOL:
        raise NonUnitaryError(f"propagator deviates from unitarity by {err:.3g}")


def two_particle_correlation(t: Propagator, inp: TwoParticleInput) -> CorrelationMatrix:
    """Gamma_{m,n} = |T_mq T_nr +- T_mr T_nq|^2 (+ bosons, - fermions)."""
    _check_unitary(t)
    n = t.n
    for s in (inp.site_a, inp.site_b):
        if not 1 <= s <= n:
            raise LatticeError(f"input site {s} out of range 1..{n}")
    a = np.ascontiguousarray(t.matrix[:, inp.site_a - 1])
    b = np.ascontiguousarray(t.matrix[:, inp.site_b - 1])
    sign = 1.0 if inp.statistics == "boson" else -1.0
    gamma = kernels.pair_correlation(a, b, sign)
    return CorrelationMatrix(gamma, t.distance, inp.statistics, (inp.site_a, inp.site_b))


def correlation_closed_form(n_sites: int, m: int, n: int, statistics: str) -> float:
    """Gamma_{m,n} at Z = z_f/2 for particles launched at sites 1 and N."""
    if statistics not in STATISTICS:
        raise LatticeError(f"statistics must be one of {STATISTICS}")
    if not (1 <= m <= n_sites and 1 <= n <= n_sites):
        raise LatticeError("site out of range")
    odd = (n - m) % 2 == 1
    if odd != (statistics == "fermion"):
        return 0.0
    return math.comb(n_sites - 1, m - 1) * math.comb(n_sites - 1, n - 1) / 2.0 ** (2 * n_sites - 4)


def correlation_closed_form_matrix(n_sites: int, statistics: str) -> np.ndarray:
    idx = range(1, n_sites + 1)
    return np.array([[correlation_closed_form(n_sites, m, n, statistics) for n in idx] for m in idx])


def classical_intensity(t: Propagator, phase: float) -> np.ndarray:
    """Output intensities for unit-amplitude beams into sites 1 and N with relative phase."""
    field_ = t.matrix[:, 0] + np.exp(1j * phase) * t.matrix[:, -1]
    return np.abs(field_) ** 2


def classical_emulated_correlation(t: Propagator, plan: PhaseAveragingPlan) -> CorrelationMatrix:
    """Bosonic correlation recovered from phase-averaged classical intensities.

    Averages I_n(phi) I_m(phi) over the plan's phases and subtracts the
    single-beam products I_{n,1} I_{m,1} + I_{n,N} I_{m,N}. Negative entries
    within three standard errors of zero (or within rounding, in exact mode)
    are clamped to zero; anything worse raises :class:`DataQualityError`.
    """
    _check_unitary(t)
    a = np.ascontiguousarray(t.matrix[:, 0])
    b = np.ascontiguousarray(t.matrix[:, -1])
    phases = plan.phases()
    first, second = kernels.phase_moments(a, b, np.ascontiguousarray(phases))
    ia = np.abs(a) ** 2
    ib = np.abs(b) ** 2
    gamma = first - np.outer(ia, ia) - np.outer(ib, ib)

    if plan.mode == "exact_grid":
        slack = np.full(gamma.shape, EXACT_CLAMP)
    else:
        m = len(phases)
        var = np.maximum(second - first ** 2, 0.0) * m / max(m - 1, 1)
        slack = 3.0 * np.sqrt(var / m) + EXACT_CLAMP
    neg = gamma < 0
    if np.any(gamma < -slack):
        worst = float(gamma.min())
        raise DataQualityError(f"correlation entry {worst:.3g} is significantly negative")
    clamped = int(np.count_nonzero(neg))
    gamma = np.where(neg, 0.0, gamma)
    return CorrelationMatrix(
        gamma,
        t.distance,
        "classical",
        (1, t.n),
        plan.mode,
        plan.seed,
        clamped,
        {"sample_count": plan.sample_count},
    )
