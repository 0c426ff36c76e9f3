"""Lattice definitions, the Jx coupling matrix and its spectrum.

Units: propagation distances in cm, couplings and detunings in cm^-1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .exceptions import EigensolverError, LatticeError

#: Largest chain for which :func:`analytic_eigenvector` is supported. Factorials
#: are handled in the log domain and the Jacobi values exactly, so the limit is
#: set by the double-precision range of the result, not by overflow.
MAX_ANALYTIC_SITES = 256

SIGN_THRESHOLD = 1e-12


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """A chain of ``n_sites`` coupled waveguides.

    ``couplings[k]`` couples sites k+1 and k+2 (1-based); ``detunings`` are the
    on-site propagation-constant offsets.
    """

    n_sites: int
    transfer_length: float
    couplings: np.ndarray
    detunings: np.ndarray | None = None

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 2:
            raise LatticeError(f"n_sites must be >= 2, got {self.n_sites}")
        if not self.transfer_length > 0:
            raise LatticeError(f"transfer_length must be > 0, got {self.transfer_length}")
        couplings = _frozen(self.couplings)
        detunings = np.zeros(n) if self.detunings is None else self.detunings
        detunings = _frozen(detunings)
        if couplings.shape != (n - 1,):
            raise LatticeError(f"expected {n - 1} couplings, got shape {couplings.shape}")
        if detunings.shape != (n,):
            raise LatticeError(f"expected {n} detunings, got shape {detunings.shape}")
        if not (np.all(np.isfinite(couplings)) and np.all(np.isfinite(detunings))):
            raise LatticeError("couplings and detunings must be finite")
        if np.any(couplings < 0):
            raise LatticeError("couplings must be non-negative")
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "transfer_length", float(self.transfer_length))
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "detunings", detunings)

    @classmethod
    def ideal(cls, n_sites: int, transfer_length: float) -> "LatticeSpec":
        return cls(n_sites, transfer_length, jx_couplings(n_sites, transfer_length))

    def replace(self, couplings=None, detunings=None) -> "LatticeSpec":
        return LatticeSpec(
            self.n_sites,
            self.transfer_length,
            self.couplings if couplings is None else couplings,
            self.detunings if detunings is None else detunings,
        )

    def is_mirror_symmetric(self, atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.couplings, self.couplings[::-1], rtol=0, atol=atol)
            and np.allclose(self.detunings, self.detunings[::-1], rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "transfer_length_cm": self.transfer_length,
            "couplings_per_cm": self.couplings.tolist(),
            "detunings_per_cm": self.detunings.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeSpec":
        try:
            return cls(
                data["n_sites"],
                data["transfer_length_cm"],
                data["couplings_per_cm"],
                data.get("detunings_per_cm"),
            )
        except KeyError as exc:
            raise LatticeError(f"lattice document is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LatticeSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric tridiagonal matrix stored as its diagonal and upper band."""

    diagonal: np.ndarray
    offdiagonal: np.ndarray

    @property
    def n(self) -> int:
        return self.diagonal.shape[0]

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column r is the r-th eigenvector


def _check_sites(n_sites, transfer_length=None):
    if int(n_sites) != n_sites or n_sites < 2:
        raise LatticeError(f"n_sites must be an integer >= 2, got {n_sites}")
    if transfer_length is not None and not transfer_length > 0:
        raise LatticeError(f"transfer_length must be > 0, got {transfer_length}")


def jx_couplings(n_sites: int, transfer_length: float) -> np.ndarray:
    """Perfect-transfer couplings J_n = pi sqrt(n (N - n)) / (2 z_f), n = 1..N-1."""
    _check_sites(n_sites, transfer_length)
    n = np.arange(1, n_sites)
    j = np.pi * np.sqrt(n * (n_sites - n)) / (2.0 * transfer_length)
    # n(N-n) is symmetric in integers, so the mirror symmetry is exact
    return j


def build_coupling_matrix(spec: LatticeSpec) -> CouplingMatrix:
    if spec.couplings.shape[0] != spec.n_sites - 1 or spec.detunings.shape[0] != spec.n_sites:
        raise LatticeError("coupling/detuning vector length does not match n_sites")
    return CouplingMatrix(spec.detunings, spec.couplings)


def analytic_eigenvalues(n_sites: int, transfer_length: float) -> np.ndarray:
    """Equidistant ladder pi*(k - (N-1)/2)/z_f, k = 0..N-1 (ascending)."""
    _check_sites(n_sites, transfer_length)
    k = np.arange(n_sites) - 0.5 * (n_sites - 1)
    return np.pi * k / transfer_length


def _gbinom(top: int, k: int) -> int:
    """Binomial coefficient with an arbitrary (possibly negative) integer top."""
    if k < 0:
        return 0
    num = 1
    for i in range(k):
        num *= top - i
    return num // math.factorial(k)


def _jacobi_at_zero_exact(order: int, alpha: int, beta: int) -> Fraction:
    # P_n^(a,b)(x) = sum_s C(n+a, n-s) C(n+b, s) ((x-1)/2)^s ((x+1)/2)^(n-s)
    total = 0
    for s in range(order + 1):
        term = _gbinom(order + alpha, order - s) * _gbinom(order + beta, s)
        total += -term if s % 2 else term
    return Fraction(total, 2 ** order)


def jacobi_at_zero(order: int, alpha: int, beta: int) -> float:
    """P_order^(alpha, beta)(0) for integer parameters, summed exactly."""
    if order < 0:
        raise ValueError("order must be >= 0")
    return float(_jacobi_at_zero_exact(int(order), int(alpha), int(beta)))


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Make the first component of magnitude > SIGN_THRESHOLD positive, per column."""
    vectors = np.array(vectors, dtype=float)
    if vectors.ndim == 1:
        return _fix_sign(vectors[:, None])[:, 0]
    for col in range(vectors.shape[1]):
        big = np.flatnonzero(np.abs(vectors[:, col]) > SIGN_THRESHOLD)
        if big.size and vectors[big[0], col] < 0:
            vectors[:, col] = -vectors[:, col]
    return vectors


def analytic_eigenvector(eigen_index: int, n_sites: int) -> np.ndarray:
    """Closed-form Jx eigenvector via Jacobi polynomials at the origin.

    ``eigen_index`` counts eigenvalues in ascending order (1 is the most
    negative), so the result lines up with column ``eigen_index - 1`` of
    :func:`numeric_eigendecomposition`. In the closed form the polynomial order
    labels the eigenvector and the second Jacobi index runs over the sites;
    label ``L`` belongs to the eigenvalue pi*((N+1)/2 - L)/z_f. The z_f-dependent
    prefactor is a per-vector constant and is dropped by the normalisation.
    """
    _check_sites(n_sites)
    if n_sites > MAX_ANALYTIC_SITES:
        raise LatticeError(f"analytic eigenvectors supported for N <= {MAX_ANALYTIC_SITES}")
    if not 1 <= eigen_index <= n_sites:
        raise LatticeError(f"eigen_index must be in 1..{n_sites}")
    N = n_sites
    label = N + 1 - eigen_index
    log_num = math.lgamma(label) + math.lgamma(N - label + 1)
    comps = np.empty(N)
    for site in range(1, N + 1):
        p = _jacobi_at_zero_exact(label - 1, site - label, N - site - label + 1)
        if p == 0:
            comps[site - 1] = 0.0
            continue
        log_p = math.log(abs(p.numerator)) - math.log(p.denominator)
        log_mag = log_p + 0.5 * (log_num - math.lgamma(site) - math.lgamma(N - site + 1))
        comps[site - 1] = math.copysign(math.exp(log_mag), p)
    comps /= np.linalg.norm(comps)
    return _fix_sign(comps)


def analytic_eigenvectors(n_sites: int) -> np.ndarray:
    return np.column_stack([analytic_eigenvector(k, n_sites) for k in range(1, n_sites + 1)])


def numeric_eigendecomposition(h: CouplingMatrix) -> SpectralDecomposition:
    """Full eigendecomposition of a symmetric tridiagonal matrix (ascending).

    Raises :class:`EigensolverError` if LAPACK fails or returns non-finite data.
    """
    d = np.asarray(h.diagonal, dtype=float)
    e = np.asarray(h.offdiagonal, dtype=float)
    try:
        if d.shape[0] == 1:
            w, v = d.copy(), np.ones((1, 1))
        else:
            w, v = eigh_tridiagonal(d, e, lapack_driver="stemr")
    except (LinAlgError, ValueError) as exc:
        raise EigensolverError(f"tridiagonal eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise EigensolverError("tridiagonal eigensolver returned non-finite values")
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = _fix_sign(v[:, order])
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(w, v)


def exchange_matrix(n: int) -> np.ndarray:
    return np.eye(n)[::-1]
