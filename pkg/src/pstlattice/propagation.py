"""Single-excitation propagation along Z.

Convention: amplitudes evolve as psi(Z) = exp(-i H Z) psi(0), i.e.
T(Z) = V diag(exp(-i lam Z)) V^T. The opposite sign exp(+i lam Z) gives the
complex conjugate matrix; intensities and correlations are unchanged.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .exceptions import LatticeError, RevivalError
from .lattice import (
    LatticeSpec,
    SpectralDecomposition,
    build_coupling_matrix,
    numeric_eigendecomposition,
)

UNITARY_TOL = 1e-10
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class Propagator:
    matrix: np.ndarray
    distance: float
    source_spec: LatticeSpec | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def unitarity_error(self) -> float:
        t = self.matrix
        return float(np.max(np.abs(t.conj().T @ t - np.eye(t.shape[0]))))


@dataclass(frozen=True, eq=False)
class FidelityReport:
    z_grid: np.ndarray
    fidelity_curve: np.ndarray
    optimum_z: float
    optimum_fidelity: float
    input_site: int | None = None
    target_site: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z_cm", "fidelity"])
        for z, f in zip(self.z_grid, self.fidelity_curve):
            w.writerow([repr(float(z)), repr(float(f))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "input_site": self.input_site,
            "target_site": self.target_site,
            "optimum_z_cm": self.optimum_z,
            "optimum_fidelity": self.optimum_fidelity,
            "z_cm": self.z_grid.tolist(),
            "fidelity": self.fidelity_curve.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "FidelityReport":
        return cls(
            np.asarray(data["z_cm"], dtype=float),
            np.asarray(data["fidelity"], dtype=float),
            float(data["optimum_z_cm"]),
            float(data["optimum_fidelity"]),
            data.get("input_site"),
            data.get("target_site"),
        )


def spectrum(spec: LatticeSpec) -> SpectralDecomposition:
    return numeric_eigendecomposition(build_coupling_matrix(spec))


def propagator(
    spec: LatticeSpec, distance: float, decomposition: SpectralDecomposition | None = None
) -> Propagator:
    if not distance >= 0:
        raise LatticeError(f"distance must be >= 0, got {distance}")
    if distance == 0:
        return Propagator(np.eye(spec.n_sites, dtype=complex), 0.0, spec)
    dec = decomposition if decomposition is not None else spectrum(spec)
    v = dec.eigenvectors
    phase = np.exp(-1j * dec.eigenvalues * distance)
    return Propagator((v * phase) @ v.T, float(distance), spec)


def _check_site(site, n):
    if int(site) != site or not 1 <= site <= n:
        raise LatticeError(f"site {site} out of range 1..{n}")
    return int(site)


def photon_density(t: Propagator, input_site: int) -> np.ndarray:
    q = _check_site(input_site, t.n)
    return np.abs(t.matrix[:, q - 1]) ** 2


def _log_binom(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _pow(base, exponent):
    # 0**0 -> 1 at the transfer point
    return 1.0 if exponent == 0 else base ** exponent


def fidelity_site1(n_sites: int, target_site: int, distance: float, transfer_length: float) -> float:
    """Probability of finding an excitation launched at site 1 at ``target_site``."""
    if n_sites < 2 or not transfer_length > 0 or distance < 0:
        raise LatticeError("invalid arguments to fidelity_site1")
    n = _check_site(target_site, n_sites)
    theta = math.pi * distance / (2.0 * transfer_length)
    c2 = math.cos(theta) ** 2
    s2 = math.sin(theta) ** 2
    binom = math.exp(_log_binom(n_sites - 1, n - 1))
    return binom * _pow(c2, n_sites - n) * _pow(s2, n - 1)


def transfer_fidelity_edge(n_sites: int, distance: float, transfer_length: float) -> float:
    """End-to-end fidelity sin(pi Z / 2 z_f)^(2(N-1))."""
    return fidelity_site1(n_sites, n_sites, distance, transfer_length)


def revival_signature(spec: LatticeSpec, atol: float = 1e-8) -> int:
    """Sign s of T(2 z_f) = s * I; raises :class:`RevivalError` otherwise."""
    t = propagator(spec, 2.0 * spec.transfer_length).matrix
    phi = np.trace(t) / spec.n_sites
    if abs(abs(phi) - 1.0) > atol or np.max(np.abs(t - phi * np.eye(spec.n_sites))) > atol:
        raise RevivalError("T(2 z_f) is not proportional to the identity")
    if abs(phi.imag) > atol or abs(abs(phi.real) - 1.0) > atol:
        raise RevivalError(f"revival phase {phi} is not +-1")
    return 1 if phi.real > 0 else -1


class _TransferCurve:
    """Target-site intensity as a function of Z for a fixed input state."""

    def __init__(self, spec, input_state, target_site, decomposition=None):
        dec = decomposition if decomposition is not None else spectrum(spec)
        psi = np.asarray(input_state, dtype=complex)
        coeff = dec.eigenvectors.T @ psi
        self.evals = np.ascontiguousarray(dec.eigenvalues, dtype=float)
        self.weights = np.ascontiguousarray(dec.eigenvectors[target_site - 1, :] * coeff)
        self.norm = float(np.vdot(psi, psi).real)

    def __call__(self, zs):
        zs = np.ascontiguousarray(np.atleast_1d(zs), dtype=float)
        return kernels.scan_intensity(self.evals, self.weights, zs) / self.norm


def _golden_max(f, a, b, tol=1e-10, max_iter=200):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def optimum_transfer_scan(
    spec: LatticeSpec,
    input_site: int = 1,
    target_site: int | None = None,
    z_min: float = 0.0,
    z_max: float | None = None,
    step: float = 0.01,
    input_state=None,
    decomposition: SpectralDecomposition | None = None,
) -> FidelityReport:
    """Scan the target intensity over [z_min, z_max] and locate its maximum.

    ``input_state`` (an amplitude vector) overrides ``input_site``. The grid
    maximum is refined by golden-section search inside its neighbouring cells;
    the refined point is merged into the returned grid.
    """
    n = spec.n_sites
    if target_site is None:
        target_site = n + 1 - input_site
    target_site = _check_site(target_site, n)
    if input_state is None:
        input_site = _check_site(input_site, n)
        input_state = np.zeros(n)
        input_state[input_site - 1] = 1.0
    else:
        input_state = np.asarray(input_state)
        if input_state.shape != (n,):
            raise LatticeError(f"input_state must have length {n}")
        input_site = None
    if z_max is None:
        z_max = 2.0 * spec.transfer_length
    if not (z_max > z_min >= 0) or not step > 0:
        raise LatticeError(f"empty scan range [{z_min}, {z_max}] with step {step}")

    curve = _TransferCurve(spec, input_state, target_site, decomposition)
    n_pts = int(math.floor((z_max - z_min) / step + 1e-9)) + 1
    zs = z_min + step * np.arange(n_pts)
    if zs[-1] < z_max - 1e-12:
        zs = np.append(zs, z_max)
    fid = curve(zs)

    i = int(np.argmax(fid))
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, len(zs) - 1)]
    z_opt, f_opt = _golden_max(lambda z: float(curve(z)[0]), lo, hi)
    if f_opt > fid[i] and not np.any(zs == z_opt):
        j = int(np.searchsorted(zs, z_opt))
        zs = np.insert(zs, j, z_opt)
        fid = np.insert(fid, j, f_opt)
    else:
        z_opt, f_opt = float(zs[i]), float(fid[i])
    return FidelityReport(zs, fid, float(z_opt), float(f_opt), input_site, target_site)


def density_map(spec: LatticeSpec, input_site: int, zs) -> np.ndarray:
    """|T_{p,q}(Z)|^2 on a Z grid; rows follow ``zs``, columns are sites."""
    q = _check_site(input_site, spec.n_sites)
    dec = spectrum(spec)
    v = dec.eigenvectors
    zs = np.asarray(zs, dtype=float)
    phases = np.exp(-1j * np.outer(zs, dec.eigenvalues))
    amps = (phases * v[q - 1, :]) @ v.T
    return np.abs(amps) ** 2
