"""Coupling-versus-separation calibration and waveguide geometry design.

Transverse distances are in micrometres, couplings in cm^-1.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import LatticeError
from .lattice import jx_couplings

#: relative mismatch between model.j1 and the PST edge coupling tolerated by
#: :func:`design_geometry` before a note is attached
J1_TOLERANCE = 0.01


@dataclass(frozen=True)
class CouplingModel:
    """Exponential law J(d) = j1 * exp(-(d - d1) / kappa)."""

    j1: float
    d1: float
    kappa: float
    fit_range: tuple | None = None  # sampled distance range, if fitted

    def __post_init__(self):
        if not (self.j1 > 0 and self.kappa > 0):
            raise LatticeError("coupling model needs j1 > 0 and kappa > 0")

    def extrapolates(self, d) -> bool:
        if self.fit_range is None:
            return False
        d = np.asarray(d)
        lo, hi = self.fit_range
        return bool(np.any(d < lo) or np.any(d > hi))

    def to_dict(self) -> dict:
        out = {"j1_per_cm": self.j1, "d1_um": self.d1, "kappa_um": self.kappa}
        if self.fit_range is not None:
            out["fit_range_um"] = list(self.fit_range)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CouplingModel":
        rng = data.get("fit_range_um")
        return cls(
            float(data["j1_per_cm"]),
            float(data["d1_um"]),
            float(data["kappa_um"]),
            tuple(rng) if rng is not None else None,
        )


#: design constants with the tabulated first separation (18.12 um)
DESIGN_MODEL = CouplingModel(0.67, 18.12, 4.81)
#: design constants as quoted in the text (18.1 um)
DESIGN_MODEL_TEXT = CouplingModel(0.67, 18.1, 4.81)
#: calibration re-fitted from microscope-measured separations
MEASURED_MODEL = CouplingModel(0.67, 18.0, 4.63)

MODEL_PRESETS = {
    "design": DESIGN_MODEL,
    "design-text": DESIGN_MODEL_TEXT,
    "measured": MEASURED_MODEL,
    # long-standing aliases
    "paper-appendix-a": DESIGN_MODEL,
    "paper-appendix-a-text": DESIGN_MODEL_TEXT,
    "true": MEASURED_MODEL,
}


@dataclass(frozen=True, eq=False)
class GeometrySpec:
    """Gaps between neighbouring waveguides.

    ``separations[k]`` is the gap between guides k+1 and k+2. The optional
    ``dummy_separations`` pair holds the gaps to the left and right boundary
    dummy guides.
    """

    separations: np.ndarray
    dummy_separations: tuple | None = None
    notes: tuple = ()

    def __post_init__(self):
        sep = np.array(self.separations, dtype=float)
        if sep.ndim != 1 or sep.size < 1:
            raise LatticeError("geometry needs at least one separation")
        if np.any(~np.isfinite(sep)) or np.any(sep <= 0):
            raise LatticeError("all separations must be positive")
        sep.setflags(write=False)
        object.__setattr__(self, "separations", sep)
        if self.dummy_separations is not None:
            dummy = tuple(float(x) for x in self.dummy_separations)
            if len(dummy) != 2 or min(dummy) <= 0:
                raise LatticeError("dummy_separations must be two positive values")
            object.__setattr__(self, "dummy_separations", dummy)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def n_sites(self) -> int:
        return self.separations.size + 1

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "separations_um": self.separations.tolist(),
            "dummy_separations_um": list(self.dummy_separations) if self.dummy_separations else None,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeometrySpec":
        dummy = data.get("dummy_separations_um")
        return cls(data["separations_um"], tuple(dummy) if dummy else None, tuple(data.get("notes", ())))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        """Rows ``(site, separation_um)`` keyed by the left-hand guide of each gap.

        Site 0 is the left dummy guide and site N the gap to the right dummy,
        when dummies are present.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["site", "separation_um"])
        if self.dummy_separations:
            w.writerow([0, repr(self.dummy_separations[0])])
        for k, d in enumerate(self.separations, start=1):
            w.writerow([k, repr(float(d))])
        if self.dummy_separations:
            w.writerow([self.n_sites, repr(self.dummy_separations[1])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GeometrySpec":
        rows = list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))
        if not rows:
            raise LatticeError("geometry CSV has no rows")
        try:
            pairs = sorted((int(r["site"]), float(r["separation_um"])) for r in rows)
        except (KeyError, ValueError) as exc:
            raise LatticeError(f"malformed geometry CSV: {exc}") from None
        sites = [s for s, _ in pairs]
        values = [d for _, d in pairs]
        dummy = None
        if sites[0] == 0:
            n = sites[-1]
            if sites != list(range(0, n + 1)):
                raise LatticeError("geometry CSV sites must be contiguous")
            dummy = (values[0], values[-1])
            values = values[1:-1]
        elif sites != list(range(1, len(sites) + 1)):
            raise LatticeError("geometry CSV sites must be contiguous from 1")
        return cls(values, dummy)


#: intended and as-fabricated separations of the 19-guide transfer lattice
#: (um); first/last entries are the gaps to the boundary dummy guides
INTENDED_SEPARATIONS_19 = (
    17.0, 18.12, 16.59, 15.76, 15.22, 14.85, 14.59, 14.42, 14.3, 14.25,
    14.25, 14.3, 14.42, 14.59, 14.85, 15.22, 15.76, 16.59, 18.12, 17.0,
)
FABRICATED_SEPARATIONS_19 = (
    16.6, 18.3, 18.8, 15.8, 14.6, 14.3, 15.0, 14.3, 14.0, 14.0,
    14.9, 13.7, 14.0, 14.9, 15.1, 14.5, 15.1, 16.7, 18.1, 17.3,
)


def tabulated_geometry(values) -> GeometrySpec:
    return GeometrySpec(values[1:-1], (values[0], values[-1]))


def coupling_from_distance(model: CouplingModel, d):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise LatticeError("distances must be positive")
    out = model.j1 * np.exp(-(d - model.d1) / model.kappa)
    return float(out) if out.ndim == 0 else out


def distance_from_coupling(model: CouplingModel, j):
    j = np.asarray(j, dtype=float)
    if np.any(j <= 0):
        raise LatticeError("couplings must be positive")
    out = model.d1 - model.kappa * np.log(j / model.j1)
    return float(out) if out.ndim == 0 else out


def design_geometry(n_sites: int, transfer_length: float, model: CouplingModel) -> GeometrySpec:
    """Separations d_n = d1 - kappa ln sqrt(n (N - n) / (N - 1)).

    The profile is anchored at d1 for the edge gap, which presumes that
    ``model.j1`` equals the PST edge coupling; a mismatch beyond
    :data:`J1_TOLERANCE` is recorded in ``notes``.
    """
    j_edge = float(jx_couplings(n_sites, transfer_length)[0])
    n = np.arange(1, n_sites)
    seps = model.d1 - model.kappa * np.log(np.sqrt(n * (n_sites - n) / (n_sites - 1)))
    if np.any(seps <= 0):
        raise LatticeError("designed separations are non-positive; model extrapolated too far")
    notes = []
    rel = abs(model.j1 - j_edge) / j_edge
    if rel > J1_TOLERANCE:
        notes.append(
            f"model j1={model.j1:.6g} differs from PST edge coupling {j_edge:.6g} by {rel:.2%}"
        )
    if model.extrapolates(seps):
        notes.append("designed separations leave the calibrated distance range")
    return GeometrySpec(seps, notes=tuple(notes))


@dataclass(frozen=True)
class CouplingFit:
    model: CouplingModel
    rms_log_residual: float
    n_samples: int
    slope: float  # d ln J / d d, in 1/um


def fit_coupling_model(samples, reference_d1: float) -> CouplingFit:
    """Least-squares fit of ln J against d, re-expressed at ``reference_d1``."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
        raise LatticeError("need at least two (distance, coupling) samples")
    d, j = data[:, 0], data[:, 1]
    if np.any(j <= 0):
        raise LatticeError("couplings must be positive to fit in the log domain")
    if np.ptp(d) == 0:
        raise LatticeError("samples must span at least two distinct distances")
    a = np.column_stack([np.ones_like(d), d - reference_d1])
    (intercept, slope), *_ = np.linalg.lstsq(a, np.log(j), rcond=None)
    if not slope < 0:
        raise LatticeError("fitted coupling does not decay with distance")
    resid = np.log(j) - a @ np.array([intercept, slope])
    model = CouplingModel(
        float(math.exp(intercept)), float(reference_d1), float(-1.0 / slope), (float(d.min()), float(d.max()))
    )
    return CouplingFit(model, float(np.sqrt(np.mean(resid ** 2))), int(d.size), float(slope))


def realize_couplings(geometry: GeometrySpec, model: CouplingModel) -> np.ndarray:
    return np.atleast_1d(coupling_from_distance(model, geometry.separations))


def load_calibration_csv(text: str) -> np.ndarray:
    """Parse ``distance_um,coupling_per_cm`` rows into an (n, 2) array."""
    rows = list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))
    try:
        return np.array([[float(r["distance_um"]), float(r["coupling_per_cm"])] for r in rows])
    except (KeyError, ValueError) as exc:
        raise LatticeError(f"malformed calibration CSV: {exc}") from None
