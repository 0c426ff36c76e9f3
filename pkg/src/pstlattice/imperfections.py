"""Fabrication error channels and their effect on edge-to-edge transfer."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .exceptions import EigensolverError, GapCollisionError, LatticeError
from .fabrication import (
    FABRICATED_SEPARATIONS_19,
    MEASURED_MODEL,
    CouplingModel,
    DESIGN_MODEL_TEXT,
    GeometrySpec,
    coupling_from_distance,
    design_geometry,
    realize_couplings,
    tabulated_geometry,
)
from .lattice import LatticeSpec, jx_couplings
from .propagation import optimum_transfer_scan

CHANNELS = ("calibration_bias", "as_built_geometry", "dummy_guides", "gaussian_input")
MIN_GAP_UM = 2.0


@dataclass(frozen=True)
class ScenarioConfig:
    flags: frozenset = frozenset()
    design_model: CouplingModel = DESIGN_MODEL_TEXT
    true_model: CouplingModel = MEASURED_MODEL
    geometry_override: GeometrySpec | None = None
    dummy_detuning: float | None = None
    dummy_separation: float | None = None
    spill_fraction: float = 0.0
    n_sites: int = 19
    transfer_length: float = 10.0
    input_site: int = 1

    def __post_init__(self):
        flags = frozenset(self.flags)
        unknown = flags - set(CHANNELS)
        if unknown:
            raise LatticeError(f"unknown scenario flags {sorted(unknown)}")
        object.__setattr__(self, "flags", flags)
        if not 0 <= self.spill_fraction < 1:
            raise LatticeError("spill_fraction must be in [0, 1)")
        if "dummy_guides" in flags:
            if self.dummy_detuning is None or (
                self.dummy_separation is None
                and (self.geometry_override is None or self.geometry_override.dummy_separations is None)
            ):
                raise LatticeError("dummy_guides needs dummy_detuning and a dummy separation")
        if "as_built_geometry" in flags:
            if self.geometry_override is None:
                raise LatticeError("as_built_geometry needs geometry_override")
            if self.geometry_override.n_sites != self.n_sites:
                raise LatticeError("geometry_override does not match n_sites")

    def only(self, channel: str) -> "ScenarioConfig":
        return replace(self, flags=frozenset([channel]))

    def to_dict(self) -> dict:
        return {
            "flags": sorted(self.flags),
            "design_model": self.design_model.to_dict(),
            "true_model": self.true_model.to_dict(),
            "geometry_override": self.geometry_override.to_dict() if self.geometry_override else None,
            "dummy_detuning_per_cm": self.dummy_detuning,
            "dummy_separation_um": self.dummy_separation,
            "spill_fraction": self.spill_fraction,
            "n_sites": self.n_sites,
            "transfer_length_cm": self.transfer_length,
            "input_site": self.input_site,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        geo = data.get("geometry_override")
        kwargs = dict(
            flags=frozenset(data.get("flags", ())),
            geometry_override=GeometrySpec.from_dict(geo) if geo else None,
            dummy_detuning=data.get("dummy_detuning_per_cm"),
            dummy_separation=data.get("dummy_separation_um"),
            spill_fraction=data.get("spill_fraction", 0.0),
            n_sites=data.get("n_sites", 19),
            transfer_length=data.get("transfer_length_cm", 10.0),
            input_site=data.get("input_site", 1),
        )
        if "design_model" in data:
            kwargs["design_model"] = CouplingModel.from_dict(data["design_model"])
        if "true_model" in data:
            kwargs["true_model"] = CouplingModel.from_dict(data["true_model"])
        return cls(**kwargs)


def reference_scenario(flags=CHANNELS) -> ScenarioConfig:
    """Error channels of the 19-guide experiment, all enabled by default."""
    return ScenarioConfig(
        flags=frozenset(flags),
        geometry_override=tabulated_geometry(FABRICATED_SEPARATIONS_19),
        dummy_detuning=8.7,
        dummy_separation=17.0,
        spill_fraction=0.047,
    )


@dataclass(frozen=True)
class DisorderConfig:
    sigma_position: float = 0.5
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.sigma_position < 0:
            raise LatticeError("sigma_position must be non-negative")
        if self.n_samples < 1:
            raise LatticeError("n_samples must be >= 1")
        if self.seed < 0:
            raise LatticeError("seed must be a non-negative integer")

    def to_dict(self):
        return {"sigma_um": self.sigma_position, "n_samples": self.n_samples, "seed": self.seed}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["sigma_um"]), int(data["n_samples"]), int(data["seed"]))


@dataclass
class ErrorBudget:
    channel_loss: dict
    channel_fidelity: dict
    channel_optimum_z: dict
    ideal_fidelity: float
    combined_fidelity: float
    combined_loss: float
    optimum_z: float
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "flags": list(self.flags),
            "ideal_fidelity": self.ideal_fidelity,
            "channel_loss": self.channel_loss,
            "channel_fidelity": self.channel_fidelity,
            "channel_optimum_z_cm": self.channel_optimum_z,
            "combined_fidelity": self.combined_fidelity,
            "combined_loss": self.combined_loss,
            "optimum_z_cm": self.optimum_z,
        }


# ---------------------------------------------------------------------------
# elementary channels
# ---------------------------------------------------------------------------

def _positions(gaps):
    return np.concatenate([[0.0], np.cumsum(gaps)])


def apply_position_noise(geometry: GeometrySpec, config: DisorderConfig, sample_index: int) -> GeometrySpec:
    """Jitter every waveguide position by N(0, sigma^2) and return the new gaps.

    Noise is drawn from a stream keyed by ``(seed, sample_index)``. Gaps of
    ``MIN_GAP_UM`` or less raise :class:`GapCollisionError`.
    """
    if config.sigma_position == 0:
        return geometry
    gaps = geometry.separations
    if geometry.dummy_separations:
        gaps = np.concatenate([[geometry.dummy_separations[0]], gaps, [geometry.dummy_separations[1]]])
    pos = _positions(gaps)
    rng = np.random.default_rng([config.seed, sample_index])
    pos = pos + config.sigma_position * rng.standard_normal(pos.size)
    new = np.diff(pos)
    if np.any(new <= MIN_GAP_UM):
        raise GapCollisionError(f"sample {sample_index}: perturbed gap {new.min():.3g} um")
    if geometry.dummy_separations:
        return GeometrySpec(new[1:-1], (new[0], new[-1]))
    return GeometrySpec(new)


def augment_with_dummies(spec: LatticeSpec, dummy_detuning: float, dummy_coupling: float) -> LatticeSpec:
    """Add a detuned guide at each end of the chain (N -> N + 2 sites)."""
    if dummy_detuning < 0 or dummy_coupling < 0:
        raise LatticeError("dummy detuning and coupling must be non-negative")
    couplings = np.concatenate([[dummy_coupling], spec.couplings, [dummy_coupling]])
    detunings = np.concatenate([[dummy_detuning], spec.detunings, [dummy_detuning]])
    return LatticeSpec(spec.n_sites + 2, spec.transfer_length, couplings, detunings)


def gaussian_input_state(n_sites: int, center: int, spill_fraction: float) -> np.ndarray:
    """Launch amplitudes with a fraction of the power spilled onto the neighbours."""
    if not 0 <= spill_fraction < 1:
        raise LatticeError("spill_fraction must be in [0, 1)")
    if not 1 <= center <= n_sites:
        raise LatticeError("center out of range")
    psi = np.zeros(n_sites)
    psi[center - 1] = np.sqrt(1.0 - spill_fraction)
    neighbours = [s for s in (center - 1, center + 1) if 1 <= s <= n_sites]
    for s in neighbours:
        psi[s - 1] = np.sqrt(spill_fraction / len(neighbours))
    return psi


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def scenario_lattice(config: ScenarioConfig):
    """Lattice, input amplitudes and target site implied by the config flags."""
    n, zf = config.n_sites, config.transfer_length
    flags = config.flags
    if "as_built_geometry" in flags:
        couplings = realize_couplings(config.geometry_override, config.true_model)
    elif "calibration_bias" in flags:
        geometry = design_geometry(n, zf, config.design_model)
        couplings = realize_couplings(geometry, config.true_model)
    else:
        couplings = jx_couplings(n, zf)
    spec = LatticeSpec(n, zf, couplings)

    src = config.input_site
    if "gaussian_input" in flags:
        psi = gaussian_input_state(n, src, config.spill_fraction)
    else:
        psi = np.zeros(n)
        psi[src - 1] = 1.0
    target = n + 1 - src

    if "dummy_guides" in flags:
        geo = config.geometry_override
        if "as_built_geometry" in flags and geo.dummy_separations is not None:
            dl, dr = geo.dummy_separations
        else:
            dl = dr = config.dummy_separation
        jl = coupling_from_distance(config.true_model, dl)
        jr = coupling_from_distance(config.true_model, dr)
        spec = augment_with_dummies(spec, config.dummy_detuning, jl)
        if jr != jl:
            c = spec.couplings.copy()
            c[-1] = jr
            spec = spec.replace(couplings=c)
        psi = np.concatenate([[0.0], psi, [0.0]])
        target += 1
    return spec, psi, target


def _scan(config: ScenarioConfig, z_scan):
    spec, psi, target = scenario_lattice(config)
    z_min, z_max, step = z_scan
    if not config.flags:
        # the ideal path is identical to a plain single-site scan
        return optimum_transfer_scan(spec, config.input_site, target, z_min, z_max, step)
    return optimum_transfer_scan(spec, None, target, z_min, z_max, step, input_state=psi)


def scenario_fidelity(config: ScenarioConfig, z_scan=(8.5, 10.0, 0.005)) -> ErrorBudget:
    """Per-channel and combined transfer losses, each at its own optimum Z.

    ``z_scan`` is ``(z_min, z_max, step)`` in cm. Losses are relative:
    1 - F / F_ideal with F_ideal from the unperturbed lattice on the same scan.
    """
    ideal = _scan(replace(config, flags=frozenset()), z_scan)
    f_ideal = ideal.optimum_fidelity
    loss, fid, zopt = {}, {}, {}
    for ch in CHANNELS:
        if ch in config.flags:
            rep = _scan(config.only(ch), z_scan)
            fid[ch] = rep.optimum_fidelity
            loss[ch] = 1.0 - rep.optimum_fidelity / f_ideal
            zopt[ch] = rep.optimum_z
    combined = _scan(config, z_scan) if config.flags else ideal
    return ErrorBudget(
        loss,
        fid,
        zopt,
        f_ideal,
        combined.optimum_fidelity,
        1.0 - combined.optimum_fidelity / f_ideal,
        combined.optimum_z,
        tuple(sorted(config.flags)),
    )


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class MonteCarloStats:
    mean: float
    std: float
    min: float
    max: float
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    n_accepted: int
    n_rejected: int
    fidelities: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "n_accepted": self.n_accepted,
            "n_rejected": self.n_rejected,
            "histogram": {"edges": self.hist_edges.tolist(), "counts": self.hist_counts.tolist()},
        }

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(self.hist_edges[:-1], self.hist_edges[1:], self.hist_counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _mc_chunk(indices, spec, geometry, model, disorder, distance, src, dst):
    rows, rejected = [], 0
    for k in indices:
        try:
            g = apply_position_noise(geometry, disorder, int(k))
        except GapCollisionError:
            rejected += 1
            continue
        rows.append(realize_couplings(g, model))
    if not rows:
        return np.empty(0), rejected
    couplings = np.ascontiguousarray(np.vstack(rows))
    fid = kernels.batch_transfer_fidelity(
        couplings, np.ascontiguousarray(spec.detunings), float(distance), src, dst
    )
    if not np.all(np.isfinite(fid)):
        raise EigensolverError("tridiagonal eigensolver did not converge for a disorder sample")
    return fid, rejected


def monte_carlo_fidelity(
    spec: LatticeSpec,
    geometry: GeometrySpec,
    model: CouplingModel,
    disorder: DisorderConfig,
    distance: float,
    input_site: int = 1,
    target_site: int | None = None,
    workers: int = 1,
    bins: int = 50,
) -> MonteCarloStats:
    """Transfer fidelity statistics under random waveguide-position errors.

    Every sample is determined by ``(seed, sample_index)``, so the result does
    not depend on ``workers``. Samples with colliding guides are counted in
    ``n_rejected`` and excluded from the statistics.
    """
    if geometry.n_sites != spec.n_sites:
        raise LatticeError("geometry and lattice disagree on the number of sites")
    if target_site is None:
        target_site = spec.n_sites + 1 - input_site
    src, dst = input_site - 1, target_site - 1
    chunks = np.array_split(np.arange(disorder.n_samples), max(1, int(workers)))
    args = (spec, geometry, model, disorder, distance, src, dst)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ix: _mc_chunk(ix, *args), chunks))
    else:
        parts = [_mc_chunk(ix, *args) for ix in chunks]
    fid = np.concatenate([p[0] for p in parts])
    rejected = sum(p[1] for p in parts)
    counts, edges = np.histogram(fid, bins=bins, range=(0.0, 1.0))
    if fid.size == 0:
        nan = float("nan")
        return MonteCarloStats(nan, nan, nan, nan, counts, edges, 0, rejected, fid)
    # identical samples have exactly zero spread; np.std would leak rounding
    # from the summed mean
    std = 0.0 if fid.min() == fid.max() else float(fid.std())
    return MonteCarloStats(
        float(fid.mean()),
        std,
        float(fid.min()),
        float(fid.max()),
        counts,
        edges,
        int(fid.size),
        int(rejected),
        fid,
    )
