"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O failure.
The default output directory is ``$PSTLATTICE_OUTPUT_DIR`` (else the cwd).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .correlations import (
    PhaseAveragingPlan,
    TwoParticleInput,
    classical_emulated_correlation,
    correlation_closed_form_matrix,
    two_particle_correlation,
)
from .exceptions import LatticeError, NumericalError
from .fabrication import (
    FABRICATED_SEPARATIONS_19,
    INTENDED_SEPARATIONS_19,
    MODEL_PRESETS,
    CouplingModel,
    GeometrySpec,
    design_geometry,
    fit_coupling_model,
    load_calibration_csv,
    realize_couplings,
    tabulated_geometry,
)
from .imperfections import (
    DisorderConfig,
    ScenarioConfig,
    monte_carlo_fidelity,
    reference_scenario,
    scenario_fidelity,
)
from .lattice import LatticeSpec
from .propagation import density_map, optimum_transfer_scan, photon_density, propagator

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "PSTLATTICE_OUTPUT_DIR"
SUBCOMMANDS = ("design", "propagate", "scan", "correlate", "scenario", "disorder", "fit", "reproduce")


class UsageError(Exception):
    pass


@dataclass
class Command:
    subcommand: str
    parameters: dict


# ---------------------------------------------------------------------------
# artifact writing
# ---------------------------------------------------------------------------

class ArtifactWriter:
    """Writes artifacts with a metadata header; removes them all on failure."""

    def __init__(self, out_dir: Path, metadata: dict):
        self.out_dir = Path(out_dir)
        self.metadata = metadata
        self.written: list[Path] = []
        self._created_dir = False

    def _path(self, name):
        if not self.out_dir.exists():
            self.out_dir.mkdir(parents=True)
            self._created_dir = True
        return self.out_dir / name

    def json(self, name, payload: dict) -> Path:
        path = self._path(name)
        path.write_text(json.dumps({"metadata": self.metadata, **payload}, indent=2, sort_keys=False) + "\n")
        self.written.append(path)
        return path

    def csv(self, name, text: str) -> Path:
        path = self._path(name)
        path.write_text("# " + json.dumps(self.metadata, sort_keys=True) + "\n" + text)
        self.written.append(path)
        return path

    def rollback(self):
        for p in self.written:
            try:
                p.unlink()
            except OSError:
                pass
        if self._created_dir:
            try:
                self.out_dir.rmdir()
            except OSError:
                pass


def read_json(path) -> dict:
    data = json.loads(Path(path).read_text())
    return data


def load_geometry(path) -> GeometrySpec:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return GeometrySpec.from_dict(json.loads(text))
    return GeometrySpec.from_csv(text)


def load_model(value: str) -> CouplingModel:
    if value in MODEL_PRESETS:
        return MODEL_PRESETS[value]
    data = read_json(value)
    return CouplingModel.from_dict(data.get("model", data))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _z_value(text):
    if text in ("half", "full", "revival"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'half', 'full', 'revival' or a number, got {text!r}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pstlattice", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def lattice_args(p):
        p.add_argument("--sites", type=int, default=19, help="number of waveguides N")
        p.add_argument("--zf-cm", type=float, default=10.0, help="perfect-transfer length")
        p.add_argument("--spec", help="LatticeSpec JSON (overrides --sites/--zf-cm)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("design", help="waveguide separations for a PST lattice")
    lattice_args(p)
    p.add_argument("--model", default="design")

    p = sub.add_parser("propagate", help="single-photon densities")
    lattice_args(p)
    p.add_argument("--input", type=int, default=1)
    p.add_argument("--z-cm", type=float, default=None)
    p.add_argument("--z-steps", type=_positive_int, default=201, help="rows in the density map")
    p.add_argument("--geometry", help="geometry CSV/JSON to realise with --model")
    p.add_argument("--model", default="measured")

    p = sub.add_parser("scan", help="optimum transfer length")
    lattice_args(p)
    p.add_argument("--input", type=int, default=1)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--z-min-cm", type=float, default=0.0)
    p.add_argument("--z-max-cm", type=float, default=None)
    p.add_argument("--step-cm", type=float, default=0.01)
    p.add_argument("--geometry", help="geometry CSV/JSON to realise with --model")
    p.add_argument("--model", default="measured")

    p = sub.add_parser("correlate", help="two-particle correlation matrix")
    lattice_args(p)
    p.add_argument("--z", type=_z_value, default="half", help="half, full, revival or cm")
    p.add_argument("--statistics", choices=("boson", "fermion", "classical"), default="boson")
    p.add_argument("--inputs", type=int, nargs=2, default=None, metavar=("A", "B"))
    p.add_argument("--mode", choices=("exact_grid", "random"), default="exact_grid")
    p.add_argument("--samples", type=_positive_int, default=60)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("scenario", help="fabrication error budget")
    p.add_argument("--config", help="ScenarioConfig JSON (default: reference scenario)")
    p.add_argument("--z-min-cm", type=float, default=8.5)
    p.add_argument("--z-max-cm", type=float, default=10.0)
    p.add_argument("--step-cm", type=float, default=0.005)
    p.add_argument("--out")

    p = sub.add_parser("disorder", help="Monte Carlo position noise")
    lattice_args(p)
    p.add_argument("--config", help="DisorderConfig JSON (overrides sigma/samples/seed)")
    p.add_argument("--sigma-um", type=float, default=0.5)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--z-cm", type=float, default=None)
    p.add_argument("--geometry", help="geometry CSV/JSON (default: designed geometry)")
    p.add_argument("--model", default="design")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--bins", type=_positive_int, default=50)

    p = sub.add_parser("fit", help="fit the coupling-distance law")
    p.add_argument("--samples-csv", required=True)
    p.add_argument("--d1-um", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("reproduce", help="full pipeline for the 19-guide experiment")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--mc-samples", type=_positive_int, default=2000)
    return parser


def parse_command(argv) -> Command:
    """Parse argv into a :class:`Command`; argparse exits with status 2 on bad flags."""
    ns = build_parser().parse_args(list(argv))
    params = vars(ns)
    sub = params.pop("subcommand")
    if params.get("out") is None:
        params["out"] = os.environ.get(OUTPUT_ENV, ".")
    for key in ("spec", "geometry", "config", "samples_csv"):
        if params.get(key) is not None and not Path(params[key]).is_file():
            raise UsageError(f"--{key.replace('_', '-')}: no such file {params[key]!r}")
    model = params.get("model")
    if model is not None and model not in MODEL_PRESETS and not Path(model).is_file():
        raise UsageError(f"--model: unknown preset or file {model!r} (presets: {sorted(MODEL_PRESETS)})")
    return Command(sub, params)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _metadata(cmd: Command) -> dict:
    return {
        "tool": "pstlattice",
        "version": __version__,
        "subcommand": cmd.subcommand,
        "parameters": {k: v for k, v in cmd.parameters.items() if k != "out"},
        "seed": cmd.parameters.get("seed"),
    }


def _lattice(params) -> LatticeSpec:
    if params.get("spec"):
        return LatticeSpec.from_dict(read_json(params["spec"]))
    spec = LatticeSpec.ideal(params["sites"], params["zf_cm"])
    if params.get("geometry"):
        geo = load_geometry(params["geometry"])
        if geo.n_sites != spec.n_sites:
            spec = LatticeSpec.ideal(geo.n_sites, params["zf_cm"])
        spec = spec.replace(couplings=realize_couplings(geo, load_model(params["model"])))
    return spec


def _density_csv(zs, dens) -> str:
    n = dens.shape[1]
    lines = ["z_cm," + ",".join(f"site_{k}" for k in range(1, n + 1))]
    for z, row in zip(zs, dens):
        lines.append(repr(float(z)) + "," + ",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _table_comparison(geometry: GeometrySpec) -> tuple[str, float]:
    designed = [geometry.dummy_separations[0] if geometry.dummy_separations else None]
    designed += list(geometry.separations)
    designed += [geometry.dummy_separations[1] if geometry.dummy_separations else None]
    lines = ["site,designed_um,intended_um,fabricated_um"]
    worst = 0.0
    for k, (d, i, f) in enumerate(zip(designed, INTENDED_SEPARATIONS_19, FABRICATED_SEPARATIONS_19)):
        if d is not None and 0 < k < len(designed) - 1:
            worst = max(worst, abs(d - i))
        lines.append(f"{k},{'' if d is None else repr(float(d))},{i!r},{f!r}")
    return "\n".join(lines) + "\n", worst


def run_design(cmd, w: ArtifactWriter):
    p = cmd.parameters
    geo = design_geometry(p["sites"], p["zf_cm"], load_model(p["model"]))
    w.json("geometry.json", geo.to_dict())
    w.csv("geometry.csv", geo.to_csv())
    return f"designed {geo.n_sites} guides: gaps {geo.separations.min():.2f}-{geo.separations.max():.2f} um"


def run_propagate(cmd, w):
    p = cmd.parameters
    spec = _lattice(p)
    z = spec.transfer_length if p["z_cm"] is None else p["z_cm"]
    t = propagator(spec, z)
    dens = photon_density(t, p["input"])
    w.json("density.json", {"z_cm": z, "input_site": p["input"], "density": dens.tolist()})
    w.csv("density.csv", "site,probability\n" + "".join(f"{k},{x!r}\n" for k, x in enumerate(dens.tolist(), 1)))
    zs = np.linspace(0.0, z, p["z_steps"])
    w.csv("density_map.csv", _density_csv(zs, density_map(spec, p["input"], zs)))
    peak = int(np.argmax(dens)) + 1
    return f"Z={z:g} cm input {p['input']}: peak {dens[peak - 1]:.4f} at site {peak}"


def run_scan(cmd, w):
    p = cmd.parameters
    spec = _lattice(p)
    z_max = p["z_max_cm"] if p["z_max_cm"] is not None else 2.0 * spec.transfer_length
    rep = optimum_transfer_scan(spec, p["input"], p["target"], p["z_min_cm"], z_max, p["step_cm"])
    w.json("fidelity_scan.json", rep.to_dict())
    w.csv("fidelity_scan.csv", rep.to_csv())
    return f"optimum fidelity {rep.optimum_fidelity:.4f} at Z={rep.optimum_z:.4f} cm"


def _resolve_z(z, zf):
    return {"half": zf / 2, "full": zf, "revival": 2 * zf}.get(z, z)


def run_correlate(cmd, w):
    p = cmd.parameters
    spec = _lattice(p)
    z = _resolve_z(p["z"], spec.transfer_length)
    t = propagator(spec, z)
    a, b = p["inputs"] or (1, spec.n_sites)
    if p["statistics"] == "classical":
        if (a, b) != (1, spec.n_sites):
            raise UsageError("classical emulation launches into sites 1 and N only")
        plan = PhaseAveragingPlan(p["mode"], p["samples"], p["seed"] if p["mode"] == "random" else None)
        corr = classical_emulated_correlation(t, plan)
    else:
        corr = two_particle_correlation(t, TwoParticleInput(a, b, p["statistics"]))
    w.json("correlation.json", corr.to_dict())
    w.csv("correlation.csv", corr.to_csv())
    return f"{corr.statistics} correlation at Z={z:g} cm, sum={corr.values.sum():.6f}"


def run_scenario(cmd, w):
    p = cmd.parameters
    if p["config"]:
        data = read_json(p["config"])
        cfg = ScenarioConfig.from_dict(data.get("config", data))
    else:
        cfg = reference_scenario()
    budget = scenario_fidelity(cfg, (p["z_min_cm"], p["z_max_cm"], p["step_cm"]))
    w.json("error_budget.json", {"config": cfg.to_dict(), "budget": budget.to_dict()})
    return f"combined fidelity {budget.combined_fidelity:.4f} at Z={budget.optimum_z:.3f} cm"


def run_disorder(cmd, w):
    p = cmd.parameters
    spec = LatticeSpec.ideal(p["sites"], p["zf_cm"])
    model = load_model(p["model"])
    geo = load_geometry(p["geometry"]) if p["geometry"] else design_geometry(p["sites"], p["zf_cm"], model)
    if geo.n_sites != spec.n_sites:
        spec = LatticeSpec.ideal(geo.n_sites, p["zf_cm"])
    if p["config"]:
        data = read_json(p["config"])
        disorder = DisorderConfig.from_dict(data.get("disorder", data))
    else:
        disorder = DisorderConfig(p["sigma_um"], p["samples"], p["seed"])
    z = spec.transfer_length if p["z_cm"] is None else p["z_cm"]
    stats = monte_carlo_fidelity(spec, geo, model, disorder, z, workers=p["workers"], bins=p["bins"])
    w.json("disorder.json", {"disorder": disorder.to_dict(), "z_cm": z, "statistics": stats.to_dict()})
    w.csv("disorder_histogram.csv", stats.histogram_csv())
    return f"mean fidelity {stats.mean:.4f} +- {stats.std:.4f} ({stats.n_rejected} rejected)"


def run_fit(cmd, w):
    p = cmd.parameters
    samples = load_calibration_csv(Path(p["samples_csv"]).read_text())
    fit = fit_coupling_model(samples, p["d1_um"])
    w.json("model.json", {"model": fit.model.to_dict(), "rms_log_residual": fit.rms_log_residual,
                          "n_samples": fit.n_samples})
    m = fit.model
    return f"j1={m.j1:.4f} /cm at d1={m.d1:g} um, kappa={m.kappa:.4f} um"


def run_reproduce(cmd, w):
    p = cmd.parameters
    manifest = []

    def add(path, feeds):
        manifest.append({"artifact": path.name, "feeds": feeds})

    geo = design_geometry(19, 10.0, MODEL_PRESETS["design"])
    geo = GeometrySpec(geo.separations, (17.0, 17.0), geo.notes)
    add(w.json("geometry.json", geo.to_dict()), ["geometry reproduction"])
    add(w.csv("geometry.csv", geo.to_csv()), ["geometry reproduction"])
    table, worst = _table_comparison(geo)
    add(w.csv("table_comparison.csv", table), ["geometry reproduction"])

    ideal = LatticeSpec.ideal(19, 10.0)
    add(w.json("lattice_ideal.json", ideal.to_dict()), ["coupling rule"])
    rep = optimum_transfer_scan(ideal, 1, 19, 8.0, 12.0, 0.01)
    add(w.csv("ideal_transfer.csv", rep.to_csv()), ["perfect transfer"])
    add(w.json("ideal_transfer.json", rep.to_dict()), ["perfect transfer"])
    zs = np.linspace(0.0, 10.0, 201)
    for q in (1, 2, 18, 19):
        add(w.csv(f"density_map_input{q}.csv", _density_csv(zs, density_map(ideal, q, zs))), ["perfect transfer"])

    for n in (21, 22):
        spec = LatticeSpec.ideal(n, 10.0)
        t = propagator(spec, 5.0)
        for stats in ("boson", "fermion"):
            corr = two_particle_correlation(t, TwoParticleInput(1, n, stats))
            dev = float(np.abs(corr.values - correlation_closed_form_matrix(n, stats)).max())
            add(w.json(f"correlation_N{n}_{stats}.json", {**corr.to_dict(), "max_dev_closed_form": dev}),
                ["correlation closed forms"])
            add(w.csv(f"correlation_N{n}_{stats}.csv", corr.to_csv()), ["correlation closed forms"])
        for plan in (PhaseAveragingPlan("exact_grid", 4), PhaseAveragingPlan("random", 60, p["seed"])):
            corr = classical_emulated_correlation(t, plan)
            add(w.json(f"correlation_N{n}_classical_{plan.mode}.json", corr.to_dict()),
                ["classical emulation"])
            add(w.csv(f"correlation_N{n}_classical_{plan.mode}.csv", corr.to_csv()), ["classical emulation"])

    cfg = reference_scenario()
    budget = scenario_fidelity(cfg)
    add(w.json("error_budget.json", {"config": cfg.to_dict(), "budget": budget.to_dict()}),
        ["error budget"])
    built = LatticeSpec(19, 10.0, realize_couplings(tabulated_geometry(FABRICATED_SEPARATIONS_19),
                                                    MODEL_PRESETS["measured"]))
    scan = optimum_transfer_scan(built, 1, 19, 8.5, 10.0, 0.005)
    add(w.json("as_built_scan.json", scan.to_dict()), ["error budget"])

    disorder = DisorderConfig(0.5, p["mc_samples"], p["seed"])
    stats = monte_carlo_fidelity(ideal, design_geometry(19, 10.0, MODEL_PRESETS["design"]),
                                 MODEL_PRESETS["design"], disorder, 10.0)
    add(w.json("disorder.json", {"disorder": disorder.to_dict(), "statistics": stats.to_dict()}),
        ["monte carlo"])
    add(w.csv("disorder_histogram.csv", stats.histogram_csv()), ["monte carlo"])

    w.json("manifest.json", {"artifacts": manifest, "summary": {
        "table_max_dev_um": worst,
        "ideal_optimum_fidelity": rep.optimum_fidelity,
        "combined_fidelity": budget.combined_fidelity,
        "channel_loss": budget.channel_loss,
    }})
    return f"wrote {len(manifest) + 1} artifacts to {w.out_dir}"


RUNNERS = {
    "design": run_design,
    "propagate": run_propagate,
    "scan": run_scan,
    "correlate": run_correlate,
    "scenario": run_scenario,
    "disorder": run_disorder,
    "fit": run_fit,
    "reproduce": run_reproduce,
}


def execute(cmd: Command) -> int:
    writer = ArtifactWriter(Path(cmd.parameters["out"]), _metadata(cmd))
    try:
        summary = RUNNERS[cmd.subcommand](cmd, writer)
    except (UsageError, LatticeError) as exc:
        writer.rollback()
        print(f"pstlattice {cmd.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        writer.rollback()
        print(f"pstlattice {cmd.subcommand}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        writer.rollback()
        print(f"pstlattice {cmd.subcommand}: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(summary)
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_command(argv)
    except UsageError as exc:
        print(f"pstlattice: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    return execute(cmd)


if __name__ == "__main__":
    sys.exit(main())
