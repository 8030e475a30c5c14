"""Command-line experiment runner.

    qdpic run <config.json>       run the configured scenario
    qdpic validate <config.json>  check the config and exit
    qdpic version

Exit codes: 0 success, 2 configuration error, 3 runtime or fit error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import traceback
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .circuit import MeshConfig, dft_unitary, mesh_to_unitary
from .config import ExperimentConfig, load_config
from .detection import write_time_tags
from .errors import InvalidConfigError
from .experiments import (
    calibrate_multiphoton_prob,
    simulate_bell_tomography,
    simulate_hbt,
    simulate_hom_scan,
    simulate_suppression_counts,
    suppression_law_table,
)
from .interference import GramMatrix, distribution_to_csv
from .source import SourceModel, loss_budget
from .tomography import bell_settings, export_state_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _circuit_unitary(cfg: ExperimentConfig) -> np.ndarray:
    c = cfg.circuit
    if isinstance(c, dict):
        return mesh_to_unitary(MeshConfig.from_json(cfg.resolve(c["mesh_file"]).read_text()))
    if c == "dft4":
        return dft_unitary(4)
    if c == "bell":
        return mesh_to_unitary(bell_settings())
    return np.eye(4, dtype=complex)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _visibility(cfg: ExperimentConfig, source: SourceModel) -> float:
    return float(cfg.params.get("visibility", source.indistinguishability))


def _run_hbt(cfg: ExperimentConfig, out: Path) -> dict:
    source = cfg.source_model()
    if "target_g2" in cfg.params:
        p2 = calibrate_multiphoton_prob(
            cfg.params["target_g2"], source.efficiency * cfg.detector_model().efficiency,
            lifetime_ps=source.lifetime_ps, period_ps=source.period_ps,
            num_side_peaks=cfg.params.get("num_side_peaks", 5),
        )
        source = SourceModel(**{**cfg.source, "multiphoton_prob": p2})
    res = simulate_hbt(
        source, cfg.pulses, cfg.seed, cfg.detector_model(),
        num_side_peaks=cfg.params.get("num_side_peaks", 5),
        bin_width_ps=cfg.params.get("bin_width_ps", 100.0),
    )
    res.histogram.to_csv(out / "hbt_histogram.csv")
    if cfg.params.get("write_tags", False):
        write_time_tags(out / "hbt_tags.txt", res.tags)
    summary = {
        "g2": res.estimate.g2,
        "g2_error": res.estimate.error,
        "central_counts": res.estimate.central_counts,
        "side_mean": res.estimate.side_mean,
        "multiphoton_prob": source.multiphoton_prob,
        "generative_g2": res.generative_g2,
        "expected_estimate": res.expected_estimate,
    }
    return summary


def _run_hom(cfg: ExperimentConfig, out: Path) -> dict:
    source = cfg.source_model()
    phases = cfg.params.get("phases")
    if phases is None:
        phases = np.linspace(0.0, np.pi, cfg.params.get("num_phases", 13)).tolist()
    res = simulate_hom_scan(
        source, phases, cfg.shots, cfg.seed,
        switch_efficiency=cfg.params.get("switch_efficiency", 1.0),
        visibility=cfg.params.get("visibility"),
    )
    _write_rows(out / "hom_fringe.csv", ["phase_rad", "pairs", "coincidences"],
                [[repr(float(t)), int(n), int(c)] for t, n, c in zip(res.phases, res.pairs, res.coincidences)])
    return {"visibility_in": res.visibility_in, "visibility_fit": res.fit.visibility,
            "visibility_stderr": res.fit.stderr, "amplitude": res.fit.amplitude, "chi2": res.fit.chi2}


def _run_suppression(cfg: ExperimentConfig, out: Path) -> dict:
    u = _circuit_unitary(cfg)
    v = _visibility(cfg, cfg.source_model())
    gram = GramMatrix.uniform(2, v)
    table = suppression_law_table(u, gram)
    worst = 0.0
    for inp, entry in table.items():
        tag = "-".join(map(str, inp))
        distribution_to_csv(entry["full"], out / f"distribution_in_{tag}.csv")
        for c, verdict in entry["predicate"].items():
            if verdict.value == "suppressed":
                worst = max(worst, entry["full"][c])
    summary = {"visibility": v, "max_suppressed_probability": worst}
    pairs = cfg.params.get("simulate_pairs")
    if pairs:
        rows = []
        for inp in ((1, 3), (2, 4)):
            sc = simulate_suppression_counts(u, inp, gram, pairs, cfg.seed, cfg.detector_model())
            f, err = sc.suppressed_fraction()
            summary[f"suppressed_fraction_in_{inp[0]}-{inp[1]}"] = [f, err, sc.predicted_suppressed_fraction()]
            rows += [[f"{inp[0]},{inp[1]}", f"{a},{b}", n] for (a, b), n in sc.pair_counts.items()]
        _write_rows(out / "suppression_counts.csv", ["input_config", "output_config", "count"], rows)
    return summary


def _run_bell(cfg: ExperimentConfig, out: Path) -> dict:
    v = _visibility(cfg, cfg.source_model())
    res = simulate_bell_tomography(v, cfg.shots, cfg.seed)
    res.counts.to_csv(out / "tomography_counts.csv")
    export_state_csv(res.reconstruction.state, out / "rho.csv",
                     fidelity=res.fidelity, log_likelihood=res.reconstruction.log_likelihood)
    (out / "mesh.json").write_text(res.mesh.to_json() + "\n")
    return {"visibility": v, "success_probability": res.success_probability,
            "model_fidelity": res.model_fidelity, "mle_fidelity": res.fidelity,
            "log_likelihood": res.reconstruction.log_likelihood}


def _run_loss(cfg: ExperimentConfig, out: Path) -> dict:
    budget = loss_budget(cfg.params["stages"])
    _write_rows(out / "loss_budget.csv", ["label", "efficiency"],
                [[label, repr(eff)] for label, eff in budget.stages])
    return {"efficiency": budget.efficiency, "loss_db": budget.loss_db}


RUNNERS = {
    "hbt": _run_hbt,
    "hom-scan": _run_hom,
    "suppression-law": _run_suppression,
    "bell-tomography": _run_bell,
    "loss-budget": _run_loss,
}


def _run_one(cfg: ExperimentConfig, out: Path) -> tuple[int, dict]:
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, summary = "OK", {}
    try:
        summary = RUNNERS[cfg.scenario](cfg, out)
        _write_json(out / "summary.json", summary)
        code = EXIT_OK
    except Exception as exc:  # partial outputs stay on disk next to the marker
        status = "FAILED"
        summary = {"error": f"{type(exc).__name__}: {exc}"}
        (out / "FAILED").write_text(traceback.format_exc())
        code = EXIT_RUNTIME
    manifest = {
        "scenario": cfg.scenario,
        "status": status,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": {"qdpic": package_version(), "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": sys.version.split()[0]},
        "wall_time_s": time.perf_counter() - start,
        "outputs": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
    }
    _write_json(out / "manifest.json", manifest)
    return code, {"scenario": cfg.scenario, "status": status, "output_dir": str(out), **summary}


def run_scenario(cfg: ExperimentConfig) -> int:
    """Run one scenario (or its sweep), print one JSON summary line per run, return the exit code."""
    base = cfg.resolve(cfg.output_dir)
    runs = [(cfg, base)] if not cfg.sweep else [
        (cfg.with_overrides(over, sweep=[]), base / f"sweep_{i:03d}") for i, over in enumerate(cfg.sweep)
    ]
    worst = EXIT_OK
    for sub, out in runs:
        code, record = _run_one(sub, out)
        print(json.dumps(record, sort_keys=True))
        worst = max(worst, code)
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qdpic", description="Quantum-dot + programmable-circuit experiment simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the scenario described by a config file")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")
    sub.add_parser("version", help="print the package version")
    args = parser.parse_args(argv)

    if args.command == "version":
        print(package_version())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.scenario})")
        return EXIT_OK
    return run_scenario(cfg)


if __name__ == "__main__":
    sys.exit(main())
