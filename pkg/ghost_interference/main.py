# ghost_interference/main.py
import os, sys, argparse, logging
from typing import List, Optional

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from .analysis import fringe_widths, rms_deviation
from .analytic import conditional_packets, detector_pattern, ghost_pattern, post_slit_state
from .config import MODES, ExperimentConfig, dump_config, load_config
from .duality import check_duality, mirror_violations, sweep, violations
from .oracle import default_grid, dump_grid, final_state, oracle_coincidence
from .records import DualityRecord
from .schema import AnalysisError, CoincidencePattern, ConfigError, NumericalGuard

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

# ---------- Report rendering via Jinja ----------
def _render(template: str, **ctx) -> str:
    tmpl_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")
    env = Environment(
        loader=FileSystemLoader(tmpl_dir),
        autoescape=select_autoescape(enabled_extensions=(), default_for_string=False),
        trim_blocks=True,
        lstrip_blocks=True,
    )
    return env.get_template(template).render(**ctx)

def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)

# ---------- ghost ----------
def _analytic_pattern(cfg: ExperimentConfig, z2) -> CoincidencePattern:
    packets = conditional_packets(cfg.source, cfg.geometry, exact=cfg.run.exact_gamma)
    state = post_slit_state(cfg.source, cfg.geometry, packets, cfg.detector, cfg.slits)
    if cfg.detector is not None:
        return detector_pattern(state, z2, cfg.run.neglect_beta).normalized()
    return ghost_pattern(state, z2, cfg.run.neglect_beta).normalized()

def _window(p: CoincidencePattern, half: float) -> CoincidencePattern:
    keep = np.abs(p.z2_samples) <= half
    return CoincidencePattern(p.z2_samples[keep], p.density[keep], p.z1_fixed,
                              p.source, p.geometry, p.detector).normalized()

def run_ghost(cfg: ExperimentConfig, out_dir: str, dump_path: Optional[str] = None) -> int:
    run, geom = cfg.run, cfg.geometry
    if dump_path and run.mode == "analytic":
        raise ConfigError("--dump-grid needs an oracle run (--mode oracle or both)")
    period = geom.lam * geom.D / geom.z0 / (2.0 if run.two_slit else 1.0)
    analytic = oracle = None
    if run.mode in ("oracle", "both"):
        spec = run.grid() or default_grid(cfg.source, geom, run.grid_n)
        full = oracle_coincidence(cfg.source, geom, spec, run.projection, cfg.slits, cfg.detector)
        oracle = _window(full, run.z2_window_m)
        z2 = oracle.z2_samples
        if dump_path:
            dump_grid(final_state(cfg.source, geom, spec, run.projection, cfg.slits), dump_path)
            print(f"[OK] wrote oracle grid -> {dump_path}")
    else:
        z2 = np.linspace(-run.z2_window_m, run.z2_window_m, run.samples)
    if run.mode in ("analytic", "both"):
        analytic = _analytic_pattern(cfg, z2)

    cols, names = [z2], ["z2_m"]
    if analytic is not None:
        cols.append(analytic.density); names.append("density_analytic")
    if oracle is not None:
        cols.append(oracle.density); names.append("density_oracle")
    csv_path = os.path.join(out_dir, "pattern.csv")
    np.savetxt(csv_path, np.column_stack(cols), fmt="%.17g", delimiter=",", header=",".join(names), comments="")
    print(f"[OK] wrote pattern -> {csv_path}")

    rms = None
    if analytic is not None and oracle is not None:
        central = np.abs(z2) <= 2.0 * period
        rms = rms_deviation(analytic.density[central], oracle.density[central])
        logger.info("analytic vs oracle RMS deviation over the central 2 fringes: %.3e", rms)
    main_pattern = analytic if analytic is not None else oracle
    report = fringe_widths(main_pattern)
    text = _render(
        "fringe_report.txt.j2",
        mode=run.mode, slits=cfg.slits, lam=geom.lam, z0=geom.z0, epsilon=geom.epsilon, D=geom.D,
        expected_ab=geom.lam * geom.D / geom.z0, expected_ac=geom.lam * geom.D / (2.0 * geom.z0),
        pattern_label="analytic" if analytic is not None else "oracle", samples=len(z2),
        report=report, primary_error=abs(report.primary_width - period) / period, rms=rms,
    )
    rep_path = os.path.join(out_dir, "fringe_report.txt")
    _write(rep_path, text)
    print(f"[OK] wrote fringe report -> {rep_path}")
    return EXIT_OK

# ---------- duality ----------
def run_duality(cfg: ExperimentConfig, out_dir: str) -> int:
    run = cfg.run
    n_paths = 2 if run.two_slit else 3
    spec = run.grid() if run.pattern_source == "oracle" else None
    if run.sweep_count > 0:
        samples = sweep(run.seed, run.sweep_count, cfg.source, cfg.geometry, n_paths, run.pattern_source,
                        run.progress, spec, run.exact_gamma)
    elif cfg.detector is not None:
        samples = [check_duality(cfg.detector, cfg.source, cfg.geometry, run.pattern_source, None, spec,
                                 run.exact_gamma)]
    else:
        raise ConfigError("duality needs detector.* overlaps or run.sweep_count > 0")
    records = [DualityRecord.from_sample(s, index=i, seed=run.seed) for i, s in enumerate(samples)]

    jsonl = os.path.join(out_dir, "duality.jsonl")
    with open(jsonl, "w", encoding="utf-8") as fout:
        for rec in records:
            fout.write(rec.to_json() + "\n")
    print(f"[OK] wrote {len(records)} duality records -> {jsonl}")

    bad = violations(samples, run.slack)
    mirror = mirror_violations(samples, run.slack)
    mirror_margins = [s.mirror_report().margin for s in samples if s.sides is not None]
    text = _render(
        "duality_report.txt.j2",
        relation="V2 + D <= 1" if run.two_slit else "V2 + 2D/(3-D) <= 1",
        pattern_source=run.pattern_source, count=len(records), slack=run.slack, violations=len(bad),
        mirror_violations=len(mirror) if mirror_margins else None,
        mirror_min_margin=min(mirror_margins) if mirror_margins else None,
        min_margin=min(r.margin for r in records), max_v2=max(r.V2 for r in records),
        d_min=min(r.D for r in records), d_max=max(r.D for r in records),
        worst=sorted(records, key=lambda r: r.margin)[:3],
    )
    rep_path = os.path.join(out_dir, "duality_report.txt")
    _write(rep_path, text)
    print(f"[OK] wrote duality report -> {rep_path}")
    if bad:
        print(f"[FAIL] {len(bad)} record(s) break the duality bound", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK

# ---------- CLI ----------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ghost-sim", description="Three-slit ghost interference and nonlocal duality")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (("ghost", "sample the fixed-D1 coincidence pattern"),
                            ("duality", "check the duality relation for one detector or a random sweep"),
                            ("validate", "lint a config file")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML file of dotted keys")
        p.add_argument("--out", default="out", help="Output directory")
        p.add_argument("--mode", choices=MODES, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--verbosity", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default="WARNING")
        if name == "ghost":
            p.add_argument("--dump-grid", default=None, help="Write the final oracle Grid2D to this binary file")
    return ap

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.verbosity), format="[%(levelname)s] %(message)s",
                        stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config, {"run.mode": args.mode, "run.seed": args.seed})
        if args.command == "validate":
            print(f"[OK] config valid: {args.config}")
            return EXIT_OK
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "config.yaml"), dump_config(cfg))
        if args.command == "ghost":
            return run_ghost(cfg, args.out, args.dump_grid)
        return run_duality(cfg, args.out)
    except ConfigError as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalGuard, AnalysisError) as e:
        print(f"[error] {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

if __name__ == "__main__":
    sys.exit(main())
