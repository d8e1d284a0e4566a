"""Command-line front end: ``hopfflow {verify,flow,static,sweep}``.

Exit codes: 0 success, 1 configuration error, 2 failing identity (verify),
3 inadmissible initial data, 4 unrecoverable positivity failure (flow).
A sweep exits 0 only if every cell completed.

Floats in CSV files are written with ``repr``, the shortest string that
reads back to the same double.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, ConfigError, RunConfig, build_config, env_pairs, parse_pairs
from .diagnostics import TIMESERIES_COLUMNS, closed_form_volume
from .flow import (FlowAborted, FlowControl, GridSpec, InadmissibleInitialData, InitialData,
                   exact_round_potential, run_flow, write_snapshot)
from .geometry import ReducedCoord, ambient_from_reduced, make_moduli, solve_phi, z_function
from .tensors import (chi_metric, hat_metric, hermitian_det, hermitian_eigvalsh, ricci_chi,
                      theta_form, trace_pair)
from .verify import run_suite

EXIT_OK, EXIT_CONFIG, EXIT_IDENTITY, EXIT_INADMISSIBLE, EXIT_ABORTED = 0, 1, 2, 3, 4

VERIFY_COLUMNS = ("name", "samples", "max_residual", "tolerance", "pass")
STATIC_COLUMNS = ("u", "sigma", "Phi", "Z", "det_ghat", "det_ghat_phi2", "trace_chi_ghat",
                  "ghat_minus_theta_eig_min", "ghat_minus_theta_eig_max",
                  "ricci_chi_eig_min", "ricci_chi_eig_max")
SWEEP_COLUMNS = ("abs_alpha", "abs_beta", "volume0", "t_final", "sup_max_trace_chi_omega",
                 "loop_length_spread", "round_exact_error", "status")


def fmt(x) -> str:
    """Shortest round-trip text for a number; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _moduli(cfg: RunConfig):
    return make_moduli(cfg.abs_alpha, cfg.abs_beta)


# -- verify -------------------------------------------------------------------

def cmd_verify(cfg: RunConfig) -> int:
    """Run the identity suite and write ``verify.csv`` plus ``verify_summary.txt``."""
    m = _moduli(cfg)
    reports = run_suite(m, samples=cfg.samples, fd_samples=cfg.fd_samples, seed=cfg.seed,
                        variant=cfg.hessian_variant)
    out = Path(cfg.out_dir)
    write_csv(out / "verify.csv", VERIFY_COLUMNS,
              ([r.name, r.samples, r.max_residual, r.tolerance, r.passed] for r in reports))
    failed = [r for r in reports if not r.passed]
    lines = [f"moduli (|alpha|, |beta|) = ({m.abs_alpha!r}, {m.abs_beta!r}), "
             f"hessian variant {cfg.hessian_variant}"]
    for r in reports:
        tag = "PASS" if r.passed else "FAIL"
        note = f"  [{r.notes}]" if r.notes else ""
        lines.append(f"  {tag}  {r.name:<28} residual {r.max_residual:.3e}  "
                     f"tol {r.tolerance:.1e}{note}")
    lines.append(f"{len(reports) - len(failed)}/{len(reports)} identities passed")
    text = "\n".join(lines) + "\n"
    (out / "verify_summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_IDENTITY if failed else EXIT_OK


# -- flow ---------------------------------------------------------------------

def _manifest(out: Path, cfg: RunConfig, started: datetime, wall: float, termination: str,
              extra: dict | None = None):
    doc = {
        "config": cfg.as_dict(),
        "version": __version__,
        "started_at": started.isoformat(),
        "wall_seconds": wall,
        "termination": termination,
    }
    if extra:
        doc.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def _flow(cfg: RunConfig, out: Path):
    """Run one flow into ``out``; returns ``(exit code, result or None)``."""
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    result = None
    termination = "config_error"
    code = EXIT_CONFIG
    try:
        m = _moduli(cfg)
        grid = GridSpec.for_moduli(m, cfg.n_u, cfg.n_sigma)
        control = FlowControl(t_max=cfg.t_max, cfl=cfg.cfl, monitor_cadence=cfg.monitor_cadence,
                              A=cfg.A, B=cfg.B, snapshot_times=tuple(cfg.snapshot_times))
        initial = InitialData(cfg.initial_family, cfg.epsilon, cfg.initial_path)
        snap_dir = out / "snapshots"

        def on_snapshot(state):
            snap_dir.mkdir(parents=True, exist_ok=True)
            return str(write_snapshot(snap_dir / f"phi_t{state.t!r}.txt", state))

        try:
            result = run_flow(m, grid, initial, control, on_snapshot=on_snapshot)
            termination, code = result.termination, EXIT_OK
        except InadmissibleInitialData as exc:
            termination, code = "inadmissible_initial_data", EXIT_INADMISSIBLE
            sys.stderr.write(f"inadmissible initial data: {exc}\n")
        except FlowAborted as exc:
            result = exc.partial
            termination, code = "positivity_failure", EXIT_ABORTED
            sys.stderr.write(f"flow aborted: {exc}\n")
        if result is not None:
            write_csv(out / "timeseries.csv", TIMESERIES_COLUMNS,
                      (r.as_row() for r in result.records))
        return code, result
    finally:
        extra = {}
        if result is not None:
            extra = {"steps": result.steps, "rejected_steps": result.rejected,
                     "final_t": result.state.t, "snapshots": list(result.snapshots)}
        _manifest(out, cfg, started, time.perf_counter() - t0, termination, extra)


def cmd_flow(cfg: RunConfig) -> int:
    """Integrate the flow; writes ``timeseries.csv``, snapshots and ``manifest.json``."""
    code, result = _flow(cfg, Path(cfg.out_dir))
    if result is not None:
        last = result.records[-1]
        sys.stdout.write(f"t = {last.t!r}  volume = {last.volume!r}  "
                         f"max tr_chi omega = {last.max_trace_chi_omega!r}  "
                         f"steps = {result.steps}\n")
    return code


# -- static -------------------------------------------------------------------

def static_table(cfg: RunConfig):
    """Rows of :data:`STATIC_COLUMNS` over the ``(u, sigma)`` grid."""
    m = _moduli(cfg)
    grid = GridSpec.for_moduli(m, cfg.n_u, cfg.n_sigma)
    U, S = np.meshgrid(grid.u, grid.sigma, indexing="ij")
    p = ambient_from_reduced(m, ReducedCoord(U.ravel(), S.ravel()))
    phi = solve_phi(m, p)
    Z = z_function(m, p, phi)
    g = hat_metric(m, p)
    det_g = hermitian_det(g)
    tr = trace_pair(chi_metric(m, p), g)
    e1 = hermitian_eigvalsh(g - theta_form(m, p))
    e2 = hermitian_eigvalsh(ricci_chi(m, p))
    cols = (U.ravel(), S.ravel(), phi, Z, det_g, det_g * phi ** 2, tr,
            e1[:, 0], e1[:, 1], e2[:, 0], e2[:, 1])
    return [list(row) for row in zip(*(np.asarray(c, dtype=float) for c in cols))]


def cmd_static(cfg: RunConfig) -> int:
    rows = static_table(cfg)
    path = write_csv(Path(cfg.out_dir) / "static.csv", STATIC_COLUMNS, rows)
    sys.stdout.write(f"wrote {len(rows)} rows to {path}\n")
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

def sweep_cells(cfg: RunConfig):
    """Upper-triangle moduli pairs ``|alpha| <= |beta|`` in sorted order."""
    alphas = sorted(set(cfg.sweep_alpha))
    betas = sorted(set(cfg.sweep_beta or cfg.sweep_alpha))
    return [(a, b) for a in alphas for b in betas if a <= b]


def _cell_dir(out: Path, a: float, b: float) -> Path:
    return out / f"cell_a{a!r}_b{b!r}"


def _sweep_cell(args):
    cfg, a, b = args
    from .config import replace
    cell = replace(cfg, abs_alpha=a, abs_beta=b)
    out = _cell_dir(Path(cfg.out_dir), a, b)
    try:
        code, result = _flow(cell, out)
    except Exception as exc:  # recorded per cell; the sweep goes on
        return [a, b, None, None, None, None, None, f"error: {type(exc).__name__}: {exc}"]
    if result is None:
        return [a, b, None, None, None, None, None, f"exit {code}"]
    recs = result.records
    exact = None
    if a == b and cell.initial_family == "zero":
        exact = float(np.abs(result.state.phi - exact_round_potential(result.state.t)).max())
    status = "ok" if code == EXIT_OK else f"exit {code}"
    return [a, b, recs[0].volume, recs[-1].t, max(r.max_trace_chi_omega for r in recs),
            recs[-1].loop_length_max - recs[-1].loop_length_min, exact, status]


def run_sweep(cfg: RunConfig):
    cells = sweep_cells(cfg)
    jobs = [(cfg, a, b) for a, b in cells]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    return rows


def cmd_sweep(cfg: RunConfig) -> int:
    """Flow every upper-triangle moduli cell; one summary row per cell."""
    if not cfg.sweep_alpha:
        raise ConfigError("sweep_alpha: at least one value is required for a sweep")
    rows = run_sweep(cfg)
    out = Path(cfg.out_dir)
    write_csv(out / "sweep_summary.csv", SWEEP_COLUMNS, rows)
    for row in rows:
        sys.stdout.write(f"({row[0]!r}, {row[1]!r}): {row[-1]}\n")
    return EXIT_OK if all(r[-1] == "ok" for r in rows) else EXIT_ABORTED


# -- argument handling --------------------------------------------------------

COMMANDS = {"verify": cmd_verify, "flow": cmd_flow, "static": cmd_static, "sweep": cmd_sweep}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hopfflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").split("\n")[0])
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--preset", choices=sorted(PRESETS), help="moduli preset")
        p.add_argument("--seed", type=int, metavar="N", help="random seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
    return parser


def config_from_args(args, environ=None) -> RunConfig:
    """Layer preset, config file, ``HOPFFLOW_*`` environment and flags."""
    layers = []
    if args.preset:
        layers.append(PRESETS[args.preset])
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        try:
            layers.append(parse_pairs(text))
        except ConfigError as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
    layers.append(env_pairs(environ))
    flags = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        flags[key.strip()] = value.strip()
    if args.out is not None:
        flags["out_dir"] = args.out
    if args.seed is not None:
        flags["seed"] = str(args.seed)
    layers.append(flags)
    return build_config(*layers, require_moduli=args.command != "sweep")


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
