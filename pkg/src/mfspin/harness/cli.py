"""Command line entry points.

Verbs: ``pressure``, ``legendre``, ``direct``, ``variational``, ``study``,
``oracles``.  ``study`` exits 0 iff every configured tolerance check
passes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ..errors import MfspinError
from ..ncpoly import Rectangle
from ..thermo import legendre_transform, pressure_surface
from ..varprinciple import solve_rate_form
from .config import ExperimentConfig, parse_config
from .study import _direct_value, _run_oracle, emit_report, run_convergence_study


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfspin",
        description="Mean-field free energies: finite-volume traces vs the variational route",
    )
    parser.add_argument("verb", choices=["pressure", "legendre", "direct", "variational", "study", "oracles"])
    parser.add_argument("config", help="path to a TOML experiment file")
    parser.add_argument("--workers", type=int, default=None, help="parallel worker count")
    parser.add_argument("--out-dir", default=None, help="output directory override")
    parser.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="tolerance override, repeatable",
    )
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out_dir is not None:
        updates["output_dir"] = args.out_dir
    if args.tol:
        tols = dict(cfg.tolerances)
        for item in args.tol:
            name, _, value = item.partition("=")
            tols[name] = float(value)
        updates["tolerances"] = tuple(tols.items())
    return cfg.with_overrides(**updates) if updates else cfg


def _surface(cfg: ExperimentConfig):
    phi, X, Y = cfg.interaction(), cfg.x_observable(), cfg.y_observable()
    u = np.linspace(
        -cfg.tilt_radius / max(X.norm, 1e-12),
        cfg.tilt_radius / max(X.norm, 1e-12),
        cfg.tilt_points,
    )
    v = (
        np.linspace(
            -cfg.tilt_radius / max(Y.norm, 1e-12),
            cfg.tilt_radius / max(Y.norm, 1e-12),
            cfg.tilt_points,
        )
        if Y is not None
        else None
    )
    return pressure_surface(phi, X, Y, cfg.volumes_pressure, u, v, dim_cap=cfg.dense_cap)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(parse_config(args.config), args)
        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        if args.verb == "pressure":
            ps = _surface(cfg)
            ps.to_csv(os.path.join(out, "pressure.csv"))
            ps.to_json(os.path.join(out, "pressure.json"))
            print(f"pressure surface on {ps.p.shape} tilt grid -> {out}/pressure.csv")
        elif args.verb == "legendre":
            ps = _surface(cfg)
            rect = Rectangle.from_observables(cfg.x_observable(), cfg.y_observable())
            x = np.linspace(-rect.x_radius, rect.x_radius, cfg.rate_points)
            y = (
                np.linspace(-rect.y_radius, rect.y_radius, cfg.rate_points)
                if cfg.y_spec is not None
                else None
            )
            rf = legendre_transform(ps, x, y)
            ps.to_csv(os.path.join(out, "pressure.csv"))
            rf.to_csv(os.path.join(out, "rate.csv"))
            rf.to_json(os.path.join(out, "rate.json"))
            print(f"rate function on {rf.values.shape} grid -> {out}/rate.csv")
        elif args.verb == "direct":
            rows = [(n, *_direct_value(cfg, n)) for n in cfg.volumes_direct]
            path = os.path.join(out, "direct.csv")
            with open(path, "w") as fh:
                fh.write("n_sites,direct,path\n")
                for n, value, how in rows:
                    fh.write(f"{n},{value!r},{how}\n")
            for n, value, how in rows:
                print(f"N={n:>6d}  direct={value:.10f}  [{how}]")
        elif args.verb == "variational":
            ps = _surface(cfg)
            rect = Rectangle.from_observables(cfg.x_observable(), cfg.y_observable())
            x = np.linspace(-rect.x_radius, rect.x_radius, cfg.rate_points)
            y = (
                np.linspace(-rect.y_radius, rect.y_radius, cfg.rate_points)
                if cfg.y_spec is not None
                else None
            )
            rf = legendre_transform(ps, x, y)
            result = solve_rate_form(rf, cfg.polynomial(), rect)
            with open(os.path.join(out, "variational.json"), "w") as fh:
                json.dump(result.to_json_dict(), fh, indent=1)
            print(
                f"value={result.value:.10f} at (x*, y*)=({result.x_star:.6f}, {result.y_star:.6f})"
            )
        elif args.verb == "oracles":
            values = {
                name: _run_oracle(cfg, name, dict(params)) for name, params in cfg.oracles
            }
            with open(os.path.join(out, "oracles.json"), "w") as fh:
                json.dump(values, fh, indent=1, sort_keys=True)
            for name, value in sorted(values.items()):
                print(f"{name}: {value:.10f}")
        else:  # study
            report = run_convergence_study(cfg)
            emit_report(report, out)
            print(f"variational value = {report.variational.value:.10f}")
            for row in report.rows:
                print(f"N={row.n_sites:>6d}  direct={row.direct:.10f}  gap={row.gap:.3e}")
            for name, ok in report.checks.items():
                print(f"check {name}: {'pass' if ok else 'FAIL'}")
            return 0 if report.passed else 1
        return 0
    except MfspinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
