"""Convergence studies: direct sequence, variational pipeline, block bounds.

The runner schedules per-volume direct values across a thread pool and
merges them by index, so parallel and serial runs emit byte-identical
reports.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionCapExceeded, IoError, MfspinError
from ..lattice import DENSE_DIM_CAP
from ..ncpoly import Rectangle, evaluate_classical
from ..thermo import legendre_transform, pressure_surface
from ..varprinciple import (
    VariationalResult,
    _classical_gradient_polys,
    block_lower_bound,
    mean_field_log_partition,
    product_state_solve,
    sector_mean_field_value,
    solve_rate_form,
    tilted_block_state,
)
from .config import ExperimentConfig
from .oracles import (
    oracle_classical_sector_sum,
    oracle_scalar_curie_weiss,
    oracle_transfer_matrix_1d,
)

REPORT_SCHEMA = "mfspin.report/1"


@contextmanager
def _stage(name: str):
    """Tag propagated package errors with the study stage they came from."""
    try:
        yield
    except MfspinError as exc:
        raise type(exc)(f"[stage: {name}] {exc}") from exc


@dataclass(frozen=True)
class DirectRow:
    """One finite-volume direct value and its distance to the variational value."""

    n_sites: int
    direct: float
    gap: float
    path: str


@dataclass(frozen=True)
class BlockRow:
    n_sites: int
    bound: float
    correction: float

    @property
    def certified(self) -> float:
        return self.bound - self.correction


@dataclass
class ConvergenceReport:
    rows: list[DirectRow]
    variational: VariationalResult
    product_state: VariationalResult | None
    blocks: list[BlockRow]
    oracle_values: dict
    checks: dict
    tolerances: dict
    config: dict = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "rows": [
                {"n_sites": r.n_sites, "direct": r.direct, "gap": r.gap, "path": r.path}
                for r in self.rows
            ],
            "variational": self.variational.to_json_dict(),
            "product_state": self.product_state.to_json_dict()
            if self.product_state
            else None,
            "blocks": [
                {
                    "n_sites": b.n_sites,
                    "bound": b.bound,
                    "correction": b.correction,
                    "certified": b.certified,
                }
                for b in self.blocks
            ],
            "oracle_values": self.oracle_values,
            "checks": self.checks,
            "tolerances": self.tolerances,
            "config": self.config,
        }


def _direct_value(cfg: ExperimentConfig, n_sites: int) -> tuple[float, str]:
    phi, g = cfg.interaction(), cfg.polynomial()
    X, Y = cfg.x_observable(), cfg.y_observable()
    cap = cfg.dense_cap if cfg.dense_cap is not None else DENSE_DIM_CAP
    if cfg.n ** n_sites <= cap:
        return (
            mean_field_log_partition(phi, g, X, Y, n_sites, dim_cap=cfg.dense_cap),
            "dense",
        )
    if cfg.n == 2 and phi.is_one_site() and X.n_sites == 1 and (Y is None or Y.n_sites == 1):
        return sector_mean_field_value(phi, g, X, Y, n_sites), "sector"
    raise DimensionCapExceeded(
        f"direct value at {n_sites} sites: dense dimension over cap and the "
        "collective-spin path does not apply"
    )


def _classical_g(cfg: ExperimentConfig):
    terms = [(w.lower(), complex(c)) for w, c in cfg.g_terms]

    def g_of_m(m: float) -> float:
        total = 0j
        for word, coeff in terms:
            total += coeff * m ** word.count("x") * 0.0 ** word.count("y")
        return total.real

    return g_of_m


def _run_oracle(cfg: ExperimentConfig, name: str, params: dict) -> float:
    if name == "scalar_curie_weiss":
        return oracle_scalar_curie_weiss(params["lam"], params.get("h", 0.0))
    if name == "classical_sector_sum":
        if not cfg.x_observable().is_diagonal():
            raise ValueError(
                "classical_sector_sum oracle requires a diagonal observable"
            )
        return oracle_classical_sector_sum(
            params.get("field", 0.0), _classical_g(cfg), int(params["n_sites"])
        )
    if name == "transfer_matrix_1d":
        return oracle_transfer_matrix_1d(params["coupling"], params["tilt"])
    raise ValueError(f"unknown oracle {name}")


def run_convergence_study(cfg: ExperimentConfig) -> ConvergenceReport:
    """Full pipeline on one configured model; deterministic for fixed input."""
    phi, g = cfg.interaction(), cfg.polynomial()
    X, Y = cfg.x_observable(), cfg.y_observable()
    rect = Rectangle.from_observables(X, Y)

    u_grid = np.linspace(
        -cfg.tilt_radius / max(X.norm, 1e-12),
        cfg.tilt_radius / max(X.norm, 1e-12),
        cfg.tilt_points,
    )
    v_grid = (
        np.linspace(
            -cfg.tilt_radius / max(Y.norm, 1e-12),
            cfg.tilt_radius / max(Y.norm, 1e-12),
            cfg.tilt_points,
        )
        if Y is not None
        else None
    )
    with _stage("pressure"):
        ps = pressure_surface(
            phi, X, Y, cfg.volumes_pressure, u_grid, v_grid, dim_cap=cfg.dense_cap
        )
    x_grid = np.linspace(-rect.x_radius, rect.x_radius, cfg.rate_points)
    y_grid = (
        np.linspace(-rect.y_radius, rect.y_radius, cfg.rate_points)
        if Y is not None
        else None
    )
    with _stage("legendre"):
        rf = legendre_transform(ps, x_grid, y_grid)
    with _stage("variational"):
        variational = solve_rate_form(rf, g, rect)

    with _stage("direct"), ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        direct = list(pool.map(lambda n: _direct_value(cfg, n), cfg.volumes_direct))
    rows = [
        DirectRow(n, float(value), float(abs(value - variational.value)), path)
        for n, (value, path) in zip(cfg.volumes_direct, direct)
    ]

    product = None
    if (
        cfg.n == 2
        and phi.is_one_site()
        and X.n_sites == 1
        and (Y is None or Y.n_sites == 1)
    ):
        d_obs = None
        if phi.terms:
            from ..lattice import one_site

            d_obs = one_site(sum(t.matrix for t in phi.terms))
        product = product_state_solve(d_obs, X, Y, g)

    gx_poly, gy_poly = _classical_gradient_polys(g)
    u_star = evaluate_classical(gx_poly, variational.x_star, variational.y_star)
    v_star = evaluate_classical(gy_poly, variational.x_star, variational.y_star)
    blocks = []
    with _stage("blocks"):
        for size in cfg.blocks:
            mu = tilted_block_state(phi, X, Y, u_star, v_star, size, dim_cap=cfg.dense_cap)
            bound, correction = block_lower_bound(phi, g, X, Y, size, mu)
            blocks.append(BlockRow(size, float(bound), float(correction)))

    oracle_values = {
        name: float(_run_oracle(cfg, name, dict(params))) for name, params in cfg.oracles
    }

    tolerances = dict(cfg.tolerances)
    checks: dict = {}
    tol = tolerances.get("direct_vs_variational")
    if tol is not None and rows:
        checks["direct_vs_variational"] = bool(rows[-1].gap <= tol)
    tol = tolerances.get("oracle_vs_variational")
    if tol is not None and oracle_values:
        checks["oracle_vs_variational"] = bool(
            all(abs(v - variational.value) <= tol for v in oracle_values.values())
        )
    tol = tolerances.get("block_vs_variational")
    if tol is not None and blocks:
        checks["block_vs_variational"] = bool(
            abs(blocks[-1].certified - variational.value) <= tol
        )

    cfg_dict = cfg.to_dict()
    cfg_dict["run"].pop("workers", None)  # execution detail; parallel == serial
    return ConvergenceReport(
        rows=rows,
        variational=variational,
        product_state=product,
        blocks=blocks,
        oracle_values=oracle_values,
        checks=checks,
        tolerances=tolerances,
        config=cfg_dict,
    )


def emit_report(report: ConvergenceReport, out_dir) -> list[str]:
    """Write report.json, report.csv, and the plotdata series; returns paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=1, sort_keys=True)
        paths.append(path)

        path = os.path.join(out_dir, "report.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_sites", "direct", "gap", "path"])
            for row in report.rows:
                writer.writerow([row.n_sites, repr(row.direct), repr(row.gap), row.path])
        paths.append(path)

        certified = report.blocks[-1].certified if report.blocks else ""
        path = os.path.join(out_dir, "plotdata.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_sites", "direct", "variational", "lower_bound"])
            for row in report.rows:
                writer.writerow(
                    [
                        row.n_sites,
                        repr(row.direct),
                        repr(report.variational.value),
                        repr(certified) if certified != "" else "",
                    ]
                )
        paths.append(path)
        return paths
    except OSError as exc:
        raise IoError(f"cannot write report under {out_dir}: {exc}") from exc
