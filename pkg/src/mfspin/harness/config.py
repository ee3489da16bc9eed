"""Experiment configuration: strict TOML parsing and model builders.

Observables are entered as Pauli strings over consecutive chain sites
(``"z"``, ``"zz"``, ``"x"``) or as raw complex matrices with an explicit
support; the mean-field polynomial is a list of (word, coefficient)
pairs over the letters ``xy``.  Unknown keys and inconsistent dimensions
are rejected with the offending key path in the message.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace

import numpy as np

from ..errors import IoError, ParseError, ValidationError
from ..lattice import Interaction, LocalObservable, pauli_observable
from ..ncpoly import NcPolynomial

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema", "model", "volumes", "grids", "tolerances", "oracles", "output", "run"}
_MODEL_KEYS = {"n", "interaction", "x", "y", "g"}
_VOLUME_KEYS = {"direct", "pressure", "blocks"}
_GRID_KEYS = {"tilt_points", "rate_points", "tilt_radius"}
_OUTPUT_KEYS = {"directory"}
_RUN_KEYS = {"workers", "seed", "dense_cap"}
_OBS_KEYS = {"pauli", "coeff", "matrix", "support"}
_G_KEYS = {"word", "coeff"}
_ORACLE_PARAMS = {
    "scalar_curie_weiss": {"lam", "h"},
    "classical_sector_sum": {"field", "n_sites"},
    "transfer_matrix_1d": {"coupling", "tilt"},
}

_KNOWN_TOLERANCES = {
    "direct_vs_variational",
    "oracle_vs_variational",
    "block_vs_variational",
}


def _reject_unknown(table: dict, allowed: set, path: str) -> None:
    for key in table:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}: unknown key" if path else f"{key}: unknown key")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_complex(value, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)
    ):
        return complex(value[0], value[1])
    raise ValidationError(f"{path}: expected a number or [re, im] pair")


def _as_int_list(value, path: str) -> tuple[int, ...]:
    if not isinstance(value, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        raise ValidationError(f"{path}: expected a list of integers")
    return tuple(value)


@dataclass(frozen=True)
class ObservableSpec:
    """Parsed observable: either a Pauli word or a raw matrix with support."""

    pauli: str | None = None
    coeff: complex = 1.0
    matrix: tuple | None = None
    support: tuple | None = None

    def build(self, n: int, path: str) -> LocalObservable:
        if self.pauli is not None:
            _require(n == 2, f"{path}: Pauli strings need single-site dimension 2")
            return pauli_observable(self.pauli, float(self.coeff.real))
        rows = [[complex(e) for e in row] for row in self.matrix]
        matrix = np.array(rows, dtype=complex) * self.coeff
        support = tuple(tuple(s) for s in self.support)
        try:
            return LocalObservable(support, matrix, n=n)
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        if self.pauli is not None:
            out = {"pauli": self.pauli}
            if self.coeff != 1.0:
                out["coeff"] = _complex_out(self.coeff)
            return out
        return {
            "matrix": [[_complex_out(complex(e)) for e in row] for row in self.matrix],
            "support": [list(s) for s in self.support],
        }


def _complex_out(c: complex):
    return c.real if c.imag == 0 else [c.real, c.imag]


def _parse_observable(table, path: str) -> ObservableSpec:
    if not isinstance(table, dict):
        raise ValidationError(f"{path}: expected a table")
    _reject_unknown(table, _OBS_KEYS, path)
    if "pauli" in table:
        _require("matrix" not in table and "support" not in table,
                 f"{path}: give either pauli or matrix+support, not both")
        word = table["pauli"]
        _require(isinstance(word, str) and word != "", f"{path}.pauli: expected a word over ixyz")
        coeff = _as_complex(table.get("coeff", 1.0), f"{path}.coeff")
        _require(coeff.imag == 0.0, f"{path}.coeff: Pauli coefficients must be real")
        return ObservableSpec(pauli=word, coeff=coeff)
    _require("matrix" in table and "support" in table,
             f"{path}: needs pauli or matrix+support")
    matrix = table["matrix"]
    _require(isinstance(matrix, list) and matrix and all(isinstance(r, list) for r in matrix),
             f"{path}.matrix: expected a nested list")
    entries = tuple(
        tuple(_as_complex(e, f"{path}.matrix[{i}][{j}]") for j, e in enumerate(row))
        for i, row in enumerate(matrix)
    )
    support = table["support"]
    _require(isinstance(support, list) and support and all(isinstance(s, list) for s in support),
             f"{path}.support: expected a list of offset lists")
    sup = tuple(tuple(int(c) for c in s) for s in support)
    coeff = _as_complex(table.get("coeff", 1.0), f"{path}.coeff")
    return ObservableSpec(matrix=entries, support=sup, coeff=coeff)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one study needs: model, volumes, grids, tolerances, outputs."""

    n: int = 2
    interaction_terms: tuple[ObservableSpec, ...] = ()
    x_spec: ObservableSpec | None = None
    y_spec: ObservableSpec | None = None
    g_terms: tuple[tuple[str, complex], ...] = ()
    volumes_direct: tuple[int, ...] = ()
    volumes_pressure: tuple[int, ...] = ()
    blocks: tuple[int, ...] = ()
    tilt_points: int = 33
    rate_points: int = 65
    tilt_radius: float = 4.0
    tolerances: tuple[tuple[str, float], ...] = ()
    oracles: tuple[tuple[str, tuple[tuple[str, float], ...]], ...] = ()
    output_dir: str = "out"
    workers: int = 1
    seed: int = 1234
    dense_cap: int | None = None

    def interaction(self) -> Interaction:
        terms = tuple(
            spec.build(self.n, f"model.interaction[{i}]")
            for i, spec in enumerate(self.interaction_terms)
        )
        return Interaction(terms, n=self.n)

    def x_observable(self) -> LocalObservable:
        return self.x_spec.build(self.n, "model.x")

    def y_observable(self) -> LocalObservable | None:
        return self.y_spec.build(self.n, "model.y") if self.y_spec else None

    def polynomial(self) -> NcPolynomial:
        return NcPolynomial.from_terms(self.g_terms)

    def tolerance(self, name: str) -> float | None:
        return dict(self.tolerances).get(name)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        out: dict = {
            "schema": SCHEMA_VERSION,
            "model": {
                "n": self.n,
                "interaction": [t.to_dict() for t in self.interaction_terms],
                "x": self.x_spec.to_dict(),
                "g": [
                    {"word": w, "coeff": _complex_out(c)} for w, c in self.g_terms
                ],
            },
            "volumes": {
                "direct": list(self.volumes_direct),
                "pressure": list(self.volumes_pressure),
                "blocks": list(self.blocks),
            },
            "grids": {
                "tilt_points": self.tilt_points,
                "rate_points": self.rate_points,
                "tilt_radius": self.tilt_radius,
            },
            "tolerances": dict(self.tolerances),
            "oracles": {name: dict(params) for name, params in self.oracles},
            "output": {"directory": self.output_dir},
            "run": {"workers": self.workers, "seed": self.seed},
        }
        if self.y_spec is not None:
            out["model"]["y"] = self.y_spec.to_dict()
        if self.dense_cap is not None:
            out["run"]["dense_cap"] = self.dense_cap
        return out


def config_from_dict(data: dict, source: str = "<dict>") -> ExperimentConfig:
    _reject_unknown(data, _TOP_KEYS, "")
    schema = data.get("schema", SCHEMA_VERSION)
    _require(schema == SCHEMA_VERSION, f"schema: unsupported version {schema}")

    model = data.get("model")
    _require(isinstance(model, dict), "model: missing table")
    _reject_unknown(model, _MODEL_KEYS, "model")
    n = model.get("n", 2)
    _require(isinstance(n, int) and n >= 2, "model.n: expected an integer >= 2")
    _require("x" in model, "model.x: missing observable")
    x_spec = _parse_observable(model["x"], "model.x")
    y_spec = _parse_observable(model["y"], "model.y") if "y" in model else None

    terms = model.get("interaction", [])
    _require(isinstance(terms, list), "model.interaction: expected an array of tables")
    term_specs = tuple(
        _parse_observable(t, f"model.interaction[{i}]") for i, t in enumerate(terms)
    )

    g_raw = model.get("g", [])
    _require(isinstance(g_raw, list), "model.g: expected an array of tables")
    g_terms = []
    for i, item in enumerate(g_raw):
        _require(isinstance(item, dict), f"model.g[{i}]: expected a table")
        _reject_unknown(item, _G_KEYS, f"model.g[{i}]")
        word = item.get("word")
        _require(isinstance(word, str), f"model.g[{i}].word: expected a word over xy")
        g_terms.append((word, _as_complex(item.get("coeff", 1.0), f"model.g[{i}].coeff")))
    if y_spec is None:
        for word, _ in g_terms:
            _require("y" not in word.lower(),
                     "model.g: polynomial uses y but model.y is absent")

    volumes = data.get("volumes", {})
    _require(isinstance(volumes, dict), "volumes: expected a table")
    _reject_unknown(volumes, _VOLUME_KEYS, "volumes")
    direct = _as_int_list(volumes.get("direct", []), "volumes.direct")
    pressure = _as_int_list(volumes.get("pressure", []), "volumes.pressure")
    blocks = _as_int_list(volumes.get("blocks", []), "volumes.blocks")
    for name, seq in (("volumes.direct", direct), ("volumes.pressure", pressure)):
        _require(all(b > a for a, b in zip(seq, seq[1:])),
                 f"{name}: volume sequence must be strictly increasing")
        _require(all(v >= 1 for v in seq), f"{name}: volumes must be positive")

    grids = data.get("grids", {})
    _require(isinstance(grids, dict), "grids: expected a table")
    _reject_unknown(grids, _GRID_KEYS, "grids")
    tilt_points = grids.get("tilt_points", 33)
    rate_points = grids.get("rate_points", 65)
    tilt_radius = _as_number(grids.get("tilt_radius", 4.0), "grids.tilt_radius")
    for name, val in (("grids.tilt_points", tilt_points), ("grids.rate_points", rate_points)):
        _require(isinstance(val, int) and val >= 2, f"{name}: expected an integer >= 2")
    _require(tilt_radius > 0, "grids.tilt_radius: must be positive")

    tols = data.get("tolerances", {})
    _require(isinstance(tols, dict), "tolerances: expected a table")
    tolerances = []
    for key, val in tols.items():
        _require(key in _KNOWN_TOLERANCES, f"tolerances.{key}: unknown key")
        num = _as_number(val, f"tolerances.{key}")
        _require(num > 0, f"tolerances.{key}: must be positive")
        tolerances.append((key, num))

    oracles_raw = data.get("oracles", {})
    _require(isinstance(oracles_raw, dict), "oracles: expected a table")
    oracles = []
    for name, params in oracles_raw.items():
        _require(name in _ORACLE_PARAMS, f"oracles.{name}: unknown oracle")
        _require(isinstance(params, dict), f"oracles.{name}: expected a table")
        _reject_unknown(params, _ORACLE_PARAMS[name], f"oracles.{name}")
        oracles.append(
            (name, tuple((k, _as_number(v, f"oracles.{name}.{k}")) for k, v in params.items()))
        )

    output = data.get("output", {})
    _require(isinstance(output, dict), "output: expected a table")
    _reject_unknown(output, _OUTPUT_KEYS, "output")
    out_dir = output.get("directory", "out")
    _require(isinstance(out_dir, str), "output.directory: expected a string")

    run = data.get("run", {})
    _require(isinstance(run, dict), "run: expected a table")
    _reject_unknown(run, _RUN_KEYS, "run")
    workers = run.get("workers", 1)
    seed = run.get("seed", 1234)
    dense_cap = run.get("dense_cap")
    _require(isinstance(workers, int) and workers >= 1, "run.workers: expected an integer >= 1")
    _require(isinstance(seed, int), "run.seed: expected an integer")
    if dense_cap is not None:
        _require(isinstance(dense_cap, int) and dense_cap >= 2,
                 "run.dense_cap: expected an integer >= 2")

    cfg = ExperimentConfig(
        n=n,
        interaction_terms=term_specs,
        x_spec=x_spec,
        y_spec=y_spec,
        g_terms=tuple(g_terms),
        volumes_direct=direct,
        volumes_pressure=pressure,
        blocks=blocks,
        tilt_points=tilt_points,
        rate_points=rate_points,
        tilt_radius=tilt_radius,
        tolerances=tuple(tolerances),
        oracles=tuple(oracles),
        output_dir=out_dir,
        workers=workers,
        seed=seed,
        dense_cap=dense_cap,
    )
    # building the operators catches dimension mismatches early
    cfg.interaction()
    cfg.x_observable()
    cfg.y_observable()
    cfg.polynomial()
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_dict(data, source=str(path))
