"""Tilted pressure surfaces and their Legendre-Fenchel transform.

The infinite-volume pressure is approximated by finite-volume values
fitted to a + b/|vol| over the largest volumes.  Both transforms keep a
handle on an exact evaluator so grid suprema can be refined by golden
section ascent along coordinate lines (the objectives are concave), far
below grid resolution.

Everything is written for two observables; passing Y = None collapses
the second tilt and rate axes to the single point 0, which is the
one-observable rate function as a marginal of the two-variable form.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples
from .lattice import (
    DenseHermitian,
    Interaction,
    LocalObservable,
    Volume,
    build_hamiltonian,
    empirical_average,
)
from .spectral import expectation, gibbs_state, log_trace_exp

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

GOLDEN_ITERS = 30
ASCENT_ROUNDS = 24
ASCENT_FTOL = 1e-11
EDGE_FRACTION = 1e-6

DEFAULT_TILT_POINTS = 33
DEFAULT_RATE_POINTS = 65
TILT_BOX_SCALE = 4.0

_CHUNK_ELEMS = 2 ** 22  # complex entries per stacked-eigensolver chunk


def golden_max_batch(f, lo, hi, iters: int = GOLDEN_ITERS):
    """Lockstep golden-section maximization of a batched unimodal objective.

    ``f`` maps an array of abscissas to an array of values; every batch
    element keeps its own bracket.  One function call per iteration.
    """
    a = np.array(lo, dtype=float).copy()
    b = np.array(hi, dtype=float).copy()
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc >= fd
        new_b = np.where(left, d, b)
        new_a = np.where(left, a, c)
        new_c = np.where(left, new_b - INVPHI * (new_b - new_a), d)
        new_d = np.where(left, c, new_a + INVPHI * (new_b - new_a))
        probe = np.where(left, new_c, new_d)
        fp = f(probe)
        new_fc = np.where(left, fp, fd)
        new_fd = np.where(left, fc, fp)
        a, b, c, d, fc, fd = new_a, new_b, new_c, new_d, new_fc, new_fd
    x = np.where(fc >= fd, c, d)
    return x, np.maximum(fc, fd)


def _segment_bounds(start, step, lo, hi, cap: float = 8.0):
    """Per-point parameter range keeping start + t * step inside [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(
            step > 0, (hi - start) / step, np.where(step < 0, (lo - start) / step, cap)
        )
        lower = np.where(
            step > 0, (lo - start) / step, np.where(step < 0, (hi - start) / step, -1.0)
        )
    return np.minimum(np.maximum(upper, 0.0), cap), np.maximum(np.minimum(lower, 0.0), -cap)


def _fit_weights(sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares weights for the a + b/N model on the top half of sizes."""
    k = len(sizes)
    m = max(2, (k + 1) // 2) if k > 1 else 1
    sub = sizes[-m:]
    if m == 1:
        return sub, np.array([[1.0], [0.0]])
    design = np.stack([np.ones(m), 1.0 / sub], axis=1)
    return sub, np.linalg.pinv(design)


class FiniteVolumePressure:
    """Batched evaluator of the extrapolated tilted pressure.

    Holds the dense Hamiltonian and extensive observable sums for each
    volume in the sequence; evaluates p and its tilt gradient at arrays
    of tilt points via stacked eigendecompositions.
    """

    def __init__(
        self,
        phi: Interaction,
        X: LocalObservable,
        Y: LocalObservable | None,
        volumes,
        dim_cap: int | None = None,
    ):
        self.volumes = tuple(_as_volume(v) for v in volumes)
        if len(self.volumes) < 1:
            raise InsufficientSamples("need at least one volume")
        sizes = [v.n_sites for v in self.volumes]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise InsufficientSamples("volume sequence must be strictly increasing")
        self.sizes = np.array(sizes, dtype=float)
        self.x_norm = X.norm
        self.y_norm = Y.norm if Y is not None else 0.0
        self.has_y = Y is not None
        self._ops = []
        for vol in self.volumes:
            n = vol.n_sites
            h = build_hamiltonian(phi, vol, dim_cap).matrix
            xl = empirical_average(X, vol, dim_cap).matrix * n
            yl = empirical_average(Y, vol, dim_cap).matrix * n if Y is not None else None
            self._ops.append((n, h, xl, yl))
        self._sub_sizes, self._weights = _fit_weights(self.sizes)

    def _per_volume(self, U, V, want_grad: bool):
        U = np.atleast_1d(np.asarray(U, dtype=float))
        V = np.atleast_1d(np.asarray(V, dtype=float))
        batch = len(U)
        p = np.empty((batch, len(self._ops)))
        gx = np.empty_like(p) if want_grad else None
        gy = np.empty_like(p) if want_grad else None
        for col, (n, h, xl, yl) in enumerate(self._ops):
            dim = h.shape[0]
            chunk = max(1, _CHUNK_ELEMS // (dim * dim))
            for start in range(0, batch, chunk):
                sl = slice(start, min(start + chunk, batch))
                mats = -h[None, :, :] + U[sl, None, None] * xl
                if yl is not None:
                    mats = mats + V[sl, None, None] * yl
                if want_grad:
                    evals, evecs = np.linalg.eigh(mats)
                    w = np.exp(evals - evals[:, -1:])
                    w /= w.sum(axis=1, keepdims=True)
                    xrot = np.einsum(
                        "bki,kl,bli->bi", evecs.conj(), xl, evecs, optimize=True
                    ).real
                    gx[sl, col] = (w * xrot).sum(axis=1) / n
                    if yl is not None:
                        yrot = np.einsum(
                            "bki,kl,bli->bi", evecs.conj(), yl, evecs, optimize=True
                        ).real
                        gy[sl, col] = (w * yrot).sum(axis=1) / n
                    else:
                        gy[sl, col] = 0.0
                else:
                    evals = np.linalg.eigvalsh(mats)
                top = evals[:, -1]
                p[sl, col] = (
                    top + np.log(np.exp(evals - top[:, None]).sum(axis=1))
                ) / n
        return p, gx, gy

    def _extrapolate(self, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = len(self._sub_sizes)
        sub = table[:, -m:]
        theta = sub @ self._weights.T
        a, b = theta[:, 0], theta[:, 1]
        fit = a[:, None] + b[:, None] / self._sub_sizes[None, :]
        err = np.abs(sub - fit).max(axis=1) + np.abs(b) / self.sizes[-1]
        return a, err

    def pressure(self, U, V):
        """Extrapolated pressure and error estimate at arrays of tilts."""
        table, _, _ = self._per_volume(U, V, want_grad=False)
        return self._extrapolate(table)

    def value(self, U, V):
        return self.pressure(U, V)[0]

    def gradient(self, U, V):
        """Extrapolated tilt gradient (tilted-Gibbs expectations of the averages)."""
        _, gx, gy = self._per_volume(U, V, want_grad=True)
        ax, _ = self._extrapolate(gx)
        ay, _ = self._extrapolate(gy)
        return ax, ay


class CallablePressure:
    """Evaluator wrapping a closed-form pressure (synthetic surfaces)."""

    def __init__(self, fn, grad_fn=None, x_norm=None, y_norm=None, has_y=True):
        self._fn = fn
        self._grad = grad_fn
        self.x_norm = x_norm
        self.y_norm = y_norm
        self.has_y = has_y

    def pressure(self, U, V):
        U = np.atleast_1d(np.asarray(U, dtype=float))
        V = np.atleast_1d(np.asarray(V, dtype=float))
        return np.asarray(self._fn(U, V), dtype=float), np.zeros(len(U))

    def value(self, U, V):
        return self.pressure(U, V)[0]

    def gradient(self, U, V, h: float = 1e-6):
        if self._grad is not None:
            gx, gy = self._grad(U, V)
            return np.asarray(gx, dtype=float), np.asarray(gy, dtype=float)
        U = np.atleast_1d(np.asarray(U, dtype=float))
        V = np.atleast_1d(np.asarray(V, dtype=float))
        gx = (self.value(U + h, V) - self.value(U - h, V)) / (2 * h)
        gy = (
            (self.value(U, V + h) - self.value(U, V - h)) / (2 * h)
            if self.has_y
            else np.zeros_like(gx)
        )
        return gx, gy


def _as_volume(v) -> Volume:
    if isinstance(v, Volume):
        return v
    if isinstance(v, int):
        return Volume.chain(v)
    return Volume(tuple(v))


def finite_volume_pressure(
    phi: Interaction,
    X: LocalObservable,
    Y: LocalObservable | None,
    u: float,
    v: float,
    vol,
    dim_cap: int | None = None,
) -> float:
    """Per-site log-trace of exp(-H + u X_vol + v Y_vol) on one volume."""
    vol = _as_volume(vol)
    n = vol.n_sites
    a = -build_hamiltonian(phi, vol, dim_cap).matrix
    a = a + u * n * empirical_average(X, vol, dim_cap).matrix
    if Y is not None:
        a = a + v * n * empirical_average(Y, vol, dim_cap).matrix
    elif v != 0.0:
        raise ValueError("nonzero second tilt without a second observable")
    return log_trace_exp(a) / n


def pressure_gradient(
    phi: Interaction,
    X: LocalObservable,
    Y: LocalObservable | None,
    u: float,
    v: float,
    vol,
    dim_cap: int | None = None,
) -> tuple[float, float]:
    """Expectations of the empirical averages under the tilted Gibbs state."""
    vol = _as_volume(vol)
    n = vol.n_sites
    xbar = empirical_average(X, vol, dim_cap)
    a = -build_hamiltonian(phi, vol, dim_cap).matrix + u * n * xbar.matrix
    ybar = None
    if Y is not None:
        ybar = empirical_average(Y, vol, dim_cap)
        a = a + v * n * ybar.matrix
    rho = gibbs_state(DenseHermitian(a))
    gx = expectation(rho, xbar)
    gy = expectation(rho, ybar) if ybar is not None else 0.0
    return gx, gy


def extrapolate_pressure(samples) -> tuple[float, float]:
    """Fit p = p_inf + b/N over the largest volumes of the sequence.

    The error estimate is the worst fit residual plus the size of the
    1/N term at the largest volume.
    """
    samples = sorted((int(n), float(p)) for n, p in samples)
    if len(samples) < 3:
        raise InsufficientSamples("extrapolation needs at least three volumes")
    sizes = np.array([n for n, _ in samples], dtype=float)
    if len(set(sizes)) != len(sizes):
        raise InsufficientSamples("volume sizes must be strictly increasing")
    values = np.array([p for _, p in samples])
    sub, weights = _fit_weights(sizes)
    m = len(sub)
    theta = weights @ values[-m:]
    a, b = float(theta[0]), float(theta[1])
    resid = np.abs(values[-m:] - (a + b / sub)).max()
    return a, float(resid + abs(b) / sizes[-1])


@dataclass(eq=False)
class PressureSurface:
    """Sampled tilted pressure with gradients and extrapolation errors."""

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray
    err: np.ndarray
    volumes: tuple[int, ...]
    evaluator: object = field(default=None, repr=False, compare=False)

    @property
    def has_y(self) -> bool:
        return len(self.v) > 1

    def grid_points(self):
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        return uu.ravel(), vv.ravel()

    def max_convexity_violation(self) -> float:
        """Worst midpoint-convexity defect along grid lines (uniform grids)."""
        worst = 0.0
        for arr in (self.p, self.p.T):
            if arr.shape[0] >= 3:
                mid = arr[1:-1]
                violation = mid - 0.5 * (arr[:-2] + arr[2:])
                worst = max(worst, float(violation.max()))
        return worst

    def validate(self) -> None:
        tol = 2.0 * float(self.err.max()) + 1e-9
        bad = self.max_convexity_violation()
        if bad > tol:
            raise ValueError(f"pressure surface violates convexity by {bad:.3e}")

    def rows(self):
        for i, uu in enumerate(self.u):
            for j, vv in enumerate(self.v):
                yield (
                    float(uu),
                    float(vv),
                    float(self.p[i, j]),
                    float(self.grad_x[i, j]),
                    float(self.grad_y[i, j]),
                    float(self.err[i, j]),
                )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u", "v", "p", "gx", "gy", "err"])
            writer.writerows(self.rows())

    def to_json(self, path) -> None:
        payload = {
            "schema": "mfspin.pressure_surface/1",
            "volumes": list(self.volumes),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "p": self.p.tolist(),
            "grad_x": self.grad_x.tolist(),
            "grad_y": self.grad_y.tolist(),
            "err": self.err.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)


def default_tilt_grid(
    X: LocalObservable,
    Y: LocalObservable | None,
    points: int = DEFAULT_TILT_POINTS,
    refine: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Tilt box [-4, 4] scaled by the observable norms; gradients saturate there."""
    points = points * 2 ** refine - (2 ** refine - 1) if refine else points
    ur = TILT_BOX_SCALE / max(X.norm, 1e-12)
    u = np.linspace(-ur, ur, points)
    if Y is None:
        return u, np.zeros(1)
    vr = TILT_BOX_SCALE / max(Y.norm, 1e-12)
    return u, np.linspace(-vr, vr, points)


def pressure_surface(
    phi: Interaction,
    X: LocalObservable,
    Y: LocalObservable | None,
    volumes,
    u_grid: np.ndarray | None = None,
    v_grid: np.ndarray | None = None,
    dim_cap: int | None = None,
) -> PressureSurface:
    """Extrapolated pressure and gradient on a tilt grid.

    Requires at least three increasing volumes; the result keeps the
    evaluator so downstream transforms can refine off-grid.
    """
    volumes = list(volumes)
    if len(volumes) < 3:
        raise InsufficientSamples("pressure surface needs at least three volumes")
    ev = FiniteVolumePressure(phi, X, Y, volumes, dim_cap)
    if u_grid is None or (v_grid is None and Y is not None):
        du, dv = default_tilt_grid(X, Y)
        u_grid = du if u_grid is None else np.asarray(u_grid, dtype=float)
        v_grid = dv if v_grid is None else np.asarray(v_grid, dtype=float)
    u_grid = np.asarray(u_grid, dtype=float)
    v_grid = np.zeros(1) if v_grid is None else np.asarray(v_grid, dtype=float)
    uu, vv = np.meshgrid(u_grid, v_grid, indexing="ij")
    p, err = ev.pressure(uu.ravel(), vv.ravel())
    gx, gy = ev.gradient(uu.ravel(), vv.ravel())
    shape = uu.shape
    ps = PressureSurface(
        u=u_grid,
        v=v_grid,
        p=p.reshape(shape),
        grad_x=gx.reshape(shape),
        grad_y=gy.reshape(shape),
        err=err.reshape(shape),
        volumes=tuple(int(s) for s in ev.sizes),
        evaluator=ev,
    )
    ps.validate()
    return ps


def synthetic_pressure_surface(
    fn,
    u_grid: np.ndarray,
    v_grid: np.ndarray | None = None,
    grad_fn=None,
) -> PressureSurface:
    """Surface sampled from a closed-form convex pressure (for studies/tests)."""
    u_grid = np.asarray(u_grid, dtype=float)
    v_grid = np.zeros(1) if v_grid is None else np.asarray(v_grid, dtype=float)
    ev = CallablePressure(fn, grad_fn, has_y=len(v_grid) > 1)
    uu, vv = np.meshgrid(u_grid, v_grid, indexing="ij")
    p, err = ev.pressure(uu.ravel(), vv.ravel())
    gx, gy = ev.gradient(uu.ravel(), vv.ravel())
    shape = uu.shape
    ps = PressureSurface(
        u=u_grid,
        v=v_grid,
        p=p.reshape(shape),
        grad_x=gx.reshape(shape),
        grad_y=gy.reshape(shape),
        err=err.reshape(shape),
        volumes=(),
        evaluator=ev,
    )
    ps.validate()
    return ps


def _conjugate_batch(ps: PressureSurface, X, Y, refine: bool = True):
    """sup over tilts of (u x + v y - p) for arrays of (x, y) points.

    Grid scan over the stored tilt points (ties resolve to the first
    point in row-major scan order) followed by lockstep golden ascent
    along coordinate lines using the exact evaluator; the objective is
    concave in the tilts since p is convex.
    """
    X = np.atleast_1d(np.asarray(X, dtype=float))
    Y = np.atleast_1d(np.asarray(Y, dtype=float))
    ug, vg = ps.grid_points()
    pg = ps.p.ravel()
    scores = X[:, None] * ug[None, :] + Y[:, None] * vg[None, :] - pg[None, :]
    best = np.argmax(scores, axis=1)
    vals = scores[np.arange(len(X)), best]
    ustar, vstar = ug[best], vg[best]
    if refine and ps.evaluator is not None:
        ev = ps.evaluator
        ulo, uhi = float(ps.u[0]), float(ps.u[-1])
        u_step = float(ps.u[1] - ps.u[0]) if len(ps.u) > 1 else uhi - ulo
        sweep_v = ps.has_y
        if sweep_v:
            vlo, vhi = float(ps.v[0]), float(ps.v[-1])
            v_step = float(ps.v[1] - ps.v[0])
        active = np.arange(len(X))
        prev = vals.copy()
        for round_idx in range(ASCENT_ROUNDS):
            if len(active) == 0:
                break
            # the grid argmax is within one step of the conditional maximizer
            # (concave coordinate sections); later rounds track the drift
            width = u_step if round_idx == 0 else 2.0 * u_step
            xa, ya = X[active], Y[active]
            u0, v0 = ustar[active].copy(), vstar[active].copy()
            ua, va = u0, v0
            ua, fa = golden_max_batch(
                lambda t: xa * t + ya * va - ev.value(t, va),
                np.maximum(ua - width, ulo),
                np.minimum(ua + width, uhi),
            )
            if sweep_v:
                vwidth = v_step if round_idx == 0 else 2.0 * v_step
                va, fa = golden_max_batch(
                    lambda t: xa * ua + ya * t - ev.value(ua, t),
                    np.maximum(va - vwidth, vlo),
                    np.minimum(va + vwidth, vhi),
                )
                # accelerate along the combined move; the concave section
                # through a tilted valley is what coordinate sweeps miss
                du, dv = ua - u0, va - v0
                moving = np.hypot(du, dv) > 1e-15
                if moving.any():
                    t_hi, t_lo = _segment_bounds(ua, du, ulo, uhi)
                    t_hi2, t_lo2 = _segment_bounds(va, dv, vlo, vhi)
                    t_hi, t_lo = np.minimum(t_hi, t_hi2), np.maximum(t_lo, t_lo2)
                    ts, fs = golden_max_batch(
                        lambda t: xa * (ua + t * du)
                        + ya * (va + t * dv)
                        - ev.value(ua + t * du, va + t * dv),
                        t_lo,
                        t_hi,
                    )
                    better = moving & (fs > fa)
                    ua = np.where(better, ua + ts * du, ua)
                    va = np.where(better, va + ts * dv, va)
                    fa = np.where(better, fs, fa)
            improved = fa > vals[active]
            ustar[active] = np.where(improved, ua, ustar[active])
            vstar[active] = np.where(improved, va, vstar[active])
            vals[active] = np.where(improved, fa, vals[active])
            gain = vals[active] - prev[active]
            prev[active] = vals[active]
            active = active[gain >= ASCENT_FTOL]
    u_span = float(ps.u[-1] - ps.u[0]) or 1.0
    at_edge = (ustar - ps.u[0] < EDGE_FRACTION * u_span) | (
        ps.u[-1] - ustar < EDGE_FRACTION * u_span
    )
    if ps.has_y:
        v_span = float(ps.v[-1] - ps.v[0]) or 1.0
        at_edge |= (vstar - ps.v[0] < EDGE_FRACTION * v_span) | (
            ps.v[-1] - vstar < EDGE_FRACTION * v_span
        )
    return vals, ustar, vstar, at_edge


@dataclass(eq=False)
class RateFunction:
    """Legendre-Fenchel transform of the pressure on an (x, y) grid."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    residual: np.ndarray
    at_boundary: np.ndarray
    pressure: PressureSurface = field(repr=False, compare=False, default=None)

    @property
    def has_y(self) -> bool:
        return len(self.y) > 1

    def evaluate_batch(self, X, Y):
        vals, _, _, _ = _conjugate_batch(self.pressure, X, Y)
        return vals

    def evaluate(self, x: float, y: float = 0.0) -> float:
        return float(self.evaluate_batch([x], [y])[0])

    def max_convexity_violation(self) -> float:
        worst = 0.0
        for arr in (self.values, self.values.T):
            if arr.shape[0] >= 3:
                violation = arr[1:-1] - 0.5 * (arr[:-2] + arr[2:])
                worst = max(worst, float(violation.max()))
        return worst

    def rows(self):
        for i, xx in enumerate(self.x):
            for j, yy in enumerate(self.y):
                yield (
                    float(xx),
                    float(yy),
                    float(self.values[i, j]),
                    float(self.residual[i, j]),
                    int(self.at_boundary[i, j]),
                )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "rate", "residual", "at_boundary"])
            writer.writerows(self.rows())

    def to_json(self, path) -> None:
        payload = {
            "schema": "mfspin.rate_function/1",
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "values": self.values.tolist(),
            "residual": self.residual.tolist(),
            "at_boundary": self.at_boundary.astype(int).tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)


def legendre_transform(
    ps: PressureSurface,
    x_grid: np.ndarray | None = None,
    y_grid: np.ndarray | None = None,
    points: int = DEFAULT_RATE_POINTS,
) -> RateFunction:
    """Pointwise conjugate sup over tilts, refined by coordinate ascent.

    Defaults the (x, y) grid to the spectral box of the observables when
    the evaluator knows it, else to the observed gradient range.  Points
    whose maximizer lands on the tilt-box edge are flagged, not fatal.
    """
    ps.validate()
    if x_grid is None:
        r = getattr(ps.evaluator, "x_norm", None) or float(np.abs(ps.grad_x).max())
        x_grid = np.linspace(-r, r, points)
    x_grid = np.asarray(x_grid, dtype=float)
    if y_grid is None:
        if ps.has_y:
            r = getattr(ps.evaluator, "y_norm", None) or float(np.abs(ps.grad_y).max())
            y_grid = np.linspace(-r, r, points)
        else:
            y_grid = np.zeros(1)
    y_grid = np.asarray(y_grid, dtype=float)
    xx, yy = np.meshgrid(x_grid, y_grid, indexing="ij")
    vals, ustar, vstar, at_edge = _conjugate_batch(ps, xx.ravel(), yy.ravel())
    if ps.evaluator is not None:
        gx, gy = ps.evaluator.gradient(ustar, vstar)
    else:
        gx = np.full_like(vals, np.nan)
        gy = np.full_like(vals, np.nan)
    residual = np.abs(xx.ravel() - gx)
    if ps.has_y:
        residual = residual + np.abs(yy.ravel() - gy)
    shape = xx.shape
    rf = RateFunction(
        x=x_grid,
        y=y_grid,
        values=vals.reshape(shape),
        residual=residual.reshape(shape),
        at_boundary=at_edge.reshape(shape),
        pressure=ps,
    )
    _validate_rate(rf, ps)
    return rf


def _validate_rate(rf: RateFunction, ps: PressureSurface) -> None:
    bad = rf.max_convexity_violation()
    if bad > 2.0 * float(ps.err.max()) + 1e-8:
        raise ValueError(f"rate function violates convexity by {bad:.3e}")
    if 0.0 >= ps.u[0] and 0.0 <= ps.u[-1]:
        iu = int(np.argmin(np.abs(ps.u)))
        iv = int(np.argmin(np.abs(ps.v)))
        floor = -float(ps.p[iu, iv])
        if float(rf.values.min()) < floor - 2.0 * float(ps.err.max()) - 1e-9:
            raise ValueError("rate function drops below -p(0,0)")


def involution_check(
    ps: PressureSurface, rf: RateFunction, grid_only: bool = False
) -> float:
    """Worst |p(u,v) - sup_xy (u x + v y - I(x,y))| over the tilt grid.

    The inner sup combines the rate-grid scan with the conjugacy
    candidate x = grad p(u,v), where the Fenchel equality makes the
    reconstruction exact up to ascent tolerance.  ``grid_only`` restricts
    the sup to the stored rate grid, exposing the pure grid error for
    refinement studies.
    """
    ug, vg = ps.grid_points()
    pg = ps.p.ravel()
    xx, yy = np.meshgrid(rf.x, rf.y, indexing="ij")
    xr, yr = xx.ravel(), yy.ravel()
    ir = rf.values.ravel()
    recon = (
        ug[:, None] * xr[None, :] + vg[:, None] * yr[None, :] - ir[None, :]
    ).max(axis=1)
    if not grid_only:
        gx, gy = ps.grad_x.ravel(), ps.grad_y.ravel()
        i_at_grad = rf.evaluate_batch(gx, gy)
        cand = ug * gx + vg * gy - i_at_grad
        recon = np.maximum(recon, cand)
    return float(np.abs(pg - recon).max())
