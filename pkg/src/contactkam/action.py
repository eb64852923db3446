"""Implicit action functions by semi-Lagrangian dynamic programming.

The forward action ``h_{x0,u0}(x, t)`` is built layer by layer:
layer 0 is the one-step kernel from the point source and

    layer_{k+1}(x_i) = min_z K(z, layer_k(z), x_i)

over a reachability window, with the departure point refined by golden-section
search.  The backward table uses the dual recursion (maximum of the inverse
kernel).  ``backward_value`` inverts the forward scheme exactly in the value
argument for single cells.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, ConfigurationError, ConsistencyError, PreconditionError
from .grid import Grid, ScalarField
from .model import ModelSpec, momentum, shorter_arc
from .scheme import Scheme, check_step, kernel_values


def default_horizon(model: ModelSpec) -> float:
    """``20 / lambda`` for contracting models, 50 otherwise."""
    return 20.0 / model.lam if model.lam > 0 else 50.0


def n_layers(horizon: float, dt: float) -> int:
    if not horizon >= dt * (1 - 1e-9):
        raise PreconditionError(f"horizon {horizon} shorter than the time step {dt}")
    return max(1, int(math.floor(horizon / dt + 1e-9)))


@dataclass(frozen=True)
class ActionTable:
    """Values of an action function on the ``grid x {dt, 2dt, ...}`` lattice.

    ``values[k, i]`` is the value at node ``i`` and time ``(k + 1) * dt``.
    ``displacement[k, i]`` is the signed offset ``z - x_i`` of the optimal
    departure point in layer ``k - 1`` (the source for ``k = 0``).
    """

    grid: Grid
    source: tuple[float, float]
    dt: float
    horizon: float
    direction: str
    values: np.ndarray
    displacement: np.ndarray
    window: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.values.shape[0]) + 1) * self.dt

    @property
    def argmin_links(self) -> np.ndarray:
        """Nearest-node index of each recorded departure point."""
        return self.grid.nearest(self.grid.nodes[None, :] + self.displacement)

    def layer_index(self, t: float) -> int:
        k = int(round(t / self.dt)) - 1
        if k < 0 or k >= self.values.shape[0] or abs((k + 1) * self.dt - t) > 1e-9 * max(1.0, t):
            raise PreconditionError(f"time {t} is not on the table lattice")
        return k

    def layer(self, t: float) -> ScalarField:
        k = self.layer_index(t)
        return ScalarField(self.grid, self.values[k], f"{self.direction} action layer t={(k + 1) * self.dt:.6g}")

    def value_at(self, x, t: float):
        """Linear interpolation in space (and in time between lattice layers)."""
        s = t / self.dt - 1.0
        if s < -1e-9 or s > self.values.shape[0] - 1 + 1e-9:
            raise PreconditionError(f"time {t} outside table range")
        k0 = int(min(max(math.floor(s + 1e-9), 0), self.values.shape[0] - 1))
        f = min(max(s - k0, 0.0), 1.0)
        v0 = self.grid.interp(self.values[k0], x)
        if f == 0.0 or k0 + 1 >= self.values.shape[0]:
            return v0
        return (1 - f) * v0 + f * self.grid.interp(self.values[k0 + 1], x)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "value"])
        nodes = self.grid.nodes
        for k, t in enumerate(self.times):
            for x, v in zip(nodes, self.values[k]):
                w.writerow([f"{t:.12g}", f"{x:.12g}", f"{v:.12g}"])
        return buf.getvalue()


# ----------------------------------------------------------------------------
# kernel
# ----------------------------------------------------------------------------


def kernel_short(model: ModelSpec, x0, u0, x, dt: float):
    """One-step forward action from ``(x0, u0)`` to ``x`` over time ``dt``.

    Resolves ``h = u0 + dt L(mid, (u0 + h)/2, (x - x0)/dt)`` along the shorter
    arc.  Raises StepSizeError when ``dt * lambda > 1/2``.
    """
    check_step(model, dt)
    out = kernel_values(model, x0, u0, x, dt, +1)
    return float(out) if np.ndim(out) == 0 else out


def kernel_inverse(model: ModelSpec, x0, u0, x, dt: float):
    """The value at ``x`` from which one step reaches ``u0`` at ``x0``."""
    check_step(model, dt)
    out = kernel_values(model, x0, u0, x, dt, -1)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# tables
# ----------------------------------------------------------------------------


def propagate(scheme: Scheme, x0s, u0s, layers: int, sign: int, on_layer=None, keep=False, links=False):
    """Run a batch of point-source recursions for ``layers`` layers.

    ``on_layer(k, values)`` receives each ``(B, n)`` layer.  With ``keep`` the
    stacked ``(layers, B, n)`` values (and displacements with ``links``) are
    returned.
    """
    res = scheme.point_layer(x0s, u0s, sign, links=links)
    cur, disp = res if links else (res, None)
    vals = [cur] if keep else None
    dsp = [disp] if (keep and links) else None
    if on_layer is not None:
        on_layer(0, cur)
    for k in range(1, layers):
        res = scheme.step(cur, sign, links=links)
        cur, disp = res if links else (res, None)
        if keep:
            vals.append(cur)
            if links:
                dsp.append(disp)
        if on_layer is not None:
            on_layer(k, cur)
    if keep:
        return np.stack(vals), (np.stack(dsp) if links else None)
    return cur


def _table(model, x0, u0, grid, horizon, dt, sign, v_max):
    horizon = default_horizon(model) if horizon is None else float(horizon)
    scheme = Scheme(model, grid, dt, v_max)
    K = n_layers(horizon, dt)
    vals, disp = propagate(scheme, [float(x0) % model.period], [float(u0)], K, sign, keep=True, links=True)
    return ActionTable(
        grid=grid,
        source=(float(x0) % model.period, float(u0)),
        dt=float(dt),
        horizon=K * dt,
        direction="forward" if sign > 0 else "backward",
        values=vals[:, 0, :],
        displacement=disp[:, 0, :],
        window=scheme.win,
        meta={"model": model.name, "substeps": scheme.nsub},
    )


def forward_action(model: ModelSpec, x0: float, u0: float, grid: Grid, horizon: float | None = None,
                   dt: float = 0.01, v_max: float | None = None) -> ActionTable:
    """Forward action table ``h_{x0,u0}(x_i, k dt)``."""
    return _table(model, x0, u0, grid, horizon, dt, +1, v_max)


def backward_action(model: ModelSpec, x0: float, u0: float, grid: Grid, horizon: float | None = None,
                    dt: float = 0.01, v_max: float | None = None) -> ActionTable:
    """Backward action table ``h^{x0,u0}(x_i, k dt)`` by the dual recursion.

    Each layer takes the maximum, over departure points, of the inverse
    one-step kernel.  Per-cell values that invert the forward scheme exactly
    are available from :func:`backward_value`.
    """
    return _table(model, x0, u0, grid, horizon, dt, -1, v_max)


def backward_value(model: ModelSpec, x0: float, u0: float, x: float, t: float, grid: Grid, dt: float = 0.01,
                   v_max: float | None = None, xtol: float = 1e-13) -> float:
    """``h^{x0,u0}(x, t)``: the value ``w`` with ``h_{x,w}(x0, t) = u0``.

    The forward scheme is nondecreasing and non-expansive in its source value,
    so the root is bracketed by geometric widening and refined by Brent's
    method.
    """
    scheme = Scheme(model, grid, dt, v_max)
    K = n_layers(t, dt)
    if abs(K * dt - t) > 1e-9 * max(1.0, t):
        raise PreconditionError(f"time {t} is not a multiple of dt={dt}")
    xs = float(x) % model.period

    def F(w):
        last = propagate(scheme, [xs], [w], K, +1)
        return float(grid.interp(last[0], x0)) - u0

    w0 = float(u0)
    g0 = F(w0)
    if g0 == 0.0:
        return w0
    step = max(abs(g0), 1e-6)
    direction = -1.0 if g0 > 0 else 1.0
    a, ga = w0, g0
    for _ in range(80):
        b = a + direction * step
        gb = F(b)
        if gb == 0.0:
            return b
        if (gb > 0) != (g0 > 0):
            lo, hi = (b, a) if b < a else (a, b)
            return float(brentq(F, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))
        a, ga = b, gb
        step *= 2.0
    raise BracketError(f"could not bracket h^{{{x0},{u0}}}({x},{t})", cell=(x, t))


# ----------------------------------------------------------------------------
# long-time quantities
# ----------------------------------------------------------------------------


def peierls_barrier(model: ModelSpec, x0: float, u0: float, grid: Grid, dt: float = 0.01, tol: float = 1e-6,
                    t_max: float | None = None, v_max: float | None = None) -> ScalarField:
    """Long-time limit of the forward action from ``(x0, u0)``.

    Snapshots are taken at times ``1, 2, 4, ...`` (in units of ``max(1, 10 dt)``);
    the run stops when two consecutive snapshots differ by less than ``tol`` in
    sup norm.  Comparing over a doubling interval rather than a single step
    keeps slowly converging cases (e.g. ``d^2 / 2t`` decay) from stopping early.
    The returned field carries ``extra = {"converged", "t"}``.
    """
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    t_max = default_horizon(model) if t_max is None else float(t_max)
    scheme = Scheme(model, grid, dt, v_max)
    unit = max(1.0, 10 * dt)
    cur = scheme.point_layer([float(x0) % model.period], [float(u0)], +1)
    k = 1
    checkpoint = max(1, int(round(unit / dt)))
    snap = None
    converged = False
    K_max = n_layers(t_max, dt)
    while k < K_max:
        cur = scheme.step(cur, +1)
        k += 1
        if k == checkpoint or k == K_max:
            if snap is not None and np.max(np.abs(cur - snap)) < tol:
                converged = True
                break
            snap = cur.copy()
            checkpoint *= 2
    return ScalarField(grid, cur[0], f"peierls barrier from ({x0:.6g},{u0:.6g})",
                       extra={"converged": converged, "t": k * dt})


def _with_source_limit(values: np.ndarray, grid: Grid, x0: float, u0: float, sign: int) -> np.ndarray:
    """Apply the ``s -> 0+`` limit (value u0 at the source) when x0 is a node."""
    q = (x0 % grid.period) / grid.dx
    i = int(round(q))
    if abs(q - i) < 1e-9:
        i %= grid.n
        values[i] = min(values[i], u0) if sign > 0 else max(values[i], u0)
    return values


def mane_potential(model: ModelSpec, x0: float, u0: float, grid: Grid, dt: float = 0.01,
                   horizon: float | None = None, v_max: float | None = None) -> ScalarField:
    """``inf_{s in {dt, ..., horizon}} h_{x0,u0}(x, s)`` (plus ``u0`` at a node source)."""
    return _extreme(model, x0, u0, grid, dt, horizon, v_max, +1)


def sup_backward(model: ModelSpec, x0: float, u0: float, grid: Grid, dt: float = 0.01,
                 horizon: float | None = None, v_max: float | None = None) -> ScalarField:
    """``sup_{s in {dt, ..., horizon}} h^{x0,u0}(x, s)`` (plus ``u0`` at a node source)."""
    return _extreme(model, x0, u0, grid, dt, horizon, v_max, -1)


def _extreme(model, x0, u0, grid, dt, horizon, v_max, sign):
    horizon = default_horizon(model) if horizon is None else float(horizon)
    K = n_layers(horizon, dt)
    if K < 10:
        raise PreconditionError("horizon must cover at least 10 time layers")
    scheme = Scheme(model, grid, dt, v_max)
    acc = None

    def on_layer(k, vals):
        nonlocal acc
        if acc is None:
            acc = vals[0].copy()
        elif sign > 0:
            np.minimum(acc, vals[0], out=acc)
        else:
            np.maximum(acc, vals[0], out=acc)

    propagate(scheme, [float(x0) % model.period], [float(u0)], K, sign, on_layer=on_layer)
    acc = _with_source_limit(acc, grid, float(x0), float(u0), sign)
    name = "mane potential" if sign > 0 else "sup of backward action"
    return ScalarField(grid, acc, f"{name} from ({x0:.6g},{u0:.6g}), horizon {K * dt:.6g}")


def batched_extremes(model: ModelSpec, grid: Grid, dt: float, x0s, u0s, horizon: float, probes, sign: int,
                     v_max: float | None = None):
    """Probe a batch of point-source tables.

    Returns ``(series, extreme)``: ``series[k, b, j]`` is the layer-``k`` value
    of source ``b`` at probe angle ``probes[b][j]``, and ``extreme[b, j]`` the
    running min (``sign=+1``) or max (``sign=-1``) over all layers.
    """
    K = n_layers(horizon, dt)
    scheme = Scheme(model, grid, dt, v_max)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    B = probes.shape[0]
    q = np.mod(probes, grid.period) / grid.dx
    k0 = np.floor(q).astype(np.int64)
    f = q - k0
    i0 = np.mod(k0, grid.n)
    i1 = np.mod(k0 + 1, grid.n)
    rows = np.arange(B)[:, None]
    series = np.empty((K, B, probes.shape[1]))

    def on_layer(k, vals):
        series[k] = (1 - f) * vals[rows, i0] + f * vals[rows, i1]

    propagate(scheme, np.mod(np.asarray(x0s, dtype=float), grid.period), np.asarray(u0s, dtype=float), K, sign,
              on_layer=on_layer)
    extreme = series.min(axis=0) if sign > 0 else series.max(axis=0)
    return series, extreme


# ----------------------------------------------------------------------------
# minimizers
# ----------------------------------------------------------------------------


def extract_minimizer(table: ActionTable, x: float, t: float) -> list[tuple[float, float, float]]:
    """Backtrack the recorded departure points from ``(x, t)`` to the source.

    Returns ``[(time, angle, value), ...]`` in increasing time, starting at
    the source ``(0, x0, u0)``.
    """
    k = table.layer_index(t)
    g = table.grid
    limit = (table.window + 2) * g.dx * 1.0001
    pts = []
    y = float(x) % g.period
    for j in range(k, -1, -1):
        pts.append(((j + 1) * table.dt, y, float(g.interp(table.values[j], y))))
        if j == 0:
            break
        d = float(g.interp(table.displacement[j], y))
        if not math.isfinite(d) or abs(d) > limit:
            raise ConsistencyError(f"broken link at layer {j}, x={y:.6g}")
        y = (y + d) % g.period
    pts.append((0.0, table.source[0], table.source[1]))
    return pts[::-1]


def lift_minimizer(model: ModelSpec, curve) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Attach momenta ``p = dL/dv`` to a backtracked curve.

    Returns arrays ``(t, x, u, p)`` at the interior points, with velocities
    from centred differences of the unwrapped positions.
    """
    t = np.array([c[0] for c in curve])
    x = np.array([c[1] for c in curve])
    u = np.array([c[2] for c in curve])
    steps = shorter_arc(x[:-1], x[1:], model.period)
    xu = np.concatenate([[x[0]], x[0] + np.cumsum(steps)])
    v = (xu[2:] - xu[:-2]) / (t[2:] - t[:-2])
    p = np.asarray(momentum(model, x[1:-1], u[1:-1], v))
    return t[1:-1], np.mod(xu[1:-1], model.period), u[1:-1], p


def curve_to_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "u"])
    for t, x, u in curve:
        w.writerow([f"{t:.12g}", f"{x:.12g}", f"{u:.12g}"])
    return buf.getvalue()


def check_window(model: ModelSpec, grid: Grid, dt: float, v_max: float | None = None) -> int:
    """Window radius in nodes (raises ConfigurationError when below one cell)."""
    if grid.period != model.period:
        raise ConfigurationError("grid and model periods differ")
    return Scheme(model, grid, dt, v_max).win
