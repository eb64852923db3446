"""One-step kernel and semi-Lagrangian sweeps shared by the action and semigroup modules.

The short-time action along the straight arc from ``z`` to ``x`` in time ``dt``
solves the implicit midpoint relation

    h = w + dt * L(m, (w + h) / 2, (x - z) / dt),        m = midpoint(z, x).

Since ``-lam <= dL/du <= 0`` (or ``|dL/du| <= lam``) the right-hand side is a
contraction in ``h`` with factor ``dt * lam / 2``.  For the affine-quadratic
family it is solved in closed form; Custom models iterate.

A forward sweep (``sign=+1``) takes the minimum of ``K(z, phi(z), x)`` over the
reachability window; the dual sweep (``sign=-1``) takes the maximum of the
inverse kernel ``K^{-1}(x -> z; phi(z))``, the value at ``x`` that reaches
``phi(z)`` at ``z`` after one step.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .errors import ConfigurationError, StepSizeError
from .grid import Grid
from .model import ModelSpec, eval_L, shorter_arc

FIXED_POINT_TOL = 1e-12
GOLDEN_ITERS = 30
_GOLD = 0.6180339887498949


def check_step(model: ModelSpec, dt: float) -> None:
    if not (dt > 0 and math.isfinite(dt)):
        raise StepSizeError(f"time step must be positive (got {dt})")
    if dt * model.lam > 0.5 + 1e-12:
        raise StepSizeError(
            f"dt*lambda = {dt * model.lam:.4g} exceeds 1/2; split the step into "
            f"{math.ceil(2 * dt * model.lam)} sub-steps"
        )


def kernel_values(model: ModelSpec, z, w, x, dt: float, sign: int = 1) -> np.ndarray:
    """Vectorized one-step kernel.

    ``sign=+1``: value at ``x`` after moving from ``(z, w)`` in time dt.
    ``sign=-1``: value at ``x`` that reaches ``w`` at ``z`` after time dt.
    ``z`` and ``x`` are angles; the shorter arc is used.
    """
    z, w, x = (np.asarray(a, dtype=float) for a in (z, w, x))
    if sign > 0:
        delta = shorter_arc(z, x, model.period)
        m = z + 0.5 * delta
    else:
        delta = shorter_arc(x, z, model.period)
        m = x + 0.5 * delta
    v = delta / dt
    return _solve_kernel(model, m, w, v, dt, sign)


def _solve_kernel(model, m, w, v, dt, sign):
    if model.is_affine:
        c = model.coupling(m)
        d = v - model.drift(m)
        h = 0.5 * dt
        if sign > 0:
            return (w * (1.0 - h * c) + h * d * d) / (1.0 + h * c)
        return (w * (1.0 + h * c) - h * d * d) / (1.0 - h * c)
    out = np.array(w, dtype=float, copy=True) + 0.0 * (m + v)
    w = w + 0.0 * out
    for _ in range(200):
        mid = 0.5 * (w + out)
        new = w + sign * dt * np.asarray(eval_L(model, m, mid, v))
        if np.max(np.abs(new - out), initial=0.0) < FIXED_POINT_TOL:
            return new
        out = new
    return out


class Scheme:
    """Sweep operator for a model on a grid with time step ``dt``.

    Steps with ``dt * lambda > 1/2`` are split into equal sub-steps.  The
    reachability radius is ``v_max * dt_sub``; it must cover at least one cell.
    """

    def __init__(self, model: ModelSpec, grid: Grid, dt: float, v_max: float | None = None,
                 golden_iters: int = GOLDEN_ITERS):
        if grid.period != model.period:
            raise ConfigurationError(f"grid period {grid.period} differs from model period {model.period}")
        if not (dt > 0 and math.isfinite(dt)):
            raise ConfigurationError(f"time step must be positive (got {dt})")
        self.model = model
        self.grid = grid
        self.dt = float(dt)
        self.nsub = max(1, math.ceil(2.0 * dt * model.lam - 1e-12))
        self.h = self.dt / self.nsub
        self.v_max = float(model.v_max if v_max is None else v_max)
        radius = self.v_max * self.h
        if radius < grid.dx:
            raise ConfigurationError(
                f"reachability radius v_max*dt = {radius:.3g} is below the grid spacing {grid.dx:.3g}; "
                "increase dt or refine the grid"
            )
        self.win = int(math.ceil(radius / grid.dx - 1e-12))
        self.golden_iters = int(golden_iters)
        if model.is_affine:
            self._c = model.coupling.arrays()
            self._v = model.drift.arrays()

    # -- sweeps ---------------------------------------------------------------

    def step(self, phi: np.ndarray, sign: int = 1, links: bool = False):
        """Apply one full time step (all sub-steps) to a field or a batch of fields."""
        phi = np.asarray(phi, dtype=float)
        single = phi.ndim == 1
        cur = np.ascontiguousarray(phi[None, :] if single else phi)
        total = None
        for _ in range(self.nsub):
            cur, disp = self._substep(cur, sign)
            if links:
                total = disp if total is None else disp + self._interp_rows(total, disp)
        if single:
            return (cur[0], total[0]) if links else cur[0]
        return (cur, total) if links else cur

    def _interp_rows(self, fields: np.ndarray, disp: np.ndarray) -> np.ndarray:
        x = self.grid.nodes[None, :] + disp
        out = np.empty_like(fields)
        for b in range(fields.shape[0]):
            out[b] = self.grid.interp(fields[b], x[b])
        return out

    def _substep(self, cur: np.ndarray, sign: int):
        out = np.empty_like(cur)
        disp = np.empty_like(cur)
        if self.model.is_affine:
            ca0, cca, csa, com = self._c
            va0, vca, vsa, vom = self._v
            _kernels.sweep_affine(cur, out, disp, self.grid.dx, self.h, self.win, self.golden_iters,
                                  float(sign), ca0, cca, csa, com, va0, vca, vsa, vom)
            return out, disp
        return self._substep_general(cur, sign)

    def _objective(self, cur, t, sign):
        """Objective (to minimize) at node offsets ``t`` (shape like cur)."""
        g = self.grid
        n = g.n
        i = np.arange(n)[None, :]
        q = i + t
        k = np.floor(q).astype(np.int64)
        f = q - k
        rows = np.arange(cur.shape[0])[:, None]
        w = (1.0 - f) * cur[rows, np.mod(k, n)] + f * cur[rows, np.mod(k + 1, n)]
        m = (i + 0.5 * t) * g.dx
        v = -sign * t * g.dx / self.h
        return sign * _solve_kernel(self.model, m, w, v, self.h, sign)

    def _substep_general(self, cur, sign):
        best = np.full(cur.shape, np.inf)
        jb = np.zeros(cur.shape)
        for j in range(-self.win, self.win + 1):
            t = np.full(cur.shape, float(j))
            val = self._objective(cur, t, sign)
            better = val < best
            best = np.where(better, val, best)
            jb = np.where(better, t, jb)
        lo, hi = jb - 1.0, jb + 1.0
        ta = hi - _GOLD * (hi - lo)
        tb = lo + _GOLD * (hi - lo)
        fa = self._objective(cur, ta, sign)
        fb = self._objective(cur, tb, sign)
        for _ in range(self.golden_iters):
            left = fa < fb
            hi = np.where(left, tb, hi)
            lo = np.where(left, lo, ta)
            nta = np.where(left, hi - _GOLD * (hi - lo), tb)
            ntb = np.where(left, ta, lo + _GOLD * (hi - lo))
            probe = np.where(left, nta, ntb)
            fp = self._objective(cur, probe, sign)
            fa, fb = np.where(left, fp, fb), np.where(left, fa, fp)
            ta, tb = nta, ntb
        tbest = jb
        for tt, ff in ((ta, fa), (tb, fb)):
            better = ff < best
            best = np.where(better, ff, best)
            tbest = np.where(better, tt, tbest)
        return sign * best, tbest * self.grid.dx

    # -- point sources ----------------------------------------------------------

    def point_layer(self, x0, u0, sign: int = 1, links: bool = False):
        """First layer (time dt) of the action from point sources ``(x0, u0)``.

        Accepts scalars or equal-length arrays; returns ``(B, n)`` for arrays.
        """
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        u0 = np.atleast_1d(np.asarray(u0, dtype=float))
        x0, u0 = np.broadcast_arrays(x0, u0)
        nodes = self.grid.nodes[None, :]
        cur = kernel_values(self.model, x0[:, None], u0[:, None], nodes, self.h, sign)
        cur = np.ascontiguousarray(cur)
        disp = shorter_arc(nodes, x0[:, None], self.model.period) + 0.0 * cur
        for _ in range(self.nsub - 1):
            cur, d = self._substep(cur, sign)
            if links:
                disp = d + self._interp_rows(disp, d)
        return (cur, disp) if links else cur
