"""Lax-Oleinik semigroups, their fixed points, and derived weak KAM solutions.

``T_t^-`` is realised as repeated forward sweeps (minimum of the one-step
kernel) and ``T_t^+`` as repeated dual sweeps (maximum of the inverse kernel),
both on the scheme of :mod:`contactkam.scheme`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .action import _with_source_limit, default_horizon, n_layers, propagate
from .errors import PreconditionError
from .estimates import SetEstimate, SetKind
from .flow import Orbit
from .grid import Grid, ScalarField
from .model import ModelSpec
from .scheme import Scheme

WINDOW = 10
DEFAULT_TOL_FIX = 1e-7

_SIGN = {"backward": +1, "forward": -1}


@dataclass(frozen=True)
class WeakKAMSolution:
    """A (numerical) fixed point of ``T^-`` (side ``backward``) or ``T^+`` (``forward``).

    ``residual`` is ``sup |T_dt phi - phi|`` measured by one extra sweep.
    """

    field: ScalarField
    side: str
    residual: float
    iterations: int
    converged: bool
    provenance: str = ""
    tol_fix: float = DEFAULT_TOL_FIX
    dt: float = 0.01
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.side not in _SIGN:
            raise ValueError(f"side must be 'backward' or 'forward' (got {self.side!r})")

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def __call__(self, x):
        return self.field(x)

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "residual": float(f"{self.residual:.12g}"),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "seed-provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        return self.field.to_csv()


def _as_field(phi, grid: Grid | None = None) -> ScalarField:
    if isinstance(phi, WeakKAMSolution):
        return phi.field
    if isinstance(phi, ScalarField):
        return phi
    if grid is None:
        raise PreconditionError("a bare array needs a grid")
    return ScalarField(grid, phi)


def _sweeps(model, phi: ScalarField, t, dt, sign) -> ScalarField:
    if not (t >= dt * (1 - 1e-9)):
        raise PreconditionError(f"t={t} must be at least dt={dt}")
    k = int(math.ceil(t / dt - 1e-9))
    scheme = Scheme(model, phi.grid, dt)
    cur = np.array(phi.values)
    for _ in range(k):
        cur = scheme.step(cur, sign)
    side = "T-" if sign > 0 else "T+"
    return ScalarField(phi.grid, cur, f"{side}_{k * dt:.6g} of [{phi.meta}]")


def lax_oleinik_backward(model: ModelSpec, phi, t: float, dt: float = 0.01) -> ScalarField:
    """``T_t^- phi(x) = inf_y h_{y, phi(y)}(x, t)`` via ``ceil(t / dt)`` sweeps."""
    return _sweeps(model, _as_field(phi), t, dt, +1)


def lax_oleinik_forward(model: ModelSpec, phi, t: float, dt: float = 0.01) -> ScalarField:
    """``T_t^+ phi(x) = sup_y h^{y, phi(y)}(x, t)`` via ``ceil(t / dt)`` dual sweeps."""
    return _sweeps(model, _as_field(phi), t, dt, -1)


def default_t_max(model: ModelSpec) -> float:
    return max(100.0, 5.0 * default_horizon(model))


def _weak_kam(model, phi0, dt, tol_fix, t_max, side, provenance):
    if not tol_fix > 0:
        raise PreconditionError("tol_fix must be positive")
    phi0 = _as_field(phi0)
    sign = _SIGN[side]
    t_max = default_t_max(model) if t_max is None else float(t_max)
    K = n_layers(t_max, dt)
    scheme = Scheme(model, phi0.grid, dt)
    cur = np.array(phi0.values)
    recent: list[float] = []
    it = 0
    window_ok = False
    while it < K:
        nxt = scheme.step(cur, sign)
        inc = float(np.max(np.abs(nxt - cur)))
        cur = nxt
        it += 1
        recent.append(inc)
        if len(recent) > WINDOW:
            recent.pop(0)
        if len(recent) == WINDOW and max(recent) < tol_fix:
            window_ok = True
            break
    residual = float(np.max(np.abs(scheme.step(cur, sign) - cur)))
    converged = window_ok and residual <= tol_fix
    prov = provenance or phi0.meta
    fld = ScalarField(phi0.grid, cur, f"{side} weak KAM limit from [{prov}]")
    return WeakKAMSolution(fld, side, residual, it, converged, prov, tol_fix, dt,
                           {"t": it * dt, "last_increments": list(recent)})


def weak_kam_backward(model: ModelSpec, phi0, dt: float = 0.01, tol_fix: float = DEFAULT_TOL_FIX,
                      t_max: float | None = None, provenance: str = "") -> WeakKAMSolution:
    """Iterate ``T_dt^-`` until ten consecutive increments fall below ``tol_fix``.

    When ``t_max`` runs out first the last iterate is returned with
    ``converged = False``.
    """
    return _weak_kam(model, phi0, dt, tol_fix, t_max, "backward", provenance)


def weak_kam_forward(model: ModelSpec, phi0, dt: float = 0.01, tol_fix: float = DEFAULT_TOL_FIX,
                     t_max: float | None = None, provenance: str = "") -> WeakKAMSolution:
    """Dual of :func:`weak_kam_backward` for ``T_dt^+``."""
    return _weak_kam(model, phi0, dt, tol_fix, t_max, "forward", provenance)


def is_fixed_point(model: ModelSpec, fld, dt: float = 0.01, tol: float = 1e-6,
                   side: str = "backward") -> tuple[bool, float]:
    """``(residual <= tol, residual)`` with ``residual = sup |T_dt fld - fld|``."""
    fld = _as_field(fld)
    scheme = Scheme(model, fld.grid, dt)
    res = float(np.max(np.abs(scheme.step(np.array(fld.values), _SIGN[side]) - fld.values)))
    return res <= tol, res


def central_gradient(fld: ScalarField) -> np.ndarray:
    v = fld.values
    return (np.roll(v, -1) - np.roll(v, 1)) / (2 * fld.grid.dx)


def conjugate_pair(model: ModelSpec, v_minus: WeakKAMSolution, dt: float = 0.01, tol: float = 1e-4,
                   tol_p: float = 0.05, tol_fix: float | None = None, t_max: float | None = None):
    """Forward limit of ``v_minus`` and the node set where the two touch.

    Returns ``(v_plus, coincidence)``.  A node is a contact node when
    ``v_minus - v_plus < tol`` and the central differences differ by less
    than ``tol_p``.  Exact pairs satisfy ``v_plus <= v_minus``, so a negative
    difference is discretization overshoot and counts as contact; where the
    graphs touch their gradients agree, which separates true contact from
    nodes that are merely close in value.  The estimate stores
    ``(x_i, v_minus(x_i), central difference)``; ``extra`` keeps the signed
    value gap and the gradient gap.
    """
    if v_minus.side != "backward":
        raise PreconditionError("conjugate_pair expects a backward solution")
    if not v_minus.converged:
        raise PreconditionError("v_minus has not converged")
    tol_fix = v_minus.tol_fix if tol_fix is None else tol_fix
    v_plus = weak_kam_forward(model, v_minus.field, dt, tol_fix, t_max,
                              provenance=f"conjugate of [{v_minus.provenance}]")
    g = v_minus.grid
    gap = v_minus.values - v_plus.values
    grad = central_gradient(v_minus.field)
    dgrad = np.abs(grad - central_gradient(v_plus.field))
    mask = (gap < tol) & (dgrad < tol_p)
    est = SetEstimate(SetKind.COINCIDENCE, g.nodes[mask], v_minus.values[mask], grad[mask], min(tol, g.dx / 4),
                      f"v- - v+ < {tol:g} for v- from [{v_minus.provenance}]", g.period, np.abs(gap[mask]),
                      extra={"nodes": np.flatnonzero(mask), "gap": gap, "grad_gap": dgrad})
    return v_plus, est


def _tau_schedule(length: float) -> list[float]:
    taus = [0.0]
    t = 1.0
    while t < length - 1e-12:
        taus.append(t)
        t *= 2.0
    if length > 0 and taus[-1] < length - 1e-12:
        taus.append(length)
    return taus


def busemann_solution(model: ModelSpec, seed: Orbit, grid: Grid, dt: float = 0.01, tol: float = 5e-3,
                      horizon: float | None = None, tol_fix: float = DEFAULT_TOL_FIX,
                      check_semi_static: bool = True) -> WeakKAMSolution:
    """Weak KAM solution generated by a negatively semi-static seed.

    ``w(x) = min_tau inf_s h_{x(-tau), u(-tau)}(x, s)`` over a doubling
    schedule of ``tau`` (stopping once a new level changes ``w`` by less than
    ``tol``), then ``w_inf = lim T_t^- w``.  ``diagnostics["seed_defect"]``
    is ``max |w_inf(x(-tau)) - u(-tau)|`` along the seed samples.
    """
    from .sets import classify_curve  # local import: sets builds on this module

    if seed.dt > 0:
        raise PreconditionError("the seed must be a backward orbit (negative time step)")
    if seed.blown_up:
        raise PreconditionError("the seed orbit blew up")
    horizon = min(default_horizon(model), 50.0) if horizon is None else float(horizon)
    length = abs(seed.dt) * (len(seed) - 1)
    diag: dict = {}
    if check_semi_static and length > 0:
        cls = classify_curve(model, seed, grid, dt, max(horizon, length), tol, tests=("semi_static",))
        diag["semi_static_defect"] = cls.semi_static.defect
        if cls.semi_static.defect > 3 * tol:
            raise PreconditionError(
                f"seed is not semi-static: defect {cls.semi_static.defect:.3g} exceeds 3*tol={3 * tol:.3g}")
    taus = _tau_schedule(length)
    idx = [min(int(round(t / abs(seed.dt))), len(seed) - 1) for t in taus]
    x0s = np.mod(seed.x[idx], model.period)
    u0s = seed.u[idx]
    scheme = Scheme(model, grid, dt)
    K = n_layers(horizon, dt)
    acc = None

    def on_layer(k, vals):
        nonlocal acc
        acc = vals.copy() if acc is None else np.minimum(acc, vals)

    propagate(scheme, x0s, u0s, K, +1, on_layer=on_layer)
    for b in range(len(idx)):
        acc[b] = _with_source_limit(acc[b], grid, float(x0s[b]), float(u0s[b]), +1)
    w = acc[0].copy()
    used = 1
    for b in range(1, len(idx)):
        nxt = np.minimum(w, acc[b])
        change = float(np.max(np.abs(nxt - w)))
        w = nxt
        used += 1
        if change < tol:
            break
    diag.update({"taus": taus[:used], "levels": used})
    prov = f"busemann seed ({seed.x[0]:.6g},{seed.u[0]:.6g},{seed.p[0]:.6g}), length {length:.6g}"
    sol = weak_kam_backward(model, ScalarField(grid, w, prov), dt, tol_fix, provenance=prov)
    along = np.max(np.abs(grid.interp(sol.values, seed.x) - seed.u))
    diag["seed_defect"] = float(along)
    diag["w"] = w
    diag.update(sol.diagnostics)
    return WeakKAMSolution(sol.field, sol.side, sol.residual, sol.iterations, sol.converged, prov, tol_fix, dt, diag)
