r"""Contact Hamilton equations on the circle.

.. math::

    \dot x = H_p, \qquad \dot u = H_p\,p - H, \qquad \dot p = -H_x - H_u\,p .

Integration is fixed-step classical RK4, vectorized over many initial states.
A negative step integrates the flow backward in time, which is the same as
integrating the negated vector field forward.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, PreconditionError
from .model import ModelSpec, eval_H, eval_H_partials, shorter_arc

BLOWUP = 1e6


@dataclass(frozen=True)
class ContactState:
    x: float
    u: float
    p: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.u, self.p)


@dataclass(frozen=True)
class Orbit:
    """Samples of a flow line at times ``t0 + k * dt`` (``dt < 0`` for backward orbits)."""

    t0: float
    dt: float
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    period: float
    blown_up: bool = False

    def __post_init__(self):
        for name in ("x", "u", "p"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if len(self.x) < 2:
            raise PreconditionError("an orbit needs at least two samples")

    @property
    def direction(self) -> str:
        return "forward" if self.dt > 0 else "backward"

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.x)) * self.dt

    @property
    def samples(self) -> list[ContactState]:
        return [ContactState(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.u, self.p)]

    def __len__(self) -> int:
        return len(self.x)

    def chronological(self) -> "Orbit":
        """The same samples ordered by increasing time."""
        if self.dt > 0:
            return self
        n = len(self.x)
        return Orbit(self.t0 + (n - 1) * self.dt, -self.dt, self.x[::-1], self.u[::-1], self.p[::-1],
                     self.period, self.blown_up)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u", "p"])
        for t, x, u, p in zip(self.times, self.x, self.u, self.p):
            w.writerow([f"{t:.12g}", f"{x:.12g}", f"{u:.12g}", f"{p:.12g}"])
        return buf.getvalue()


def vector_field(model: ModelSpec, x, u, p):
    """Right-hand side ``(xdot, udot, pdot)`` of the contact equations."""
    H = np.asarray(eval_H(model, x, u, p))
    hx, hu, hp = (np.asarray(a) for a in eval_H_partials(model, x, u, p))
    return hp, hp * p - H, -hx - hu * p


def _rk4(model, x, u, p, dt):
    k1 = vector_field(model, x, u, p)
    k2 = vector_field(model, x + 0.5 * dt * k1[0], u + 0.5 * dt * k1[1], p + 0.5 * dt * k1[2])
    k3 = vector_field(model, x + 0.5 * dt * k2[0], u + 0.5 * dt * k2[1], p + 0.5 * dt * k2[2])
    k4 = vector_field(model, x + dt * k3[0], u + dt * k3[1], p + dt * k3[2])
    x = x + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    u = u + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    p = p + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return np.mod(x, model.period), u, p


def step(model: ModelSpec, s: ContactState, dt: float) -> ContactState:
    """One RK4 step of size ``dt`` (negative for the backward flow)."""
    if dt == 0 or not math.isfinite(dt):
        raise PreconditionError("step size must be a non-zero finite number")
    x, u, p = _rk4(model, np.float64(s.x), np.float64(s.u), np.float64(s.p), dt)
    if not (np.isfinite(x) and np.isfinite(u) and np.isfinite(p)):
        raise BlowUpError(f"non-finite state after a step of size {dt}", time=dt)
    return ContactState(float(x), float(u), float(p))


def _n_steps(T: float, dt: float) -> int:
    if T == 0 or not math.isfinite(T):
        raise PreconditionError("integration time must be non-zero and finite")
    if dt == 0 or abs(dt) > abs(T) * (1 + 1e-12):
        raise PreconditionError("need 0 < |dt| <= |T|")
    return int(math.ceil(abs(T) / abs(dt) - 1e-9))


def integrate_many(model: ModelSpec, x0, u0, p0, T: float, dt: float):
    """Integrate many initial states at once.

    Returns ``(x, u, p, alive)`` with arrays of shape ``(N, steps + 1)``.
    Rows that blow up (non-finite or ``|u| + |p| > 1e6``) are frozen at their
    last admissible sample and marked ``alive = False``.
    """
    N = _n_steps(T, dt)
    h = math.copysign(abs(dt), T)
    x = np.mod(np.atleast_1d(np.asarray(x0, dtype=float)), model.period)
    u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
    p = np.atleast_1d(np.asarray(p0, dtype=float)).copy()
    x, u, p = (np.array(a) for a in np.broadcast_arrays(x, u, p))
    X = np.empty((x.size, N + 1))
    U = np.empty_like(X)
    P = np.empty_like(X)
    X[:, 0], U[:, 0], P[:, 0] = x, u, p
    alive = np.ones(x.size, dtype=bool)
    for k in range(1, N + 1):
        with np.errstate(all="ignore"):
            nx, nu, np_ = _rk4(model, x, u, p, h)
        ok = np.isfinite(nx) & np.isfinite(nu) & np.isfinite(np_) & (np.abs(nu) + np.abs(np_) <= BLOWUP)
        alive &= ok
        x = np.where(alive, nx, x)
        u = np.where(alive, nu, u)
        p = np.where(alive, np_, p)
        X[:, k], U[:, k], P[:, k] = x, u, p
    return X, U, P, alive


def integrate(model: ModelSpec, s0: ContactState, T: float, dt: float) -> Orbit:
    """Sample the flow line through ``s0`` for time ``T`` (negative = backward).

    Raises BlowUpError with the partial orbit attached when the state stops
    being finite or leaves ``|u| + |p| <= 1e6``.
    """
    N = _n_steps(T, dt)
    h = math.copysign(abs(dt), T)
    xs = np.empty(N + 1)
    us = np.empty(N + 1)
    ps = np.empty(N + 1)
    x, u, p = float(s0.x) % model.period, float(s0.u), float(s0.p)
    xs[0], us[0], ps[0] = x, u, p
    for k in range(1, N + 1):
        with np.errstate(all="ignore"):
            x, u, p = (float(a) for a in _rk4(model, x, u, p, h))
        if not (math.isfinite(x) and math.isfinite(u) and math.isfinite(p)) or abs(u) + abs(p) > BLOWUP:
            partial = None
            if k >= 2:
                partial = Orbit(0.0, h, xs[:k], us[:k], ps[:k], model.period, blown_up=True)
            raise BlowUpError(f"orbit left the admissible region at t={k * h:.6g}", time=k * h, orbit=partial)
        xs[k], us[k], ps[k] = x, u, p
    return Orbit(0.0, h, xs, us, ps, model.period)


def orbit_residual(model: ModelSpec, orbit: Orbit) -> float:
    """Max over interior samples of ``|centred difference - vector field|``."""
    if len(orbit) < 3:
        raise PreconditionError("orbit residual needs at least three samples")
    x, u, p = orbit.x, orbit.u, orbit.p
    dx = shorter_arc(x[:-2], x[2:], model.period) / (2 * orbit.dt)
    du = (u[2:] - u[:-2]) / (2 * orbit.dt)
    dp = (p[2:] - p[:-2]) / (2 * orbit.dt)
    fx, fu, fp = vector_field(model, x[1:-1], u[1:-1], p[1:-1])
    return float(max(np.max(np.abs(dx - fx)), np.max(np.abs(du - fu)), np.max(np.abs(dp - fp))))


@dataclass(frozen=True)
class FlowImage:
    """Image of a list of states under the flow, with per-point blow-up flags."""

    states: list[ContactState]
    blown_up: list[bool]


def flow_pseudograph(model: ModelSpec, graph, t: float, dt: float = 0.01) -> FlowImage:
    """Apply the time-``t`` flow to every state of ``graph`` (order preserved)."""
    graph = list(graph)
    if not graph:
        raise PreconditionError("graph must be non-empty")
    if t == 0:
        return FlowImage(list(graph), [False] * len(graph))
    x0 = [s.x for s in graph]
    u0 = [s.u for s in graph]
    p0 = [s.p for s in graph]
    X, U, P, alive = integrate_many(model, x0, u0, p0, t, min(abs(dt), abs(t)))
    states = [ContactState(float(a), float(b), float(c)) for a, b, c in zip(X[:, -1], U[:, -1], P[:, -1])]
    return FlowImage(states, [not a for a in alive])


def energy(model: ModelSpec, orbit: Orbit) -> np.ndarray:
    """``H`` along the orbit samples."""
    return np.asarray(eval_H(model, orbit.x, orbit.u, orbit.p))
