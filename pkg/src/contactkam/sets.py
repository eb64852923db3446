"""Pseudographs, calibrated-orbit set estimates and curve classification.

All estimates are finite samples in ``(x, u, p)`` tagged with the tolerance
and the solution or seed they were derived from.  Static-type properties are
checked against point-source action tables: for an orbit sampled at anchors
``a`` and targets ``b``

* globally minimizing: ``u_b = h_{x_a,u_a}(x_b, t_b - t_a)`` for ``t_a < t_b``
* semi-static: additionally ``u_b = inf_s h_{x_a,u_a}(x_b, s)`` for ``t_a <= t_b``
* static: globally minimizing and the inf identity for every ordered pair
* strongly static: globally minimizing and ``u_b = sup_s h^{x_a,u_a}(x_b, s)``
  for every ordered pair

The ``s -> 0+`` limit (value ``u_a`` at ``x_a``) enters when ``a == b``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .action import batched_extremes, default_horizon, peierls_barrier
from .errors import PreconditionError
from .estimates import SetEstimate, SetKind, circle_gap, projected_excess, projected_hausdorff
from .flow import ContactState, Orbit, integrate, integrate_many, orbit_residual
from .grid import Grid
from .model import ModelSpec, eval_H, eval_H_partials, velocity
from .semigroup import WeakKAMSolution

__all__ = [
    "Pseudograph",
    "pseudograph",
    "sigma_set",
    "Verdict",
    "CurveClassification",
    "classify_curve",
    "classify_curves",
    "omega_limit",
    "alpha_limit",
    "aubry_estimate",
    "strongly_static_estimate",
    "GraphPropertyReport",
    "graph_property_check",
    "barrier_reproduction",
    "projected_hausdorff",
    "projected_excess",
]


# ----------------------------------------------------------------------------
# pseudographs
# ----------------------------------------------------------------------------


def _energy_roots(model: ModelSpec, x, u):
    """Both roots ``p`` of ``H(x, u, p) = 0`` for affine models (NaN when absent)."""
    c = model.coupling(x)
    V = model.drift(x)
    disc = V * V - 2.0 * c * u
    # no real root: the vertex p = -V minimizes |H|; the tol_H filter decides
    s = np.sqrt(np.maximum(disc, 0.0))
    return -V - s, -V + s


def _project_energy(model: ModelSpec, x, u, p, proj_tol):
    """Move candidate momenta onto ``H = 0`` when a root lies within ``proj_tol``."""
    if model.is_affine:
        r1, r2 = _energy_roots(model, x, u)
        d1 = np.abs(p - r1)
        d2 = np.abs(p - r2)
        best = np.where(np.nan_to_num(d1, nan=np.inf) <= np.nan_to_num(d2, nan=np.inf), r1, r2)
        dist = np.abs(p - best)
        ok = np.isfinite(dist) & (dist <= proj_tol)
        return np.where(ok, best, p), ok
    q = np.array(p, dtype=float)
    for _ in range(50):
        H = np.asarray(eval_H(model, x, u, q))
        Hp = np.asarray(eval_H_partials(model, x, u, q)[2])
        step = np.where(np.abs(Hp) > 1e-14, H / np.where(Hp == 0, 1.0, Hp), 0.0)
        q = q - step
        if np.max(np.abs(step)) < 1e-14:
            break
    ok = np.isfinite(q) & (np.abs(q - p) <= proj_tol) & (np.abs(np.asarray(eval_H(model, x, u, q))) < 1e-10)
    return np.where(ok, q, p), ok


@dataclass(frozen=True)
class Pseudograph:
    """Reachable-gradient graph of a weak KAM solution at grid resolution.

    ``cand[i]`` holds up to two momenta at node ``i`` (NaN where absent).  The
    object behaves like a sequence of :class:`ContactState`.
    """

    model: ModelSpec
    solution: WeakKAMSolution
    cand: np.ndarray
    kinks: np.ndarray
    tol_H: float

    @property
    def grid(self) -> Grid:
        return self.solution.grid

    @property
    def _flat(self):
        idx, slot = np.nonzero(np.isfinite(self.cand))
        order = np.lexsort((slot, idx))
        return idx[order], slot[order]

    @property
    def node(self) -> np.ndarray:
        return self._flat[0]

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes[self.node]

    @property
    def u(self) -> np.ndarray:
        return self.solution.values[self.node]

    @property
    def p(self) -> np.ndarray:
        i, s = self._flat
        return self.cand[i, s]

    @property
    def states(self) -> list[ContactState]:
        return [ContactState(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.u, self.p)]

    def __len__(self) -> int:
        return int(np.isfinite(self.cand).sum())

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, k):
        return self.states[k]

    @property
    def missing_fraction(self) -> float:
        return float(np.mean(~np.isfinite(self.cand).any(axis=1)))

    def graph_momentum(self, x):
        """Momentum on the graph between nodes.

        In cell ``[i, i+1]`` the right-sided candidate of node ``i`` and the
        left-sided candidate of node ``i+1`` are interpolated linearly
        (smooth nodes have a single central candidate).  NaN where absent.
        """
        g = self.grid
        q = np.mod(np.asarray(x, dtype=float), g.period) / g.dx
        k = np.floor(q).astype(np.int64)
        f = q - k
        k0 = np.mod(k, g.n)
        k1 = np.mod(k + 1, g.n)
        right = np.where(self.kinks[k0], self.cand[k0, 1], self.cand[k0, 0])
        left = self.cand[k1, 0]
        return (1 - f) * right + f * left

    def distance(self, x, u, p):
        """``|u - v(x)| + min |p - candidate|`` over the two nodes around ``x``."""
        g = self.grid
        x = np.asarray(x, dtype=float)
        q = np.mod(x, g.period) / g.dx
        k0 = np.mod(np.floor(q).astype(np.int64), g.n)
        k1 = np.mod(k0 + 1, g.n)
        du = np.abs(np.asarray(u) - g.interp(self.solution.values, x))
        best = np.full(x.shape, np.inf)
        for k in (k0, k1):
            for s in range(self.cand.shape[1]):
                c = self.cand[k, s]
                d = np.abs(np.asarray(p) - c)
                best = np.where(np.isfinite(d) & (d < best), d, best)
        return du + best


def pseudograph(model: ModelSpec, v: WeakKAMSolution, tol_H: float = 2e-2, kink_tol: float = 0.1,
                proj_tol: float = 0.1, require_converged: bool = True) -> Pseudograph:
    """Candidate ``(x_i, v(x_i), p)`` states of the graph of ``Dv``.

    Smooth nodes use the central difference; nodes where the one-sided
    differences disagree by more than ``kink_tol`` keep both of them.  A
    candidate survives when ``|H(x, v, p)| <= tol_H`` and is then moved to the
    nearest exact root of ``H(x, v, .) = 0`` (within ``proj_tol``), so every
    emitted state has zero energy up to round-off.
    """
    if require_converged and not v.converged:
        raise PreconditionError("pseudograph needs a converged solution")
    g = v.grid
    vals = v.values
    left = (vals - np.roll(vals, 1)) / g.dx
    right = (np.roll(vals, -1) - vals) / g.dx
    central = 0.5 * (left + right)
    kinks = np.abs(right - left) > kink_tol
    cand = np.full((g.n, 2), np.nan)
    cand[:, 0] = np.where(kinks, left, central)
    cand[:, 1] = np.where(kinks, right, np.nan)
    x = g.nodes[:, None] + 0.0 * cand
    u = vals[:, None] + 0.0 * cand
    with np.errstate(invalid="ignore"):
        H = np.abs(np.asarray(eval_H(model, x, u, np.nan_to_num(cand))))
    proj, pok = _project_energy(model, x, u, np.nan_to_num(cand), proj_tol)
    with np.errstate(invalid="ignore"):
        Hp = np.abs(np.asarray(eval_H(model, x, u, proj)))
    ok = np.isfinite(cand) & (H <= tol_H) & (Hp <= tol_H)
    cand = np.where(ok & pok, proj, np.nan)
    # a kink node whose two candidates project to the same root keeps one
    same = np.isfinite(cand[:, 0]) & np.isfinite(cand[:, 1]) & (np.abs(cand[:, 0] - cand[:, 1]) < 1e-12)
    cand[same, 1] = np.nan
    pg = Pseudograph(model, v, cand, kinks, tol_H)
    if pg.missing_fraction > 0.05:
        warnings.warn(f"pseudograph: {100 * pg.missing_fraction:.1f}% of nodes have no admissible gradient; "
                      "refine the grid or loosen tol_H", RuntimeWarning, stacklevel=2)
    return pg


# ----------------------------------------------------------------------------
# Sigma
# ----------------------------------------------------------------------------


def sigma_set(model: ModelSpec, v_minus: WeakKAMSolution, T: float = 5.0, dt: float = 0.01,
              tol_graph: float = 0.1, pg: Pseudograph | None = None) -> SetEstimate:
    """Pseudograph states whose forward orbit over ``[0, T]`` stays on the graph.

    A state lies in every preimage ``Phi_{-t}(G)``, ``t >= 0``, exactly when
    ``Phi_t`` keeps it on ``G``; the per-point defect is the largest graph
    distance along the orbit.  Orbits that blow up are dropped.
    """
    if not T > 0:
        raise PreconditionError("T must be positive")
    pg = pseudograph(model, v_minus) if pg is None else pg
    g = v_minus.grid
    X, U, P, alive = integrate_many(model, pg.x, pg.u, pg.p, T, min(dt, T))
    dist = pg.distance(X, U, P).max(axis=1)
    keep = alive & (dist <= tol_graph)
    return SetEstimate(SetKind.SIGMA, pg.x[keep], pg.u[keep], pg.p[keep], g.dx / 4,
                       f"forward-invariant part of the pseudograph of [{v_minus.provenance}], T={T:g}",
                       g.period, dist[keep], extra={"nodes": pg.node[keep], "tol_graph": tol_graph})


# ----------------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    flag: bool
    defect: float
    evaluated: bool = True

    def __bool__(self) -> bool:
        return bool(self.flag)


_SKIPPED = Verdict(False, float("nan"), False)


@dataclass(frozen=True)
class CurveClassification:
    globally_minimizing: Verdict
    semi_static: Verdict
    static: Verdict
    strongly_static: Verdict
    tol: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {}
        for name in ("globally_minimizing", "semi_static", "static", "strongly_static"):
            v = getattr(self, name)
            out[name] = {"flag": bool(v.flag), "defect": None if not v.evaluated else float(f"{v.defect:.12g}")}
        return out


_TESTS = ("globally_minimizing", "semi_static", "static", "strongly_static")


def _sample_indices(L: int, k: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, L - 1, max(1, min(k, L)))).astype(int))


def _is_constant(orbit: Orbit) -> bool:
    return (np.ptp(np.unwrap(orbit.x, period=orbit.period)) < 1e-12 and np.ptp(orbit.u) < 1e-12
            and np.ptp(orbit.p) < 1e-12)


def classify_curves(model: ModelSpec, orbits, grid: Grid, dt: float, horizon: float, tol: float,
                    tests=_TESTS, n_anchors: int = 3, n_targets: int = 9,
                    check_residual: bool = True) -> list[CurveClassification]:
    """Classify several orbits with one batched set of action tables."""
    tests = set(tests)
    unknown = tests - set(_TESTS)
    if unknown:
        raise ValueError(f"unknown tests {sorted(unknown)}")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    prepared = []
    for orb in orbits:
        orb = orb.chronological()
        if orb.blown_up or not (np.all(np.isfinite(orb.x)) and np.all(np.isfinite(orb.u))):
            raise PreconditionError("orbit must be finite")
        t = orb.times
        span = float(t[-1] - t[0])
        if span > horizon * (1 + 1e-9):
            raise PreconditionError(f"horizon {horizon} is shorter than the orbit span {span:.6g}")
        res = orbit_residual(model, orb) if len(orb) >= 3 else 0.0
        if check_residual and res > tol:
            raise PreconditionError(f"orbit residual {res:.3g} exceeds tol={tol:g}")
        L = len(orb)
        if _is_constant(orb):
            anchors, targets = np.array([0]), np.array([0, L - 1])
        else:
            anchors, targets = _sample_indices(L, n_anchors), _sample_indices(L, n_targets)
        prepared.append((orb, t, anchors, targets, res))
    if not prepared:
        return []
    J = max(len(p[3]) for p in prepared)
    src_x, src_u, probes, owner = [], [], [], []
    for k, (orb, t, anchors, targets, _) in enumerate(prepared):
        tx = orb.x[targets]
        tx = np.concatenate([tx, np.full(J - len(tx), tx[-1])])
        for a in anchors:
            src_x.append(orb.x[a])
            src_u.append(orb.u[a])
            probes.append(tx)
            owner.append(k)
    src_x = np.array(src_x)
    src_u = np.array(src_u)
    probes = np.array(probes)
    need_fwd = bool(tests & {"globally_minimizing", "semi_static", "static"}) or "strongly_static" in tests
    fwd = batched_extremes(model, grid, dt, src_x, src_u, horizon, probes, +1) if need_fwd else None
    bwd = (batched_extremes(model, grid, dt, src_x, src_u, horizon, probes, -1)
           if "strongly_static" in tests else None)

    out = []
    row = 0
    for k, (orb, t, anchors, targets, res) in enumerate(prepared):
        gm = semi = stat = strong = 0.0
        for a in anchors:
            for jj, b in enumerate(targets):
                ub = orb.u[b]
                same = a == b or (_is_constant(orb))
                if fwd is not None:
                    series, inf = fwd
                    s = t[b] - t[a]
                    if s >= dt * (1 - 1e-9):
                        kf = s / dt - 1.0
                        k0 = int(min(math.floor(kf + 1e-9), series.shape[0] - 1))
                        f = min(max(kf - k0, 0.0), 1.0)
                        hv = series[k0, row, jj]
                        if f > 0 and k0 + 1 < series.shape[0]:
                            hv = (1 - f) * hv + f * series[k0 + 1, row, jj]
                        gm = max(gm, abs(ub - hv))
                    lo = min(inf[row, jj], orb.u[a]) if same else inf[row, jj]
                    d = abs(ub - lo)
                    if t[a] <= t[b]:
                        semi = max(semi, d)
                    stat = max(stat, d)
                if bwd is not None:
                    hi = max(bwd[1][row, jj], orb.u[a]) if same else bwd[1][row, jj]
                    strong = max(strong, abs(ub - hi))
            row += 1
        gm_ok = gm <= tol
        v_gm = Verdict(gm_ok, gm) if fwd is not None else _SKIPPED
        v_semi = Verdict(gm_ok and semi <= tol, semi) if ("semi_static" in tests or "static" in tests) else _SKIPPED
        v_stat = Verdict(v_semi.flag and stat <= tol, stat) if "static" in tests else _SKIPPED
        v_strong = Verdict(gm_ok and strong <= tol, strong) if "strongly_static" in tests else _SKIPPED
        out.append(CurveClassification(v_gm, v_semi, v_stat, v_strong, tol,
                                       {"residual": res, "anchors": len(anchors), "targets": len(targets),
                                        "span": float(t[-1] - t[0])}))
    return out


def classify_curve(model: ModelSpec, orbit: Orbit, grid: Grid, dt: float = 0.01, horizon: float | None = None,
                   tol: float = 5e-3, tests=_TESTS, n_anchors: int = 3, n_targets: int = 9) -> CurveClassification:
    """Test the minimizing/static-type identities along a sampled orbit.

    ``horizon`` bounds the inf/sup over ``s`` and must cover the orbit span.
    """
    horizon = default_horizon(model) if horizon is None else float(horizon)
    return classify_curves(model, [orbit], grid, dt, horizon, tol, tests, n_anchors, n_targets)[0]


# ----------------------------------------------------------------------------
# limit sets
# ----------------------------------------------------------------------------


def _phase_dist(x, u, p, cx, cu, cp, period):
    return np.maximum(np.maximum(circle_gap(x, cx, period), np.abs(u - cu)), np.abs(p - cp))


def _cluster(x, u, p, tol, period):
    """Greedy clustering in the max-norm; returns (centers, counts)."""
    centers: list[tuple[float, float, float]] = []
    counts: list[int] = []
    if x.size and np.max(_phase_dist(x, u, p, x[0], u[0], p[0], period)) <= tol:
        return [(float(x[0]), float(u[0]), float(p[0]))], [int(x.size)]
    for a, b, c in zip(x, u, p):
        if centers:
            C = np.array(centers)
            d = _phase_dist(a, b, c, C[:, 0], C[:, 1], C[:, 2], period)
            j = int(np.argmin(d))
            if d[j] <= tol:
                counts[j] += 1
                continue
        centers.append((float(a), float(b), float(c)))
        counts.append(1)
    return centers, counts


def omega_limit(model: ModelSpec, s0: ContactState, T: float = 20.0, dt: float = 0.01,
                tol_cluster: float = 1e-2) -> SetEstimate:
    """Clusters of the final third of the orbit samples (``T < 0``: the alpha-limit)."""
    orb = integrate(model, s0, T, dt)
    L = len(orb)
    tail = slice(L - max(1, L // 3), L)
    centers, counts = _cluster(orb.x[tail], orb.u[tail], orb.p[tail], tol_cluster, model.period)
    C = np.array(centers)
    word = "omega" if T > 0 else "alpha"
    return SetEstimate(SetKind.OMEGA_LIMIT, C[:, 0], C[:, 1], C[:, 2], tol_cluster,
                       f"{word}-limit of ({s0.x:.6g},{s0.u:.6g},{s0.p:.6g}), T={abs(T):g}", model.period,
                       extra={"counts": counts, "orbit": orb})


def alpha_limit(model: ModelSpec, s0: ContactState, T: float = 20.0, dt: float = 0.01,
                tol_cluster: float = 1e-2) -> SetEstimate:
    """Omega-limit of the time-reversed flow."""
    return omega_limit(model, s0, -abs(T), dt, tol_cluster)


# ----------------------------------------------------------------------------
# Aubry and strongly static estimates
# ----------------------------------------------------------------------------


def graph_backward(model: ModelSpec, pg: Pseudograph, x0, T: float, dt: float):
    """Backward calibrated orbits on the graph: ``xdot = H_p(x, v(x), p(x))`` in reverse.

    The graph of a backward solution is invariant under the backward flow;
    integrating the reduced equation keeps ``(u, p) = (v(x), p(x))`` exactly
    on it, where the full backward flow would amplify any error in ``v`` by
    ``exp(lambda t)``.  Returns ``(X, U, P, alive)`` like ``integrate_many``;
    rows that reach a node without an admissible gradient are frozen.
    """
    g = pg.grid
    N = int(math.ceil(abs(T) / dt - 1e-9))
    h = -abs(dt)
    vals = pg.solution.values

    def rhs(x):
        return np.asarray(eval_H_partials(model, x, g.interp(vals, x), pg.graph_momentum(x))[2])

    x = np.mod(np.asarray(x0, dtype=float), model.period)
    X = np.empty((x.size, N + 1))
    X[:, 0] = x
    alive = np.isfinite(pg.graph_momentum(x))
    for k in range(1, N + 1):
        with np.errstate(invalid="ignore"):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h * k1)
            k3 = rhs(x + 0.5 * h * k2)
            k4 = rhs(x + h * k3)
            nx = np.mod(x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), model.period)
        alive &= np.isfinite(nx)
        x = np.where(alive, nx, x)
        X[:, k] = x
    U = g.interp(vals, X)
    P = pg.graph_momentum(X)
    return X, U, P, alive


def _first_exit(dist: np.ndarray, tol: float) -> np.ndarray:
    """Index of the first sample farther than ``tol`` from the graph (row length if none)."""
    bad = dist > tol
    return np.where(bad.any(axis=1), bad.argmax(axis=1), dist.shape[1])


def _union_find_groups(S: int, linked) -> list[list[int]]:
    parent = list(range(S))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in linked:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(S):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


@dataclass
class _Candidate:
    label: str
    orbit: Orbit
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray


def aubry_estimate(model: ModelSpec, v_minus: WeakKAMSolution, dt: float = 0.01, T: float = 20.0,
                   tol: float = 5e-3, stride: int = 4, tol_graph: float = 0.1, tol_cluster: float | None = None,
                   horizon: float | None = None, n_anchors: int = 2, n_targets: int = 7,
                   pg: Pseudograph | None = None) -> SetEstimate:
    """Static part of the calibrated dynamics on the graph of ``v_minus``.

    Every ``stride``-th pseudograph node seeds a flow line integrated over
    ``[-T, T]`` (the backward half by :func:`graph_backward`).  Candidates are

    * orbit segments ``|t| <= T/3`` of seeds that stay on the graph both
      ways (grouped by mutual containment, one classification per group), and
    * alpha/omega-limit clusters of the final third of orbits that stay on
      the graph over the whole backward/forward run.

    Each candidate is accepted when its representative orbit passes the
    static test within ``tol``.  ``extra`` records the raw limit clusters,
    the candidate orbits and their classifications.
    """
    g = v_minus.grid
    pg = pseudograph(model, v_minus) if pg is None else pg
    tol_cluster = 2 * g.dx if tol_cluster is None else tol_cluster
    sel = np.flatnonzero(pg.node % stride == 0)
    x0, u0, p0 = pg.x[sel], pg.u[sel], pg.p[sel]
    fdt = min(dt, T)
    Xf, Uf, Pf, af = integrate_many(model, x0, u0, p0, T, fdt)
    Xb, Ub, Pb, ab = graph_backward(model, pg, x0, T, fdt)
    ef = np.where(af, _first_exit(pg.distance(Xf, Uf, Pf), tol_graph), 0)
    eb = np.where(ab, Xb.shape[1], 0)
    N = Xf.shape[1]
    third = max(1, (N - 1) // 3)
    full_f = ef >= N
    full_b = eb >= N

    cands: list[_Candidate] = []
    # orbit segments on the graph both ways
    both = np.flatnonzero(full_f & full_b)
    segs = {}
    for s in both:
        x = np.concatenate([Xb[s, third:0:-1], Xf[s, :third + 1]])
        u = np.concatenate([Ub[s, third:0:-1], Uf[s, :third + 1]])
        p = np.concatenate([Pb[s, third:0:-1], Pf[s, :third + 1]])
        segs[s] = (x, u, p)
    contains = {}
    for s in both:
        xs, us, ps = segs[s]
        d = _phase_dist(x0[both, None], u0[both, None], p0[both, None], xs[None, :], us[None, :], ps[None, :],
                        model.period).min(axis=1)
        contains[s] = set(both[d <= tol_cluster].tolist())
    links = [(i, j) for i in both for j in contains[i] if i in contains.get(j, ())]
    index = {s: k for k, s in enumerate(both)}
    groups = _union_find_groups(len(both), [(index[i], index[j]) for i, j in links])
    for grp in groups:
        members = [int(both[k]) for k in grp]
        rep = members[0]
        x, u, p = segs[rep]
        orb = Orbit(-third * fdt, fdt, x, u, p, model.period)
        allx = np.concatenate([segs[m][0] for m in members])
        allu = np.concatenate([segs[m][1] for m in members])
        allp = np.concatenate([segs[m][2] for m in members])
        cands.append(_Candidate(f"orbit group of {len(members)} seed(s) from x={x0[rep]:.6g}", orb, allx, allu, allp))

    # limit clusters
    raw = []
    for which, ok, X, U, P in (("alpha", full_b, Xb, Ub, Pb), ("omega", full_f, Xf, Uf, Pf)):
        for s in np.flatnonzero(ok):
            tail = slice(N - 1 - third, N)
            centers, _ = _cluster(X[s, tail], U[s, tail], P[s, tail], tol_cluster, model.period)
            for c in centers:
                raw.append((which, int(s), c))
    merged: list[tuple[str, int, tuple]] = []
    for which, s, c in raw:
        if not any(w == which and _phase_dist(c[0], c[1], c[2], m[0], m[1], m[2], model.period) <= tol_cluster
                   for w, _, m in merged):
            merged.append((which, s, c))
    for which, s, c in merged:
        X, U, P = (Xb, Ub, Pb) if which == "alpha" else (Xf, Uf, Pf)
        tail = slice(N - 1 - third, N)
        d = _phase_dist(X[s, tail], U[s, tail], P[s, tail], c[0], c[1], c[2], model.period)
        keep = np.flatnonzero(d <= tol_cluster)
        lo, hi = keep.min(), keep.max() + 1
        x, u, p = X[s, tail][lo:hi], U[s, tail][lo:hi], P[s, tail][lo:hi]
        if len(x) < 2:
            x, u, p = np.repeat(x, 2), np.repeat(u, 2), np.repeat(p, 2)
        h = fdt if which == "omega" else -fdt
        orb = Orbit(0.0, h, x, u, p, model.period).chronological()
        cands.append(_Candidate(f"{which}-limit cluster at x={c[0]:.6g}", orb, x, u, p))

    horizon = min(default_horizon(model), 30.0) if horizon is None else float(horizon)
    span = max((c.orbit.times[-1] - c.orbit.times[0] for c in cands), default=0.0)
    horizon = max(horizon, span)
    cls = classify_curves(model, [c.orbit for c in cands], g, dt, horizon, tol, tests=("static",),
                          n_anchors=n_anchors, n_targets=n_targets, check_residual=False)
    xs, us, ps, ds = [], [], [], []
    accepted = []
    for c, k in zip(cands, cls):
        if k.static.flag:
            accepted.append((c, k))
            xs.append(c.x)
            us.append(c.u)
            ps.append(c.p)
            ds.append(np.full(c.x.shape, k.static.defect))
    cat = (lambda a: np.concatenate(a) if a else np.zeros(0))
    raw_est = SetEstimate(SetKind.OMEGA_LIMIT, np.array([m[2][0] for m in merged]),
                          np.array([m[2][1] for m in merged]), np.array([m[2][2] for m in merged]),
                          tol_cluster, "raw alpha/omega-limit clusters", model.period)
    return SetEstimate(
        SetKind.AUBRY, cat(xs), cat(us), cat(ps), g.dx / 4,
        f"static-verified calibrated orbits on the graph of [{v_minus.provenance}]", model.period, cat(ds),
        extra={"candidates": cands, "classifications": cls, "accepted": accepted, "raw_limits": raw_est,
               "horizon": horizon, "dt": dt, "tol": tol, "n_seeds": int(sel.size)},
    )


def _trim(orbit: Orbit, span: float) -> Orbit:
    """Centred sub-segment of at most ``span`` time units."""
    orb = orbit.chronological()
    L = len(orb)
    keep = int(math.floor(span / orb.dt + 1e-9)) + 1
    if keep >= L:
        return orb
    keep = max(keep, 2)
    lo = (L - keep) // 2
    return Orbit(orb.times[lo], orb.dt, orb.x[lo:lo + keep], orb.u[lo:lo + keep], orb.p[lo:lo + keep], orb.period)


def default_sup_horizon(model: ModelSpec) -> float:
    """Horizon of the sup test: ``5 / lambda`` (5 when lambda = 0).

    The backward action from ``(x, u + e)`` exceeds the one from ``(x, u)``
    by up to ``e * exp(lambda s)``, so a long sup horizon turns the small
    residual error of a numerical solution into a large spurious defect.
    """
    return 5.0 / model.lam if model.lam > 0 else 5.0


def strongly_static_estimate(model: ModelSpec, aubry: SetEstimate, grid: Grid, dt: float = 0.01,
                             horizon: float | None = None, tol: float = 5e-3, n_anchors: int = 2,
                             n_targets: int = 7) -> SetEstimate:
    """Aubry candidates that also pass the strongly static test.

    Each verified candidate of :func:`aubry_estimate` is tested on its centred
    sub-segment of span ``horizon`` (default :func:`default_sup_horizon`),
    with the sup over ``s in (0, horizon]``; passing candidates contribute
    all their points.  For a bare point set each point is tested on a short
    flow segment through it.
    """
    if aubry.kind is not SetKind.AUBRY:
        raise PreconditionError("expected an Aubry estimate")
    horizon = default_sup_horizon(model) if horizon is None else float(horizon)
    accepted = aubry.extra.get("accepted")
    if accepted is None:
        half = min(0.5, horizon / 2)
        orbits, pts = [], []
        for s in aubry.points:
            a = integrate(model, s, -half, min(dt, half))
            b = integrate(model, s, half, min(dt, half))
            orb = Orbit(-half, b.dt, np.concatenate([a.x[:0:-1], b.x]), np.concatenate([a.u[:0:-1], b.u]),
                        np.concatenate([a.p[:0:-1], b.p]), model.period)
            orbits.append(orb)
            pts.append((np.array([s.x]), np.array([s.u]), np.array([s.p])))
    else:
        orbits = [_trim(c.orbit, horizon) for c, _ in accepted]
        pts = [(c.x, c.u, c.p) for c, _ in accepted]
    cls = classify_curves(model, orbits, grid, dt, horizon, tol, tests=("strongly_static",),
                          n_anchors=n_anchors, n_targets=n_targets, check_residual=False) if orbits else []
    xs, us, ps, ds = [], [], [], []
    for (x, u, p), k in zip(pts, cls):
        if k.strongly_static.flag:
            xs.append(x)
            us.append(u)
            ps.append(p)
            ds.append(np.full(np.shape(x), k.strongly_static.defect))
    cat = (lambda a: np.concatenate(a) if a else np.zeros(0))
    return SetEstimate(SetKind.STRONGLY_STATIC, cat(xs), cat(us), cat(ps), aubry.tol,
                       f"strongly static part of [{aubry.provenance}]", model.period, cat(ds),
                       extra={"classifications": cls, "horizon": horizon})


# ----------------------------------------------------------------------------
# graph property, barrier reproduction
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphPropertyReport:
    passed: bool
    max_spread: float
    tol_v: float
    worst_x: float
    bins: int

    def to_dict(self) -> dict:
        return {"pass": self.passed, "max_spread": self.max_spread, "tol_v": self.tol_v,
                "worst_x": self.worst_x, "bins": self.bins}


def graph_property_check(model: ModelSpec, aubry: SetEstimate, tol_v: float = 5e-3,
                         bin_width: float | None = None) -> GraphPropertyReport:
    """Velocity ``dH/dp`` must be single-valued over the projected set.

    Points are binned by ``x`` (width ``bin_width``, default ``period / 8192``)
    and the largest velocity range within a bin is compared to ``tol_v``.
    Different ``(u, p)`` with the same velocity are allowed.
    """
    if len(aubry) == 0:
        return GraphPropertyReport(True, 0.0, tol_v, float("nan"), 0)
    bw = aubry.period / 8192 if bin_width is None else bin_width
    vel = np.asarray(velocity(model, aubry.x, aubry.u, aubry.p), dtype=float)
    nb = int(round(aubry.period / bw))
    b = np.mod(np.floor(aubry.x / bw + 0.5).astype(np.int64), nb)
    order = np.argsort(b, kind="stable")
    bs, vs = b[order], vel[order]
    starts = np.flatnonzero(np.r_[True, bs[1:] != bs[:-1]])
    hi = np.maximum.reduceat(vs, starts)
    lo = np.minimum.reduceat(vs, starts)
    spread = hi - lo
    k = int(np.argmax(spread))
    worst = float(spread[k])
    return GraphPropertyReport(worst <= tol_v, worst, tol_v, float(bs[starts[k]] * bw), int(starts.size))


def barrier_reproduction(model: ModelSpec, orbit: Orbit, grid: Grid, dt: float = 0.01, n_sources: int = 2,
                         n_targets: int = 7, tol: float = 1e-6, t_max: float | None = None) -> float:
    """Max ``|h_{x_a,u_a}(x_b, inf) - u_b|`` over sampled points of a static orbit.

    The long-time action is the Peierls barrier from each sampled source.
    """
    orb = orbit.chronological()
    src = _sample_indices(len(orb), n_sources)
    tgt = _sample_indices(len(orb), n_targets)
    worst = 0.0
    for a in src:
        bar = peierls_barrier(model, float(orb.x[a]), float(orb.u[a]), grid, dt, tol=tol, t_max=t_max)
        vals = grid.interp(bar.values, orb.x[tgt])
        worst = max(worst, float(np.max(np.abs(vals - orb.u[tgt]))))
    return worst
