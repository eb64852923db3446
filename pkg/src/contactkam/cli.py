"""Command-line front end.

Every subcommand writes deterministic CSV/JSON (and optional SVG) files into
``--out`` and exits with 0 on success, 1 when a check fails and 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import model as M
from .action import backward_action, forward_action, mane_potential, peierls_barrier, sup_backward
from .errors import BlowUpError, ConfigurationError, ContactKamError, PreconditionError
from .flow import ContactState, integrate
from .grid import Grid, ScalarField

log = logging.getLogger("contactkam")


@dataclass
class RunConfig:
    """Shared run settings; a JSON file supplies defaults and flags override them."""

    model: str = "e1"
    grid: int = 512
    dt: float = 0.01
    horizon: float | None = None
    tol: float = 5e-3
    tol_H: float = 2e-2
    tol_graph: float = 0.1
    tol_fix: float = 1e-7
    tol_cluster: float | None = None
    out: str = "out"
    seed: str = "0"

    def validate(self) -> None:
        for name in ("dt", "tol", "tol_H", "tol_graph", "tol_fix", "tol_cluster", "horizon"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive (got {v})")
        if self.grid < 16:
            raise ConfigurationError("grid needs at least 16 nodes")
        if self.grid & (self.grid - 1):
            warnings.warn(f"grid size {self.grid} is not a power of two", RuntimeWarning, stacklevel=2)

    @property
    def random_seed(self) -> int:
        try:
            return int(self.seed)
        except ValueError:
            raise ConfigurationError(f"--seed {self.seed!r} is not an integer random seed") from None


def _config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        names = {f.name for f in fields(RunConfig)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config entries: {sorted(unknown)}")
        for k, v in data.items():
            if k == "model" and isinstance(v, dict):
                v = json.dumps(v)
            elif k in ("seed", "out") and v is not None:
                v = str(v)
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


def _write(out: str, name: str, text: str) -> str:
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _dump(obj) -> str:
    from .experiments import _num

    return json.dumps(_num(obj), indent=2, sort_keys=True) + "\n"


def _state(args) -> ContactState:
    return ContactState(float(args.x0), float(args.u0), float(args.p0))


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_model_audit(args, cfg: RunConfig) -> int:
    model = M.load_model(cfg.model)
    rep = M.audit_assumptions(model, seed=cfg.random_seed)
    _write(cfg.out, "audit.json", _dump(rep.to_dict()))
    print(f"{'PASS' if rep.passed else 'FAIL'}  audit of {model.name}")
    for m in rep.messages:
        print(f"  {m}")
    return 0 if rep.passed else 1


def cmd_flow(args, cfg: RunConfig) -> int:
    from .plotting import plot_orbits

    model = M.load_model(cfg.model)
    try:
        orb = integrate(model, _state(args), args.T, cfg.dt)
        code = 0
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        if exc.orbit is None:
            return 1
        orb, code = exc.orbit, 1
    _write(cfg.out, "orbit.csv", orb.to_csv())
    if args.svg:
        _write(cfg.out, "orbit.svg", plot_orbits({"orbit": orb}, f"{model.name} orbit"))
    print(f"orbit of {len(orb)} samples; final state x={orb.x[-1]:.6g} u={orb.u[-1]:.6g} p={orb.p[-1]:.6g}")
    return code


def cmd_action(args, cfg: RunConfig) -> int:
    model = M.load_model(cfg.model)
    g = Grid(cfg.grid, model.period)
    x0, u0 = float(args.x0), float(args.u0)
    if args.kind in ("forward", "backward"):
        fn = forward_action if args.kind == "forward" else backward_action
        tab = fn(model, x0, u0, g, cfg.horizon, cfg.dt)
        _write(cfg.out, f"action_{args.kind}.csv", tab.to_csv())
        return 0
    if args.kind == "barrier":
        fld = peierls_barrier(model, x0, u0, g, cfg.dt, t_max=cfg.horizon)
        code = 0 if fld.extra.get("converged") else 1
    elif args.kind == "mane":
        fld, code = mane_potential(model, x0, u0, g, cfg.dt, cfg.horizon), 0
    else:
        fld, code = sup_backward(model, x0, u0, g, cfg.dt, cfg.horizon), 0
    _write(cfg.out, f"{args.kind}.csv", fld.to_csv())
    return code


def _initial_field(model, g: Grid, spec: str, dt: float) -> ScalarField:
    """``zero``, ``constant:c``, ``barrier:x:u`` or ``file:PATH`` (CSV ``x,value``)."""
    parts = spec.split(":")
    try:
        if parts[0] == "zero":
            return ScalarField.constant(g, 0.0)
        if parts[0] == "constant" and len(parts) == 2:
            return ScalarField.constant(g, float(parts[1]))
        if parts[0] == "barrier" and len(parts) == 3:
            return peierls_barrier(model, float(parts[1]), float(parts[2]), g, dt, tol=1e-8)
        if parts[0] == "file" and len(parts) >= 2:
            data = np.loadtxt(":".join(parts[1:]), delimiter=",", skiprows=1, ndmin=2)
            return ScalarField(g, np.interp(g.nodes, data[:, 0], data[:, 1], period=g.period), spec)
    except (ValueError, OSError) as exc:
        raise ConfigurationError(f"bad --seed {spec!r}: {exc}") from exc
    raise ConfigurationError(f"bad --seed {spec!r}; use zero, constant:c, barrier:x:u or file:PATH")


def _solve(model, cfg: RunConfig, side: str):
    from .semigroup import weak_kam_backward, weak_kam_forward

    g = Grid(cfg.grid, model.period)
    phi = _initial_field(model, g, cfg.seed, cfg.dt)
    fn = weak_kam_backward if side == "backward" else weak_kam_forward
    return fn(model, phi, cfg.dt, cfg.tol_fix, provenance=f"seed {cfg.seed}")


def cmd_solve(args, cfg: RunConfig) -> int:
    from .plotting import plot_fields

    model = M.load_model(cfg.model)
    sol = _solve(model, cfg, args.side)
    _write(cfg.out, f"solution_{args.side}.csv", sol.to_csv())
    _write(cfg.out, f"solution_{args.side}.json", sol.to_json())
    if args.svg:
        _write(cfg.out, f"solution_{args.side}.svg", plot_fields({f"{args.side} solution": sol.field},
                                                                  f"{model.name}, seed {cfg.seed}"))
    print(f"{'converged' if sol.converged else 'NOT converged'} after {sol.iterations} sweeps, "
          f"residual {sol.residual:.3g}")
    return 0 if sol.converged else 1


def cmd_sets(args, cfg: RunConfig) -> int:
    from .plotting import plot_fields
    from .semigroup import conjugate_pair
    from .sets import aubry_estimate, sigma_set, strongly_static_estimate

    model = M.load_model(cfg.model)
    v = _solve(model, cfg, "backward")
    if not v.converged:
        print("backward solution did not converge", file=sys.stderr)
        return 1
    which = set(args.which.split(","))
    if "all" in which:
        which = {"sigma", "coincidence", "aubry", "strongly"}
    unknown = which - {"sigma", "coincidence", "aubry", "strongly"}
    if unknown:
        raise ConfigurationError(f"unknown set names {sorted(unknown)}")
    ests = {}
    if "sigma" in which:
        ests["sigma"] = sigma_set(model, v, dt=cfg.dt, tol_graph=cfg.tol_graph)
    if "coincidence" in which:
        ests["coincidence"] = conjugate_pair(model, v, cfg.dt)[1]
    if which & {"aubry", "strongly"}:
        ests["aubry"] = aubry_estimate(model, v, cfg.dt, tol=cfg.tol, tol_graph=cfg.tol_graph,
                                       tol_cluster=cfg.tol_cluster, horizon=cfg.horizon)
    if "strongly" in which:
        ests["strongly_static"] = strongly_static_estimate(model, ests["aubry"], v.grid, cfg.dt, tol=cfg.tol)
    _write(cfg.out, "solution.csv", v.to_csv())
    for name, est in ests.items():
        _write(cfg.out, f"{name}.csv", est.to_csv())
        print(f"{name}: {len(est)} points, max gap {est.max_gap():.6g}")
    if args.svg:
        _write(cfg.out, "sets.svg", plot_fields({"u-": v.field}, model.name, sets=ests))
    return 0


def cmd_classify(args, cfg: RunConfig) -> int:
    from .experiments import orbit_through
    from .sets import classify_curve

    model = M.load_model(cfg.model)
    g = Grid(cfg.grid, model.period)
    orb = orbit_through(model, _state(args), float(args.T), cfg.dt)
    horizon = cfg.horizon if cfg.horizon is not None else max(2 * float(args.T), 10.0)
    cls = classify_curve(model, orb, g, cfg.dt, horizon, cfg.tol)
    _write(cfg.out, "classification.json", _dump(cls.to_dict()))
    _write(cfg.out, "orbit.csv", orb.to_csv())
    for name in ("globally_minimizing", "semi_static", "static", "strongly_static"):
        verdict = getattr(cls, name)
        print(f"{name}: {verdict.flag} (defect {verdict.defect:.3g})")
    return 0


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _poly(text: str):
    """Named polynomial or a JSON/comma list of coefficients."""
    if text in ("sin", "one_minus_cos", "zero"):
        return text
    try:
        return json.loads(text) if text.lstrip().startswith(("[", "{")) else _floats(text)
    except json.JSONDecodeError:
        raise ConfigurationError(f"cannot parse polynomial {text!r}") from None


def _attach_figures(rep) -> None:
    from .plotting import plot_fields, plot_orbits, plot_series

    art = rep.artifacts
    if rep.name == "e1":
        rep.figures["solution"] = plot_fields({"u-": art["u_minus"].field}, "E1 backward solution and sets",
                                              sets={"Aubry": art["aubry"], "strongly static": art["strong"]})
        rep.figures["drift_orbit"] = plot_orbits({"drift orbit": art["drift"]}, "E1 drift orbit")
    elif rep.name == "e2":
        fl = {("v = 0" if k == 0 else f"v[{k:g}]"): s.field for k, s in sorted(art["solutions"].items())}
        sets = {f"A(v[{k:g}])": a for k, a in sorted(art["aubry"].items()) if k != 0}
        rep.figures["solutions"] = plot_fields(fl, "E2 backward solutions", sets=sets)
    elif rep.name == "discount":
        profs = art["profiles"]
        order = np.argsort(profs[0].x[:-1])
        x = profs[0].x[:-1][order]
        rep.figures["profiles"] = plot_series(x, {f"lambda={p.lam:g}": p.v[:-1][order] for p in profs},
                                              "forward solutions by discount rate", "x", "v", markers=False)
        lams = [p.lam for p in profs]
        rep.figures["value_at_x2"] = plot_series(lams, {"v(x2)": [p.value_x2 for p in profs]},
                                                 "value at the second zero", "lambda", "v(x2)", logx=True)


def cmd_experiment(args, cfg: RunConfig) -> int:
    from . import experiments as E

    which = args.which
    if which == "e1":
        rep = E.run_e1(lam=args.lam if args.lam is not None else 1.0, V=_poly(args.V), grid=cfg.grid, dt=cfg.dt,
                       horizon=cfg.horizon, tol=cfg.tol)
    elif which == "e2":
        levels = _floats(args.levels) if args.levels else (-0.5, -1.0)
        rep = E.run_e2(f=_poly(args.f), u_levels=levels, grid=cfg.grid, dt=cfg.dt, horizon=cfg.horizon,
                       tol=cfg.tol, tol_fix=cfg.tol_fix)
    elif which == "discount":
        lams = _floats(args.lambdas) if args.lambdas else (0.2, 0.1, 0.05, 0.02, 0.01)
        rep = E.discount_limit(V=_poly(args.V), lambdas=lams)
    else:
        model = M.load_model(cfg.model)
        rep = E.property_suite(model, cfg.random_seed, cfg.grid, cfg.dt, tol=cfg.tol, tol_fix=cfg.tol_fix,
                               structural=not args.identities_only)
    if args.svg:
        _attach_figures(rep)
    rep.write(cfg.out)
    print(rep.summary())
    print(f"{len(rep.checks) - len(rep.failures)}/{len(rep.checks)} checks passed")
    return 0 if rep.passed else 1


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings (flags win)")
    p.add_argument("--model", help="model descriptor: JSON path, JSON text or kind name")
    p.add_argument("--grid", type=int, help="number of grid nodes")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--horizon", type=float, help="time horizon for action tables and extremes")
    p.add_argument("--tol", type=float, help="classification tolerance")
    p.add_argument("--tol-H", dest="tol_H", type=float, help="energy tolerance for pseudographs")
    p.add_argument("--tol-graph", dest="tol_graph", type=float, help="distance-to-graph tolerance")
    p.add_argument("--tol-fix", dest="tol_fix", type=float, help="fixed-point tolerance")
    p.add_argument("--tol-cluster", dest="tol_cluster", type=float, help="orbit clustering tolerance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", help="random seed, or an initial field for solve/sets")
    p.add_argument("--svg", action="store_true", help="also write SVG charts")
    p.add_argument("-v", "--verbose", action="store_true")


def _point(p: argparse.ArgumentParser, with_T: bool = True) -> None:
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--u0", type=float, required=True)
    p.add_argument("--p0", type=float, default=0.0)
    if with_T:
        p.add_argument("--T", type=float, required=True, help="integration time (negative = backward)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contactkam", description="Weak KAM toolkit for contact Hamiltonians "
                                     "on the circle.")
    sub = parser.add_subparsers(dest="command", required=True)

    pm = sub.add_parser("model", help="model utilities")
    msub = pm.add_subparsers(dest="action", required=True)
    pa = msub.add_parser("audit", help="sample the structural assumptions")
    _common(pa)
    pa.set_defaults(func=cmd_model_audit)

    pf = sub.add_parser("flow", help="integrate the contact flow")
    _common(pf)
    _point(pf)
    pf.set_defaults(func=cmd_flow)

    pc = sub.add_parser("action", help="action tables and their long-time extremes")
    _common(pc)
    _point(pc, with_T=False)
    pc.add_argument("--kind", choices=("forward", "backward", "barrier", "mane", "sup"), default="forward")
    pc.set_defaults(func=cmd_action)

    ps = sub.add_parser("solve", help="weak KAM solution by fixed-point iteration")
    _common(ps)
    ps.add_argument("--side", choices=("backward", "forward"), default="backward")
    ps.set_defaults(func=cmd_solve, default_seed="zero")

    pt = sub.add_parser("sets", help="Sigma, coincidence, Aubry and strongly static estimates")
    _common(pt)
    pt.add_argument("--which", default="all", help="comma list of sigma,coincidence,aubry,strongly or all")
    pt.set_defaults(func=cmd_sets, default_seed="zero")

    pk = sub.add_parser("classify", help="classify the orbit through a point on [-T, T]")
    _common(pk)
    _point(pk)
    pk.set_defaults(func=cmd_classify)

    pe = sub.add_parser("experiment", help="turn-key experiments")
    _common(pe)
    pe.add_argument("which", choices=("e1", "e2", "discount", "props"))
    pe.add_argument("--V", default="sin", help="drift polynomial (name, JSON or comma list)")
    pe.add_argument("--f", default="one_minus_cos", help="coupling polynomial for e2")
    pe.add_argument("--lam", type=float, help="discount rate for e1")
    pe.add_argument("--lambdas", help="comma list of discount rates")
    pe.add_argument("--levels", help="comma list of negative levels for e2")
    pe.add_argument("--identities-only", action="store_true", help="props: skip the structural checks")
    pe.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.seed is None and getattr(args, "default_seed", None):
            args.seed = args.default_seed
        if args.command == "experiment" and args.which in ("e1", "e2", "discount") and args.model:
            raise ConfigurationError(f"experiment {args.which} builds its own model; drop --model")
        cfg = _config(args)
        if args.command == "experiment" and args.which == "e2" and args.grid is None:
            cfg.grid = 256
        if args.command == "experiment" and args.which == "props" and args.grid is None:
            cfg.grid = 256
        return args.func(args, cfg)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContactKamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
