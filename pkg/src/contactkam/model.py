r"""Contact Hamiltonians on the circle.

Every built-in family is affine in the unknown ``u`` and quadratic in the
momentum,

.. math::

    H(x, u, p) = c(x)\,u + \tfrac12 p^2 + p\,V(x),
    \qquad
    L(x, u, v) = -c(x)\,u + \tfrac12 (v - V(x))^2,

with trigonometric polynomials ``c`` (the u-coupling) and ``V`` (the drift):

========================  ===============  ==============
family                    c(x)             V(x)
========================  ===============  ==============
E1                        lambda           V
E2                        f                0
DiscountedQuadratic       lambda           0
ClassicalQuadratic        0                0
========================  ===============  ==============

``Custom`` models carry plain callbacks and pay for a numerical Legendre
transform.  All callables accept and return numpy arrays.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, ModelError

TWO_PI = 2.0 * math.pi


class ModelKind(str, enum.Enum):
    E1 = "E1"
    E2 = "E2"
    DISCOUNTED = "DiscountedQuadratic"
    CLASSICAL = "ClassicalQuadratic"
    CUSTOM = "Custom"


class UMonotonicity(str, enum.Enum):
    NONDECREASING = "nondecreasing"
    LIPSCHITZ = "lipschitz"


# ----------------------------------------------------------------------------
# trigonometric polynomials
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """``a0 + sum_k a_k cos(k w x) + b_k sin(k w x)`` with ``w = 2 pi / period``."""

    a0: float = 0.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()
    period: float = TWO_PI

    def __post_init__(self):
        k = max(len(self.cos), len(self.sin))
        object.__setattr__(self, "cos", tuple(float(c) for c in self.cos) + (0.0,) * (k - len(self.cos)))
        object.__setattr__(self, "sin", tuple(float(s) for s in self.sin) + (0.0,) * (k - len(self.sin)))
        object.__setattr__(self, "a0", float(self.a0))
        if not self.period > 0:
            raise ConfigurationError("trigonometric polynomial needs a positive period")

    @property
    def omega(self) -> float:
        return TWO_PI / self.period

    @property
    def degree(self) -> int:
        return len(self.cos)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.a0)
        w = self.omega
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            if a:
                out = out + a * np.cos(k * w * x)
            if b:
                out = out + b * np.sin(k * w * x)
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        w = self.omega
        for k, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            if a:
                out = out - a * k * w * np.sin(k * w * x)
            if b:
                out = out + b * k * w * np.cos(k * w * x)
        return out

    def is_zero(self) -> bool:
        return self.a0 == 0.0 and not any(self.cos) and not any(self.sin)

    def scaled(self, s: float) -> "TrigPoly":
        return TrigPoly(s * self.a0, tuple(s * c for c in self.cos), tuple(s * c for c in self.sin), self.period)

    def sample(self, n: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        xs = np.arange(n) * (self.period / n)
        return xs, self(xs)

    def max(self) -> float:
        return float(self.sample()[1].max())

    def min(self) -> float:
        return float(self.sample()[1].min())

    def max_abs(self) -> float:
        return float(np.abs(self.sample()[1]).max())

    def zeros(self, n_scan: int = 4096) -> list[float]:
        """Simple zeros on ``[0, period)`` located by sign scan and Brent refinement."""
        xs = np.arange(n_scan + 1) * (self.period / n_scan)
        ys = self(xs)
        roots = []
        for i in range(n_scan):
            if ys[i] == 0.0:
                roots.append(float(xs[i]))
            elif ys[i] * ys[i + 1] < 0:
                roots.append(float(brentq(lambda t: float(self(t)), xs[i], xs[i + 1], xtol=1e-15)))
        return sorted({round(r % self.period, 13) for r in roots})

    def arrays(self) -> tuple[float, np.ndarray, np.ndarray, float]:
        """Coefficients packed for the compiled kernels."""
        return self.a0, np.array(self.cos, dtype=float), np.array(self.sin, dtype=float), self.omega

    def to_json(self):
        out = [self.a0]
        for a, b in zip(self.cos, self.sin):
            out += [a, b]
        return out

    @classmethod
    def parse(cls, obj, period: float) -> "TrigPoly":
        """Accepts ``"sin"``, ``"one_minus_cos"``, ``"zero"``, a flat list
        ``[a0, a1, b1, a2, b2, ...]`` or a dict ``{"a0", "cos", "sin"}``."""
        if isinstance(obj, TrigPoly):
            return replace(obj, period=period)
        if obj is None or obj == "zero":
            return cls(0.0, (), (), period)
        if obj == "sin":
            return cls(0.0, (0.0,), (1.0,), period)
        if obj == "one_minus_cos":
            return cls(1.0, (-1.0,), (0.0,), period)
        if isinstance(obj, dict):
            return cls(obj.get("a0", 0.0), tuple(obj.get("cos", ())), tuple(obj.get("sin", ())), period)
        if isinstance(obj, (list, tuple)) and len(obj) >= 1:
            vals = [float(v) for v in obj]
            rest = vals[1:]
            if len(rest) % 2:
                rest.append(0.0)
            return cls(vals[0], tuple(rest[0::2]), tuple(rest[1::2]), period)
        raise ConfigurationError(f"cannot interpret trigonometric polynomial {obj!r}")


# ----------------------------------------------------------------------------
# model specification
# ----------------------------------------------------------------------------

Callback = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """An immutable contact Hamiltonian on the circle ``R / period Z``.

    For the built-in families ``coupling`` and ``drift`` hold ``c`` and ``V``.
    Custom models leave them ``None`` and supply callbacks instead.
    """

    kind: ModelKind
    period: float
    lam: float
    coupling: TrigPoly | None = None
    drift: TrigPoly | None = None
    u_monotonicity: UMonotonicity = UMonotonicity.NONDECREASING
    H: Callback | None = field(default=None, compare=False, repr=False)
    dH_dx: Callback | None = field(default=None, compare=False, repr=False)
    dH_du: Callback | None = field(default=None, compare=False, repr=False)
    dH_dp: Callback | None = field(default=None, compare=False, repr=False)
    d2H_dp2: Callback | None = field(default=None, compare=False, repr=False)
    speed: float | None = None
    label: str = ""

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ConfigurationError("period must be a positive finite number")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigurationError("lambda must be a finite non-negative number")
        if self.kind is ModelKind.CUSTOM:
            if self.H is None:
                raise ConfigurationError("Custom model needs an H callback")
        elif self.coupling is None or self.drift is None:
            raise ConfigurationError("built-in model needs coupling and drift polynomials")

    @property
    def is_affine(self) -> bool:
        """True for the built-in families (closed-form kernel available)."""
        return self.coupling is not None and self.drift is not None

    @property
    def name(self) -> str:
        return self.label or self.kind.value

    @property
    def v_max(self) -> float:
        """Speed bound used for reachability windows in the action schemes."""
        if self.speed is not None:
            return float(self.speed)
        if self.is_affine:
            return 3.0 + self.drift.max_abs()
        return 4.0

    def wrap(self, x):
        return np.mod(x, self.period)

    def descriptor(self) -> dict:
        """JSON-serializable descriptor (built-in families only)."""
        if not self.is_affine:
            raise ConfigurationError("Custom models have no JSON descriptor")
        if self.label.startswith("reflected("):
            base = replace(self, coupling=self.coupling.scaled(-1.0), drift=self.drift.scaled(-1.0),
                           u_monotonicity=UMonotonicity.NONDECREASING, speed=None, label="")
            return {**base.descriptor(), "reflected": True}
        out = {"kind": self.kind.value, "period": self.period, "lambda": self.lam}
        if self.kind is ModelKind.E1:
            out["V"] = self.drift.to_json()
        if self.kind is ModelKind.E2:
            out["f"] = self.coupling.to_json()
        if self.u_monotonicity is not UMonotonicity.NONDECREASING:
            out["u_monotonicity"] = self.u_monotonicity.value
        return out


def e1(lam: float = 1.0, V="sin", period: float = TWO_PI) -> ModelSpec:
    """``H = lam u + p^2/2 + p V(x)``."""
    drift = TrigPoly.parse(V, period)
    return ModelSpec(ModelKind.E1, period, lam, TrigPoly(lam, (), (), period), drift)


def e2(f="one_minus_cos", period: float = 1.0, lam: float | None = None) -> ModelSpec:
    """``H = p^2/2 + f(x) u``; lambda defaults to ``max f``."""
    coupling = TrigPoly.parse(f, period)
    if lam is None:
        lam = max(coupling.max(), 0.0)
    return ModelSpec(ModelKind.E2, period, float(lam), coupling, TrigPoly(0.0, (), (), period))


def discounted_quadratic(lam: float = 1.0, period: float = TWO_PI) -> ModelSpec:
    """``H = lam u + p^2/2``, i.e. running cost ``v^2/2`` with discount rate lam."""
    return ModelSpec(ModelKind.DISCOUNTED, period, lam, TrigPoly(lam, (), (), period), TrigPoly(0.0, (), (), period))


def classical_quadratic(period: float = TWO_PI) -> ModelSpec:
    """``H = p^2/2`` (no dependence on u)."""
    zero = TrigPoly(0.0, (), (), period)
    return ModelSpec(ModelKind.CLASSICAL, period, 0.0, zero, zero)


def custom(
    H: Callback,
    dH_dx: Callback | None = None,
    dH_du: Callback | None = None,
    dH_dp: Callback | None = None,
    *,
    period: float = TWO_PI,
    lam: float = 0.0,
    d2H_dp2: Callback | None = None,
    u_monotonicity: UMonotonicity | str = UMonotonicity.NONDECREASING,
    speed: float | None = None,
    label: str = "",
) -> ModelSpec:
    """Wrap user callbacks ``f(x, u, p)`` as a model.

    Missing partials fall back to central finite differences.
    """
    return ModelSpec(
        ModelKind.CUSTOM,
        period,
        lam,
        H=H,
        dH_dx=dH_dx,
        dH_du=dH_du,
        dH_dp=dH_dp,
        d2H_dp2=d2H_dp2,
        u_monotonicity=UMonotonicity(u_monotonicity),
        speed=speed,
        label=label,
    )


def reflected(model: ModelSpec) -> ModelSpec:
    """The model ``Hbar(x, u, p) = H(x, -u, -p)``.

    Its coupling is ``-c`` so it is only Lipschitz in u; the label records the
    reflection.
    """
    label = f"reflected({model.name})"
    if model.is_affine:
        return replace(
            model,
            coupling=model.coupling.scaled(-1.0),
            drift=model.drift.scaled(-1.0),
            u_monotonicity=UMonotonicity.LIPSCHITZ,
            label=label,
            speed=model.v_max,
        )

    def neg(cb, sx=1.0):
        if cb is None:
            return None
        return lambda x, u, p: sx * cb(x, -np.asarray(u), -np.asarray(p))

    return replace(
        model,
        H=neg(model.H),
        dH_dx=neg(model.dH_dx),
        dH_du=neg(model.dH_du, -1.0),
        dH_dp=neg(model.dH_dp, -1.0),
        d2H_dp2=neg(model.d2H_dp2),
        u_monotonicity=UMonotonicity.LIPSCHITZ,
        label=label,
    )


# ----------------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------------


def _arr(*vals):
    return [np.asarray(v, dtype=float) for v in vals]


def _scalar_out(result, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        if isinstance(result, tuple):
            return tuple(float(r) for r in result)
        return float(result)
    return result


_FD = 1e-6


def _custom_partial(model: ModelSpec, which: str, x, u, p):
    cb = {"x": model.dH_dx, "u": model.dH_du, "p": model.dH_dp}[which]
    if cb is not None:
        return np.asarray(cb(x, u, p), dtype=float)
    H = model.H
    h = _FD
    if which == "x":
        return (np.asarray(H(x + h, u, p)) - np.asarray(H(x - h, u, p))) / (2 * h)
    if which == "u":
        return (np.asarray(H(x, u + h, p)) - np.asarray(H(x, u - h, p))) / (2 * h)
    return (np.asarray(H(x, u, p + h)) - np.asarray(H(x, u, p - h))) / (2 * h)


def eval_H(model: ModelSpec, x, u, p):
    """``H(x, u, p)``; array arguments broadcast."""
    x, u, p = _arr(x, u, p)
    x = np.mod(x, model.period)
    if model.is_affine:
        out = model.coupling(x) * u + 0.5 * p * p + p * model.drift(x)
    else:
        if model.H is None:
            raise ConfigurationError("Custom model is missing its H callback")
        out = np.asarray(model.H(x, u, p), dtype=float) + 0.0 * (x + u + p)
    return _scalar_out(out, x, u, p)


def eval_H_partials(model: ModelSpec, x, u, p):
    """``(dH/dx, dH/du, dH/dp)`` at ``(x, u, p)``."""
    x, u, p = _arr(x, u, p)
    x = np.mod(x, model.period)
    if model.is_affine:
        c, V = model.coupling, model.drift
        hx = model.coupling.deriv(x) * u + p * V.deriv(x)
        hu = c(x) + 0.0 * (u + p)
        hp = p + V(x)
    else:
        zero = 0.0 * (x + u + p)
        hx = _custom_partial(model, "x", x, u, p) + zero
        hu = _custom_partial(model, "u", x, u, p) + zero
        hp = _custom_partial(model, "p", x, u, p) + zero
    return _scalar_out((hx, hu, hp), x, u, p)


def eval_d2H_dp2(model: ModelSpec, x, u, p):
    x, u, p = _arr(x, u, p)
    if model.is_affine:
        out = np.ones(np.broadcast(x, u, p).shape)
    elif model.d2H_dp2 is not None:
        out = np.asarray(model.d2H_dp2(x, u, p), dtype=float) + 0.0 * (x + u + p)
    else:
        h = 1e-4
        out = (model.H(x, u, p + h) - 2 * model.H(x, u, p) + model.H(x, u, p - h)) / (h * h)
    return _scalar_out(out, x, u, p)


def legendre_momentum(model: ModelSpec, x, u, v, max_expand: int = 60, n_bisect: int = 80):
    """Maximizer ``p*`` of ``p v - H(x, u, p)`` found by bracketing ``dH/dp = v``.

    Vectorized bracket expansion followed by bisection.  Raises ModelError when
    ``dH/dp`` never reaches ``v`` (H is not superlinear in p).
    """
    x, u, v = _arr(x, u, v)
    x, u, v = np.broadcast_arrays(x, u, v)
    if model.is_affine:
        return _scalar_out(v - model.drift(x), x, u, v)
    lo = np.full(x.shape, -1.0)
    hi = np.full(x.shape, 1.0)
    for _ in range(max_expand):
        bad_lo = _custom_partial(model, "p", x, u, lo) > v
        bad_hi = _custom_partial(model, "p", x, u, hi) < v
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, 2.0 * lo, lo)
        hi = np.where(bad_hi, 2.0 * hi, hi)
    else:
        raise ModelError("Legendre transform failed to bracket the maximizer (H not superlinear in p?)")
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        up = _custom_partial(model, "p", x, u, mid) < v
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return _scalar_out(0.5 * (lo + hi), x, u, v)


def eval_L(model: ModelSpec, x, u, v):
    """Lagrangian ``L(x, u, v) = sup_p (p v - H(x, u, p))``."""
    x, u, v = _arr(x, u, v)
    x = np.mod(x, model.period)
    if model.is_affine:
        d = v - model.drift(x)
        out = -model.coupling(x) * u + 0.5 * d * d
    else:
        p = np.asarray(legendre_momentum(model, x, u, v))
        out = p * v - np.asarray(eval_H(model, x, u, p))
    return _scalar_out(out, x, u, v)


def momentum(model: ModelSpec, x, u, v):
    """``p = dL/dv(x, u, v)``, the momentum lifting a velocity."""
    return legendre_momentum(model, np.mod(x, model.period), u, v)


def velocity(model: ModelSpec, x, u, p):
    """``v = dH/dp(x, u, p)``."""
    return eval_H_partials(model, x, u, p)[2]


# ----------------------------------------------------------------------------
# assumption audit
# ----------------------------------------------------------------------------


@dataclass
class AuditReport:
    """Sampled check of convexity, superlinearity and the u-monotonicity bound."""

    model: str
    n_samples: int
    min_d2H_dp2: float
    dH_du_min: float
    dH_du_max: float
    lam: float
    mode: str
    required_lambda: float
    superlinearity_ratio: float
    convex: bool
    superlinear: bool
    u_bound_ok: bool
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.convex and self.superlinear and self.u_bound_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def audit_assumptions(
    model: ModelSpec,
    sample_box: tuple[tuple[float, float], tuple[float, float], tuple[float, float]] | None = None,
    n_samples: int = 2000,
    seed: int = 0,
) -> AuditReport:
    """Sample the box ``x_range x u_range x p_range`` and report the structural checks.

    Nothing is raised: a failed check only shows up in the report.
    """
    if sample_box is None:
        sample_box = ((0.0, model.period), (-2.0, 2.0), (-3.0, 3.0))
    (x0, x1), (u0, u1), (p0, p1) = sample_box
    for a, b in sample_box:
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ConfigurationError("sample box must be finite")
    rng = np.random.default_rng(seed)
    x = rng.uniform(x0, x1, n_samples)
    u = rng.uniform(u0, u1, n_samples)
    p = rng.uniform(p0, p1, n_samples)
    curv = np.asarray(eval_d2H_dp2(model, x, u, p))
    _, hu, _ = eval_H_partials(model, x, u, p)
    hu = np.asarray(hu)
    # scan x finely for the extreme coupling as well
    if model.is_affine:
        c_vals = model.coupling.sample()[1]
        hu_min = float(min(hu.min(), c_vals.min()))
        hu_max = float(max(hu.max(), c_vals.max()))
    else:
        hu_min, hu_max = float(hu.min()), float(hu.max())

    edge = max(abs(p0), abs(p1))
    xs = rng.uniform(x0, x1, 64)
    us = rng.uniform(u0, u1, 64)
    ratios = []
    for scale in (1.0, 10.0, 100.0):
        big = edge * scale
        hp = np.asarray(eval_H(model, xs, us, np.full(64, big)))
        hm = np.asarray(eval_H(model, xs, us, np.full(64, -big)))
        ratios.append(float(min(hp.min(), hm.min()) / big))
    superlinear = ratios[2] > ratios[1] > ratios[0] and ratios[2] > 0
    msgs = []
    convex = bool(curv.min() > 0)
    if not convex:
        msgs.append("d2H/dp2 is not positive on the sample box")
    if not superlinear:
        msgs.append("H/|p| does not grow along the momentum axis")
    tol = 1e-12
    if model.u_monotonicity is UMonotonicity.NONDECREASING:
        ok = hu_min >= -tol and hu_max <= model.lam + tol
        required = max(hu_max, 0.0)
        if hu_min < -tol:
            msgs.append(f"dH/du takes negative values (min {hu_min:.6g}); use lipschitz mode")
    else:
        required = max(abs(hu_min), abs(hu_max))
        ok = required <= model.lam + tol
    if required > model.lam + tol:
        msgs.append(f"lambda must be >= {required:.6g} (got {model.lam:.6g})")
    return AuditReport(
        model=model.name,
        n_samples=n_samples,
        min_d2H_dp2=float(curv.min()),
        dH_du_min=hu_min,
        dH_du_max=hu_max,
        lam=model.lam,
        mode=model.u_monotonicity.value,
        required_lambda=float(required),
        superlinearity_ratio=ratios[-1],
        convex=convex,
        superlinear=bool(superlinear),
        u_bound_ok=bool(ok),
        messages=msgs,
    )


# ----------------------------------------------------------------------------
# descriptors
# ----------------------------------------------------------------------------

_KIND_ALIASES = {
    "e1": ModelKind.E1,
    "e2": ModelKind.E2,
    "discountedquadratic": ModelKind.DISCOUNTED,
    "discounted": ModelKind.DISCOUNTED,
    "classicalquadratic": ModelKind.CLASSICAL,
    "classical": ModelKind.CLASSICAL,
}


def from_descriptor(desc: dict) -> ModelSpec:
    """Build a model from ``{"kind", "period", "lambda", "V", "f"}``.

    ``"reflected": true`` applies :func:`reflected` to the result.
    """
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigurationError("model descriptor must be an object with a 'kind' entry")
    kind = _KIND_ALIASES.get(str(desc["kind"]).lower())
    if kind is None:
        raise ConfigurationError(f"unknown model kind {desc['kind']!r}")
    known = {"kind", "period", "lambda", "V", "f", "u_monotonicity", "reflected"}
    extra = set(desc) - known
    if extra:
        raise ConfigurationError(f"unknown descriptor entries: {sorted(extra)}")
    try:
        lam = desc.get("lambda")
        lam = None if lam is None else float(lam)
        period = desc.get("period")
        period = None if period is None else float(period)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad numeric entry in descriptor: {exc}") from exc
    if kind is ModelKind.E1:
        m = e1(1.0 if lam is None else lam, desc.get("V", "sin"), TWO_PI if period is None else period)
    elif kind is ModelKind.E2:
        m = e2(desc.get("f", "one_minus_cos"), 1.0 if period is None else period, lam)
    elif kind is ModelKind.DISCOUNTED:
        m = discounted_quadratic(1.0 if lam is None else lam, TWO_PI if period is None else period)
    else:
        m = classical_quadratic(TWO_PI if period is None else period)
        if lam is not None:
            m = replace(m, lam=lam)
    if "u_monotonicity" in desc:
        m = replace(m, u_monotonicity=UMonotonicity(desc["u_monotonicity"]))
    if desc.get("reflected"):
        m = reflected(m)
    return m


def load_model(source) -> ModelSpec:
    """Load a model from a descriptor dict, a JSON string, a path, or a kind name."""
    if isinstance(source, ModelSpec):
        return source
    if isinstance(source, dict):
        return from_descriptor(source)
    text = str(source)
    if text.lower() in _KIND_ALIASES:
        return from_descriptor({"kind": text})
    path = Path(text)
    if path.exists():
        try:
            return from_descriptor(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return from_descriptor(json.loads(text))
    except json.JSONDecodeError:
        raise ConfigurationError(f"cannot load model from {text!r}") from None


def shorter_arc(x0, x, period: float):
    """Signed displacement from x0 to x along the shorter arc, in ``[-P/2, P/2)``."""
    d = np.mod(np.asarray(x, dtype=float) - np.asarray(x0, dtype=float) + 0.5 * period, period) - 0.5 * period
    return d

