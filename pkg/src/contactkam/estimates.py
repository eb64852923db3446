"""Tolerance-tagged point sets in the extended phase space."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .flow import ContactState


class SetKind(str, enum.Enum):
    SIGMA = "Sigma"
    COINCIDENCE = "Coincidence"
    AUBRY = "Aubry"
    STRONGLY_STATIC = "StronglyStatic"
    MANE = "Mane"
    OMEGA_LIMIT = "OmegaLimit"


def circle_gap(a, b, period: float):
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), period)
    return np.minimum(d, period - d)


def _dedupe(x, u, p, defect, tol, period):
    if len(x) == 0:
        return x, u, p, defect
    keys = np.stack([np.round(np.mod(x, period) / tol), np.round(u / tol), np.round(p / tol)], axis=1)
    # points on either side of the seam share a key
    nseam = np.round(period / tol)
    keys[:, 0] = np.where(keys[:, 0] >= nseam, 0, keys[:, 0])
    _, idx = np.unique(keys, axis=0, return_index=True)
    idx = np.sort(idx)
    return x[idx], u[idx], p[idx], defect[idx]


@dataclass(frozen=True)
class SetEstimate:
    """A finite sample of a set in ``(x, u, p)`` space.

    Points closer than ``tol`` (per coordinate) are merged.  ``defect`` holds
    the per-point verification defect (0 when not applicable).
    """

    kind: SetKind
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    tol: float
    provenance: str
    period: float
    defect: np.ndarray | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.mod(np.asarray(self.x, dtype=float).ravel(), self.period)
        u = np.asarray(self.u, dtype=float).ravel()
        p = np.asarray(self.p, dtype=float).ravel()
        d = np.zeros_like(x) if self.defect is None else np.asarray(self.defect, dtype=float).ravel()
        x, u, p, d = _dedupe(x, u, p, d, max(self.tol, 1e-12), self.period)
        for name, val in (("x", x), ("u", u), ("p", p), ("defect", d)):
            val = np.array(val)
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def empty(cls, kind: SetKind, tol: float, provenance: str, period: float) -> "SetEstimate":
        e = np.zeros(0)
        return cls(kind, e, e, e, tol, provenance, period)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def points(self) -> list[ContactState]:
        return [ContactState(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.u, self.p)]

    def node_set(self, grid) -> set[int]:
        """Nearest-node indices of the projected points."""
        return set(int(i) for i in grid.nearest(self.x))

    def max_gap(self) -> float:
        """Largest arc between consecutive projected points (the full period if empty)."""
        if len(self.x) == 0:
            return self.period
        xs = np.sort(np.mod(self.x, self.period))
        gaps = np.diff(np.concatenate([xs, [xs[0] + self.period]]))
        return float(gaps.max())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u", "p", "kind", "defect"])
        order = np.lexsort((self.p, self.u, self.x))
        for i in order:
            w.writerow([f"{self.x[i]:.12g}", f"{self.u[i]:.12g}", f"{self.p[i]:.12g}", self.kind.value,
                        f"{self.defect[i]:.12g}"])
        return buf.getvalue()


def projected_hausdorff(a, b, period: float) -> float:
    """Symmetric Hausdorff distance between projected point sets on the circle."""
    xa = np.mod(np.asarray(getattr(a, "x", a), dtype=float), period)
    xb = np.mod(np.asarray(getattr(b, "x", b), dtype=float), period)
    if xa.size == 0 and xb.size == 0:
        return 0.0
    if xa.size == 0 or xb.size == 0:
        return float("inf")
    return max(_directed(xa, xb, period), _directed(xb, xa, period))


def _directed(xa, xb, period):
    """``max_{a} min_{b} |a - b|`` on the circle using a sorted search."""
    xs = np.sort(xb)
    idx = np.searchsorted(xs, xa)
    lo = xs[(idx - 1) % xs.size]
    hi = xs[idx % xs.size]
    d = np.minimum(circle_gap(xa, lo, period), circle_gap(xa, hi, period))
    return float(d.max())


def projected_excess(a, b, period: float) -> float:
    """Directed distance ``sup_{x in a} dist(x, b)`` (containment defect of a in b)."""
    xa = np.mod(np.asarray(getattr(a, "x", a), dtype=float), period)
    xb = np.mod(np.asarray(getattr(b, "x", b), dtype=float), period)
    if xa.size == 0:
        return 0.0
    if xb.size == 0:
        return float("inf")
    return _directed(xa, xb, period)
