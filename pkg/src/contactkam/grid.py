"""Uniform periodic grids and scalar fields on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Grid:
    """``n`` equally spaced nodes ``x_i = i * period / n`` on the circle."""

    n: int
    period: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16:
            raise ConfigurationError(f"grid needs at least 16 nodes (got {self.n})")
        if not self.period > 0:
            raise ConfigurationError("grid period must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "period", float(self.period))

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.dx

    def nearest(self, x) -> np.ndarray:
        """Index of the nearest node (ties go to the smaller index)."""
        q = np.mod(np.asarray(x, dtype=float), self.period) / self.dx
        return np.mod(np.floor(q + 0.5).astype(np.int64), self.n)

    def interp(self, values: np.ndarray, x) -> np.ndarray:
        """Periodic linear interpolation of node values (last axis) at ``x``."""
        q = np.mod(np.asarray(x, dtype=float), self.period) / self.dx
        k = np.floor(q).astype(np.int64)
        f = q - k
        k0 = np.mod(k, self.n)
        k1 = np.mod(k + 1, self.n)
        values = np.asarray(values)
        return (1.0 - f) * values[..., k0] + f * values[..., k1]

    def arc(self, a, b) -> np.ndarray:
        """Unsigned shorter-arc distance."""
        d = np.mod(np.asarray(b, dtype=float) - np.asarray(a, dtype=float), self.period)
        return np.minimum(d, self.period - d)


@dataclass(frozen=True)
class ScalarField:
    """Node values of a function on a grid, tagged with a provenance string."""

    grid: Grid
    values: np.ndarray
    meta: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ConfigurationError(f"field has shape {v.shape}, expected ({self.grid.n},)")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return self.grid.interp(self.values, x)

    @classmethod
    def constant(cls, grid: Grid, c: float, meta: str = "") -> "ScalarField":
        return cls(grid, np.full(grid.n, float(c)), meta or f"constant {c:g}")

    @classmethod
    def from_function(cls, grid: Grid, fn, meta: str = "") -> "ScalarField":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float), meta)

    def with_values(self, values, meta: str | None = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.meta if meta is None else meta)

    def sup_distance(self, other: "ScalarField") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def to_csv(self) -> str:
        lines = ["x,value"]
        lines += [f"{x:.12g},{v:.12g}" for x, v in zip(self.grid.nodes, self.values)]
        return "\n".join(lines) + "\n"
