"""Uniform periodic grids truncating R^N and real fields sampled on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InputError, ParameterDomainError


@dataclass(frozen=True)
class Grid:
    """Periodic lattice on the box [-L, L)^dim with M points per axis.

    Nodes sit at ``x_j = -L + j*h`` with ``h = 2L/M``; for even M the origin
    is a node.  Discrete frequencies are ``xi_k = pi*k/L``.
    """

    dim: int
    L: float
    M: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterDomainError(f"dim must be 1 or 2, got {self.dim}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ParameterDomainError(f"half extent L must be positive, got {self.L}")
        if int(self.M) != self.M or self.M < 16 or self.M % 2:
            raise ParameterDomainError(f"M must be an even integer >= 16, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.dim

    @property
    def size(self) -> int:
        return self.M**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates along each axis."""
        return -self.L + self.h * np.arange(self.M)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape`` (``indexing='ij'``)."""
        if self.dim == 1:
            return (self.x,)
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """All nodes as an array of shape ``(size, dim)`` in lexicographic order."""
        return np.stack([c.ravel() for c in self.coords], axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def rfreq(self) -> tuple[np.ndarray, ...]:
        """Angular frequencies broadcastable against an ``rfftn`` spectrum."""
        full = 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)
        half = 2.0 * np.pi * np.fft.rfftfreq(self.M, d=self.h)
        if self.dim == 1:
            return (half,)
        return (full[:, None], half[None, :])

    @cached_property
    def abs_xi(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.rfreq))

    def symbol(self, s: float) -> np.ndarray:
        """|xi|^{2s} on the half spectrum, with the zero mode mapped to 0."""
        out = np.zeros_like(self.abs_xi)
        nz = self.abs_xi > 0
        out[nz] = self.abs_xi[nz] ** (2.0 * s)
        return out

    def index_of(self, point) -> tuple[int, ...]:
        """Index of the node nearest to ``point`` (no wrap-around)."""
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint((pt + self.L) / self.h).astype(int)
        return tuple(int(np.clip(i, 0, self.M - 1)) for i in idx)

    def contains(self, point) -> bool:
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        return pt.shape == (self.dim,) and bool(np.all((pt >= -self.L) & (pt <= self.L)))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.L, self.M * factor)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "L": self.L, "M": self.M}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(int(d["dim"]), float(d["L"]), int(d["M"]))

    @classmethod
    def with_spacing(cls, dim: int, L_min: float, h_max: float) -> "Grid":
        """Smallest power-of-two grid with spacing <= h_max covering [-L_min, L_min)."""
        M = 16
        while 2.0 * L_min / M > h_max:
            M *= 2
        return cls(dim, L_min, M)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a :class:`Grid`.

    ``values`` has shape ``grid.shape``; C order is the lexicographic order of
    ``grid.points``.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise InputError(f"field has {v.size} values, grid needs {self.grid.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise InputError("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(*grid.coords))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def inner(self, other: "Field") -> float:
        return float(np.sum(self.values * other.values) * self.grid.cell_volume)

    def norm(self, q: float = 2.0) -> float:
        return float((np.sum(np.abs(self.values) ** q) * self.grid.cell_volume) ** (1.0 / q))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def boundary_max(self) -> float:
        """Largest |value| on the outermost ring of nodes."""
        v = np.abs(self.values)
        if self.grid.dim == 1:
            return float(max(v[0], v[-1]))
        return float(max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max()))

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, c):
        return self.with_values(self.values * _vals(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(x):
    return x.values if isinstance(x, Field) else x
