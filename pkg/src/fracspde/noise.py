"""Reproducible driving noise.

Wiener increments are drawn counter-based: mode row (replicate r, mode k)
of an experiment seeded with ``seed`` reads uniforms from
``Philox(key=[seed, 0], counter=[j0, 0, r, k])`` and maps them through the
normal inverse CDF.  Each double consumes exactly one Philox output, so the
j-th increment of a row is addressable directly (any sub-block can be
regenerated without iterating the rest) and scheduling order can never
change a result.

The spatial basis for cylindrical (space-time white) noise is the real
Fourier basis of L2 on the torus, orthonormal for the grid-cell inner
product, enumerated by |m|^2 then lexicographically; each non-self-paired
wavevector contributes a cosine and a sine mode.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .frac_time import TimeGrid
from .grid_spectral import Field, TorusGrid

__all__ = [
    "NoisePath",
    "NoiseBasis",
    "sample_noise",
    "increment_block",
    "white_noise_stack",
    "fourier_mode_table",
    "basis_field",
    "write_noise",
    "read_noise",
]

_U64 = np.uint64
_MIN_UNIFORM = 2.0**-54  # ndtri(0) guard; hit with probability 2^-53 per draw


def _row_uniforms(seed: int, replicate: int, k: int, j0: int, count: int):
    """Uniforms j0 .. j0+count-1 of row (replicate, k), counter-addressed."""
    if count <= 0:
        return np.empty(0)
    block0 = j0 >> 2
    offset = j0 & 3
    bg = np.random.Philox(
        key=np.array([seed, 0], dtype=_U64),
        counter=np.array([block0, 0, replicate, k], dtype=_U64),
    )
    raw = np.random.Generator(bg).random(offset + count)
    return raw[offset : offset + count]


def _block_normals(seed, replicate, k, j0, count, dt):
    u = np.maximum(_row_uniforms(seed, replicate, k, j0, count), _MIN_UNIFORM)
    return ndtri(u) * math.sqrt(dt)


@dataclass
class NoisePath:
    """Seeded family of independent Wiener increment rows, one per mode."""

    seed: int
    grid: TimeGrid
    n_modes: int
    replicate: int = 0
    increments: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes!r}")
        if self.replicate < 0:
            raise ValueError("replicate must be >= 0")
        rows = [
            _block_normals(
                self.seed, self.replicate, k, 0, self.grid.n_steps, self.grid.dt
            )
            for k in range(self.n_modes)
        ]
        self.increments = np.stack(rows, axis=0)

    def cumulative(self) -> np.ndarray:
        """Wiener paths W^k at the grid nodes, shape (K, n_steps + 1)."""
        w = np.zeros((self.n_modes, self.grid.n_steps + 1))
        np.cumsum(self.increments, axis=1, out=w[:, 1:])
        return w


def sample_noise(
    seed: int, time_grid: TimeGrid, n_modes: int, replicate: int = 0
) -> NoisePath:
    return NoisePath(seed=seed, grid=time_grid, n_modes=n_modes, replicate=replicate)


def increment_block(
    seed: int,
    time_grid: TimeGrid,
    k: int,
    j0: int,
    j1: int,
    replicate: int = 0,
) -> np.ndarray:
    """Increments j0 .. j1-1 of mode k without generating the rest of the row."""
    if not (0 <= j0 <= j1 <= time_grid.n_steps):
        raise ValueError(f"block [{j0}, {j1}) outside 0..{time_grid.n_steps}")
    return _block_normals(seed, replicate, k, j0, j1 - j0, time_grid.dt)


# -- real Fourier basis -------------------------------------------------------


def _negate_mode(m: tuple, n: int) -> tuple:
    # lattice negation on {-n/2, ..., n/2 - 1}: -(-n/2) aliases to -n/2
    return tuple(-c if c != -n // 2 else c for c in m)


def fourier_mode_table(grid: TorusGrid):
    """Frozen enumeration of the real Fourier basis.

    Returns a list of (kind, m) with kind in {"const", "cos", "sin", "nyq"},
    ordered by |m|^2 then lexicographically, cosine before sine.  The total
    count equals the number of grid points.
    """
    n = grid.n_per_axis
    axis = list(range(0, n // 2)) + list(range(-(n // 2), 0))
    table = []
    seen = set()
    entries = []
    import itertools

    for m in itertools.product(axis, repeat=grid.dim):
        if m in seen:
            continue
        neg = _negate_mode(m, n)
        if all(c == 0 for c in m):
            entries.append((0.0, m, "zero"))
            seen.add(m)
        elif neg == m:
            entries.append((float(sum(c * c for c in m)), m, "self"))
            seen.add(m)
        else:
            rep = max(m, neg)
            entries.append((float(sum(c * c for c in rep)), rep, "pair"))
            seen.add(m)
            seen.add(neg)
    entries.sort(key=lambda e: (e[0], e[1]))
    for _, m, tag in entries:
        if tag == "zero":
            table.append(("const", m))
        elif tag == "self":
            table.append(("nyq", m))
        else:
            table.append(("cos", m))
            table.append(("sin", m))
    return table


def basis_field(grid: TorusGrid, kind: str, m: tuple) -> Field:
    """One orthonormal real basis function (unit discrete L2(torus) norm)."""
    vol = grid.side_length**grid.dim
    if kind == "const":
        return Field(grid, np.full(grid.shape, 1.0 / math.sqrt(vol)))
    phase = np.zeros(grid.shape)
    coords = grid.meshgrid()
    for c, x in zip(m, coords):
        phase += (2.0 * math.pi * c / grid.side_length) * x
    if kind == "cos":
        return Field(grid, math.sqrt(2.0 / vol) * np.cos(phase))
    if kind == "sin":
        return Field(grid, math.sqrt(2.0 / vol) * np.sin(phase))
    if kind == "nyq":
        return Field(grid, np.cos(phase) / math.sqrt(vol))
    raise ValueError(f"unknown basis kind {kind!r}")


@dataclass
class NoiseBasis:
    """Spatial basis and per-mode weights for the driving noise."""

    kind: str
    grid: TorusGrid
    n_modes: int
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("fourier_white", "diagonal_colored"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if not (1 <= self.n_modes <= self.grid.n_points):
            raise ValueError(
                f"n_modes must lie in [1, {self.grid.n_points}], got {self.n_modes!r}"
            )
        if self.kind == "fourier_white":
            if self.weights is not None:
                raise ValueError("fourier_white carries unit weights")
            self.weights = np.ones(self.n_modes)
        else:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != (self.n_modes,):
                raise ValueError("weights must have one entry per mode")
            if not np.all(np.isfinite(self.weights)):
                raise ValueError("weights must be finite")

    def fields(self):
        table = fourier_mode_table(self.grid)[: self.n_modes]
        return [
            Field(
                self.grid,
                w * basis_field(self.grid, kind, m).values,
            )
            for w, (kind, m) in zip(self.weights, table)
        ]


def white_noise_stack(basis: NoiseBasis, h_field: Field):
    """The stack {h * eta_k}: spatial factor of cylindrical noise forcing."""
    if h_field.grid != basis.grid:
        raise ValueError("h_field must live on the basis grid")
    return [Field(basis.grid, h_field.values * eta.values) for eta in basis.fields()]


# -- flat binary interchange ---------------------------------------------------
#
# layout (little endian): int64 seed, int64 replicate, int64 n_modes,
# int64 n_steps, float64 t_end, then n_modes * n_steps float64 increments
# in row-major order.

_NOISE_HEADER = struct.Struct("<qqqqd")


def write_noise(path_obj: NoisePath, path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _NOISE_HEADER.pack(
                path_obj.seed,
                path_obj.replicate,
                path_obj.n_modes,
                path_obj.grid.n_steps,
                path_obj.grid.t_end,
            )
        )
        fh.write(np.ascontiguousarray(path_obj.increments, dtype="<f8").tobytes())


def read_noise(path) -> NoisePath:
    with open(path, "rb") as fh:
        seed, replicate, n_modes, n_steps, t_end = _NOISE_HEADER.unpack(
            fh.read(_NOISE_HEADER.size)
        )
        data = np.frombuffer(fh.read(8 * n_modes * n_steps), dtype="<f8")
    if data.size != n_modes * n_steps:
        raise ValueError(f"truncated noise file {path}")
    out = NoisePath(
        seed=seed, grid=TimeGrid(t_end, n_steps), n_modes=n_modes, replicate=replicate
    )
    restored = data.reshape(n_modes, n_steps)
    if not np.array_equal(restored, out.increments):
        # file wins: it may come from another machine or generator version
        out.increments = restored.copy()
    return out
