"""Periodic torus discretization and spectral operators.

Fields live on the uniform grid of [0, L)^d with n points per axis; their
Fourier coefficients are taken in the convention

    u(x) = sum_m  coeff[m] * exp(i xi_m . x),      xi_m = 2 pi m / L,

so ``coeff = fftn(values) / n^d``.  All operators of interest (fractional
Laplacian powers, Bessel potentials, the diffusion kernels) are Fourier
multipliers, which the periodic substitute evaluates exactly per mode.

The discrete L_p norm uses grid-cell (midpoint) quadrature,
``(sum |u|^p * (L/n)^d)^(1/p)``.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TorusGrid",
    "Field",
    "SpectralField",
    "fractional_laplacian",
    "bessel_norm",
    "bessel_norm_l2seq",
    "write_field",
    "read_field",
    "write_field_csv",
    "read_field_csv",
]

_MEAN_TOL = 1e-10


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [0, L)^d."""

    dim: int
    n_per_axis: int
    side_length: float = 2.0 * math.pi

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if self.n_per_axis < 8 or self.n_per_axis % 2 != 0:
            raise ValueError(
                f"n_per_axis must be an even integer >= 8, got {self.n_per_axis!r}"
            )
        if not (self.side_length > 0.0 and math.isfinite(self.side_length)):
            raise ValueError(f"side_length must be positive, got {self.side_length!r}")

    @property
    def shape(self) -> tuple:
        return (self.n_per_axis,) * self.dim

    @property
    def n_points(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def dx(self) -> float:
        return self.side_length / self.n_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def axis_coordinates(self) -> np.ndarray:
        return np.arange(self.n_per_axis) * self.dx

    def meshgrid(self) -> tuple:
        x = self.axis_coordinates()
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def mode_integers(self) -> np.ndarray:
        """Integer wavevector per axis in FFT order: 0..n/2-1, -n/2..-1."""
        n = self.n_per_axis
        return np.fft.fftfreq(n, d=1.0 / n)

    def xi_sq(self) -> np.ndarray:
        """|xi|^2 over the full FFT-ordered mode lattice."""
        m = self.mode_integers() * (2.0 * math.pi / self.side_length)
        grids = np.meshgrid(*([m] * self.dim), indexing="ij")
        out = np.zeros(self.shape)
        for g in grids:
            out += g**2
        return out

    def min_image_radius(self) -> np.ndarray:
        """Distance to the origin with periodic wraparound."""
        x = self.axis_coordinates()
        x = np.minimum(x, self.side_length - x)
        grids = np.meshgrid(*([x] * self.dim), indexing="ij")
        out = np.zeros(self.shape)
        for g in grids:
            out += g**2
        return np.sqrt(out)

    def refined(self, factor: int = 2) -> "TorusGrid":
        return TorusGrid(self.dim, self.n_per_axis * factor, self.side_length)


@dataclass
class Field:
    """Real-valued grid function."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"{self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "Field":
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64))

    def to_spectral(self) -> "SpectralField":
        coeffs = np.fft.fftn(self.values) / self.grid.n_points
        return SpectralField(self.grid, coeffs)

    def lp_norm(self, p: float) -> float:
        return float(
            (np.sum(np.abs(self.values) ** p) * self.grid.cell_volume) ** (1.0 / p)
        )

    def cell_sum(self) -> float:
        """Integral over the torus by cell quadrature."""
        return float(np.sum(self.values) * self.grid.cell_volume)


@dataclass
class SpectralField:
    """Fourier coefficients of a (usually real) grid function."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} does not match grid "
                f"{self.grid.shape}"
            )

    def to_field(self) -> Field:
        values = np.fft.ifftn(self.coeffs * self.grid.n_points)
        return Field(self.grid, values.real)

    def hermitian_defect(self) -> float:
        """Max |c(-m) - conj(c(m))|; zero when the field is real."""
        flipped = self.coeffs
        for ax in range(self.grid.dim):
            flipped = np.flip(np.roll(flipped, -1, axis=ax), axis=ax)
        return float(np.max(np.abs(flipped - np.conj(self.coeffs))))


def _apply_multiplier(field: Field, multiplier: np.ndarray) -> Field:
    spec = field.to_spectral()
    spec.coeffs *= multiplier
    return spec.to_field()


def fractional_laplacian(field: Field, s: float) -> Field:
    """(-Laplacian)^(s/2): multiply mode xi by |xi|^s.

    The zero mode is annihilated for s > 0; for s < 0 the input must have
    (numerically) vanishing mean, else the power is not invertible.
    """
    if not (-2.0 < s <= 2.0):
        raise ValueError(f"s must lie in (-2, 2], got {s!r}")
    if s == 0.0:
        return Field(field.grid, field.values.copy())
    xi_sq = field.grid.xi_sq()
    mult = np.zeros_like(xi_sq)
    nonzero = xi_sq > 0.0
    mult[nonzero] = xi_sq[nonzero] ** (s / 2.0)
    if s < 0.0:
        mean = abs(float(np.mean(field.values)))
        scale = max(1.0, float(np.max(np.abs(field.values))))
        if mean > _MEAN_TOL * scale:
            raise ValueError(
                f"negative power {s} needs a mean-zero field; "
                f"relative mean is {mean / scale:.3e}"
            )
    return _apply_multiplier(field, mult)


def bessel_multiplier(grid: TorusGrid, gamma: float) -> np.ndarray:
    return (1.0 + grid.xi_sq()) ** (gamma / 2.0)


def bessel_norm(field: Field, gamma: float, p: float) -> float:
    """Discrete H^gamma_p norm: ||(1 - Laplacian)^(gamma/2) u||_{L_p}."""
    if p < 2.0:
        raise ValueError(f"p must be >= 2, got {p!r}")
    smoothed = _apply_multiplier(field, bessel_multiplier(field.grid, gamma))
    return smoothed.lp_norm(p)


def bessel_norm_l2seq(fields, gamma: float, p: float) -> float:
    """Discrete H^gamma_p(l2) norm of a stack: Bessel multiplier per
    component, pointwise l2 across the stack, then L_p."""
    if p < 2.0:
        raise ValueError(f"p must be >= 2, got {p!r}")
    fields = list(fields)
    if not fields:
        raise ValueError("stack must be nonempty")
    grid = fields[0].grid
    mult = bessel_multiplier(grid, gamma)
    sq = np.zeros(grid.shape)
    for f in fields:
        if f.grid != grid:
            raise ValueError("all fields in the stack must share one grid")
        sq += _apply_multiplier(f, mult).values ** 2
    return float((np.sum(sq ** (p / 2.0)) * grid.cell_volume) ** (1.0 / p))


# -- flat binary / CSV interchange -------------------------------------------
#
# binary layout (little endian): int64 dim, int64 n_per_axis, float64 L,
# then n_per_axis^dim float64 values in row-major order.

_HEADER = struct.Struct("<qqd")


def write_field(field: Field, path) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.dim, g.n_per_axis, g.side_length))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        dim, n, length = _HEADER.unpack(fh.read(_HEADER.size))
        grid = TorusGrid(dim, n, length)
        data = np.frombuffer(fh.read(8 * grid.n_points), dtype="<f8")
    if data.size != grid.n_points:
        raise ValueError(f"truncated field file {path}")
    return Field(grid, data.reshape(grid.shape).copy())


def write_field_csv(field: Field, path) -> None:
    if field.grid.dim != 1:
        raise ValueError("CSV export is defined for d = 1 only")
    xs = field.grid.axis_coordinates()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "value"])
        for x, v in zip(xs, field.values):
            writer.writerow([repr(float(x)), repr(float(v))])


def read_field_csv(path, side_length=None) -> Field:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["x", "value"]:
            raise ValueError(f"unexpected CSV header {header!r}")
        for row in reader:
            rows.append((float(row[0]), float(row[1])))
    xs = np.array([r[0] for r in rows])
    vals = np.array([r[1] for r in rows])
    dx = xs[1] - xs[0]
    length = side_length if side_length is not None else float(xs[-1] + dx)
    return Field(TorusGrid(1, len(rows), length), vals)

