"""Spectral solvers for the mild formulation of

    d_t^alpha u = Laplacian u + f + d_t^beta sum_k int g^k dw^k,   u(0) = 0,

on the torus.  Per Fourier mode xi the solution is a time convolution:

* deterministic part: the forcing kernel (t-s)^(alpha-1)
  E_{alpha,alpha}(-|xi|^2 (t-s)^alpha) integrated exactly against the
  piecewise-linear interpolant of f-hat (the kernel moments have closed
  forms in E_{alpha,alpha+1} and E_{alpha,alpha+2});

* stochastic part: the Ito sum over increments with the kernel
  K(r, xi) = r^(alpha-beta) E_{alpha,1+alpha-beta}(-|xi|^2 r^alpha)
  evaluated at the left endpoint of each increment interval; when
  alpha < beta the first-interval weight integrates the r^(alpha-beta)
  singularity exactly against a locally constant E factor.

Lag convolutions accumulate in a fixed order, so snapshots up to t_j are
bitwise independent of increments after t_j.

An independent L1 time-stepping oracle (Caputo L1 weights, implicit
diffusion) cross-validates the mild formulas; for beta < 1/2 the noise
enters it as the rough forcing
f-bar(t) = Gamma(1-beta)^-1 sum_k int_0^t (t-s)^(-beta) g^k dw^k.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .frac_time import FracOrders, TimeGrid
from .grid_spectral import Field, TorusGrid
from .mittag_leffler import MLParams, ml_eval_array
from .noise import NoisePath

__all__ = [
    "SpaceTimePath",
    "PicardResult",
    "PicardNonConvergence",
    "solve_deterministic",
    "solve_stochastic_additive",
    "solve_semilinear",
    "solve_l1_oracle",
    "stochastic_final_ensemble",
    "final_variance_oracle",
    "blp_norm",
    "write_path",
]


class PicardNonConvergence(RuntimeError):
    """Picard iteration failed to contract within the iteration budget."""

    def __init__(self, message, increments, ratios):
        super().__init__(message)
        self.increments = increments
        self.ratios = ratios


@dataclass
class SpaceTimePath:
    """Field-valued path on a time grid; snapshots[j] lives at t_j."""

    time_grid: TimeGrid
    grid: TorusGrid
    snapshots: np.ndarray

    def __post_init__(self) -> None:
        self.snapshots = np.asarray(self.snapshots, dtype=np.float64)
        expected = (self.time_grid.n_nodes,) + self.grid.shape
        if self.snapshots.shape != expected:
            raise ValueError(
                f"snapshots shape {self.snapshots.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(self.snapshots)):
            raise ValueError("snapshots must be finite")

    @classmethod
    def zero(cls, time_grid: TimeGrid, grid: TorusGrid) -> "SpaceTimePath":
        return cls(time_grid, grid, np.zeros((time_grid.n_nodes,) + grid.shape))

    @classmethod
    def from_function(cls, time_grid, grid, fn) -> "SpaceTimePath":
        xs = grid.meshgrid()
        snaps = np.stack([fn(t, *xs) for t in time_grid.nodes()])
        return cls(time_grid, grid, snaps)

    def field_at(self, j: int) -> Field:
        return Field(self.grid, self.snapshots[j])

    def check_zero_initial(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.snapshots[0])) <= tol)


def blp_norm(path: SpaceTimePath, p: float = 2.0) -> float:
    """Discrete L_p([0,T] x torus) norm with left-cell time weights."""
    vol = path.grid.cell_volume
    dt = path.time_grid.dt
    body = np.sum(np.abs(path.snapshots[:-1]) ** p) * vol * dt
    return float(body ** (1.0 / p))


def _fft_path(snapshots: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """(n_nodes, *shape) -> (n_nodes, n_points) mode coefficients."""
    axes = tuple(range(1, grid.dim + 1))
    coeffs = np.fft.fftn(snapshots, axes=axes) / grid.n_points
    return coeffs.reshape(snapshots.shape[0], grid.n_points)


def _ifft_path(coeffs: np.ndarray, grid: TorusGrid, time_grid: TimeGrid):
    shaped = coeffs.reshape((coeffs.shape[0],) + grid.shape)
    axes = tuple(range(1, grid.dim + 1))
    values = np.fft.ifftn(shaped * grid.n_points, axes=axes)
    return SpaceTimePath(time_grid, grid, values.real)


def _unique_symbols(params: MLParams, lam: np.ndarray, args: np.ndarray):
    """E values for every (lambda, arg) pair, deduplicated over lambda.

    lam has shape (M,), args shape (L,); returns (L, M).
    """
    uniq, inverse = np.unique(lam, return_inverse=True)
    out = np.empty((args.size, uniq.size))
    for i, lu in enumerate(uniq):
        out[:, i] = ml_eval_array(params, -lu * args)
    return out[:, inverse]


# weight tables are pure functions of (orders, time grid, mode lattice) and
# get rebuilt identically inside Picard and replicate loops; keep a few
_WEIGHT_CACHE: dict = {}
_WEIGHT_CACHE_MAX = 48


def _cached(kind, orders, time_grid, lam, builder):
    key = (
        kind,
        orders.alpha,
        orders.beta,
        time_grid.n_steps,
        time_grid.t_end,
        lam.tobytes(),
    )
    hit = _WEIGHT_CACHE.get(key)
    if hit is None:
        hit = builder()
        for arr in hit if isinstance(hit, tuple) else (hit,):
            arr.setflags(write=False)
        if len(_WEIGHT_CACHE) >= _WEIGHT_CACHE_MAX:
            _WEIGHT_CACHE.pop(next(iter(_WEIGHT_CACHE)))
        _WEIGHT_CACHE[key] = hit
    return hit


def _det_weights_impl(orders: FracOrders, time_grid: TimeGrid, lam: np.ndarray):
    """Product-integration weights (A, B) for the forcing kernel.

    With R(x) = x^alpha E_{alpha,alpha+1}(-lam x^alpha)  (0th kernel moment)
    and  S(x) = x^(alpha+1) [E_{alpha,alpha+1} - E_{alpha,alpha+2}](-lam x^alpha),
    the contribution of interval [t_{j-l}, t_{j-l+1}] to u-hat(t_j) is
    (A_l - B_l) f_{j-l} + B_l f_{j-l+1}; both arrays have shape (N+1, M)
    with row 0 zero.
    """
    a = orders.alpha
    n = time_grid.n_steps
    dt = time_grid.dt
    x = np.arange(0, n + 1, dtype=np.float64) * dt
    xa = x**a
    e1 = _unique_symbols(MLParams(a, a + 1.0), lam, xa)
    e2 = _unique_symbols(MLParams(a, a + 2.0), lam, xa)
    big_r = xa[:, None] * e1
    big_s = (x ** (a + 1.0))[:, None] * (e1 - e2)
    weights_a = np.zeros_like(big_r)
    weights_b = np.zeros_like(big_r)
    weights_a[1:] = big_r[1:] - big_r[:-1]
    weights_b[1:] = (
        x[1:, None] * weights_a[1:] - (big_s[1:] - big_s[:-1])
    ) / dt
    return weights_a, weights_b


def _sto_weights_impl(orders: FracOrders, time_grid: TimeGrid, lam: np.ndarray):
    """Ito left-endpoint kernel weights, shape (N+1, M), row 0 zero.

    w_l = (l dt)^(alpha-beta) E_{alpha,1+alpha-beta}(-lam (l dt)^alpha);
    for alpha < beta the l = 1 weight instead integrates r^(alpha-beta)
    exactly over [0, dt] (the left-endpoint value diverges as dt -> 0).
    """
    a, b = orders.alpha, orders.beta
    mu = a - b
    n = time_grid.n_steps
    dt = time_grid.dt
    x = np.arange(0, n + 1, dtype=np.float64) * dt
    e = _unique_symbols(MLParams(a, 1.0 + mu), lam, x**a)
    w = np.zeros((n + 1, lam.size))
    w[1:] = (x[1:] ** mu)[:, None] * e[1:]
    if mu < 0.0:
        w[1] = e[1] * dt**mu / (mu + 1.0)
    return w


def deterministic_lag_weights(orders: FracOrders, time_grid: TimeGrid, lam: np.ndarray):
    return _cached(
        "det", orders, time_grid, lam,
        lambda: _det_weights_impl(orders, time_grid, lam),
    )


def stochastic_lag_weights(orders: FracOrders, time_grid: TimeGrid, lam: np.ndarray):
    return _cached(
        "sto", orders, time_grid, lam,
        lambda: _sto_weights_impl(orders, time_grid, lam),
    )


def _lag_convolve_sto(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """out[j] = sum_{l=1..j} w[l] * q[j-l]; q has one row per increment."""
    n = q.shape[0]
    out = np.zeros((n + 1,) + q.shape[1:], dtype=q.dtype)
    for lag in range(1, n + 1):
        out[lag:] += w[lag] * q[: n + 1 - lag]
    return out


def _lag_convolve_det(wa: np.ndarray, wb: np.ndarray, f: np.ndarray) -> np.ndarray:
    """out[j] = sum_{l=1..j} (wa-wb)[l] f[j-l] + wb[l] f[j-l+1]."""
    n = f.shape[0] - 1
    out = np.zeros_like(f)
    left = wa - wb
    for lag in range(1, n + 1):
        out[lag:] += left[lag] * f[: n + 1 - lag] + wb[lag] * f[1 : n + 2 - lag]
    return out


def solve_deterministic(orders: FracOrders, f: SpaceTimePath) -> SpaceTimePath:
    """Mild solution with deterministic forcing f and zero initial data."""
    grid, time_grid = f.grid, f.time_grid
    lam = grid.xi_sq().reshape(-1)
    f_hat = _fft_path(f.snapshots, grid)
    wa, wb = deterministic_lag_weights(orders, time_grid, lam)
    u_hat = _lag_convolve_det(wa, wb, f_hat)
    out = _ifft_path(u_hat, grid, time_grid)
    assert out.check_zero_initial()
    return out


def _stack_coeffs(g_stack, grid: TorusGrid) -> np.ndarray:
    """list[Field] -> (K, n_points) mode coefficients."""
    arrs = []
    for g in g_stack:
        if g.grid != grid:
            raise ValueError("stack fields must share the solver grid")
        arrs.append(np.fft.fftn(g.values).reshape(-1) / grid.n_points)
    return np.stack(arrs, axis=0)


def _spectral_noise(g_stack, noise: NoisePath, grid: TorusGrid) -> np.ndarray:
    """q[i] = sum_k g-hat^k(t_i) dw^k_i, shape (n_steps, n_points)."""
    inc = noise.increments
    n_steps = inc.shape[1]
    if isinstance(g_stack[0], Field):
        coeffs = _stack_coeffs(g_stack, grid)  # (K, M)
        if coeffs.shape[0] != noise.n_modes:
            raise ValueError(
                f"stack has {coeffs.shape[0]} components, noise carries "
                f"{noise.n_modes}"
            )
        return inc.T.astype(np.complex128) @ coeffs
    # time-indexed: one stack per node; node j drives increment j
    if len(g_stack) < n_steps:
        raise ValueError("time-indexed stack must cover every increment node")
    q = np.empty((n_steps, grid.n_points), dtype=np.complex128)
    for i in range(n_steps):
        coeffs = _stack_coeffs(g_stack[i], grid)
        q[i] = inc[:, i] @ coeffs
    return q


def solve_stochastic_additive(
    orders: FracOrders, g_stack, noise: NoisePath, grid: TorusGrid | None = None
) -> SpaceTimePath:
    """Discrete stochastic convolution driven by the given increments.

    g_stack is either list[Field] (time-constant) or a list over time nodes
    of list[Field]; g at node j pairs with the increment over
    [t_j, t_{j+1}) (Ito convention), so the output is adapted.
    """
    if grid is None:
        probe = g_stack[0] if isinstance(g_stack[0], Field) else g_stack[0][0]
        grid = probe.grid
    time_grid = noise.grid
    lam = grid.xi_sq().reshape(-1)
    q = _spectral_noise(g_stack, noise, grid)
    w = stochastic_lag_weights(orders, time_grid, lam)
    u_hat = _lag_convolve_sto(w, q)
    out = _ifft_path(u_hat, grid, time_grid)
    assert out.check_zero_initial()
    return out


@dataclass
class PicardResult:
    path: SpaceTimePath
    increments: list
    ratios: list
    iterations: int
    converged: bool


def solve_semilinear(
    orders: FracOrders,
    f_fn,
    g_fn,
    noise: NoisePath,
    time_grid: TimeGrid,
    grid: TorusGrid,
    picard_tol: float = 1e-8,
    max_iter: int = 50,
    p: float = 2.0,
) -> PicardResult:
    """Fixed point of u -> solve_det(f(u)) + solve_sto(g(u), noise).

    f_fn maps a SpaceTimePath to a forcing SpaceTimePath; g_fn maps it to a
    stack accepted by solve_stochastic_additive.  Stops when the discrete
    L_p increment norm drops below picard_tol.
    """
    u = SpaceTimePath.zero(time_grid, grid)
    increments: list = []
    ratios: list = []
    for it in range(1, max_iter + 1):
        det = solve_deterministic(orders, f_fn(u))
        sto = solve_stochastic_additive(orders, g_fn(u), noise, grid=grid)
        nxt = SpaceTimePath(time_grid, grid, det.snapshots + sto.snapshots)
        delta = blp_norm(
            SpaceTimePath(time_grid, grid, nxt.snapshots - u.snapshots), p
        )
        increments.append(delta)
        if len(increments) >= 2 and increments[-2] > 0.0:
            ratio = increments[-1] / increments[-2]
            ratios.append(ratio)
            if len(ratios) >= 3 and min(ratios[-3:]) > 1.0:
                warnings.warn(
                    "Picard increments are growing; the maps look "
                    "non-contractive (Lipschitz constant too large for T)",
                    RuntimeWarning,
                    stacklevel=2,
                )
        u = nxt
        if delta <= picard_tol:
            return PicardResult(u, increments, ratios, it, True)
    raise PicardNonConvergence(
        f"no contraction to {picard_tol} within {max_iter} iterations; "
        f"last ratio {ratios[-1] if ratios else float('nan')}",
        increments,
        ratios,
    )


def l1_history_weights(alpha: float, n_steps: int) -> np.ndarray:
    """History weights of the Caputo L1 stencil.

    With a_m = (m+1)^(1-alpha) - m^(1-alpha), the discrete derivative is
    D * (u_j - sum_{i=1}^{j-1} b_{j-i} u_i) for zero initial data, where
    b_m = a_{m-1} - a_m; returned with b[0] = 0 so index equals lag.
    """
    m = np.arange(0, n_steps + 1, dtype=np.float64)
    pw = m ** (1.0 - alpha)
    pw[0] = 0.0  # 0^(1-alpha): also the alpha -> 1 limit (numpy would give 1)
    a = (m + 1.0) ** (1.0 - alpha) - pw
    b = np.zeros(n_steps + 1)
    b[1:] = a[:-1] - a[1:]
    return b


def solve_l1_oracle(
    orders: FracOrders,
    f: SpaceTimePath | None = None,
    g_stack=None,
    noise: NoisePath | None = None,
    grid: TorusGrid | None = None,
    time_grid: TimeGrid | None = None,
) -> SpaceTimePath:
    """Independent discretization: Caputo L1 stepping, implicit diffusion.

    The stochastic branch requires beta < 1/2 and folds the noise into the
    rough forcing f-bar by product integration of (t-s)^(-beta); the
    deterministic branch (g_stack None) works for any beta.
    """
    alpha, beta = orders.alpha, orders.beta
    if not (0.0 < alpha <= 1.0):
        raise ValueError("the L1 oracle covers alpha in (0, 1]")
    if f is not None:
        grid, time_grid = f.grid, f.time_grid
    if grid is None or time_grid is None:
        raise ValueError("need a forcing path or explicit grids")
    n = time_grid.n_steps
    dt = time_grid.dt
    lam = grid.xi_sq().reshape(-1)

    f_hat = np.zeros((n + 1, grid.n_points), dtype=np.complex128)
    if f is not None:
        f_hat += _fft_path(f.snapshots, grid)
    if g_stack is not None:
        if noise is None:
            raise ValueError("stochastic branch needs a NoisePath")
        if beta >= 0.5:
            raise ValueError("the noise reduction needs beta < 1/2")
        q = _spectral_noise(g_stack, noise, grid)
        ell = np.arange(0, n + 1, dtype=np.float64)
        sing = np.zeros(n + 1)
        sing[1:] = (
            dt**-beta
            * (ell[1:] ** (1.0 - beta) - ell[:-1] ** (1.0 - beta))
            / (1.0 - beta)
        )
        fbar = np.zeros_like(f_hat)
        for lag in range(1, n + 1):
            fbar[lag:] += sing[lag] * q[: n + 1 - lag]
        f_hat += fbar / math.gamma(1.0 - beta)

    big_d = dt**-alpha / math.gamma(2.0 - alpha)
    b = l1_history_weights(alpha, n)
    u_hat = np.zeros((n + 1, grid.n_points), dtype=np.complex128)
    denom = big_d + lam
    for j in range(1, n + 1):
        if j >= 2:
            hist = np.tensordot(b[1:j][::-1], u_hat[1:j], axes=(0, 0))
        else:
            hist = 0.0
        u_hat[j] = (big_d * hist + f_hat[j]) / denom
    out = _ifft_path(u_hat, grid, time_grid)
    assert out.check_zero_initial()
    return out


def stochastic_final_ensemble(
    orders: FracOrders,
    g_stack,
    time_grid: TimeGrid,
    grid: TorusGrid,
    seed: int,
    replicates: int,
) -> np.ndarray:
    """u-hat(T, xi) over independent replicates, shape (R, n_points).

    Only the final snapshot is assembled, which reduces each replicate to
    one matrix product; the replicate index enters the counter-based
    generator, so results match full solve_stochastic_additive runs
    replicate by replicate.
    """
    coeffs = _stack_coeffs(g_stack, grid)  # (K, M)
    lam = grid.xi_sq().reshape(-1)
    w = stochastic_lag_weights(orders, time_grid, lam)
    wrev = w[1:][::-1]  # row i multiplies increment i
    out = np.empty((replicates, grid.n_points), dtype=np.complex128)
    for r in range(replicates):
        inc = NoisePath(
            seed=seed, grid=time_grid, n_modes=coeffs.shape[0], replicate=r
        ).increments
        out[r] = np.sum((inc @ wrev) * coeffs, axis=0)
    return out


def final_variance_oracle(
    orders: FracOrders, g_stack, time_grid: TimeGrid, grid: TorusGrid
) -> np.ndarray:
    """Deterministic weight-sum for E|u-hat(T, xi)|^2 (discrete Ito isometry):
    sum_k |g-hat^k|^2 * sum_l w_l^2 * dt, per mode."""
    coeffs = _stack_coeffs(g_stack, grid)
    lam = grid.xi_sq().reshape(-1)
    w = stochastic_lag_weights(orders, time_grid, lam)
    return np.sum(np.abs(coeffs) ** 2, axis=0) * np.sum(w**2, axis=0) * time_grid.dt


def write_path(path: SpaceTimePath, file_path) -> None:
    """Flat binary: int64 dim, n_per_axis, n_steps; float64 L, t_end; then
    (n_steps+1) * n_points float64 snapshots, time-major row-major."""
    import struct

    g, tg = path.grid, path.time_grid
    with open(file_path, "wb") as fh:
        fh.write(
            struct.pack(
                "<qqqdd", g.dim, g.n_per_axis, tg.n_steps, g.side_length, tg.t_end
            )
        )
        fh.write(np.ascontiguousarray(path.snapshots, dtype="<f8").tobytes())
