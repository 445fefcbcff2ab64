"""Empirical checks of the maximal-regularity machinery.

The square-function operator

    T g(t, x) = [ int_0^t | (-Lap)^(c1/2) (q_{a,b}(t-s, .) * g(s, .))(x) |_H^2 ds ]^(1/2)

is realized per mode as |xi|^(c1) times the kernel symbol; the time
integral uses the solver's product-integration convention (the power
factor r^(2(alpha-beta)) of the squared kernel is integrated exactly
against a locally constant Mittag-Leffler factor).  Only the range
1/2 < beta < alpha + 1/2 is admitted, where c1 = 2 - c0' lies in (0, 2).

The bounded-ratio law ||T g||_p <= N ||g||_p is probed by adversarial
forcing families (never asserted against a specific constant: the theory's
N is non-constructive); the a priori estimate for the stochastic model
equation is probed through the spectral decay of E|u-hat(T, xi)|^2 against
the per-mode variance quadrature, and the white-noise dimension threshold
d0 = 4 - 2(2 beta - 1)_+ / alpha through mode-variance sums under grid
refinement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .frac_time import FracOrders, TimeGrid
from .grid_spectral import Field, TorusGrid, bessel_norm_l2seq
from .kernels import kernel_variance_integrals
from .mittag_leffler import MLParams, ml_eval_array
from .noise import NoiseBasis, NoisePath
from .solver import (
    SpaceTimePath,
    _fft_path,
    _stack_coeffs,
    solve_stochastic_additive,
    stochastic_final_ensemble,
)

__all__ = [
    "TimeStack",
    "LPInstance",
    "LPReport",
    "EstimateReport",
    "SingularQuadratureWarning",
    "apply_T_field",
    "apply_T",
    "lp_inequality_check",
    "plancherel_n2star",
    "adversarial_family",
    "mode_variance_sum",
    "dimension_sweep",
    "spectral_decay_exponents",
    "apriori_estimate_check",
]


class SingularQuadratureWarning(RuntimeWarning):
    """The s -> t endpoint cell dominates the square-function quadrature."""


@dataclass
class TimeStack:
    """Deterministic l2-stack forcing sampled on a space-time grid.

    values has shape (n_nodes, K, *grid.shape).
    """

    time_grid: TimeGrid
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        expected_lead = (self.time_grid.n_nodes,)
        if (
            self.values.ndim != 2 + self.grid.dim
            or self.values.shape[:1] != expected_lead
            or self.values.shape[2:] != self.grid.shape
        ):
            raise ValueError(
                f"stack shape {self.values.shape} incompatible with "
                f"{self.time_grid.n_nodes} nodes on grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("stack values must be finite")

    @classmethod
    def from_functions(cls, time_grid, grid, fns) -> "TimeStack":
        xs = grid.meshgrid()
        snaps = np.stack(
            [np.stack([fn(t, *xs) for fn in fns]) for t in time_grid.nodes()]
        )
        return cls(time_grid, grid, snaps)

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def coeffs(self) -> np.ndarray:
        """(n_nodes, K, n_points) Fourier coefficients."""
        axes = tuple(range(2, 2 + self.grid.dim))
        c = np.fft.fftn(self.values, axes=axes) / self.grid.n_points
        return c.reshape(self.values.shape[0], self.values.shape[1], -1)

    def lp_l2_norm_pow(self, p: float) -> float:
        """||g||^p over nodes 0..N-1 with weight dt, pointwise l2 in k."""
        sq = np.sum(self.values[:-1] ** 2, axis=1)
        return float(
            np.sum(sq ** (p / 2.0)) * self.grid.cell_volume * self.time_grid.dt
        )


@dataclass(frozen=True)
class LPInstance:
    """Square-function test instance; requires the beta > 1/2 regime."""

    orders: FracOrders
    p: float
    g: TimeStack

    def __post_init__(self) -> None:
        if not (0.5 < self.orders.beta < self.orders.alpha + 0.5):
            raise ValueError(
                "the square-function regime needs 1/2 < beta < alpha + 1/2"
            )
        if self.p < 2.0:
            raise ValueError(f"p must be >= 2, got {self.p!r}")


def _time_cell_weights(orders: FracOrders, time_grid: TimeGrid) -> np.ndarray:
    """omega_l = int over the lag-l cell of r^(2(alpha-beta)) dr, exact."""
    mu = orders.alpha - orders.beta
    two_mu_1 = 2.0 * mu + 1.0
    ell = np.arange(0, time_grid.n_steps + 1, dtype=np.float64)
    w = np.zeros(time_grid.n_steps + 1)
    w[1:] = (
        time_grid.dt**two_mu_1
        * (ell[1:] ** two_mu_1 - ell[:-1] ** two_mu_1)
        / two_mu_1
    )
    return w


def _lag_multipliers(orders: FracOrders, time_grid: TimeGrid, grid: TorusGrid):
    """|xi|^{c1} E(-|xi|^2 (l dt)^alpha) per lag l and mode, (N+1, M)."""
    lam = grid.xi_sq().reshape(-1)
    uniq, inverse = np.unique(lam, return_inverse=True)
    lags = time_grid.nodes() ** orders.alpha
    params = MLParams(orders.alpha, 1.0 + orders.alpha - orders.beta)
    e = np.empty((time_grid.n_nodes, uniq.size))
    for i, lu in enumerate(uniq):
        e[:, i] = ml_eval_array(params, -lu * lags)
    e = e[:, inverse]
    return e * (lam ** (orders.c1 / 2.0))[None, :]


def apply_T_field(inst: LPInstance, warn: bool = True) -> np.ndarray:
    """The full square-function field over (t_j, x), shape (n_nodes, *shape)."""
    tg, grid = inst.g.time_grid, inst.g.grid
    n = tg.n_steps
    ghat = inst.g.coeffs()  # (N+1, K, M)
    mult = _lag_multipliers(inst.orders, tg, grid)  # (N+1, M)
    omega = _time_cell_weights(inst.orders, tg)
    axes = tuple(range(2, 2 + grid.dim))
    acc = np.zeros((tg.n_nodes,) + grid.shape)
    first_cell = np.zeros(tg.n_nodes)
    for lag in range(1, n + 1):
        spec = mult[lag][None, None, :] * ghat[: n + 1 - lag]
        shaped = spec.reshape(spec.shape[:2] + grid.shape)
        fields = np.fft.ifftn(shaped * grid.n_points, axes=axes).real
        contrib = omega[lag] * np.sum(fields**2, axis=1)
        acc[lag:] += contrib
        if lag == 1:
            first_cell[1:] = np.sum(
                contrib.reshape(contrib.shape[0], -1), axis=1
            )
    if warn:
        totals = np.sum(acc.reshape(acc.shape[0], -1), axis=1)
        ok = totals > 0.0
        ok[:4] = False  # the first nodes only see the newest cell anyway
        if np.any(ok) and np.any(first_cell[ok] > 0.1 * totals[ok]):
            worst = float(np.max(first_cell[ok] / totals[ok]))
            warnings.warn(
                f"the s -> t endpoint cell carries {worst:.0%} of the square "
                "function; refine the time grid",
                SingularQuadratureWarning,
                stacklevel=2,
            )
    return np.sqrt(acc)


def apply_T(inst: LPInstance, t_index: int, x_index) -> float:
    """Point evaluation of the square function at (t_j, x)."""
    fields = apply_T_field(inst, warn=False)
    return float(fields[(t_index,) + tuple(np.atleast_1d(x_index))])


@dataclass
class LPReport:
    orders: FracOrders
    p: float
    ratios: list
    labels: list
    n_star: float
    argmax_label: str

    def to_rows(self):
        return [
            {"label": lab, "p": self.p, "ratio": r}
            for lab, r in zip(self.labels, self.ratios)
        ]


def lp_ratio(inst: LPInstance) -> float:
    """R(g) = ||Tg||_p^p / ||g||_p^p on the shared discrete norms."""
    tfield = apply_T_field(inst, warn=False)
    num = (
        float(np.sum(tfield[:-1] ** inst.p))
        * inst.g.grid.cell_volume
        * inst.g.time_grid.dt
    )
    den = inst.g.lp_l2_norm_pow(inst.p)
    if den == 0.0:
        raise ValueError("the zero forcing has no ratio")
    return num / den


def lp_sweep(orders: FracOrders, ps, sample_gs, labels=None):
    """Ratio sweep sharing one square-function field per sample across all
    requested p; returns {p: LPReport}."""
    labels = labels or [f"sample{i}" for i in range(len(sample_gs))]
    ratio_rows = {p: [] for p in ps}
    for g in sample_gs:
        tfield = apply_T_field(LPInstance(orders, min(ps), g), warn=False)
        vol, dt = g.grid.cell_volume, g.time_grid.dt
        for p in ps:
            num = float(np.sum(tfield[:-1] ** p)) * vol * dt
            den = g.lp_l2_norm_pow(p)
            if den == 0.0:
                raise ValueError("the zero forcing has no ratio")
            ratio_rows[p].append(num / den)
    out = {}
    for p in ps:
        ratios = ratio_rows[p]
        i = int(np.argmax(ratios))
        out[p] = LPReport(
            orders=orders,
            p=p,
            ratios=ratios,
            labels=list(labels),
            n_star=float(ratios[i]),
            argmax_label=labels[i],
        )
    return out


def lp_inequality_check(orders: FracOrders, p: float, sample_gs, labels=None):
    """Ratio sweep over a forcing family; returns the running-max report."""
    return lp_sweep(orders, [p], sample_gs, labels)[p]


def plancherel_n2star(orders: FracOrders, time_grid: TimeGrid, grid: TorusGrid):
    """The p = 2 sharp constant by Plancherel: the largest windowed sum
    |xi|^(2 c1) sum_l omega_l E(-|xi|^2 (l dt)^alpha)^2 over modes.

    Returns (value, fft_index_of_argmax); a time-delta forcing on the
    argmax mode attains the value exactly.
    """
    mult = _lag_multipliers(orders, time_grid, grid)
    omega = _time_cell_weights(orders, time_grid)
    n = time_grid.n_steps
    table = np.sum(omega[1:n, None] * mult[1:n] ** 2, axis=0)
    i = int(np.argmax(table))
    return float(table[i]), i


def adversarial_family(
    orders: FracOrders,
    time_grid: TimeGrid,
    grid: TorusGrid,
    n_random: int = 20,
    seed: int = 2024,
):
    """Forcing family for the ratio sweep: per-mode time deltas (including
    the Plancherel argmax), multiscale bumps, and seeded random smooth
    fields.  All samples are grid-coherent, so refinement sweeps reuse the
    family."""
    xs = grid.meshgrid()
    t = time_grid.nodes()
    samples, labels = [], []

    _, argmax_flat = plancherel_n2star(orders, time_grid, grid)
    mode_ids = {argmax_flat}
    ints = grid.mode_integers().astype(int)
    for m in (1, 2, grid.n_per_axis // 4, grid.n_per_axis // 2 - 1):
        flat = int(np.argmin(np.abs(ints - m)))
        mode_ids.add(flat * (grid.n_points // grid.n_per_axis))
    for flat in sorted(mode_ids):
        unr = np.unravel_index(flat, grid.shape)
        phase = np.zeros(grid.shape)
        for c_idx, x in zip(unr, xs):
            mm = ints[c_idx]
            phase += (2.0 * math.pi * mm / grid.side_length) * x
        spatial = np.cos(phase)
        vals = np.zeros((time_grid.n_nodes, 1) + grid.shape)
        vals[0, 0] = spatial / time_grid.dt
        samples.append(TimeStack(time_grid, grid, vals))
        labels.append(f"delta-mode{flat}")

    for width, m in ((0.1, 1), (0.4, 3)):
        profile = np.exp(-((t - 0.25 * time_grid.t_end) ** 2) / width**2)
        k = 2.0 * math.pi * m / grid.side_length
        spatial = np.cos(k * xs[0])
        prof = profile.reshape((-1, 1) + (1,) * grid.dim)
        vals = prof * spatial[None, None]
        samples.append(TimeStack(time_grid, grid, np.ascontiguousarray(vals)))
        labels.append(f"bump-w{width}-m{m}")

    rng = np.random.default_rng(seed)
    n_low = max(2, grid.n_per_axis // 8)
    for i in range(n_random):
        n_comp = 1 if i % 3 else 2
        coef = rng.standard_normal((n_comp, n_low))
        freq = rng.uniform(0.5, 4.0, size=n_comp)
        comps = []
        for c in range(n_comp):
            spatial = np.zeros(grid.shape)
            for m in range(1, n_low + 1):
                k = 2.0 * math.pi * m / grid.side_length
                spatial += coef[c, m - 1] * np.cos(k * xs[0] + 0.7 * c)
            prof = np.sin(freq[c] * math.pi * t / time_grid.t_end) ** 2
            prof = prof.reshape((-1, 1) + (1,) * grid.dim)
            comps.append(prof * spatial[None, None])
        vals = np.concatenate(comps, axis=1)
        samples.append(TimeStack(time_grid, grid, np.ascontiguousarray(vals)))
        labels.append(f"random{i}")
    return samples, labels


def mode_variance_sum(orders: FracOrders, grid: TorusGrid, t_end: float) -> float:
    """sum over the mode lattice of int_0^T K_sym(r, xi)^2 dr; this equals
    E ||u(T)||_{L2}^2 under full white-noise forcing."""
    return float(np.sum(kernel_variance_integrals(orders, grid.xi_sq(), t_end)))


def dimension_sweep(orders: FracOrders, dim: int, n_values, side_length, t_end):
    """Mode-variance sums along a grid-refinement ladder."""
    return [
        (n, mode_variance_sum(orders, TorusGrid(dim, n, side_length), t_end))
        for n in n_values
    ]


def spectral_decay_exponents(
    variances: np.ndarray, grid: TorusGrid, m_lo: int = 2, m_hi: int | None = None
):
    """Log-log slope of per-mode variances against |xi|, averaged over equal
    |xi| shells inside the fit window |m| in [m_lo, m_hi]."""
    m_hi = m_hi or grid.n_per_axis // 4
    lam = grid.xi_sq().reshape(-1)
    scale = (2.0 * math.pi / grid.side_length) ** 2
    mm = lam / scale
    uniq = np.unique(mm)
    window = uniq[(uniq >= m_lo**2) & (uniq <= m_hi**2)]
    if window.size < 4:
        raise ValueError("fit window holds fewer than 4 shells")
    xs, ys = [], []
    flat = np.asarray(variances, dtype=np.float64).reshape(-1)
    for u in window:
        sel = mm == u
        xs.append(0.5 * math.log(u * scale))
        ys.append(math.log(float(np.mean(flat[sel]))))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


@dataclass
class EstimateReport:
    orders: FracOrders
    gamma: float
    p: float
    replicates: int
    u_norm: float
    g_norm: float
    ratio: float
    rel_se: float
    mc_exponent: float
    oracle_exponent: float
    inconclusive: bool
    fit_window: tuple = field(default=(2, 0))

    def to_dict(self) -> dict:
        return {
            "alpha": self.orders.alpha,
            "beta": self.orders.beta,
            "gamma": self.gamma,
            "p": self.p,
            "replicates": self.replicates,
            "u_norm": self.u_norm,
            "g_norm": self.g_norm,
            "ratio": self.ratio,
            "rel_se": self.rel_se,
            "mc_exponent": self.mc_exponent,
            "oracle_exponent": self.oracle_exponent,
            "inconclusive": self.inconclusive,
            "fit_window": list(self.fit_window),
        }


def apriori_estimate_check(
    orders: FracOrders,
    gamma: float,
    p: float,
    replicates: int,
    time_grid: TimeGrid,
    grid: TorusGrid,
    seed: int = 7,
    spectrum_replicates: int | None = None,
) -> EstimateReport:
    """Monte Carlo probe of ||u||_{H^(gamma+2)} <= N ||g||_{H^(gamma+c0')}
    under full white-noise forcing, plus the spectral decay comparison of
    E|u-hat(T, xi)|^2 against the per-mode variance quadrature."""
    basis = NoiseBasis("fourier_white", grid, grid.n_points)
    stack = basis.fields()

    bessel_u = (1.0 + grid.xi_sq().reshape(-1)) ** ((gamma + 2.0) / 2.0)
    vol, dt = grid.cell_volume, time_grid.dt
    axes = tuple(range(1, 1 + grid.dim))
    norms_p = np.empty(replicates)
    for r in range(replicates):
        noise = NoisePath(
            seed=seed, grid=time_grid, n_modes=len(stack), replicate=r
        )
        u = solve_stochastic_additive(orders, stack, noise, grid=grid)
        coeffs = _fft_path(u.snapshots, grid) * bessel_u[None, :]
        shaped = coeffs.reshape((coeffs.shape[0],) + grid.shape)
        smooth = np.fft.ifftn(shaped * grid.n_points, axes=axes).real
        norms_p[r] = np.sum(np.abs(smooth[:-1]) ** p) * vol * dt

    u_norm = float(np.mean(norms_p) ** (1.0 / p))
    rel_se = float(
        np.std(norms_p, ddof=1) / math.sqrt(replicates) / max(np.mean(norms_p), 1e-300)
    )
    g_norm = float(
        time_grid.t_end ** (1.0 / p)
        * bessel_norm_l2seq(stack, gamma + orders.c0_prime, p)
    )

    n_spec = spectrum_replicates or max(replicates, 200)
    ens = stochastic_final_ensemble(
        orders, stack, time_grid, grid, seed=seed + 1, replicates=n_spec
    )
    var_mc = np.mean(np.abs(ens) ** 2, axis=0)
    var_oracle = (
        kernel_variance_integrals(orders, grid.xi_sq(), time_grid.t_end).reshape(-1)
        / grid.side_length**grid.dim
    )
    m_hi = grid.n_per_axis // 4
    mc_exp = spectral_decay_exponents(var_mc, grid, 2, m_hi)
    or_exp = spectral_decay_exponents(var_oracle, grid, 2, m_hi)

    return EstimateReport(
        orders=orders,
        gamma=gamma,
        p=p,
        replicates=replicates,
        u_norm=u_norm,
        g_norm=g_norm,
        ratio=u_norm / g_norm,
        rel_se=rel_se,
        mc_exponent=mc_exp,
        oracle_exponent=or_exp,
        inconclusive=rel_se > 0.05,
        fit_window=(2, m_hi),
    )
