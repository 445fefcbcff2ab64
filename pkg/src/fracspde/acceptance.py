"""Acceptance suite: identity checks, cross-solver oracles, and threshold
dichotomies, each pinned at its gate tolerance.

Every criterion returns a CriterionResult; run_all executes them in order.
The CLI exposes the same suite as the `selftest` subcommand, and
tests/test_acceptance.py asserts each result.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .frac_time import FracOrders, SampledPath, TimeGrid, semigroup_check
from .grid_spectral import TorusGrid
from .kernels import (
    UnderResolvedWarning,
    kernel_field,
    kernel_variance_integrals,
    scaling_check,
)
from .lp_check import (
    adversarial_family,
    dimension_sweep,
    lp_sweep,
    plancherel_n2star,
    spectral_decay_exponents,
)
from .mittag_leffler import MLParams, ml_eval, ml_eval_array
from .noise import NoiseBasis, NoisePath
from .solver import (
    SpaceTimePath,
    blp_norm,
    final_variance_oracle,
    solve_deterministic,
    solve_l1_oracle,
    solve_semilinear,
    solve_stochastic_additive,
    stochastic_final_ensemble,
)

__all__ = ["CriterionResult", "run_all", "CRITERIA"]


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"criterion {self.index:2d} [{self.name}]: {status} "
            f"({self.elapsed:.1f}s / budget {self.budget:.0f}s) {self.detail}"
        )


def _result(index, name, budget, started, passed, detail) -> CriterionResult:
    return CriterionResult(
        index=index,
        name=name,
        passed=bool(passed),
        detail=detail,
        elapsed=time.perf_counter() - started,
        budget=budget,
    )


def criterion_1_ml_identities() -> CriterionResult:
    """E_{1,1} = exp, E_{2,1}(-x^2) = cos x, E_{1/2,1}(-1) = e erfc(1)."""
    import mpmath as mp

    t0 = time.perf_counter()
    xs = np.linspace(-20.0, 20.0, 400)
    got = ml_eval_array(MLParams(1.0, 1.0), xs)
    with mp.workdps(40):
        ref = np.array([float(mp.exp(mp.mpf(float(x)))) for x in xs])
    err_exp = float(np.max(np.abs(got - ref)))

    ys = np.linspace(0.0, 20.0, 400)
    got2 = ml_eval_array(MLParams(2.0, 1.0), -(ys**2))
    err_cos = float(np.max(np.abs(got2 - np.cos(ys))))

    with mp.workdps(50):
        oracle = mp.mpf(0)
        for k in range(200):
            oracle += mp.mpf(-1) ** k * mp.rgamma(mp.mpf(k) / 2 + 1)
        half = float(oracle)
        cross = float(mp.e * mp.erfc(1))
    got3 = ml_eval(MLParams(0.5, 1.0), -1.0)
    err_half = abs(got3 - half)
    err_cross = abs(got3 - cross)

    passed = err_exp <= 1e-10 and err_cos <= 1e-8 and err_half <= 1e-10
    detail = (
        f"max|E11-exp|={err_exp:.2e} (<=1e-10), max|E21-cos|={err_cos:.2e} "
        f"(<=1e-8), |E(1/2)(-1)-oracle|={err_half:.2e} (<=1e-10), "
        f"closed-form cross-check {err_cross:.2e}"
    )
    return _result(1, "mittag-leffler-identities", 5.0, t0, passed, detail)


def criterion_2_semigroup() -> CriterionResult:
    """I^0.3 I^0.4 = I^0.7 on phi = sin at quadrature accuracy."""
    t0 = time.perf_counter()
    errs = {}
    for n in (2048, 4096):
        grid = TimeGrid(2.0, n)
        path = SampledPath.from_function(grid, np.sin)
        errs[n] = semigroup_check(path, 0.3, 0.4)
    sup = 1.0  # max|sin| on [0, 2]
    passed = errs[2048] <= 1e-4 * sup and errs[4096] <= 0.5 * errs[2048]
    detail = (
        f"disc(2048)={errs[2048]:.2e} (<=1e-4), ratio under refinement "
        f"{errs[2048] / errs[4096]:.2f} (>=2)"
    )
    return _result(2, "fractional-semigroup", 5.0, t0, passed, detail)


def criterion_3_kernel_mass_scaling() -> CriterionResult:
    """Unit mass of p(t, .) over an (alpha, t, d) sweep; parabolic scaling."""
    t0 = time.perf_counter()
    worst_mass = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnderResolvedWarning)
        for dim, n, length in ((1, 256, 30.0), (2, 128, 20.0)):
            grid = TorusGrid(dim, n, length)
            for alpha in (0.3, 0.5, 1.0, 1.5):
                for t in (0.25, 1.0, 4.0):
                    f = kernel_field(FracOrders(alpha, alpha), t, grid)
                    worst_mass = max(worst_mass, abs(f.cell_sum() - 1.0))
        disc = scaling_check(FracOrders(0.6, 0.3), 2.0, TorusGrid(2, 256, 20.0))
    passed = worst_mass <= 1e-8 and disc <= 1e-6
    detail = f"max|mass-1|={worst_mass:.2e} (<=1e-8), scaling disc={disc:.2e} (<=1e-6)"
    return _result(3, "kernel-mass-and-scaling", 60.0, t0, passed, detail)


def criterion_4_ito_isometry() -> CriterionResult:
    """Replicate variance of u-hat(T, xi) against the weight-sum oracle."""
    t0 = time.perf_counter()
    orders = FracOrders(0.5, 0.3)
    grid = TorusGrid(1, 32, 2.0 * math.pi)
    tg = TimeGrid(1.0, 128)
    eta = NoiseBasis("fourier_white", grid, 2).fields()[1]
    reps = 10_000
    ens = stochastic_final_ensemble(orders, [eta], tg, grid, seed=17, replicates=reps)
    var_mc = float(np.mean(np.abs(ens[:, 1]) ** 2))
    var_oracle = float(final_variance_oracle(orders, [eta], tg, grid)[1])
    band = 4.0 * var_oracle * math.sqrt(2.0 / reps)
    passed = abs(var_mc - var_oracle) <= band
    detail = (
        f"var_mc={var_mc:.6e}, oracle={var_oracle:.6e}, "
        f"|diff|={abs(var_mc - var_oracle):.2e} <= 4sigma band {band:.2e}"
    )
    return _result(4, "ito-isometry", 60.0, t0, passed, detail)


def criterion_5_cross_solver() -> CriterionResult:
    """Mild solver vs L1 oracle, pathwise, same seed."""
    t0 = time.perf_counter()
    orders = FracOrders(0.8, 0.25)
    grid = TorusGrid(1, 32, 2.0 * math.pi)
    eta = NoiseBasis("fourier_white", grid, 2).fields()[1]
    rels = {}
    for n in (1024, 2048):
        tg = TimeGrid(1.0, n)
        noise = NoisePath(seed=11, grid=tg, n_modes=1)
        mild = solve_stochastic_additive(orders, [eta], noise)
        oracle = solve_l1_oracle(
            orders, g_stack=[eta], noise=noise, grid=grid, time_grid=tg
        )
        num = math.sqrt(np.sum((mild.snapshots - oracle.snapshots) ** 2) * tg.dt)
        den = math.sqrt(np.sum(mild.snapshots**2) * tg.dt)
        rels[n] = num / den
    passed = rels[2048] <= 5e-2 and rels[2048] < rels[1024]
    detail = (
        f"rel-L2(2048)={rels[2048]:.2e} (<=5e-2), rel-L2(1024)={rels[1024]:.2e}, "
        "decreasing under refinement"
    )
    return _result(5, "cross-solver-agreement", 120.0, t0, passed, detail)


def criterion_6_regularity_gain() -> CriterionResult:
    """Spectral decay of E|u-hat(T, xi)|^2 vs the per-mode quadrature."""
    t0 = time.perf_counter()
    grid = TorusGrid(1, 64, 2.0 * math.pi)
    tg = TimeGrid(1.0, 512)
    basis = NoiseBasis("fourier_white", grid, grid.n_points)
    stack = basis.fields()
    details = []
    passed = True
    for alpha, beta in ((1.0, 1.0), (0.5, 0.25), (0.8, 0.6)):
        orders = FracOrders(alpha, beta)
        ens = stochastic_final_ensemble(
            orders, stack, tg, grid, seed=29, replicates=800
        )
        var_mc = np.mean(np.abs(ens) ** 2, axis=0)
        var_or = (
            kernel_variance_integrals(orders, grid.xi_sq(), tg.t_end).reshape(-1)
            / grid.side_length
        )
        mc = spectral_decay_exponents(var_mc, grid, 2, 10)
        orc = spectral_decay_exponents(var_or, grid, 2, 10)
        ok = abs(mc - orc) <= 0.2
        passed &= ok
        details.append(f"({alpha},{beta}): mc={mc:.3f} oracle={orc:.3f}")
    return _result(
        6, "regularity-gain-law", 600.0, t0, passed, "; ".join(details) + " (+-0.2)"
    )


def criterion_7_dimension_threshold() -> CriterionResult:
    """Mode-variance sums stabilize below d0 and diverge at d0."""
    t0 = time.perf_counter()
    conv = dimension_sweep(
        FracOrders(0.5, 0.25), 3, (8, 16, 32, 64), 2.0 * math.pi, 1.0
    )
    deltas = [b - a for (_, a), (_, b) in zip(conv, conv[1:])]
    growth_last = conv[-1][1] / conv[-2][1] - 1.0
    conv_ok = (
        all(d2 <= 0.55 * d1 for d1, d2 in zip(deltas, deltas[1:]))
        and growth_last <= 0.05
    )
    div = dimension_sweep(FracOrders(1.0, 1.0), 2, (8, 16, 32), 2.0 * math.pi, 1.0)
    growths = [b / a - 1.0 for (_, a), (_, b) in zip(div, div[1:])]
    div_ok = all(g >= 0.20 for g in growths) and all(
        b > a for (_, a), (_, b) in zip(div, div[1:])
    )
    passed = conv_ok and div_ok
    detail = (
        f"d=3 (d0=4) increments {['%.3f' % d for d in deltas]} halving, last "
        f"growth {growth_last:.1%} (<=5%); d=2 (d0=2) growths "
        f"{['%.1f%%' % (100 * g) for g in growths]} (each >=20%)"
    )
    return _result(7, "dimension-threshold", 300.0, t0, passed, detail)


def criterion_8_lp_ratio_stability() -> CriterionResult:
    """N* stability under refinement; p = 2 equals the Plancherel constant."""
    t0 = time.perf_counter()
    orders = FracOrders(0.75, 0.6)
    stars = {2.0: [], 4.0: []}
    base_n2 = None
    for nt, nx in ((128, 128), (256, 256)):
        tg, grid = TimeGrid(1.0, nt), TorusGrid(1, nx, 2.0 * math.pi)
        samples, labels = adversarial_family(orders, tg, grid, n_random=24)
        reports = lp_sweep(orders, [2.0, 4.0], samples, labels)
        for p in (2.0, 4.0):
            stars[p].append(reports[p].n_star)
        if base_n2 is None:
            base_n2, _ = plancherel_n2star(orders, tg, grid)
    changes = {p: abs(stars[p][1] / stars[p][0] - 1.0) for p in stars}
    plancherel_gap = abs(stars[2.0][0] - base_n2) / base_n2
    passed = all(c <= 0.10 for c in changes.values()) and plancherel_gap <= 1e-6
    detail = (
        f"N2*-change={changes[2.0]:.1%}, N4*-change={changes[4.0]:.1%} (<=10%); "
        f"p=2 vs Plancherel rel gap {plancherel_gap:.2e} (<=1e-6)"
    )
    return _result(8, "littlewood-paley-stability", 600.0, t0, passed, detail)


def criterion_9_picard_contraction() -> CriterionResult:
    """Semilinear fixed point: geometric increments, re-solve closure."""
    t0 = time.perf_counter()
    orders = FracOrders(0.7, 0.3)
    tg = TimeGrid(0.5, 256)
    grid = TorusGrid(1, 32, 2.0 * math.pi)
    eta1 = NoiseBasis("fourier_white", grid, 2).fields()[1]
    noise = NoisePath(seed=23, grid=tg, n_modes=1)
    from .grid_spectral import Field

    def f_fn(u):
        return SpaceTimePath(tg, grid, np.sin(u.snapshots) + 1.0)

    def g_fn(u):
        return [
            [Field(grid, 0.1 * u.snapshots[j] * eta1.values)]
            for j in range(tg.n_nodes)
        ]

    tol = 1e-8
    res = solve_semilinear(orders, f_fn, g_fn, noise, tg, grid, picard_tol=tol)
    ratio_max = max(res.ratios) if res.ratios else float("inf")
    det = solve_deterministic(orders, f_fn(res.path))
    sto = solve_stochastic_additive(orders, g_fn(res.path), noise, grid=grid)
    redo = det.snapshots + sto.snapshots
    closure = blp_norm(SpaceTimePath(tg, grid, redo - res.path.snapshots), 2.0)
    passed = res.converged and ratio_max < 1.0 and closure <= tol
    detail = (
        f"{res.iterations} iterations, max ratio {ratio_max:.3f} (<1), "
        f"re-solve increment {closure:.2e} (<= {tol:.0e})"
    )
    return _result(9, "picard-contraction", 120.0, t0, passed, detail)


def criterion_10_determinism() -> CriterionResult:
    """Identical manifest -> byte-identical result tables."""
    import tempfile
    from pathlib import Path

    from . import cli

    t0 = time.perf_counter()
    config = {
        "kind": "ml",
        "a": 1.0,
        "b": 1.0,
        "z_min": -5.0,
        "z_max": 5.0,
        "z_count": 64,
    }
    solve_cfg = {
        "kind": "solve",
        "alpha": 0.7,
        "beta": 0.3,
        "dim": 1,
        "n_per_axis": 16,
        "side_length": 6.283185307179586,
        "t_end": 0.5,
        "n_steps": 64,
        "seed": 5,
        "replicates": 2,
        "n_modes": 2,
    }
    identical = True
    compared = 0
    with tempfile.TemporaryDirectory() as tmp:
        for name, cfg in (("ml", config), ("solve", solve_cfg)):
            outs = []
            for run in ("a", "b"):
                outdir = Path(tmp) / f"{name}-{run}"
                cli.run(dict(cfg, output_dir=str(outdir)))
                outs.append(outdir)
            for fa in sorted(outs[0].glob("*.csv")) + sorted(outs[0].glob("*.ndjson")):
                fb = outs[1] / fa.name
                compared += 1
                if fa.read_bytes() != fb.read_bytes():
                    identical = False
    passed = identical and compared >= 2
    detail = f"{compared} result tables byte-compared across repeated runs"
    return _result(10, "determinism", 60.0, t0, passed, detail)


CRITERIA = (
    criterion_1_ml_identities,
    criterion_2_semigroup,
    criterion_3_kernel_mass_scaling,
    criterion_4_ito_isometry,
    criterion_5_cross_solver,
    criterion_6_regularity_gain,
    criterion_7_dimension_threshold,
    criterion_8_lp_ratio_stability,
    criterion_9_picard_contraction,
    criterion_10_determinism,
)


def run_all(indices=None, echo=print):
    """Run the acceptance criteria (all by default), printing one line each."""
    results = []
    for i, fn in enumerate(CRITERIA, start=1):
        if indices and i not in indices:
            continue
        res = fn()
        results.append(res)
        if echo:
            echo(res.line())
    return results
