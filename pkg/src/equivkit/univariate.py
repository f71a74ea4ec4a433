"""Univariate equivalence decisions: TOST and its size-corrected variants.

The classical TOST declares equivalence when the 1-2*alpha0 confidence
interval falls inside (-c0, c0); it is conservative because its size drops
below alpha0 as the standard error grows.  The corrections here restore
size alpha0 exactly, each moving a different dial:

* alpha-TOST raises the level alpha (shrinking the t multiplier),
* delta-TOST widens the margins c with the multiplier fixed,
* cTOST sets the multiplier to zero and solves for the margin directly,
  which is the most powerful choice within the size-matched family,
* cTOST* additionally calibrates the target level to undo the small-sample
  bias introduced by plugging in an estimated standard error.

All solvers push the size residual below strict tolerances (1e-10 for the
cTOST margin, 1e-8 for the bisections) and report iteration counts, so a
re-evaluation through :mod:`equivkit.powerkernel` closes the loop.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .base import (
    ALPHA0_DEFAULT,
    C0_DEFAULT,
    DecisionReport,
    EquivalenceSpec,
    ExtrapolationError,
    InputError,
    NonConvergenceError,
)
from .powerkernel import _leggauss, _omega_batch
from .statdist import chi2_quantile, rng_stream, t_quantile

__all__ = [
    "UnivSummary",
    "UnivAdjustment",
    "tost_decide",
    "ctost_adjust",
    "alpha_tost_adjust",
    "delta_tost_adjust",
    "margin_for_multiplier",
    "ctost_star_calibrate",
    "CalibrationTable",
    "build_calibration_table",
    "default_calibration_table",
    "ctost_decide",
    "decide",
]

STRATEGIES = ("quadrature", "monte-carlo", "table-lookup")

# environment override for the bundled calibration table
TABLE_ENV_VAR = "EQUIVKIT_CALIBRATION_TABLE"


@dataclass(frozen=True)
class UnivSummary:
    """Sufficient statistics of a one-dimensional equivalence problem.

    theta_hat is the estimated effect on the analysis (log) scale, sigma1_hat
    its standard error, and nu2 the degrees of freedom of the variance
    estimate.
    """

    theta_hat: float
    sigma1_hat: float
    nu2: int

    def __post_init__(self):
        if not np.isfinite(self.theta_hat):
            raise InputError("theta_hat must be finite")
        if not (self.sigma1_hat > 0):
            raise InputError(f"sigma1_hat must be positive, got {self.sigma1_hat}")
        if self.nu2 < 1:
            raise InputError(f"nu2 must be >= 1, got {self.nu2}")


@dataclass(frozen=True)
class UnivAdjustment:
    """Resolved (t, c) pair for a size-matched test, plus solver diagnostics.

    t_used is the standard-error multiplier actually applied and c_used the
    margin.  alpha_adj carries the adjusted level for alpha-TOST, alpha_c the
    calibrated target level for cTOST*.  residual is the final size residual
    of the matching equation.
    """

    method: str
    t_used: float
    c_used: float
    alpha_adj: float | None = None
    alpha_c: float | None = None
    iterations: int = 0
    converged: bool = True
    saturated: bool = False
    clamped: bool = False
    residual: float = 0.0


# ---------------------------------------------------------------------------
# margin matching at fixed multiplier zero (the cTOST equation)
# ---------------------------------------------------------------------------

def _size_fixed(c, sigma, c0):
    """Size of the fixed-margin test: Phi((c0+c)/s) - Phi((c0-c)/s)."""
    return special.ndtr((c0 + c) / sigma) - special.ndtr((c0 - c) / sigma)


def _match_margin(sigma, level, c0=C0_DEFAULT, tol=1e-10, max_iter=100):
    """Solve Phi((c0+c)/s) - Phi((c0-c)/s) = level for c, elementwise.

    Newton iteration started from c0 - s * z_{1-level} (or c0 when that is
    nonpositive), guarded by a maintained bracket: any step leaving it is
    replaced by bisection, so the iteration cannot diverge.  Returns
    (c, iterations, converged_mask) with c matching the broadcast shape.
    """
    sigma, level = np.broadcast_arrays(
        np.asarray(sigma, dtype=float), np.asarray(level, dtype=float)
    )
    shape = sigma.shape
    sigma = sigma.ravel()
    level = level.ravel()
    if np.any(sigma <= 0):
        raise InputError("sigma must be positive")
    if np.any((level <= 0) | (level >= 1)):
        raise InputError("level must lie in (0, 1)")

    z = special.ndtri(1.0 - level)
    c = np.where(c0 - sigma * z > 0, c0 - sigma * z, c0)
    lo = np.zeros_like(c)
    hi = np.maximum(c, c0) + 10.0 * sigma
    grow = _size_fixed(hi, sigma, c0) < level
    while grow.any():
        hi[grow] *= 2.0
        grow = _size_fixed(hi, sigma, c0) < level

    conv = np.zeros(c.size, dtype=bool)
    iters = 0
    for it in range(max_iter):
        resid = _size_fixed(c, sigma, c0) - level
        conv |= np.abs(resid) <= tol
        iters = it + 1
        if conv.all():
            break
        lo = np.where(resid < 0, np.maximum(lo, c), lo)
        hi = np.where(resid > 0, np.minimum(hi, c), hi)
        deriv = (
            np.exp(-0.5 * ((c0 + c) / sigma) ** 2)
            + np.exp(-0.5 * ((c0 - c) / sigma) ** 2)
        ) / (sigma * np.sqrt(2.0 * np.pi))
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = c - resid / deriv
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        c = np.where(conv, c, cand)
    return c.reshape(shape), iters, conv.reshape(shape)


def ctost_adjust(sigma1_hat: float, nu2: int, spec: EquivalenceSpec = None,
                 tol: float = 1e-10, max_iter: int = 100) -> UnivAdjustment:
    """Margin c with multiplier zero matching size alpha0 at sigma1_hat.

    The margin always exists and is unique: the size is 0 at c = 0 and
    increases to 1, so the guarded Newton iteration converges for any
    positive standard error.  nu2 does not enter the equation (the
    multiplier is zero); it is accepted for interface symmetry.
    """
    spec = spec or EquivalenceSpec()
    if not (sigma1_hat > 0):
        raise InputError(f"sigma1_hat must be positive, got {sigma1_hat}")
    c, iters, conv = _match_margin(sigma1_hat, spec.alpha0, spec.c0,
                                   tol=tol, max_iter=max_iter)
    c = float(c)
    resid = float(_size_fixed(c, sigma1_hat, spec.c0) - spec.alpha0)
    if not bool(conv):
        raise NonConvergenceError(
            f"margin iteration did not reach |residual| <= {tol} "
            f"in {max_iter} steps", last=c)
    return UnivAdjustment(method="ctost", t_used=0.0, c_used=c,
                          iterations=iters, converged=True, residual=resid)


# ---------------------------------------------------------------------------
# level and margin adjustments at nonzero multiplier
# ---------------------------------------------------------------------------

def margin_for_multiplier(sigma1: float, nu2: int, t: float,
                          spec: EquivalenceSpec = None,
                          tol: float = 1e-8, max_iter: int = 200) -> float:
    """Margin c matching size alpha0 when the test subtracts t * s.

    Solved by bisection on c; the size is strictly increasing in c, 0 as
    c -> 0 and 1 as c -> infinity, so a root always exists.  t = 0
    reproduces the cTOST margin (up to the looser tolerance).
    """
    spec = spec or EquivalenceSpec()
    if not (sigma1 > 0) or t < 0:
        raise InputError("need sigma1 > 0 and t >= 0")
    lo = 0.0
    hi = spec.c0 + 10.0 * sigma1 * (1.0 + t)
    while _omega_batch(spec.c0, sigma1, nu2, t, hi) < spec.alpha0:
        hi *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        resid = _omega_batch(spec.c0, sigma1, nu2, t, mid) - spec.alpha0
        if abs(resid) <= tol:
            return mid
        if resid < 0:
            lo = mid
        else:
            hi = mid
    raise NonConvergenceError(
        f"margin bisection stalled at width {hi - lo:.3e}", last=0.5 * (lo + hi))


def delta_tost_adjust(sigma1_hat: float, nu2: int,
                      spec: EquivalenceSpec = None,
                      tol: float = 1e-8) -> UnivAdjustment:
    """Widened margins c* at the nominal level alpha0 (multiplier t_{alpha0,nu2})."""
    spec = spec or EquivalenceSpec()
    t = float(t_quantile(spec.alpha0, nu2))
    c = margin_for_multiplier(sigma1_hat, nu2, t, spec, tol=tol)
    resid = float(_omega_batch(spec.c0, sigma1_hat, nu2, t, c) - spec.alpha0)
    return UnivAdjustment(method="delta-tost", t_used=t, c_used=c,
                          converged=True, residual=resid)


def alpha_tost_adjust(sigma1_hat: float, nu2: int,
                      spec: EquivalenceSpec = None,
                      tol: float = 1e-8, max_iter: int = 200) -> UnivAdjustment:
    """Adjusted level alpha* with margins fixed at c0.

    Bisection over alpha in (alpha0, 0.5]: the size of the test with
    multiplier t_{alpha,nu2} increases in alpha, reaching its supremum at
    alpha = 0.5 where the multiplier vanishes.  If even that supremum is
    below alpha0 no interior solution exists and the boundary value is
    returned with ``saturated=True``.
    """
    spec = spec or EquivalenceSpec()
    if not (sigma1_hat > 0):
        raise InputError(f"sigma1_hat must be positive, got {sigma1_hat}")
    c0, alpha0 = spec.c0, spec.alpha0

    size_sup = float(_size_fixed(c0, sigma1_hat, c0) - alpha0)
    if size_sup < 0:
        return UnivAdjustment(method="alpha-tost", t_used=0.0, c_used=c0,
                              alpha_adj=0.5, saturated=True, residual=size_sup)

    lo, hi = alpha0, 0.5
    alpha = alpha0
    resid = None
    for it in range(max_iter):
        alpha = 0.5 * (lo + hi)
        t = float(t_quantile(alpha, nu2))
        resid = float(_omega_batch(c0, sigma1_hat, nu2, t, c0) - alpha0)
        if abs(resid) <= tol:
            return UnivAdjustment(method="alpha-tost", t_used=t, c_used=c0,
                                  alpha_adj=alpha, iterations=it + 1,
                                  converged=True, residual=resid)
        if resid < 0:
            lo = alpha
        else:
            hi = alpha
    raise NonConvergenceError(
        f"alpha bisection stalled, residual {resid:.3e}", last=alpha)


def _alpha_star_batch(sigma, nu2, c0, alpha0, tol=1e-8, max_iter=60):
    """Vectorized alpha-TOST solve; returns (alpha*, t*, saturated)."""
    sigma = np.asarray(sigma, dtype=float)
    saturated = _size_fixed(c0, sigma, c0) < alpha0
    lo = np.full(sigma.shape, alpha0)
    hi = np.full(sigma.shape, 0.5)
    done = saturated.copy()
    alpha = np.where(saturated, 0.5, alpha0)
    for _ in range(max_iter):
        if done.all():
            break
        mid = 0.5 * (lo + hi)
        t = t_quantile(np.where(done, 0.25, mid), nu2)  # placeholder for done rows
        resid = _omega_batch(c0, sigma, nu2, t, c0) - alpha0
        hit = np.abs(resid) <= tol
        alpha = np.where(~done & hit, mid, alpha)
        done |= hit
        lo = np.where(~done & (resid < 0), mid, lo)
        hi = np.where(~done & (resid >= 0), mid, hi)
    alpha = np.where(done, alpha, 0.5 * (lo + hi))
    t_star = np.where(saturated, 0.0, t_quantile(np.clip(alpha, 1e-12, 0.5), nu2))
    return alpha, t_star, saturated


# ---------------------------------------------------------------------------
# small-sample calibration of the target level (cTOST*)
# ---------------------------------------------------------------------------

def _conditional_chi_rule(nu2: int, n_nodes: int = 64):
    """Nodes and density-weighted weights for u = s*/s given s.

    u is sigma-free: u = sqrt(V / nu2) with V chi-square(nu2).  The rule
    covers the central mass, leaving ~1e-10 in the tails.
    """
    lo = np.sqrt(chi2_quantile(5e-11, nu2) / nu2)
    hi = np.sqrt(chi2_quantile(1.0 - 5e-11, nu2) / nu2)
    x, w = _leggauss(n_nodes)
    half = 0.5 * (hi - lo)
    u = lo + half * (x + 1.0)
    nu = float(nu2)
    logpdf = (
        np.log(2.0)
        + 0.5 * nu * (np.log(nu) - np.log(2.0))
        + (nu - 1.0) * np.log(u)
        - 0.5 * nu * u * u
        - special.gammaln(0.5 * nu)
    )
    return u, half * w * np.exp(logpdf)


def _expected_size(sigma, level, nu2, c0, u, wu):
    """E over s* = sigma*u of the size at the margin solved with s*.

    The margin is matched at ``level`` using the perturbed scale sigma*u,
    then its realized size is evaluated at the observed sigma; the
    expectation over u is the quadrature inner product.
    """
    sigma = np.asarray(sigma, dtype=float)
    lv = np.asarray(level, dtype=float)
    chat, _, _ = _match_margin(sigma[..., None] * u, lv[..., None], c0)
    om = _size_fixed(chat, sigma[..., None], c0)
    return om @ wu


def _calibrate_level(sigma, nu2, c0, alpha0, strategy="quadrature",
                     iterations=1, to_convergence=False, conv_tol=1e-5,
                     max_iterations=50, mc_n=100_000, seed=0):
    """Shared cTOST* level iteration; vectorized over sigma.

    Returns (alpha_c, iterations_run, clamped_mask, converged_mask).
    converged is meaningful only in ``to_convergence`` mode; in fixed-count
    mode it is all-True.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if strategy == "quadrature":
        u, wu = _conditional_chi_rule(nu2)
    elif strategy == "monte-carlo":
        rng = rng_stream(seed, "ctost-star-mc")
        u = np.sqrt(rng.chisquare(nu2, size=mc_n) / nu2)
        wu = np.full(mc_n, 1.0 / mc_n)
    else:
        raise InputError(f"unknown calibration strategy {strategy!r}")

    a = np.full(sigma.shape, alpha0)
    clamped = np.zeros(sigma.shape, dtype=bool)
    frozen = np.zeros(sigma.shape, dtype=bool)
    n_rounds = max_iterations if to_convergence else iterations
    it_run = 0
    for _ in range(n_rounds):
        e = _expected_size(sigma, a, nu2, c0, u, wu)
        a_new = alpha0 + a - e
        over = a_new > alpha0
        clamped |= over
        a_new = np.where(over, alpha0, a_new)
        # very noisy small samples can overshoot past zero; keep the level
        # positive so the matched margin collapses instead of erroring
        a_new = np.maximum(a_new, 1e-10)
        delta = np.abs(a_new - a)
        a = np.where(frozen, a, a_new)
        it_run += 1
        if to_convergence:
            frozen |= delta <= conv_tol
            if frozen.all():
                break
    converged = frozen if to_convergence else np.ones(sigma.shape, dtype=bool)
    return a, it_run, clamped, converged


def ctost_star_calibrate(sigma1_hat: float, nu2: int,
                         spec: EquivalenceSpec = None,
                         strategy: str = "quadrature",
                         iterations: int = 1,
                         to_convergence: bool = False,
                         conv_tol: float = 1e-5,
                         max_iterations: int = 50,
                         mc_n: int = 100_000,
                         seed: int = 0,
                         table: "CalibrationTable" = None) -> UnivAdjustment:
    """Calibrated level alpha_c and the refined margin solved at that level.

    The plug-in margin treats sigma1_hat as exact; its realized size,
    averaged over the sampling variation of the standard error, exceeds
    alpha0 for small nu2.  The calibration shifts the target level by the
    exceedance, by default in a single pass, optionally iterating to a
    conv_tol fixed point.  Strategies: deterministic quadrature (default),
    monte-carlo with (mc_n, seed), or table-lookup against a precomputed
    grid (raising an extrapolation error outside it).
    """
    spec = spec or EquivalenceSpec()
    if not (sigma1_hat > 0):
        raise InputError(f"sigma1_hat must be positive, got {sigma1_hat}")
    if strategy not in STRATEGIES:
        raise InputError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")

    if strategy == "table-lookup":
        tbl = table if table is not None else default_calibration_table()
        if not (np.isclose(tbl.c0, spec.c0) and np.isclose(tbl.alpha0, spec.alpha0)):
            raise InputError(
                f"table was built for (c0={tbl.c0}, alpha0={tbl.alpha0}), "
                f"spec has (c0={spec.c0}, alpha0={spec.alpha0})")
        alpha_c = float(tbl.lookup(sigma1_hat, nu2))
        it_run, clamped, conv = 0, alpha_c >= spec.alpha0, True
        alpha_c = min(alpha_c, spec.alpha0)
    else:
        a, it_run, clamped_m, conv_m = _calibrate_level(
            sigma1_hat, nu2, spec.c0, spec.alpha0, strategy=strategy,
            iterations=iterations, to_convergence=to_convergence,
            conv_tol=conv_tol, max_iterations=max_iterations,
            mc_n=mc_n, seed=seed)
        alpha_c = float(a[0])
        clamped = bool(clamped_m[0])
        conv = bool(conv_m[0])

    c, _, _ = _match_margin(sigma1_hat, alpha_c, spec.c0)
    c = float(c)
    resid = float(_size_fixed(c, sigma1_hat, spec.c0) - alpha_c)
    return UnivAdjustment(method="ctost-star", t_used=0.0, c_used=c,
                          alpha_c=alpha_c, iterations=it_run,
                          converged=conv, clamped=clamped, residual=resid)


# ---------------------------------------------------------------------------
# precomputed calibration tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationTable:
    """Grid of calibrated levels alpha_c over (sigma1, nu2).

    Lookup interpolates bilinearly in (log sigma1, 1/nu2), which matches the
    curvature of alpha_c far better than the raw coordinates; queries at
    grid nodes reproduce the stored entries exactly.
    """

    sigma_grid: np.ndarray
    nu_grid: np.ndarray
    alpha_c: np.ndarray
    strategy: str
    c0: float
    alpha0: float

    def __post_init__(self):
        sg = np.asarray(self.sigma_grid, dtype=float)
        ng = np.asarray(self.nu_grid, dtype=float)
        ac = np.asarray(self.alpha_c, dtype=float)
        if sg.ndim != 1 or ng.ndim != 1 or sg.size < 2 or ng.size < 2:
            raise InputError("grids must be 1-d with at least 2 points")
        if np.any(np.diff(sg) <= 0) or np.any(np.diff(ng) <= 0):
            raise InputError("grids must be strictly ascending")
        if ac.shape != (sg.size, ng.size):
            raise InputError("alpha_c must have shape (len(sigma_grid), len(nu_grid))")
        object.__setattr__(self, "sigma_grid", sg)
        object.__setattr__(self, "nu_grid", ng)
        object.__setattr__(self, "alpha_c", ac)

    def lookup(self, sigma1, nu2, out_of_range: str = "raise"):
        """Interpolated alpha_c; vectorized over sigma1.

        out_of_range: "raise" -> extrapolation error naming the offending
        coordinate; "nan" -> NaN entries for callers with a fallback path.
        """
        x = np.log(np.atleast_1d(np.asarray(sigma1, dtype=float)))
        scalar = np.isscalar(sigma1) or np.ndim(sigma1) == 0
        xs = np.log(self.sigma_grid)
        # 1/nu is descending in nu; flip to interpolate on an ascending axis
        ys = 1.0 / self.nu_grid[::-1]
        zz = self.alpha_c[:, ::-1]
        y = 1.0 / float(nu2)

        eps = 1e-12
        bad_x = (x < xs[0] - eps) | (x > xs[-1] + eps)
        bad_y = (y < ys[0] - eps) or (y > ys[-1] + eps)
        if bad_y or bad_x.any():
            if out_of_range == "nan":
                pass
            elif bad_y:
                raise ExtrapolationError(
                    f"nu2={nu2} outside table range "
                    f"[{self.nu_grid[0]:.0f}, {self.nu_grid[-1]:.0f}]; "
                    "use the quadrature strategy instead")
            else:
                off = float(np.exp(x[bad_x][0]))
                raise ExtrapolationError(
                    f"sigma1={off:.6g} outside table range "
                    f"[{self.sigma_grid[0]:.6g}, {self.sigma_grid[-1]:.6g}]; "
                    "use the quadrature strategy instead")

        ix = np.clip(np.searchsorted(xs, x), 1, xs.size - 1)
        x0, x1 = xs[ix - 1], xs[ix]
        fx = np.clip((x - x0) / (x1 - x0), 0.0, 1.0)
        iy = int(np.clip(np.searchsorted(ys, y), 1, ys.size - 1))
        y0, y1 = ys[iy - 1], ys[iy]
        fy = min(max((y - y0) / (y1 - y0), 0.0), 1.0)
        v = (
            zz[ix - 1, iy - 1] * (1 - fx) * (1 - fy)
            + zz[ix, iy - 1] * fx * (1 - fy)
            + zz[ix - 1, iy] * (1 - fx) * fy
            + zz[ix, iy] * fx * fy
        )
        if bad_y:
            v = np.full_like(v, np.nan)
        else:
            v = np.where(bad_x, np.nan, v)
        return float(v[0]) if scalar else v

    def to_csv(self, path):
        lines = ["sigma1,nu2,alpha_c,strategy,c0,alpha0"]
        for i, s in enumerate(self.sigma_grid):
            for j, nu in enumerate(self.nu_grid):
                lines.append(
                    f"{s:.17g},{nu:.17g},{self.alpha_c[i, j]:.17g},"
                    f"{self.strategy},{self.c0:.17g},{self.alpha0:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "CalibrationTable":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != "sigma1,nu2,alpha_c,strategy,c0,alpha0":
                raise InputError(f"unrecognized table header {header!r} in {path}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        if not rows:
            raise InputError(f"empty calibration table {path}")
        strategies = {r[3] for r in rows}
        c0s = {r[4] for r in rows}
        alpha0s = {r[5] for r in rows}
        if len(strategies) != 1 or len(c0s) != 1 or len(alpha0s) != 1:
            raise InputError("mixed (strategy, c0, alpha0) in one table")
        sig = np.array([float(r[0]) for r in rows])
        nus = np.array([float(r[1]) for r in rows])
        val = np.array([float(r[2]) for r in rows])
        sg = np.unique(sig)
        ng = np.unique(nus)
        ac = np.full((sg.size, ng.size), np.nan)
        ac[np.searchsorted(sg, sig), np.searchsorted(ng, nus)] = val
        if np.isnan(ac).any():
            raise InputError(f"incomplete grid in calibration table {path}")
        return cls(sigma_grid=sg, nu_grid=ng, alpha_c=ac,
                   strategy=strategies.pop(), c0=float(c0s.pop()),
                   alpha0=float(alpha0s.pop()))


def build_calibration_table(spec: EquivalenceSpec = None,
                            sigma_grid=None, nu_grid=None,
                            strategy: str = "quadrature",
                            seed: int = 0, mc_n: int = 100_000,
                            path=None) -> CalibrationTable:
    """Tabulate alpha_c over a (sigma1, nu2) grid; optionally persist as CSV.

    Each cell runs the same single-pass calibration as
    :func:`ctost_star_calibrate` with the same defaults and seed, so direct
    calls reproduce table entries.  Default grid: sigma1 from 0.01 to 0.3
    in steps of 0.005, nu2 every integer from 5 to 100.
    """
    spec = spec or EquivalenceSpec()
    if sigma_grid is None:
        sigma_grid = np.round(np.arange(0.01, 0.3 + 1e-9, 0.005), 10)
    if nu_grid is None:
        nu_grid = np.arange(5, 101)
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    nu_grid = np.asarray(nu_grid)
    if sigma_grid.size == 0 or nu_grid.size == 0:
        raise InputError("grids must be nonempty")
    if np.any(np.diff(sigma_grid) <= 0) or np.any(np.diff(nu_grid) <= 0):
        raise InputError("grids must be sorted ascending")
    if strategy not in ("quadrature", "monte-carlo"):
        raise InputError(f"table strategy must be quadrature or monte-carlo, got {strategy!r}")

    ac = np.empty((sigma_grid.size, nu_grid.size))
    for j, nu in enumerate(nu_grid):
        a, _, _, _ = _calibrate_level(sigma_grid, int(nu), spec.c0, spec.alpha0,
                                      strategy=strategy, mc_n=mc_n, seed=seed)
        ac[:, j] = a
    table = CalibrationTable(sigma_grid=sigma_grid, nu_grid=nu_grid, alpha_c=ac,
                             strategy=strategy, c0=spec.c0, alpha0=spec.alpha0)
    if path is not None:
        table.to_csv(path)
    return table


@lru_cache(maxsize=4)
def _load_table(path: str) -> CalibrationTable:
    return CalibrationTable.from_csv(path)


def default_calibration_table() -> CalibrationTable:
    """The bundled table (c0 = log 1.25, alpha0 = 0.05), env-var overridable."""
    override = os.environ.get(TABLE_ENV_VAR)
    if override:
        return _load_table(override)
    from importlib.resources import files

    return _load_table(str(files("equivkit.data") / "alpha_c_table.csv"))


# ---------------------------------------------------------------------------
# decisions
# ---------------------------------------------------------------------------

def tost_decide(s: UnivSummary, spec: EquivalenceSpec = None) -> DecisionReport:
    """Classical TOST: reject when theta_hat +- t_{alpha0,nu2} s fits in (-c0, c0)."""
    spec = spec or EquivalenceSpec()
    t = float(t_quantile(spec.alpha0, s.nu2))
    half = t * s.sigma1_hat
    margin = spec.c0 - half
    reject = bool(abs(s.theta_hat) < margin)
    return DecisionReport(
        method="tost", reject=reject, theta_hat=s.theta_hat,
        margins=(margin,), intervals=((s.theta_hat - half, s.theta_hat + half),),
        iip=True, c0=spec.c0, alpha0=spec.alpha0,
        meta={"t_used": t, "c_used": spec.c0, "sigma1_hat": s.sigma1_hat,
              "nu2": s.nu2})


def ctost_decide(s: UnivSummary, spec: EquivalenceSpec = None,
                 refined: bool = False, **calibrate_kwargs) -> DecisionReport:
    """Corrected TOST: reject when |theta_hat| clears the matched margin.

    ``refined`` switches to the calibrated margin (cTOST*); extra keyword
    arguments are forwarded to :func:`ctost_star_calibrate`.  When the
    margin sits below c0 the report carries the interval
    theta_hat +- (c0 - margin), whose inclusion in (-c0, c0) is equivalent
    to rejection; a margin at or above c0 has no such reading and is
    reported with ``iip=False``.
    """
    spec = spec or EquivalenceSpec()
    if refined:
        adj = ctost_star_calibrate(s.sigma1_hat, s.nu2, spec, **calibrate_kwargs)
    else:
        adj = ctost_adjust(s.sigma1_hat, s.nu2, spec)
    margin = adj.c_used
    reject = bool(abs(s.theta_hat) < margin)
    iip = margin < spec.c0
    slack = spec.c0 - margin
    intervals = ((s.theta_hat - slack, s.theta_hat + slack),) if iip else None
    return DecisionReport(
        method=adj.method, reject=reject, theta_hat=s.theta_hat,
        margins=(margin,), intervals=intervals, iip=iip,
        c0=spec.c0, alpha0=spec.alpha0,
        meta={"t_used": adj.t_used, "alpha_c": adj.alpha_c,
              "iterations": adj.iterations, "converged": adj.converged,
              "clamped": adj.clamped, "residual": adj.residual,
              "sigma1_hat": s.sigma1_hat, "nu2": s.nu2})


def decide(s: UnivSummary, spec: EquivalenceSpec = None,
           **kwargs) -> DecisionReport:
    """Dispatch on spec.method; the single entry point used by the CLI."""
    spec = spec or EquivalenceSpec()
    m = spec.method
    if m == "tost":
        return tost_decide(s, spec)
    if m == "ctost":
        return ctost_decide(s, spec, refined=False, **kwargs)
    if m == "ctost-star":
        return ctost_decide(s, spec, refined=True, **kwargs)
    if m == "alpha-tost":
        adj = alpha_tost_adjust(s.sigma1_hat, s.nu2, spec)
        half = adj.t_used * s.sigma1_hat
        margin = spec.c0 - half
        return DecisionReport(
            method="alpha-tost", reject=bool(abs(s.theta_hat) < margin),
            theta_hat=s.theta_hat, margins=(margin,),
            intervals=((s.theta_hat - half, s.theta_hat + half),), iip=True,
            c0=spec.c0, alpha0=spec.alpha0,
            meta={"alpha_adj": adj.alpha_adj, "t_used": adj.t_used,
                  "saturated": adj.saturated, "sigma1_hat": s.sigma1_hat,
                  "nu2": s.nu2})
    if m == "delta-tost":
        adj = delta_tost_adjust(s.sigma1_hat, s.nu2, spec)
        half = adj.t_used * s.sigma1_hat
        margin = adj.c_used - half
        # the interval is compared to the *widened* margins, so inclusion in
        # the nominal box is not implied by rejection
        return DecisionReport(
            method="delta-tost", reject=bool(abs(s.theta_hat) < margin),
            theta_hat=s.theta_hat, margins=(margin,),
            intervals=((s.theta_hat - half, s.theta_hat + half),), iip=False,
            c0=spec.c0, alpha0=spec.alpha0,
            meta={"c_star": adj.c_used, "t_used": adj.t_used,
                  "sigma1_hat": s.sigma1_hat, "nu2": s.nu2})
    raise InputError(f"unknown method {m!r}")
