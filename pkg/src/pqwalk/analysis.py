"""Scaling exponents, crossover fits, data collapse and crossover times.

Both fitted forms are linear in two parameters once inverted::

    1/<x^2>  = alpha' t^-2 + beta' t^-nu        (crossover form)
    1/f(z)   = alpha + beta z^mu                (scaling function)

so the nonlinear exponent is scanned on a grid, the linear pair is solved by
non-negative least squares for each grid value, and the best grid point is
polished with a bounded scalar minimization.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar, nnls

from .errors import DataError
from .observables import DistributionSnapshot, MomentPoint

NU_GRID = np.round(np.arange(0.5, 2.0 + 1e-9, 0.005), 6)
MU_GRID = np.round(np.arange(0.25, 2.0 + 1e-9, 0.005), 6)
GRID_STEP = 0.005
# beta' t^(2-nu) below this fraction of alpha' over the whole window: pure t^2
DEGENERATE_RATIO = 1e-3
PC_THRESHOLD = 1.45


@dataclass
class FitResult:
    nu: float
    alpha_prime: float
    beta_prime: float
    residual: float
    t_min_used: int
    t_max_used: int = 0
    n_points: int = 0
    degenerate: bool = False  # beta' term negligible: ballistic, nu reported as 2
    clipped: bool = False  # unconstrained solution had a negative coefficient
    unstable: bool = False

    def model(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return t**2 / (self.alpha_prime + self.beta_prime * t ** (2.0 - self.nu))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ScalingFitResult:
    alpha: float
    beta: float
    mu: float
    residual: float
    mu_indeterminate: bool = False

    def model(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if self.mu_indeterminate:
            return np.full_like(z, 1.0 / self.alpha)
        return 1.0 / (self.alpha + self.beta * z**self.mu)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class CollapseCurve:
    gamma: float
    t: int
    z: np.ndarray
    value: np.ndarray


class Region(str, enum.Enum):
    CENTRAL = "central"
    BALLISTIC = "ballistic"


@dataclass
class ExponentScanResult:
    table: list  # (p, nu, residual) sorted by p
    p_c_estimate: float | None
    fits: list

    def to_dict(self) -> dict:
        return {"table": [list(map(float, row)) for row in self.table],
                "p_c_estimate": self.p_c_estimate,
                "fits": [f.to_dict() for f in self.fits]}


def _series_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, tuple) and len(series) == 2:
        t, m2 = series
    else:
        pts = list(series)
        t = [p.t for p in pts]
        m2 = [p.m2 for p in pts]
    return np.asarray(t, dtype=np.float64), np.asarray(m2, dtype=np.float64)


def log_sample(t: np.ndarray, t_lo: float, t_hi: float, n: int = 200) -> np.ndarray:
    """Indices into sorted ``t`` nearest to ``n`` log-spaced targets in ``[t_lo, t_hi]``."""
    targets = np.geomspace(t_lo, t_hi, n)
    idx = np.clip(np.searchsorted(t, targets), 0, t.size - 1)
    left = np.clip(idx - 1, 0, t.size - 1)
    pick = np.where(np.abs(t[left] - targets) <= np.abs(t[idx] - targets), left, idx)
    pick = pick[(t[pick] >= t_lo) & (t[pick] <= t_hi)]
    return np.unique(pick)


def _two_term_nnls(c1, c2, y):
    """min || [c1 c2] w - y || with w >= 0; columns rescaled for conditioning."""
    s1 = np.linalg.norm(c1) or 1.0
    s2 = np.linalg.norm(c2) or 1.0
    w, _ = nnls(np.column_stack([c1 / s1, c2 / s2]), y)
    return w[0] / s1, w[1] / s2


def _crossover_at(nu, t, m2):
    # weight rows by m2 so residuals are relative deviations
    alpha, beta = _two_term_nnls(m2 * t**-2.0, m2 * t**-nu, np.ones_like(t))
    inv = alpha * t**-2.0 + beta * t**-nu
    if not np.all(inv > 0):
        return alpha, beta, np.inf
    r = np.log(m2) + np.log(inv)
    return alpha, beta, float(np.sqrt(np.mean(r**2)))


def _grid_fit(residual_at, grid):
    res = np.array([residual_at(v)[2] for v in grid])
    k = int(np.argmin(res))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    best = grid[k]
    if hi > lo:
        opt = minimize_scalar(lambda v: residual_at(v)[2], bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-7})
        if opt.fun <= res[k]:
            best = float(opt.x)
    return float(best), residual_at(best)


def fit_crossover(series, t_min: int | None = None, n_samples: int = 200) -> FitResult:
    """Fit ``<x^2> = t^2 / (alpha' + beta' t^(2-nu))`` for ``t >= t_min``.

    ``series`` is a list of :class:`MomentPoint` or a ``(t, m2)`` pair of
    arrays. The window is subsampled uniformly in ``log t``. ``t_min``
    defaults to ``T / 20``.
    """
    t_all, m2_all = _series_arrays(series)
    order = np.argsort(t_all)
    t_all, m2_all = t_all[order], m2_all[order]
    T = float(t_all[-1])
    if t_min is None:
        t_min = max(1, int(T // 20))
    if T < 4 * t_min:
        raise DataError(f"series ends at t={T:g}; need at least 4 * t_min = {4 * t_min}")
    pick = log_sample(t_all, t_min, T, n_samples)
    t, m2 = t_all[pick], m2_all[pick]
    if t.size < 4:
        raise DataError("fewer than 4 points in the fit window")
    if np.any(m2 <= 0) or not np.all(np.isfinite(m2)):
        raise DataError("second moment must be positive and finite in the fit window")

    nu, (alpha, beta, resid) = _grid_fit(lambda v: _crossover_at(v, t, m2), NU_GRID)
    unc = np.linalg.lstsq(np.column_stack([m2 * t**-2.0, m2 * t**-nu]),
                          np.ones_like(t), rcond=None)[0]
    clipped = bool(np.any(unc < 0))
    unstable = alpha <= 0 and beta <= 0
    contribution = beta * np.max(t ** (2.0 - nu)) if beta > 0 else 0.0
    degenerate = bool(not unstable and (contribution < DEGENERATE_RATIO * alpha
                                        or abs(nu - 2.0) < 2 * GRID_STEP))
    if degenerate:
        # refit the pure-ballistic model t^2 / alpha'
        a_only = float(np.exp(np.mean(np.log(t**2 / m2))))
        alpha, beta, nu = a_only, 0.0, 2.0
        resid = float(np.sqrt(np.mean((np.log(m2) - np.log(t**2 / a_only)) ** 2)))
    return FitResult(nu=float(nu), alpha_prime=float(alpha), beta_prime=float(beta),
                     residual=float(resid), t_min_used=int(t[0]), t_max_used=int(t[-1]),
                     n_points=int(t.size), degenerate=degenerate, clipped=clipped,
                     unstable=bool(unstable))


def _scaling_at(mu, z, f):
    alpha, beta = _two_term_nnls(f, f * z**mu, np.ones_like(z))
    inv = alpha + beta * z**mu
    if not np.all(inv > 0):
        return alpha, beta, np.inf
    r = np.log(f) + np.log(inv)
    return alpha, beta, float(np.sqrt(np.mean(r**2)))


def fit_scaling_function(z, f=None) -> ScalingFitResult:
    """Fit ``f(z) = 1 / (alpha + beta z^mu)``.

    Accepts ``(z, f)`` arrays or a single list of ``(z, f)`` pairs.
    """
    if f is None:
        pts = np.asarray(z, dtype=np.float64)
        z, f = pts[:, 0], pts[:, 1]
    z = np.asarray(z, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if z.size < 4:
        raise DataError(f"need at least 4 points, got {z.size}")
    if np.any(z <= 0) or np.any(f <= 0):
        raise DataError("z and f must be positive")
    if z.max() / z.min() < 10:
        raise DataError("points must span at least one decade in z")
    mu, (alpha, beta, resid) = _grid_fit(lambda v: _scaling_at(v, z, f), MU_GRID)
    indeterminate = bool(beta * np.max(z**mu) < DEGENERATE_RATIO * alpha)
    if indeterminate:
        alpha = float(np.exp(np.mean(np.log(1.0 / f))))
        resid = float(np.sqrt(np.mean((np.log(f) + np.log(alpha)) ** 2)))
        return ScalingFitResult(alpha, 0.0, float("nan"), resid, True)
    return ScalingFitResult(float(alpha), float(beta), float(mu), float(resid), False)


def rescale_distribution(snap: DistributionSnapshot, gamma: float) -> CollapseCurve:
    """Points ``(x / t^gamma, t^gamma P(x, t))``."""
    if snap.t < 1:
        raise DataError("rescaling needs t >= 1")
    s = float(snap.t) ** gamma
    xs = np.asarray(snap.xs, dtype=np.float64)
    return CollapseCurve(gamma, snap.t, xs / s, np.asarray(snap.probs, dtype=np.float64) * s)


def coarse_grain(snap: DistributionSnapshot, width: int) -> DistributionSnapshot:
    """Sum ``P`` over blocks of ``width`` sites (block centre as the site).

    Removes the site-scale sublattice oscillation before collapse comparisons;
    the result is a probability density per site.
    """
    if width <= 1:
        return snap
    xs = np.asarray(snap.xs)
    start = xs[0] - ((xs[0] % width) + width) % width
    edges = np.arange(start, xs[-1] + width + 1, width)
    mass, _ = np.histogram(xs, bins=edges - 0.5, weights=snap.probs)
    centres = edges[:-1] + (width - 1) / 2.0
    return DistributionSnapshot(snap.t, centres, mass / width, dict(snap.meta))


def curve_deviation(curves: Sequence[tuple[np.ndarray, np.ndarray]], lo: float, hi: float,
                    n_grid: int = 401) -> float:
    """Mean pairwise RMS difference on ``[lo, hi]`` over mean amplitude.

    Each curve is ``(z, value)`` with ``z`` increasing; values are linearly
    interpolated onto a shared grid.
    """
    if len(curves) < 2:
        raise DataError("need at least two curves")
    if not hi > lo:
        raise DataError("curves have no common support in the region")
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([np.interp(grid, z, v) for z, v in curves])
    amp = float(np.mean(np.abs(vals)))
    if amp == 0.0:
        raise DataError("curves vanish on the common region")
    devs = [np.sqrt(np.mean((vals[i] - vals[j]) ** 2))
            for i in range(len(vals)) for j in range(i + 1, len(vals))]
    return float(np.mean(devs) / amp)


def _ballistic_peak(curve: CollapseCurve, side: int) -> float:
    # outer part of the profile, |x| >= t/4, excludes the central peak
    x = curve.z * float(curve.t) ** curve.gamma
    sel = (side * x >= curve.t / 4.0)
    if not np.any(sel):
        raise DataError(f"no ballistic region in curve at t={curve.t}")
    k = np.argmax(np.where(sel, curve.value, -np.inf))
    return float(curve.z[k])


def collapse_quality(curves: Sequence[CollapseCurve], region=Region.CENTRAL) -> float:
    """Normalized mean pairwise deviation of rescaled curves; 0 is perfect collapse.

    ``CENTRAL`` compares ``|z| <= 1``. ``BALLISTIC`` compares windows of
    +-20% around each ballistic peak (right and left separately, averaged),
    where the peak position is the mean over curves of the outer maximum.
    The metric does not depend on the order of ``curves``.
    """
    region = Region(region)
    curves = sorted(curves, key=lambda c: c.t)
    if len(curves) < 2:
        raise DataError("need at least two curves")
    gammas = {c.gamma for c in curves}
    if len(gammas) != 1:
        raise DataError(f"curves must share gamma, got {sorted(gammas)}")
    if region is Region.CENTRAL:
        windows = [(-1.0, 1.0)]
    else:
        windows = []
        for side in (1, -1):
            zp = float(np.mean([_ballistic_peak(c, side) for c in curves]))
            windows.append(tuple(sorted((0.8 * zp, 1.2 * zp))))
    scores = []
    for wlo, whi in windows:
        lo = max(wlo, max(c.z.min() for c in curves))
        hi = min(whi, min(c.z.max() for c in curves))
        scores.append(curve_deviation([(c.z, c.value) for c in curves], lo, hi))
    return float(np.mean(scores))


# the first few steps carry lattice-parity transients that do not scale with p
EARLY_T = (5, 20)


def moment_collapse_quality(series_by_scale: dict, z_lo: float | None = None,
                            z_hi: float | None = None, t_min: int = EARLY_T[0]) -> float:
    """Collapse metric for ``m2/t^2`` plotted against ``scale * t``.

    ``series_by_scale`` maps the scale factor (``p`` or ``1-p``) to a moment
    series. The comparison range defaults to the overlap of all curves.
    Times below ``t_min`` are dropped, matching the early window used by
    :func:`crossover_time`.
    """
    curves = []
    for scale, series in sorted(series_by_scale.items()):
        t, m2 = _series_arrays(series)
        keep = t >= max(t_min, 1)
        curves.append((scale * t[keep], m2[keep] / t[keep] ** 2))
    lo = max(c[0].min() for c in curves)
    hi = min(c[0].max() for c in curves)
    if z_lo is not None:
        lo = max(lo, z_lo)
    if z_hi is not None:
        hi = min(hi, z_hi)
    return curve_deviation(curves, lo, hi)


def crossover_time(series, delta: float = 0.2) -> int:
    """First ``t >= 5`` with ``m2/t^2 < (1 - delta) * median(m2/t^2 for 5 <= t <= 20)``.

    Returns ``T + 1`` if the ratio never drops that far.
    """
    if not 0.0 < delta < 1.0:
        raise DataError(f"delta must lie in (0, 1), got {delta}")
    t, m2 = _series_arrays(series)
    if t.size < 20:
        raise DataError(f"series has {t.size} points; need at least 20")
    t0, t1 = EARLY_T
    early = (t >= t0) & (t <= t1)
    if not np.any(early):
        raise DataError(f"series has no points in {t0} <= t <= {t1}")
    ratio = m2[t >= t0] / t[t >= t0] ** 2
    c_early = float(np.median(m2[early] / t[early] ** 2))
    below = np.flatnonzero(ratio < (1.0 - delta) * c_early)
    if below.size == 0:
        return int(t.max()) + 1
    return int(t[t >= t0][below[0]])


def loglog_slope(t, y, t_lo: float, t_hi: float) -> float:
    """Least-squares slope of ``log y`` against ``log t`` on ``[t_lo, t_hi]``."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sel = (t >= t_lo) & (t <= t_hi) & (y > 0)
    if sel.sum() < 2:
        raise DataError("not enough positive points for a slope")
    return float(np.polyfit(np.log(t[sel]), np.log(y[sel]), 1)[0])


def estimate_pc(ps, nus, threshold: float = PC_THRESHOLD) -> float | None:
    for p, nu in sorted(zip(ps, nus)):
        if nu >= threshold:
            return float(p)
    return None


def exponent_scan(ps: Sequence[float], base, t_min: int | None = None,
                  workers: int | None = None) -> ExponentScanResult:
    """Run ``base`` with each persistence ``p`` and fit the crossover form."""
    from .ensemble import run_ensemble

    ps = sorted(float(p) for p in ps)
    if any(not 0.0 < p < 1.0 for p in ps):
        raise DataError("scan values must lie strictly between 0 and 1")
    table, fits = [], []
    for p in ps:
        cfg = dataclasses.replace(base, policy=dataclasses.replace(base.policy, p=p))
        res = run_ensemble(cfg, workers=workers)
        fit = fit_crossover((res.times, res.mean_x2), t_min)
        fits.append(fit)
        table.append((p, fit.nu, fit.residual))
    return ExponentScanResult(table, estimate_pc([r[0] for r in table], [r[1] for r in table]), fits)


# --- files -----------------------------------------------------------------

def write_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=float)
        fh.write("\n")


def write_collapse_csv(curves: Sequence[CollapseCurve], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z", "value", "t"])
        for c in curves:
            for z, v in zip(c.z, c.value):
                w.writerow([repr(float(z)), repr(float(v)), int(c.t)])


def read_collapse_csv(path, gamma: float) -> list[CollapseCurve]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for t in np.unique(data[:, 2]).astype(int):
        rows = data[data[:, 2] == t]
        out.append(CollapseCurve(gamma, int(t), rows[:, 0], rows[:, 1]))
    return out


def moment_points(t, m1, m2) -> list[MomentPoint]:
    return [MomentPoint(int(a), float(b), float(c)) for a, b, c in zip(t, m1, m2)]


__all__ = [
    "FitResult", "ScalingFitResult", "CollapseCurve", "Region", "ExponentScanResult",
    "fit_crossover", "fit_scaling_function", "rescale_distribution", "coarse_grain",
    "collapse_quality", "moment_collapse_quality", "curve_deviation", "crossover_time",
    "loglog_slope", "estimate_pc", "exponent_scan", "write_json", "write_collapse_csv",
    "read_collapse_csv", "moment_points",
]
