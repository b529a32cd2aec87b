"""Analytic causal-effect weights behind regressions of ordered reports.

Two weighting schemes arise for a population of reporting profiles over a
latent law f:

- derivative (slope) weights: densities of the latent law evaluated at the
  profile thresholds, summed per profile and averaged over the population;
- discrete-contrast weights: densities averaged over the treatment-length
  interval ending at each threshold, i.e. (F(tau) - F(tau - delta))/delta.

Their total masses w_x and w_{x,x'} are what make magnitudes of slope and
contrast coefficients comparable (or not). This module computes both exactly,
their per-profile decomposition, the dense-limit analogues for linear scales,
the [1, 2] / [1/2, 1/NB^2] bound diagnostics, and a convolution-shape
diagnostic for the threshold-minus-latent law.

All integrals run through adaptive Gauss-Kronrod quadrature (QUADPACK) at
absolute tolerance 1e-10 on finite intervals; unbounded supports are clipped
at the 1e-12 quantile tails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, UnknownPresetError
from .latent import LatentDistribution, Mixture, Shifted, Truncated, Uniform
from .reporting import DenseScale, ReportingMixture, ThresholdProfile
from .rng import derive_rng

QUAD_ABS_TOL = 1e-10


def integrate_interval(fn, lo: float, hi: float, points=None) -> float:
    """Adaptive quadrature on a finite interval, abs tol 1e-10."""
    if hi <= lo:
        return 0.0
    if points is not None:
        points = [p for p in points if lo < p < hi]
        points = sorted(set(points)) or None
    val, _ = quad(fn, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=500, points=points)
    return val


def _kink_points(dist: LatentDistribution) -> list:
    """Candidate density discontinuities, used as quadrature breakpoints."""
    if isinstance(dist, Uniform):
        return [dist.lo, dist.hi]
    if isinstance(dist, Truncated):
        return [dist.lo, dist.hi] + _kink_points(dist.base)
    if isinstance(dist, Mixture):
        out = []
        for comp in dist.components:
            out.extend(_kink_points(comp))
        return out
    if isinstance(dist, Shifted):
        return [p + dist.delta for p in _kink_points(dist.base)]
    return []


@dataclass(frozen=True)
class ProfileWeight:
    profile_index: int
    probability: float
    per_threshold: tuple
    total: float


@dataclass(frozen=True)
class WeightBreakdown:
    per_profile: tuple
    w_total: float
    context: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "w_total": self.w_total,
            "context": self.context,
            "per_profile": [
                {
                    "profile_index": pw.profile_index,
                    "probability": pw.probability,
                    "per_threshold": list(pw.per_threshold),
                    "total": pw.total,
                }
                for pw in self.per_profile
            ],
        }


def cdf_slope_weight(mixture: ReportingMixture, dist: LatentDistribution, r: int) -> float:
    """Population-averaged latent density at the category-r thresholds.

    For a constant marginal effect beta_j on the latent index, the slope of
    P(R <= r | x) in x_j equals minus this weight times beta_j.
    """
    if not (0 <= r < mixture.rbar):
        raise DomainError(f"category {r} outside 0..{mixture.rbar - 1}")
    taus = mixture.threshold_matrix()[:, r]
    probs = mixture.probabilities()
    return float(np.dot(probs, np.asarray(dist.pdf(taus))))


def mean_slope_total(mixture: ReportingMixture, dist: LatentDistribution) -> WeightBreakdown:
    """Total derivative weight w_x: densities summed over every threshold."""
    taus = mixture.threshold_matrix()
    probs = mixture.probabilities()
    dens = np.asarray(dist.pdf(taus))
    totals = dens.sum(axis=1)
    per = tuple(
        ProfileWeight(i, float(probs[i]), tuple(dens[i]), float(totals[i]))
        for i in range(len(probs))
    )
    return WeightBreakdown(per, float(np.dot(probs, totals)), {"kind": "mean_slope"})


def _normalize_delta_spec(delta_spec):
    if np.isscalar(delta_spec):
        pairs = [(float(delta_spec), 1.0)]
    else:
        pairs = [(float(d), float(p)) for d, p in delta_spec]
        psum = sum(p for _, p in pairs)
        if any(p <= 0 for _, p in pairs) or abs(psum - 1.0) > 1e-12:
            raise DomainError("delta probabilities must be positive and sum to 1")
    if any(d == 0.0 for d, _ in pairs):
        raise DomainError("delta must be nonzero; use mean_slope_total for the limit")
    return pairs


def discrete_total(mixture: ReportingMixture, dist: LatentDistribution, delta_spec) -> WeightBreakdown:
    """Total contrast weight w_{x,x'}: interval-averaged densities at thresholds.

    ``delta_spec`` is a constant treatment effect or a finite list of
    (delta, probability) pairs; the total is the probability-weighted sum of
    the constant-effect totals. Negative deltas use the same difference
    quotient unchanged (both differences flip sign, so weights stay >= 0).
    """
    pairs = _normalize_delta_spec(delta_spec)
    taus = mixture.threshold_matrix()
    probs = mixture.probabilities()
    dens = np.zeros_like(taus)
    for d, p in pairs:
        dens += p * (np.asarray(dist.cdf(taus)) - np.asarray(dist.cdf(taus - d))) / d
    totals = dens.sum(axis=1)
    per = tuple(
        ProfileWeight(i, float(probs[i]), tuple(dens[i]), float(totals[i]))
        for i in range(len(probs))
    )
    context = {"kind": "discrete", "delta_spec": pairs}
    return WeightBreakdown(per, float(np.dot(probs, totals)), context)


def delta_ratio(profile: ThresholdProfile, dist: LatentDistribution, delta: float) -> float:
    """Relative gap between contrast and slope weights for a single profile."""
    if delta == 0.0:
        raise DomainError("delta must be nonzero")
    taus = np.asarray(profile.thresholds)
    slope_sum = float(np.sum(np.asarray(dist.pdf(taus))))
    if slope_sum <= 0.0:
        raise DomainError("slope-weight denominator is zero for this profile")
    avg_sum = float(
        np.sum((np.asarray(dist.cdf(taus)) - np.asarray(dist.cdf(taus - delta))) / delta)
    )
    return avg_sum / slope_sum - 1.0


def _scale_pairs(scale_mixture):
    out = []
    for p, scale in scale_mixture:
        if not isinstance(scale, DenseScale):
            raise DomainError("dense totals need DenseScale entries")
        out.append((float(p), scale))
    return out


def dense_totals(scale_mixture, dist: LatentDistribution, delta: float, rbar: float = 1.0) -> dict:
    """Dense-limit total weights for a mixture of linear scales.

    w_x     = rbar * sum_v p_v (F(mu_v) - F(ell_v)) / (mu_v - ell_v)
    w_{x,x'} = rbar * sum_v p_v (1 / (delta (mu_v - ell_v)))
               * int_{ell_v}^{mu_v} [F(h) - F(h - delta)] dh
    """
    pairs = _scale_pairs(scale_mixture)
    w_x = 0.0
    for p, sc in pairs:
        w_x += p * (dist.cdf(sc.mu) - dist.cdf(sc.ell)) / sc.length
    if delta == 0.0:
        return {"w_x": rbar * w_x, "w_xxp": None}
    kinks = _kink_points(dist)
    kinks = kinks + [k + delta for k in kinks]
    w_xxp = 0.0
    for p, sc in pairs:
        integral = integrate_interval(
            lambda h: dist.cdf(h) - dist.cdf(h - delta), sc.ell, sc.mu, points=kinks
        )
        w_xxp += p * integral / (delta * sc.length)
    return {"w_x": rbar * w_x, "w_xxp": rbar * w_xxp}


@dataclass(frozen=True)
class BoundsReport:
    ratio: float
    coarse_bounds: tuple
    refined_lower: float
    refined_upper: float
    nb: float
    monotone_density_condition_holds: bool
    variance_condition_holds: bool
    w_x: float
    w_xp: float
    w_xxp: float
    ratio_vs_w_x: float

    def to_json(self):
        return {
            "ratio": self.ratio,
            "coarse_bounds": list(self.coarse_bounds),
            "refined_lower": self.refined_lower,
            "refined_upper": self.refined_upper,
            "nb": self.nb,
            "monotone_density_condition_holds": self.monotone_density_condition_holds,
            "variance_condition_holds": self.variance_condition_holds,
            "w_x": self.w_x,
            "w_xp": self.w_xp,
            "w_xxp": self.w_xxp,
            "ratio_vs_w_x": self.ratio_vs_w_x,
        }


def _monotone_on(dist, lo, hi, increasing: bool, n_points: int = 101, tol: float = 1e-12) -> bool:
    grid = np.linspace(lo, hi, n_points)
    dens = np.asarray(dist.pdf(grid))
    diffs = np.diff(dens)
    if increasing:
        return bool(np.all(diffs >= -tol))
    return bool(np.all(diffs <= tol))


def bounds_check(scale_mixture, dist_x: LatentDistribution, dist_xp: LatentDistribution,
                 delta: float, rbar: float = 1.0) -> BoundsReport:
    """Partial-identification diagnostics for heterogeneous-linear reporting.

    Evaluates the contrast-to-slope weight ratio together with the two
    sufficient conditions: a 101-point monotonicity scan of the latent
    density around every scale's endpoints (a scan, not a proof), and the
    exact finite-mixture variance comparison between scale-length inverses
    and non-bunching probabilities. Flags are reported, never raised.
    """
    if delta == 0.0:
        raise DomainError("bounds need a nonzero delta")
    pairs = _scale_pairs(scale_mixture)
    w_x = dense_totals(scale_mixture, dist_x, delta, rbar=rbar)
    w_xp = dense_totals(scale_mixture, dist_xp, delta, rbar=rbar)["w_x"]
    ratio = w_x["w_xxp"] / (0.5 * (w_x["w_x"] + w_xp))

    a = abs(delta)
    monotone = all(
        _monotone_on(dist_x, sc.ell - a, sc.ell + a, increasing=True)
        and _monotone_on(dist_x, sc.mu - a, sc.mu + a, increasing=False)
        for _, sc in pairs
    )

    probs = np.array([p for p, _ in pairs])
    inv_len = np.array([1.0 / sc.length for _, sc in pairs])
    nb_v = np.array([dist_x.cdf(sc.mu) - dist_x.cdf(sc.ell) for _, sc in pairs])
    mean_inv = float(np.dot(probs, inv_len))
    var_inv = float(np.dot(probs, (inv_len - mean_inv) ** 2))
    nb = float(np.dot(probs, nb_v))
    var_nb = float(np.dot(probs, (nb_v - nb) ** 2))
    variance_holds = var_inv <= var_nb * mean_inv**2

    return BoundsReport(
        ratio=float(ratio),
        coarse_bounds=(1.0, 2.0),
        refined_lower=0.5,
        refined_upper=float(1.0 / nb**2) if nb > 0 else float("inf"),
        nb=nb,
        monotone_density_condition_holds=monotone,
        variance_condition_holds=variance_holds,
        w_x=float(w_x["w_x"]),
        w_xp=float(w_xp),
        w_xxp=float(w_x["w_xxp"]),
        ratio_vs_w_x=float(w_x["w_xxp"] / w_x["w_x"]),
    )


def convolution_diag(scale: DenseScale, dist: LatentDistribution, t_grid) -> dict:
    """Density of (threshold minus latent) on a grid, with a unimodality scan.

    In the dense limit the threshold variable is uniform on [ell, mu], so the
    density of T - H at t is (1/(mu - ell)) * int_ell^mu pdf(h - t) dh,
    evaluated by quadrature. ``unimodal`` is True when the grid values rise
    to a single peak and fall afterwards, with slack 1e-9.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    base_kinks = _kink_points(dist)
    dens = np.empty(t_grid.shape)
    for i, t in enumerate(t_grid):
        points = [k + t for k in base_kinks]
        dens[i] = integrate_interval(
            lambda h: dist.pdf(h - t), scale.ell, scale.mu, points=points
        ) / scale.length
    peak = int(np.argmax(dens))
    tol = 1e-9
    rising = np.all(np.diff(dens[: peak + 1]) >= -tol)
    falling = np.all(np.diff(dens[peak:]) <= tol)
    return {"t_grid": t_grid, "density": dens, "unimodal": bool(rising and falling)}


def ratio_table(preset_name: str, delta_grid, categories_grid, seed: int, jobs: int = 1) -> list:
    """Contrast-to-slope weight ratios over a (delta, category-count) grid.

    Each cell redraws the preset's reporting population on a stream derived
    from (seed, delta index, category index), computes the contrast total at
    the base point, slope totals at the base and the delta-shifted point, and
    the non-bunching probability. Cells are independent, so the table is
    reproducible cell by cell regardless of evaluation order or parallelism.
    """
    from .simulate import DgpSpec, preset, reporting_mixture  # deferred: avoids module cycle

    spec = preset(preset_name)  # raises UnknownPresetError for bad names
    if not isinstance(spec, DgpSpec):
        raise UnknownPresetError(f"preset {preset_name!r} has no weight table")
    cells = [
        (di, float(d), ci, int(c))
        for di, d in enumerate(delta_grid)
        for ci, c in enumerate(categories_grid)
    ]

    def cell_row(args):
        di, d, ci, c = args
        rng = derive_rng(seed, "ratio_table", preset_name, di, ci)
        mixture = reporting_mixture(spec, categories=c, rng=rng)
        dist = spec.latent_at_base
        w_xxp = discrete_total(mixture, dist, d).w_total
        w_x = mean_slope_total(mixture, dist).w_total
        w_xp = mean_slope_total(mixture, dist.shift(d)).w_total
        taus = mixture.threshold_matrix()
        probs = mixture.probabilities()
        # interior mass between the first and last threshold; exactly 0 when
        # a profile has a single threshold (no interior category exists)
        nb = float(
            np.dot(probs, np.asarray(dist.cdf(taus[:, -1])) - np.asarray(dist.cdf(taus[:, 0])))
        )
        return {
            "delta": d,
            "rbar": c,
            "ratio": w_xxp / (0.5 * (w_x + w_xp)),
            "w_xxp": w_xxp,
            "w_x": w_x,
            "w_xp": w_xp,
            "nb": nb,
        }

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(cell_row, cells))
    else:
        rows = [cell_row(c) for c in cells]
    return rows


RATIO_CSV_HEADER = "delta,rbar,ratio,w_xxp,w_x,w_xp,nb"


def write_ratio_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(RATIO_CSV_HEADER + "\r\n")
        for row in rows:
            fh.write(
                "{delta:.10g},{rbar},{ratio:.10g},{w_xxp:.10g},{w_x:.10g},{w_xp:.10g},{nb:.10g}".format(
                    **row
                )
                + "\r\n"
            )
