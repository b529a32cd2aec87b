"""Reporting functions as threshold profiles, their generators, and the
dense-response-limit machinery.

A weakly increasing, left-continuous map from the latent outcome to ordered
integer categories is fully described by its category thresholds: category r
is reported exactly when the latent value sits in (tau(r-1), tau(r)]. The
profile stores the sorted threshold list tau(0) .. tau(rbar-1); the response
space is {0, ..., rbar}. A value equal to a threshold reports the lower
category (left continuity).

``DenseScale`` is the many-category limit of a heterogeneous linear profile:
reports grow linearly between individual endpoints ell < mu and are flat
outside, with slope 1/(mu - ell) per unit of the top category.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidProfileError
from .latent import LatentDistribution
from .rng import derive_rng


@dataclass(frozen=True)
class ThresholdProfile:
    thresholds: tuple

    def __post_init__(self):
        taus = tuple(float(t) for t in self.thresholds)
        if len(taus) == 0:
            raise InvalidProfileError("profile needs at least one threshold")
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise InvalidProfileError("thresholds must be nondecreasing")
        object.__setattr__(self, "thresholds", taus)

    @property
    def rbar(self) -> int:
        return len(self.thresholds)

    def to_json(self):
        return {"thresholds": list(self.thresholds)}


def report(profile: ThresholdProfile, h):
    """Category for latent value(s) ``h``: the count of thresholds strictly below.

    Equivalently min{r : h <= tau(r)}, and rbar when h exceeds the top
    threshold; left-continuous, so h exactly at a threshold maps down.
    """
    taus = np.asarray(profile.thresholds)
    h_arr = np.asarray(h, dtype=float)
    out = np.searchsorted(taus, h_arr, side="left")
    if h_arr.ndim == 0:
        return int(out)
    return out.astype(np.int64)


@dataclass(frozen=True)
class ReportingMixture:
    """Population of profiles with sampling probabilities; all share one rbar."""

    entries: tuple  # of (probability, ThresholdProfile)

    def __post_init__(self):
        entries = tuple((float(p), prof) for p, prof in self.entries)
        if not entries:
            raise InvalidProfileError("mixture needs at least one profile")
        probs = np.array([p for p, _ in entries])
        if np.any(probs <= 0):
            raise InvalidProfileError("mixture probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidProfileError("mixture probabilities must sum to 1 (1e-12)")
        rbars = {prof.rbar for _, prof in entries}
        if len(rbars) != 1:
            raise InvalidProfileError("all profiles in a mixture must share rbar")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def equal(cls, profiles) -> "ReportingMixture":
        profiles = list(profiles)
        p = 1.0 / len(profiles)
        # nudge the final weight so the sum is exactly 1.0 in floating point
        probs = [p] * len(profiles)
        probs[-1] = 1.0 - p * (len(profiles) - 1)
        return cls(tuple(zip(probs, profiles)))

    @property
    def rbar(self) -> int:
        return self.entries[0][1].rbar

    def probabilities(self) -> np.ndarray:
        return np.array([p for p, _ in self.entries])

    def profiles(self) -> list:
        return [prof for _, prof in self.entries]

    def threshold_matrix(self) -> np.ndarray:
        """(n_profiles, rbar) array of thresholds."""
        return np.array([prof.thresholds for _, prof in self.entries])

    def to_json(self):
        return {
            "entries": [
                {"probability": p, "profile": prof.to_json()} for p, prof in self.entries
            ]
        }


@dataclass(frozen=True)
class DenseScale:
    """Continuum reporting limit: clamp((h - ell)/(mu - ell), 0, 1) per category unit."""

    ell: float
    mu: float

    def __post_init__(self):
        if not (self.mu > self.ell):
            raise InvalidProfileError("dense scale needs ell < mu")

    @property
    def length(self) -> float:
        return self.mu - self.ell

    def to_json(self):
        return {"ell": self.ell, "mu": self.mu}


def linear_profile(ell: float, mu: float, rbar: int, mode: str = "endpoint_exact") -> ThresholdProfile:
    """Equally spaced thresholds between individual endpoints.

    mode "paper_eq5":      tau(r) = ell + r (mu - ell) / rbar,       r = 0..rbar-1
    mode "endpoint_exact": tau(r) = ell + r (mu - ell) / (rbar - 1), so tau(rbar-1) = mu

    Both collapse to the single threshold [ell] when rbar = 1, and both
    converge to the same dense limit as rbar grows.
    """
    if not (mu > ell):
        raise InvalidProfileError("linear profile needs ell < mu")
    if rbar < 1:
        raise InvalidProfileError("rbar must be at least 1")
    r = np.arange(rbar, dtype=float)
    if rbar == 1:
        taus = np.array([ell])
    elif mode == "paper_eq5":
        taus = ell + r * (mu - ell) / rbar
    elif mode == "endpoint_exact":
        taus = ell + r * (mu - ell) / (rbar - 1)
    else:
        raise DomainError(f"unknown linear-profile mode {mode!r}")
    return ThresholdProfile(tuple(taus))


def sampled_profile(threshold_dist: LatentDistribution, rbar: int, seed=None, rng=None) -> ThresholdProfile:
    """rbar thresholds drawn i.i.d. from ``threshold_dist`` and sorted ascending.

    Ties are kept: flat categories are legal under weak monotonicity.
    """
    if rbar < 1:
        raise InvalidProfileError("rbar must be at least 1")
    if rng is None:
        rng = derive_rng(0 if seed is None else seed, "reporting.sampled_profile")
    draws = np.sort(threshold_dist.sample(rbar, rng=rng))
    return ThresholdProfile(tuple(draws))


def dense_refine(scale, n: int, rbar: int = 1) -> ThresholdProfile:
    """Materialize refinement step ``n`` of a scale on the response grid {0, 1/n, ...}.

    For a ``DenseScale`` this is the n*rbar equally spaced thresholds
    tau(k) = ell + k (mu - ell) / (n rbar); as n grows the per-category
    thresholds converge to the continuum scale. A ``ThresholdProfile`` is
    refined by splitting every inter-threshold gap into n equal parts
    (n = 1 returns the profile unchanged).
    """
    if n < 1:
        raise DomainError("refinement index must be at least 1")
    if isinstance(scale, DenseScale):
        total = n * rbar
        k = np.arange(total, dtype=float)
        taus = scale.ell + k * scale.length / total
        return ThresholdProfile(tuple(taus))
    if isinstance(scale, ThresholdProfile):
        if n == 1 or scale.rbar == 1:
            return scale
        taus = np.asarray(scale.thresholds)
        pieces = [
            np.linspace(a, b, n, endpoint=False) for a, b in zip(taus[:-1], taus[1:])
        ]
        refined = np.concatenate(pieces + [taus[-1:]])
        return ThresholdProfile(tuple(refined))
    raise DomainError("dense_refine expects a DenseScale or ThresholdProfile")


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Strictly increasing piecewise-linear map given by its knots.

    Outside the knot range the end segments extend linearly, keeping the map
    a bijection on the real line.
    """

    knots_x: tuple
    knots_y: tuple

    def __post_init__(self):
        xs = np.asarray(self.knots_x, dtype=float)
        ys = np.asarray(self.knots_y, dtype=float)
        if xs.shape != ys.shape or xs.size < 2:
            raise DomainError("map needs matching knot arrays of length >= 2")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise DomainError("map knots must be strictly increasing in x and y")
        object.__setattr__(self, "knots_x", tuple(xs))
        object.__setattr__(self, "knots_y", tuple(ys))

    def _extend(self, q, grid, values):
        out = np.interp(q, grid, values)
        lo_slope = (values[1] - values[0]) / (grid[1] - grid[0])
        hi_slope = (values[-1] - values[-2]) / (grid[-1] - grid[-2])
        q = np.asarray(q, dtype=float)
        out = np.where(q < grid[0], values[0] + (q - grid[0]) * lo_slope, out)
        out = np.where(q > grid[-1], values[-1] + (q - grid[-1]) * hi_slope, out)
        return out

    def __call__(self, h):
        xs = np.asarray(self.knots_x)
        ys = np.asarray(self.knots_y)
        out = self._extend(np.asarray(h, dtype=float), xs, ys)
        return float(out) if np.ndim(h) == 0 else out

    def inverse(self, y):
        xs = np.asarray(self.knots_x)
        ys = np.asarray(self.knots_y)
        out = self._extend(np.asarray(y, dtype=float), ys, xs)
        return float(out) if np.ndim(y) == 0 else out

    @classmethod
    def identity(cls, lo=-1.0, hi=1.0):
        return cls((lo, hi), (lo, hi))


def compose_subjective(transform: PiecewiseLinearMap, profile: ThresholdProfile) -> ThresholdProfile:
    """Pre-compose a profile with a strictly increasing latent relabeling.

    The composed profile reports on the relabeled latent axis:
    report(composed, h) = report(profile, transform(h)), realized by mapping
    every threshold through the inverse transform.
    """
    taus = transform.inverse(np.asarray(profile.thresholds))
    return ThresholdProfile(tuple(taus))


def dense_slope(scale: DenseScale, h: float) -> float:
    """Slope of the continuum reporting map at h (per unit of the top category)."""
    return 1.0 / scale.length if scale.ell < h < scale.mu else 0.0


def avg_slope(scale: DenseScale, y: float, delta: float) -> float:
    """Average continuum slope over the interval from y to y + delta.

    Equals overlap([y, y+delta], [ell, mu]) / (|delta| (mu - ell)); for
    delta -> 0 use ``dense_slope`` instead.
    """
    if delta == 0:
        raise DomainError("delta must be nonzero; use dense_slope for the limit")
    lo, hi = (y, y + delta) if delta > 0 else (y + delta, y)
    overlap = max(0.0, min(hi, scale.mu) - max(lo, scale.ell))
    return overlap / (abs(delta) * scale.length)
