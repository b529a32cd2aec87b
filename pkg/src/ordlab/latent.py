"""Continuous latent-outcome distributions and additive structural models.

The latent outcome is never observed directly; everything downstream only
needs exact density, distribution-function, quantile and sampling access for
a small family of continuous laws:

- ``Normal(mean, sd)``
- ``Uniform(lo, hi)``
- ``LogNormal(log_mean, log_sd)``  (law of exp(N(log_mean, log_sd)))
- ``Mixture(weights, components)``
- ``Truncated(base, lo, hi)``      (conditioning of ``base`` on [lo, hi])
- ``Shifted(base, delta)``         (pure location shift, used for treated arms)

Structural models are index-plus-additive-error: the latent outcome at a
regressor point x is the noise law shifted by a scalar index, so a treatment
effect of moving x -> x' is the index difference, constant in the error.

All evaluation methods are pure and accept scalars or arrays. Sampling takes
an explicit seed (or a Generator) and derives a private stream, so repeated
calls are bit-reproducible and safe to run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DimensionError, DomainError, InvalidDistributionError
from .rng import derive_rng

TAIL_PROBABILITY = 1e-12
_MIXTURE_QUANTILE_TOL = 1e-10


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _unwrap(arr, scalar):
    return float(arr) if scalar else arr


class LatentDistribution:
    """Abstract continuous law with exact pdf/cdf/quantile/sampling."""

    def pdf(self, h):
        raise NotImplementedError

    def cdf(self, h):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Finite interval carrying all but ~1e-12 of the mass."""
        raise NotImplementedError

    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def shift(self, delta: float) -> "LatentDistribution":
        """Law of H + delta."""
        if delta == 0.0:
            return self
        return Shifted(self, float(delta))

    def sample(self, n: int, seed=None, rng=None) -> np.ndarray:
        if n < 1:
            raise DomainError("sample size must be at least 1")
        if rng is None:
            rng = derive_rng(0 if seed is None else seed, "latent.sample", self._tag())
        return self._sample(int(n), rng)

    def _tag(self) -> str:
        return type(self).__name__

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(LatentDistribution):
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (self.sd > 0):
            raise InvalidDistributionError("normal sd must be positive")

    def pdf(self, h):
        h, scalar = _as_array(h)
        z = (h - self.mean) / self.sd
        out = np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2.0 * math.pi))
        return _unwrap(out, scalar)

    def cdf(self, h):
        h, scalar = _as_array(h)
        return _unwrap(ndtr((h - self.mean) / self.sd), scalar)

    def quantile(self, u):
        u, scalar = _as_array(u)
        return _unwrap(self.mean + self.sd * ndtri(u), scalar)

    def support(self):
        half = self.sd * -ndtri(TAIL_PROBABILITY)
        return (self.mean - half, self.mean + half)

    def _sample(self, n, rng):
        return self.mean + self.sd * rng.standard_normal(n)

    def shift(self, delta):
        return Normal(self.mean + delta, self.sd)

    def to_json(self):
        return {"family": "normal", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class Uniform(LatentDistribution):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise InvalidDistributionError("uniform needs lo < hi")

    def pdf(self, h):
        h, scalar = _as_array(h)
        inside = (h >= self.lo) & (h <= self.hi)
        out = np.where(inside, 1.0 / (self.hi - self.lo), 0.0)
        return _unwrap(out, scalar)

    def cdf(self, h):
        h, scalar = _as_array(h)
        out = np.clip((h - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return _unwrap(out, scalar)

    def quantile(self, u):
        u, scalar = _as_array(u)
        return _unwrap(self.lo + u * (self.hi - self.lo), scalar)

    def support(self):
        return (self.lo, self.hi)

    def _sample(self, n, rng):
        return self.lo + (self.hi - self.lo) * rng.random(n)

    def shift(self, delta):
        return Uniform(self.lo + delta, self.hi + delta)

    def to_json(self):
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LogNormal(LatentDistribution):
    log_mean: float = 0.0
    log_sd: float = 1.0

    def __post_init__(self):
        if not (self.log_sd > 0):
            raise InvalidDistributionError("log-normal log_sd must be positive")

    def pdf(self, h):
        h, scalar = _as_array(h)
        out = np.zeros_like(h)
        pos = h > 0
        if np.any(pos):
            z = (np.log(h[pos]) - self.log_mean) / self.log_sd
            out[pos] = np.exp(-0.5 * z * z) / (
                h[pos] * self.log_sd * math.sqrt(2.0 * math.pi)
            )
        return _unwrap(out, scalar)

    def cdf(self, h):
        h, scalar = _as_array(h)
        out = np.zeros_like(h)
        pos = h > 0
        if np.any(pos):
            out[pos] = ndtr((np.log(h[pos]) - self.log_mean) / self.log_sd)
        return _unwrap(out, scalar)

    def quantile(self, u):
        u, scalar = _as_array(u)
        return _unwrap(np.exp(self.log_mean + self.log_sd * ndtri(u)), scalar)

    def support(self):
        z = -ndtri(TAIL_PROBABILITY)
        return (
            math.exp(self.log_mean - self.log_sd * z),
            math.exp(self.log_mean + self.log_sd * z),
        )

    def _sample(self, n, rng):
        return np.exp(self.log_mean + self.log_sd * rng.standard_normal(n))

    def to_json(self):
        return {"family": "lognormal", "log_mean": self.log_mean, "log_sd": self.log_sd}


@dataclass(frozen=True)
class Mixture(LatentDistribution):
    """Finite mixture; quantiles solved by bracketed bisection on the cdf."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.components) == 0 or len(w) != len(self.components):
            raise InvalidDistributionError("mixture needs matching weights/components")
        if np.any(w <= 0):
            raise InvalidDistributionError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidDistributionError("mixture weights must sum to 1 (1e-12)")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "components", tuple(self.components))

    def pdf(self, h):
        h, scalar = _as_array(h)
        out = sum(w * np.asarray(c.pdf(h)) for w, c in zip(self.weights, self.components))
        return _unwrap(out, scalar)

    def cdf(self, h):
        h, scalar = _as_array(h)
        out = sum(w * np.asarray(c.cdf(h)) for w, c in zip(self.weights, self.components))
        return _unwrap(out, scalar)

    def quantile(self, u):
        u, scalar = _as_array(u)
        u = np.atleast_1d(u)
        lo = np.full(u.shape, min(c.quantile(TAIL_PROBABILITY) for c in self.components))
        hi = np.full(u.shape, max(c.quantile(1.0 - TAIL_PROBABILITY) for c in self.components))
        # bisection: cdf is nondecreasing, bracket fixed up front for robustness
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.cdf(mid)) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.max(hi - lo) < _MIXTURE_QUANTILE_TOL:
                break
        out = 0.5 * (lo + hi)
        return _unwrap(out if not scalar else out[0], scalar)

    def support(self):
        return (
            min(c.support()[0] for c in self.components),
            max(c.support()[1] for c in self.components),
        )

    def _sample(self, n, rng):
        idx = rng.choice(len(self.components), size=n, p=np.asarray(self.weights))
        out = np.empty(n)
        for k, comp in enumerate(self.components):
            take = idx == k
            count = int(take.sum())
            if count:
                out[take] = comp._sample(count, rng)
        return out

    def to_json(self):
        return {
            "family": "mixture",
            "weights": list(self.weights),
            "components": [c.to_json() for c in self.components],
        }


@dataclass(frozen=True)
class Truncated(LatentDistribution):
    """Base law conditioned on [lo, hi]; sampling is by cdf inversion."""

    base: LatentDistribution
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.hi > self.lo):
            raise InvalidDistributionError("truncation needs lo < hi")
        mass = self.base.cdf(self.hi) - self.base.cdf(self.lo)
        if mass <= 0:
            raise InvalidDistributionError("truncation window carries no mass")
        object.__setattr__(self, "_f_lo", float(self.base.cdf(self.lo)))
        object.__setattr__(self, "_mass", float(mass))

    def pdf(self, h):
        h, scalar = _as_array(h)
        inside = (h >= self.lo) & (h <= self.hi)
        out = np.where(inside, np.asarray(self.base.pdf(h)) / self._mass, 0.0)
        return _unwrap(out, scalar)

    def cdf(self, h):
        h, scalar = _as_array(h)
        raw = (np.asarray(self.base.cdf(h)) - self._f_lo) / self._mass
        out = np.clip(raw, 0.0, 1.0)
        return _unwrap(out, scalar)

    def quantile(self, u):
        u, scalar = _as_array(u)
        out = np.asarray(self.base.quantile(self._f_lo + u * self._mass))
        out = np.clip(out, self.lo, self.hi)
        return _unwrap(out, scalar)

    def support(self):
        b_lo, b_hi = self.base.support()
        return (max(self.lo, b_lo), min(self.hi, b_hi))

    def _sample(self, n, rng):
        return np.asarray(self.quantile(rng.random(n)))

    def to_json(self):
        return {"family": "truncated", "base": self.base.to_json(), "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Shifted(LatentDistribution):
    """Location shift of an arbitrary base law (law of H + delta)."""

    base: LatentDistribution
    delta: float

    def pdf(self, h):
        h, scalar = _as_array(h)
        return _unwrap(np.asarray(self.base.pdf(h - self.delta)), scalar)

    def cdf(self, h):
        h, scalar = _as_array(h)
        return _unwrap(np.asarray(self.base.cdf(h - self.delta)), scalar)

    def quantile(self, u):
        u, scalar = _as_array(u)
        return _unwrap(np.asarray(self.base.quantile(u)) + self.delta, scalar)

    def support(self):
        lo, hi = self.base.support()
        return (lo + self.delta, hi + self.delta)

    def _sample(self, n, rng):
        return self.base._sample(n, rng) + self.delta

    def shift(self, delta):
        return self.base.shift(self.delta + delta)

    def to_json(self):
        return {"family": "shifted", "base": self.base.to_json(), "delta": self.delta}


_FAMILY_BUILDERS = {
    "normal": lambda o: Normal(o["mean"], o["sd"]),
    "uniform": lambda o: Uniform(o["lo"], o["hi"]),
    "lognormal": lambda o: LogNormal(o["log_mean"], o["log_sd"]),
    "mixture": lambda o: Mixture(
        tuple(o["weights"]), tuple(distribution_from_json(c) for c in o["components"])
    ),
    "truncated": lambda o: Truncated(distribution_from_json(o["base"]), o["lo"], o["hi"]),
    "shifted": lambda o: Shifted(distribution_from_json(o["base"]), o["delta"]),
}


def distribution_from_json(obj: dict) -> LatentDistribution:
    """Rebuild a distribution from its tagged JSON form."""
    try:
        builder = _FAMILY_BUILDERS[obj["family"]]
    except (KeyError, TypeError) as exc:
        raise InvalidDistributionError(f"unknown distribution spec: {obj!r}") from exc
    return builder(obj)


def evaluate(dist: LatentDistribution, h):
    """Exact density and distribution function at ``h``."""
    h_arr, _ = _as_array(h)
    if not np.all(np.isfinite(h_arr)):
        raise DomainError("evaluation point must be finite")
    return {"pdf": dist.pdf(h), "cdf": dist.cdf(h)}


def quantile(dist: LatentDistribution, u):
    u_arr, _ = _as_array(u)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    return dist.quantile(u)


def sample(dist: LatentDistribution, n: int, seed: int):
    return dist.sample(n, seed=seed)


# ---------------------------------------------------------------------------
# Structural models: index plus additive error
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearIndex:
    """index(x) = beta . x over the regressor vector."""

    beta: tuple

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))

    def index(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (len(self.beta),):
            raise DimensionError(
                f"regressor point has shape {x.shape}, model expects ({len(self.beta)},)"
            )
        return float(np.dot(self.beta, x))

    def to_json(self):
        return {"form": "linear_index", "beta": list(self.beta)}


@dataclass(frozen=True)
class LogLinear:
    """index(x) = beta1 * ln(x1) + beta2 * x2 for x = (x1, x2), x1 > 0."""

    beta1: float
    beta2: float

    def index(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (2,):
            raise DimensionError("log-linear model expects a point (x1, x2)")
        if x[0] <= 0:
            raise DomainError("log-linear model needs x1 > 0")
        return float(self.beta1 * math.log(x[0]) + self.beta2 * x[1])

    def to_json(self):
        return {"form": "log_linear", "beta1": self.beta1, "beta2": self.beta2}


@dataclass(frozen=True)
class StructuralModel:
    """Latent outcome h(x, u) = index(x) + u with u ~ ``noise``."""

    form: object
    noise: LatentDistribution

    def index(self, x) -> float:
        return self.form.index(x)

    def latent_at(self, x) -> LatentDistribution:
        """Conditional law of the latent outcome at regressor point x."""
        return self.noise.shift(self.index(x))


def treatment_effect(model: StructuralModel, x, x_prime) -> float:
    """Causal shift index(x') - index(x); constant across the error by additivity."""
    return model.index(x_prime) - model.index(x)
