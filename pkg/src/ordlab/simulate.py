"""Named data-generating processes, dataset simulation, and table regeneration.

Presets pair a latent law with a population of reporting functions:

===========================  =======================  ==========================
name                         latent law               reporting population
===========================  =======================  ==========================
normal                       N(0, 1)                  ell ~ U[-1, -1/2], mu ~ U[1/2, 1]
dblnormal                    1/2 N(-2,1) + 1/2 N(2,1) ell ~ U[-3, -2],  mu ~ U[2, 3]
uniform                      U[0, 1]                  ell ~ U[0, 1/4],  mu ~ U[3/4, 1]
lognormal                    LogNormal(0, 1)          ell ~ U[1/100, 1/4], mu ~ U[1, 3]
lognormal_overlap            LogNormal(0, 1)          ell ~ U[0.01, 1.5], mu ~ U[0.5, 3],
                                                      pairs with ell >= mu redrawn
lognormal_fixedends          LogNormal(0, 1)          single scale ell = 0.1, mu = 0.2
lognormal_uniform_thresholds LogNormal(0, 1)          thresholds i.i.d. U[0.1, 3], sorted
lognormal_normal_thresholds  LogNormal(0, 1)          thresholds i.i.d. N(2, 1), sorted
===========================  =======================  ==========================

Category-count convention for tables: a grid value C means C response
categories, materialized as C - 1 thresholds. Linear populations place them
at the C - 1 interior division points ell + k (mu - ell) / C, k = 1 .. C-1,
so that a binary scale splits [ell, mu] at its midpoint; sampled populations
draw C - 1 values and sort.

The illustrative two-regressor process (income, marriage) lives in
``build_illustrative`` with its exact conditional-mean formula in
``analytic_cef_illustrative``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, UnknownPresetError
from .latent import (
    LatentDistribution,
    LogNormal,
    Mixture,
    Normal,
    Truncated,
    Uniform,
    distribution_from_json,
)
from .reporting import DenseScale, ReportingMixture, ThresholdProfile, report
from .rng import derive_rng
from .weights import discrete_total, ratio_table, write_ratio_csv

DEFAULT_CATEGORIES = 100
DEFAULT_N_PROFILES = 1000
TABLE_DELTA_GRID = (-0.5, -0.1, 0.1, 0.5, 1.0, 5.0)
TABLE_CATEGORY_GRID = (2, 5, 11, 100)
NRF_GRID = (1, 10, 11, 1000)


# ---------------------------------------------------------------------------
# Reporting-population samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearEnds:
    """Profiles with equally spaced thresholds between sampled endpoints."""

    ell_dist: LatentDistribution
    mu_dist: LatentDistribution
    reject_crossed: bool = False

    def draw_scales(self, n_profiles: int, rng) -> list:
        ells = self.ell_dist.sample(n_profiles, rng=rng)
        mus = self.mu_dist.sample(n_profiles, rng=rng)
        if self.reject_crossed:
            bad = ells >= mus
            while np.any(bad):
                k = int(bad.sum())
                ells[bad] = self.ell_dist.sample(k, rng=rng)
                mus[bad] = self.mu_dist.sample(k, rng=rng)
                bad = ells >= mus
        return list(zip(ells, mus))

    def to_json(self):
        return {
            "kind": "linear",
            "ell": self.ell_dist.to_json(),
            "mu": self.mu_dist.to_json(),
            "reject_crossed": self.reject_crossed,
        }


@dataclass(frozen=True)
class FixedScales:
    scales: tuple  # of (ell, mu)

    def draw_scales(self, n_profiles: int, rng) -> list:
        return [tuple(s) for s in self.scales]

    def to_json(self):
        return {"kind": "fixed", "scales": [list(s) for s in self.scales]}


@dataclass(frozen=True)
class SampledThresholds:
    """Profiles built from i.i.d. sorted threshold draws (not equally spaced)."""

    threshold_dist: LatentDistribution

    def to_json(self):
        return {"kind": "sampled", "threshold_dist": self.threshold_dist.to_json()}


def sampler_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "linear":
        return LinearEnds(
            distribution_from_json(obj["ell"]),
            distribution_from_json(obj["mu"]),
            bool(obj.get("reject_crossed", False)),
        )
    if kind == "fixed":
        return FixedScales(tuple(tuple(s) for s in obj["scales"]))
    if kind == "sampled":
        return SampledThresholds(distribution_from_json(obj["threshold_dist"]))
    raise DomainError(f"unknown reporting sampler spec: {obj!r}")


# ---------------------------------------------------------------------------
# DGP specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DgpSpec:
    latent_at_base: LatentDistribution
    delta_spec: object = 1.0  # constant or tuple of (delta, prob)
    sampler: object = None
    n_profiles: int = DEFAULT_N_PROFILES
    categories: int = DEFAULT_CATEGORIES
    seed: int = 0

    def __post_init__(self):
        if self.n_profiles < 1:
            raise DomainError("n_profiles must be at least 1")
        if self.categories < 2:
            raise DomainError("need at least 2 response categories")

    def to_json(self):
        ds = self.delta_spec
        return {
            "type": "dgp",
            "latent_at_base": self.latent_at_base.to_json(),
            "delta_spec": ds if np.isscalar(ds) else [list(p) for p in ds],
            "sampler": self.sampler.to_json(),
            "n_profiles": self.n_profiles,
            "categories": self.categories,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class IllustrativeSpec:
    rho: float
    scale: str  # "binary" or "eleven"
    seed: int = 0

    def to_json(self):
        return {"type": "illustrative", "rho": self.rho, "scale": self.scale, "seed": self.seed}


def spec_from_json(obj: dict):
    if obj.get("type") == "illustrative":
        return IllustrativeSpec(float(obj["rho"]), obj["scale"], int(obj.get("seed", 0)))
    ds = obj["delta_spec"]
    if not np.isscalar(ds):
        ds = tuple((float(d), float(p)) for d, p in ds)
    return DgpSpec(
        latent_at_base=distribution_from_json(obj["latent_at_base"]),
        delta_spec=ds,
        sampler=sampler_from_json(obj["sampler"]),
        n_profiles=int(obj["n_profiles"]),
        categories=int(obj["categories"]),
        seed=int(obj.get("seed", 0)),
    )


_LINEAR_PRESETS = {
    "normal": (Normal(0.0, 1.0), Uniform(-1.0, -0.5), Uniform(0.5, 1.0), False),
    "dblnormal": (
        Mixture((0.5, 0.5), (Normal(-2.0, 1.0), Normal(2.0, 1.0))),
        Uniform(-3.0, -2.0),
        Uniform(2.0, 3.0),
        False,
    ),
    "uniform": (Uniform(0.0, 1.0), Uniform(0.0, 0.25), Uniform(0.75, 1.0), False),
    "lognormal": (LogNormal(0.0, 1.0), Uniform(0.01, 0.25), Uniform(1.0, 3.0), False),
    "lognormal_overlap": (LogNormal(0.0, 1.0), Uniform(0.01, 1.5), Uniform(0.5, 3.0), True),
}

_SAMPLED_PRESETS = {
    "lognormal_uniform_thresholds": (LogNormal(0.0, 1.0), Uniform(0.1, 3.0)),
    "lognormal_normal_thresholds": (LogNormal(0.0, 1.0), Normal(2.0, 1.0)),
}

PRESET_NAMES = tuple(
    list(_LINEAR_PRESETS) + ["lognormal_fixedends"] + list(_SAMPLED_PRESETS)
    + ["illustrative_binary", "illustrative_11"]
)


def preset(name: str, rho: float = 0.0, seed: int = 0):
    """Named DGP specification; see the module table for parameterizations."""
    if name in _LINEAR_PRESETS:
        latent, ell_d, mu_d, reject = _LINEAR_PRESETS[name]
        return DgpSpec(latent, sampler=LinearEnds(ell_d, mu_d, reject), seed=seed)
    if name == "lognormal_fixedends":
        return DgpSpec(
            LogNormal(0.0, 1.0),
            sampler=FixedScales(((0.1, 0.2),)),
            n_profiles=1,
            seed=seed,
        )
    if name in _SAMPLED_PRESETS:
        latent, thr = _SAMPLED_PRESETS[name]
        return DgpSpec(latent, sampler=SampledThresholds(thr), seed=seed)
    if name == "illustrative_binary":
        return IllustrativeSpec(rho, "binary", seed=seed)
    if name == "illustrative_11":
        return IllustrativeSpec(rho, "eleven", seed=seed)
    raise UnknownPresetError(f"unknown preset {name!r}; choices: {', '.join(PRESET_NAMES)}")


def _interior_thresholds(ell: float, mu: float, categories: int) -> ThresholdProfile:
    k = np.arange(1, categories, dtype=float)
    return ThresholdProfile(tuple(ell + k * (mu - ell) / categories))


def scale_population(spec: DgpSpec, rng=None, n_profiles=None) -> list:
    """Draw the preset's (ell, mu) population as DenseScale objects."""
    if not isinstance(spec.sampler, (LinearEnds, FixedScales)):
        raise DomainError("scale population only exists for linear-ends samplers")
    if rng is None:
        rng = derive_rng(spec.seed, "scales")
    n = spec.n_profiles if n_profiles is None else n_profiles
    return [DenseScale(ell, mu) for ell, mu in spec.sampler.draw_scales(n, rng)]


def reporting_mixture(spec: DgpSpec, categories=None, rng=None, seed=None, n_profiles=None) -> ReportingMixture:
    """Materialize the preset's reporting population at a category count."""
    c = spec.categories if categories is None else int(categories)
    if c < 2:
        raise DomainError("need at least 2 response categories")
    if rng is None:
        rng = derive_rng(spec.seed if seed is None else seed, "mixture", c)
    n = spec.n_profiles if n_profiles is None else n_profiles
    if isinstance(spec.sampler, (LinearEnds, FixedScales)):
        scales = spec.sampler.draw_scales(n, rng)
        profiles = [_interior_thresholds(ell, mu, c) for ell, mu in scales]
    elif isinstance(spec.sampler, SampledThresholds):
        profiles = [
            ThresholdProfile(tuple(np.sort(spec.sampler.threshold_dist.sample(c - 1, rng=rng))))
            for _ in range(n)
        ]
    else:
        raise DomainError("spec has no reporting sampler")
    return ReportingMixture.equal(profiles)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

ORACLE_COLUMNS = ("H", "U", "profile")


@dataclass
class Dataset:
    """Simulated observations with retained latent columns for oracle checks.

    ``R`` and the x-columns are what an analyst would observe; ``H``, ``U``
    and ``profile`` are kept for validation only and are withheld from CSV
    output unless latent columns are requested explicitly.
    """

    columns: dict
    rbar: int
    oracle: tuple = ORACLE_COLUMNS

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DomainError(f"dataset has no column {name!r}") from None

    def observed_names(self) -> list:
        return [c for c in self.columns if c not in self.oracle]

    def with_column(self, name: str, values) -> "Dataset":
        values = np.asarray(values)
        if len(values) != self.n:
            raise DomainError("column length mismatch")
        cols = dict(self.columns)
        cols[name] = values
        return Dataset(cols, self.rbar, self.oracle)

    def take(self, idx) -> "Dataset":
        cols = {k: v[idx] for k, v in self.columns.items()}
        return Dataset(cols, self.rbar, self.oracle)

    def to_csv(self, path, with_latent: bool = False) -> None:
        names = list(self.columns) if with_latent else self.observed_names()
        mat = [self.columns[c] for c in names]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(names) + "\r\n")
            for i in range(self.n):
                fh.write(",".join(_fmt_cell(col[i]) for col in mat) + "\r\n")


def _fmt_cell(v):
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    f = float(v)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return format(f, ".10g")


def _draw_deltas(delta_spec, n, rng):
    if np.isscalar(delta_spec):
        return np.full(n, float(delta_spec))
    deltas = np.array([d for d, _ in delta_spec], dtype=float)
    probs = np.array([p for _, p in delta_spec], dtype=float)
    return deltas[rng.choice(len(deltas), size=n, p=probs / probs.sum())]


def _report_by_profile(mixture: ReportingMixture, idx: np.ndarray, h: np.ndarray) -> np.ndarray:
    taus = mixture.threshold_matrix()
    out = np.empty(len(h), dtype=np.int64)
    order = np.argsort(idx, kind="stable")
    bounds = np.searchsorted(idx[order], np.arange(taus.shape[0] + 1))
    for v in range(taus.shape[0]):
        rows = order[bounds[v] : bounds[v + 1]]
        if len(rows):
            out[rows] = np.searchsorted(taus[v], h[rows], side="left")
    return out


def draw(spec, n: int, seed=None, treated: bool = False) -> Dataset:
    """Simulate n observations from a spec; ``treated`` adds the effect draw."""
    if isinstance(spec, IllustrativeSpec):
        return build_illustrative(spec.rho, spec.scale, n, spec.seed if seed is None else seed)
    base, shifted = draw_pair(spec, n, seed=seed)
    return shifted if treated else base


def draw_pair(spec: DgpSpec, n: int, seed=None) -> tuple:
    """Base and treated datasets sharing (U, profile) row by row.

    The treated arm adds the per-row treatment draw to the same latent value,
    so per-row report monotonicity holds exactly for positive effects.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    root = spec.seed if seed is None else seed
    mixture = reporting_mixture(spec, rng=derive_rng(root, "mixture", spec.categories))
    rng = derive_rng(root, "rows")
    probs = mixture.probabilities()
    idx = rng.choice(len(probs), size=n, p=probs)
    u = spec.latent_at_base.sample(n, rng=rng)
    deltas = _draw_deltas(spec.delta_spec, n, rng)
    r_base = _report_by_profile(mixture, idx, u)
    r_treat = _report_by_profile(mixture, idx, u + deltas)
    x0 = np.zeros(n)
    base = Dataset({"R": r_base, "x1": x0, "H": u, "U": u, "profile": idx}, mixture.rbar)
    treat = Dataset(
        {"R": r_treat, "x1": np.ones(n), "H": u + deltas, "U": u, "profile": idx},
        mixture.rbar,
    )
    return base, treat


# ---------------------------------------------------------------------------
# Illustrative two-regressor process
# ---------------------------------------------------------------------------

BETA_LOG_INCOME = -0.1
BETA_MARRIED = 1.0
TAU_PESSIMIST = 0.0
TAU_OPTIMIST = -1.0
INCOME_CENTER = 50.0
INCOME_RANGE = (20.0, 200.0)

_ELEVEN_PESSIMIST = tuple(float(-5 + r) for r in range(10))
_ELEVEN_OPTIMIST = tuple(float(-6 + r) for r in range(10))


def build_illustrative(rho: float, scale: str, n: int, seed: int) -> Dataset:
    """Income/marriage process with optimist and pessimist reporting types.

    Income is log-normal around 50 (thousands), truncated to [20, 200] by cdf
    inversion; marriage is a fair coin; the latent error is standard normal.
    The probability of the optimist type rises with income at rate ``rho``
    on the log scale, which is the only channel breaking exogeneity.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if scale not in ("binary", "eleven"):
        raise DomainError("scale must be 'binary' or 'eleven'")
    rng = derive_rng(seed, "illustrative", scale)
    z_lo = math.log(INCOME_RANGE[0] / INCOME_CENTER)
    z_hi = math.log(INCOME_RANGE[1] / INCOME_CENTER)
    z = Truncated(Normal(0.0, 1.0), z_lo, z_hi).sample(n, rng=rng)
    x1 = INCOME_CENTER * np.exp(z)
    x2 = (rng.random(n) < 0.5).astype(float)
    u = rng.standard_normal(n)
    optimist = (rng.random(n) < ndtr(rho * z)).astype(np.int64)
    h = BETA_LOG_INCOME * np.log(x1) + BETA_MARRIED * x2 + u
    if scale == "binary":
        taus = np.where(optimist == 1, TAU_OPTIMIST, TAU_PESSIMIST)
        r = (h > taus).astype(np.int64)
        rbar = 1
    else:
        taus = np.array([_ELEVEN_PESSIMIST, _ELEVEN_OPTIMIST])
        r = np.empty(n, dtype=np.int64)
        for v in (0, 1):
            rows = optimist == v
            if np.any(rows):
                r[rows] = np.searchsorted(taus[v], h[rows], side="left")
        rbar = 10
    return Dataset(
        {"R": r, "x1": x1, "x2": x2, "H": h, "U": u, "profile": optimist}, rbar
    )


def analytic_cef_illustrative(rho: float, y: float, m: int) -> float:
    """Exact conditional mean of the binary report given income y and marriage m."""
    if y <= 0:
        raise DomainError("income must be positive")
    q = BETA_LOG_INCOME * math.log(y) + BETA_MARRIED * m
    p_opt = float(ndtr(rho * math.log(y / INCOME_CENTER)))
    return p_opt * float(ndtr(q - TAU_OPTIMIST)) + (1.0 - p_opt) * float(ndtr(q - TAU_PESSIMIST))


# ---------------------------------------------------------------------------
# Figure and table regeneration
# ---------------------------------------------------------------------------


def delta_histogram(spec: DgpSpec, delta_grid, categories: int, seed: int) -> list:
    """Per-profile relative weight gaps 1 + delta_v for each treatment size."""
    rows = []
    for di, d in enumerate(delta_grid):
        rng = derive_rng(seed, "delta_hist", di)
        mixture = reporting_mixture(spec, categories=categories, rng=rng)
        taus = mixture.threshold_matrix()
        dist = spec.latent_at_base
        slope = np.asarray(dist.pdf(taus)).sum(axis=1)
        avg = ((np.asarray(dist.cdf(taus)) - np.asarray(dist.cdf(taus - d))) / d).sum(axis=1)
        ok = slope > 0
        for v in np.nonzero(ok)[0]:
            rows.append({"delta": float(d), "profile": int(v), "one_plus_delta": float(avg[v] / slope[v])})
    return rows


def nrf_sweep(spec: DgpSpec, delta_grid, nrf_grid, categories: int, seed: int) -> list:
    """Ratio table by population size |V|, with the mean threshold-crossing count."""
    rows = []
    for di, d in enumerate(delta_grid):
        for vi, nv in enumerate(nrf_grid):
            rng = derive_rng(seed, "nrf", di, vi)
            mixture = reporting_mixture(spec, categories=categories, rng=rng, n_profiles=nv)
            dist = spec.latent_at_base
            from .weights import mean_slope_total

            w_xxp = discrete_total(mixture, dist, d).w_total
            w_x = mean_slope_total(mixture, dist).w_total
            w_xp = mean_slope_total(mixture, dist.shift(d)).w_total
            rows.append(
                {
                    "delta": float(d),
                    "n_profiles": int(nv),
                    "ratio": w_xxp / (0.5 * (w_x + w_xp)),
                    "avg_crossed": abs(d) * w_xxp,
                }
            )
    return rows


def _write_rows_csv(path, header, rows, fields) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\r\n")
        for row in rows:
            out = []
            for f in fields:
                v = row[f]
                out.append(str(v) if isinstance(v, int) else format(float(v), ".10g"))
            fh.write(",".join(out) + "\r\n")


def reproduce_figure(name: str, out_dir, seed: int, delta_grid=None, categories_grid=None,
                     jobs: int = 1) -> list:
    """Regenerate the ratio table, the per-profile gap data, and the |V| sweep.

    Writes three CSVs under ``out_dir`` and returns their paths. Identical
    seeds give identical bytes regardless of ``jobs``.
    """
    import os

    spec = preset(name)
    if isinstance(spec, IllustrativeSpec):
        raise UnknownPresetError("illustrative processes are regenerated via the estimate command")
    delta_grid = TABLE_DELTA_GRID if delta_grid is None else tuple(delta_grid)
    categories_grid = TABLE_CATEGORY_GRID if categories_grid is None else tuple(categories_grid)
    os.makedirs(out_dir, exist_ok=True)

    paths = []
    rows = ratio_table(name, delta_grid, categories_grid, seed=seed, jobs=jobs)
    p = os.path.join(out_dir, f"{name}_ratio.csv")
    write_ratio_csv(rows, p)
    paths.append(p)

    hist = delta_histogram(spec, delta_grid, categories=100, seed=seed)
    p = os.path.join(out_dir, f"{name}_delta_hist.csv")
    _write_rows_csv(p, "delta,profile,one_plus_delta", hist, ("delta", "profile", "one_plus_delta"))
    paths.append(p)

    sweep = nrf_sweep(spec, delta_grid, NRF_GRID, categories=11, seed=seed)
    p = os.path.join(out_dir, f"{name}_nrf.csv")
    _write_rows_csv(p, "delta,n_profiles,ratio,avg_crossed", sweep, ("delta", "n_profiles", "ratio", "avg_crossed"))
    paths.append(p)
    return paths
