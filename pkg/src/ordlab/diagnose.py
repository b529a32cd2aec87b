"""Observable-data diagnostics: sign over-identification across categories,
weak-separability invariance ratios, the quantile-expansion identity,
stochastic dominance, and misspecification weight profiles.

Everything here consumes either observable datasets (R plus regressors) or
analytic (distribution, mixture) pairs; latent oracle columns are never used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import hypot as math_hypot

import numpy as np

from .errors import DomainError, EstimationError
from .latent import LatentDistribution
from .reporting import ReportingMixture
from .rng import derive_rng
from .simulate import Dataset
from .estimate import CefFit, npreg_fit


@dataclass(frozen=True)
class DiagnosticReport:
    name: str
    per_category: tuple  # of (category, value)
    summary: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "name": self.name,
            "per_category": [[int(r), float(v)] for r, v in self.per_category],
            "summary": self.summary,
        }

    def per_category_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("category,value\r\n")
            for r, v in self.per_category:
                fh.write(f"{int(r)},{float(v):.10g}\r\n")


def _category_indicator(data: Dataset, r: int) -> np.ndarray:
    return (np.asarray(data.column("R")) <= r).astype(float)


def _point_estimate(fit: CefFit, mode: str, x_point, contrast_levels, var_index):
    """Slope at a point / averaged, or discrete contrast at a point / averaged."""
    if mode == "slope":
        if x_point is None:
            _, slopes = fit.predict(fit.xc, fit.xd, return_slopes=True)
            return float(slopes[:, var_index].mean())
        xc = np.asarray(x_point, dtype=float)[None, :]
        xd = fit.xd.mean(axis=0, keepdims=True) if fit.xd.shape[1] else np.empty((1, 0))
        _, slopes = fit.predict(xc, xd, return_slopes=True)
        return float(slopes[0, var_index])
    a, b = contrast_levels
    xd_a = fit.xd.copy()
    xd_a[:, var_index] = a
    xd_b = fit.xd.copy()
    xd_b[:, var_index] = b
    return float(np.mean(fit.predict(fit.xc, xd_a) - fit.predict(fit.xc, xd_b)))


def sign_overidentification(data: Dataset, var: str, x_point=None, kind: str = "slope",
                            contrast_levels=(1, 0), b_reps: int = 40, seed: int = 0,
                            cv_restarts: int = 2, cv_eval_cap: int = 800) -> DiagnosticReport:
    """Per-category effect signs, which must agree when effects share a sign.

    For each category r the indicator 1(R <= r) is regressed on ``var`` by
    local-linear kernel regression; the slope (or the discrete contrast) is
    evaluated at ``x_point`` or averaged over the sample. A category whose
    estimate lies within one bootstrap standard error of zero is treated as
    sign-indeterminate; categories without variation are skipped and listed.
    """
    if data.rbar < 1:
        raise DomainError("need at least one threshold")
    values, ses, skipped = [], [], []
    for r in range(data.rbar):
        y = _category_indicator(data, r)
        if y.min() == y.max():
            skipped.append(r)
            continue
        work = data.with_column("_ind", y)
        if kind == "slope":
            fit = npreg_fit(work, "_ind", [var], cv_restarts=cv_restarts,
                            cv_eval_cap=cv_eval_cap)
            vidx = 0
        else:
            # the local-linear step needs a continuous axis even when the
            # diagnosed variable is discrete; use the first other covariate
            cont = [c for c in work.observed_names() if c not in ("_ind", var, "R")]
            if not cont:
                raise EstimationError("contrast diagnostic needs a continuous covariate")
            fit = npreg_fit(work, "_ind", cont[:1], [var], cv_restarts=cv_restarts,
                            cv_eval_cap=cv_eval_cap)
            vidx = 0
        est = _point_estimate(fit, kind, x_point, contrast_levels, vidx)
        reps = []
        n = work.n
        for rep in range(b_reps):
            rng = derive_rng(seed, "sign_overid", r, rep)
            idx = rng.integers(0, n, size=n)
            boot = CefFit(fit.y[idx], fit.xc[idx], fit.xd[idx], fit.continuous,
                          fit.discrete, fit.bandwidths, fit.lambdas, fit.cv_objective)
            try:
                reps.append(_point_estimate(boot, kind, x_point, contrast_levels, vidx))
            except Exception:
                continue
        se = float(np.std(reps, ddof=1)) if len(reps) > 1 else float("inf")
        values.append((r, est))
        ses.append(se)
    signs = [0 if abs(v) <= s else int(np.sign(v)) for (_, v), s in zip(values, ses)]
    nonzero = {s for s in signs if s != 0}
    conflicts = [int(values[i][0]) for i, s in enumerate(signs) if s != 0 and len(nonzero) > 1]
    return DiagnosticReport(
        name="sign_overidentification",
        per_category=tuple(values),
        summary={
            "all_same_sign": len(nonzero) <= 1,
            "signs": signs,
            "ses": ses,
            "skipped": skipped,
            "violations": conflicts if len(nonzero) > 1 else [],
        },
    )


def invariance_ratios(data: Dataset, var1: str, var2: str, x_point, b_reps: int = 40,
                      seed: int = 0, cv_restarts: int = 2,
                      cv_eval_cap: int = 800) -> DiagnosticReport:
    """Per-category slope ratios at a point; constant under weak separability.

    Requires at least three response categories (two would give a single
    usable ratio and no spread). Categories whose denominator slope is
    within one bootstrap standard error of zero are flagged and excluded
    from the spread.
    """
    if data.rbar < 2:
        raise DomainError("insufficient thresholds: need at least 3 response categories")
    x_point = np.asarray(x_point, dtype=float)
    ratios, ratio_ses, excluded = [], [], []
    for r in range(data.rbar):
        y = _category_indicator(data, r)
        if y.min() == y.max():
            excluded.append(r)
            continue
        work = data.with_column("_ind", y)
        fit = npreg_fit(work, "_ind", [var1, var2], cv_restarts=cv_restarts,
                        cv_eval_cap=cv_eval_cap)
        xc = x_point[None, :]
        xd = np.empty((1, 0))
        _, slopes = fit.predict(xc, xd, return_slopes=True)
        s1, s2 = float(slopes[0, 0]), float(slopes[0, 1])
        rep_den, rep_ratio = [], []
        n = work.n
        for rep in range(b_reps):
            rng = derive_rng(seed, "invariance", r, rep)
            idx = rng.integers(0, n, size=n)
            boot = CefFit(fit.y[idx], fit.xc[idx], fit.xd[idx], fit.continuous,
                          fit.discrete, fit.bandwidths, fit.lambdas, fit.cv_objective)
            _, bs = boot.predict(xc, xd, return_slopes=True)
            rep_den.append(bs[0, 1])
            if bs[0, 1] != 0:
                rep_ratio.append(bs[0, 0] / bs[0, 1])
        se2 = float(np.std(rep_den, ddof=1)) if len(rep_den) > 1 else float("inf")
        if abs(s2) <= se2:
            excluded.append(r)
            continue
        ratios.append((r, s1 / s2))
        ratio_ses.append(float(np.std(rep_ratio, ddof=1)) if len(rep_ratio) > 1 else float("inf"))
    if not ratios:
        raise EstimationError("no category had a usable denominator slope")
    vals = np.array([v for _, v in ratios])
    order = np.argsort(vals)
    # conservative band for the max-minus-min spread: the two extreme ratios
    pooled_se = float(math_hypot(ratio_ses[order[-1]], ratio_ses[order[0]])) if len(vals) > 1 else 0.0
    return DiagnosticReport(
        name="invariance_ratios",
        per_category=tuple(ratios),
        summary={
            "max_spread": float(vals.max() - vals.min()),
            "pooled_se": pooled_se,
            "ratio_ses": ratio_ses,
            "excluded": excluded,
            "all_same_sign": bool(np.all(vals > 0) or np.all(vals < 0)),
            "violations": [],
        },
    )


def _pooled_thresholds(mixture: ReportingMixture):
    taus = mixture.threshold_matrix()
    probs = np.repeat(mixture.probabilities(), taus.shape[1])
    flat = taus.ravel()
    order = np.argsort(flat, kind="stable")
    pooled = flat[order]
    cumw = np.concatenate([[0.0], np.cumsum(probs[order])])
    return pooled, cumw


def _population_report(pooled, cumw, h):
    """Probability-weighted report sum_v p_v r_v(h), a step function of h."""
    return cumw[np.searchsorted(pooled, h, side="left")]


def quantile_expansion_check(dist_x: LatentDistribution, dist_xp: LatentDistribution,
                             mixture: ReportingMixture) -> dict:
    """Mean-report contrast versus its quantile-space expansion.

    The left side evaluates E[R | x'] - E[R | x] through the distribution
    functions at every threshold. The right side integrates, over the rank
    u in (0, 1), the average report rate of change between the two quantile
    functions times the quantile gap; at ranks where the gap is zero the
    difference quotient is replaced by the (zero) one-sided report change.
    The u-integral is evaluated exactly by splitting at every rank where a
    quantile crosses a threshold.
    """
    pooled, cumw = _pooled_thresholds(mixture)
    fx = np.asarray(dist_x.cdf(pooled))
    fxp = np.asarray(dist_xp.cdf(pooled))
    lhs = float(np.dot(np.diff(cumw), fx - fxp))

    breaks = np.unique(np.clip(np.concatenate([fx, fxp, [0.0, 1.0]]), 0.0, 1.0))
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    widths = np.diff(breaks)
    keep = widths > 0
    mids, widths = mids[keep], widths[keep]
    qx = np.asarray(dist_x.quantile(mids))
    qxp = np.asarray(dist_xp.quantile(mids))
    rx = _population_report(pooled, cumw, qx)
    rxp = _population_report(pooled, cumw, qxp)
    gap_q = qxp - qx
    nonzero = gap_q != 0.0
    integrand = rxp - rx  # zero-gap ranks contribute their (zero) report change
    integrand = np.where(nonzero, ((rxp - rx) / np.where(nonzero, gap_q, 1.0)) * gap_q, integrand)
    rhs = float(np.dot(widths, integrand))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def dominance_check(x, xp, mixture: ReportingMixture = None) -> dict:
    """First-order dominance of report distributions across two covariate points.

    Analytic mode takes two latent laws plus the reporting mixture and
    compares P(R <= r) exactly (tolerance zero). Empirical mode takes two
    datasets and flags only violations beyond two standard errors.
    """
    if isinstance(x, LatentDistribution):
        if mixture is None:
            raise DomainError("analytic dominance needs the reporting mixture")
        taus = mixture.threshold_matrix()
        probs = mixture.probabilities()
        p_x = probs @ np.asarray(x.cdf(taus))
        p_xp = probs @ np.asarray(xp.cdf(taus))
        excess = p_xp - p_x
        max_violation = float(np.maximum(excess, 0.0).max())
        return {
            "fosd_holds": bool(np.all(excess <= 0.0)),
            "max_violation": max_violation,
            "per_category": excess.tolist(),
        }
    data_x, data_xp = x, xp
    if data_x.n == 0 or data_xp.n == 0:
        raise DomainError("both conditional samples must be nonempty")
    rbar = max(data_x.rbar, data_xp.rbar)
    rx = np.asarray(data_x.column("R"))
    rxp = np.asarray(data_xp.column("R"))
    excess, flags = [], []
    for r in range(rbar):
        px = float(np.mean(rx <= r))
        pxp = float(np.mean(rxp <= r))
        se = np.sqrt(px * (1 - px) / len(rx) + pxp * (1 - pxp) / len(rxp))
        excess.append(pxp - px)
        flags.append(pxp - px > 2.0 * se)
    return {
        "fosd_holds": not any(flags),
        "max_violation": float(max(0.0, max(excess))),
        "per_category": excess,
    }


def yitzhaki_weights(data, var: str = None, grid_size: int = 201):
    """Misspecification weight profile of a simple linear regression slope.

    The slope of a linear regression of any outcome on a single continuous
    variable averages the local CEF derivative with weights proportional to
    E[(X - E X) 1(X >= x)] / Var(X): positive, zero at the support
    endpoints, and integrating to one.
    """
    xs = np.asarray(data.column(var) if isinstance(data, Dataset) else data, dtype=float)
    var_x = xs.var()
    if var_x == 0:
        raise EstimationError("variable has zero variance")
    grid = np.linspace(xs.min(), xs.max(), grid_size)
    centered = xs - xs.mean()
    weights = np.array([centered[xs >= g].sum() for g in grid]) / (len(xs) * var_x)
    return grid, np.maximum(weights, 0.0)
