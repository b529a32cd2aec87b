"""Estimation pipeline: OLS, mixed-kernel local-linear regression with
cross-validated bandwidths, average effects and local ratios, bootstrap,
control-function instrumenting, and constructive index recovery.

The kernel regression is local-linear in the continuous regressors with a
Gaussian kernel, and weights discrete regressors by lambda^(#mismatches)
(Aitchison-Aitken style). Bandwidths and lambdas minimize leave-one-out
cross-validated squared error, searched by golden-section coordinate descent
on log-bandwidths with multiple restarts. For large samples the CV objective
is evaluated on a deterministic evenly spaced subset of rows (sums still run
over all training rows), which keeps fits inside the runtime budget without
introducing randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, EstimationError, RankError, SingularPathError
from .rng import derive_rng
from .simulate import Dataset

CV_EVAL_CAP = 800
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _columns_matrix(data: Dataset, names) -> np.ndarray:
    return np.column_stack([np.asarray(data.column(c), dtype=float) for c in names])


# ---------------------------------------------------------------------------
# OLS with heteroskedasticity-robust standard errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NamedRatio:
    numerator: str
    denominator: str
    value: float
    bootstrap_se: float = float("nan")


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict
    robust_ses: dict
    n: int
    named_ratio: NamedRatio = None
    residuals: np.ndarray = field(default=None, repr=False, compare=False)

    def ratio(self, numerator: str, denominator: str, bootstrap_se=float("nan")) -> "RegressionResult":
        value = self.coefficients[numerator] / self.coefficients[denominator]
        return RegressionResult(
            self.coefficients,
            self.robust_ses,
            self.n,
            NamedRatio(numerator, denominator, value, bootstrap_se),
            self.residuals,
        )

    def to_json(self):
        out = {
            "coefficients": self.coefficients,
            "ses": self.robust_ses,
            "n": self.n,
        }
        if self.named_ratio is not None:
            out["ratio"] = {
                "numerator": self.named_ratio.numerator,
                "denominator": self.named_ratio.denominator,
                "value": self.named_ratio.value,
                "ratio_se": self.named_ratio.bootstrap_se,
            }
        return out


def ols(data: Dataset, outcome: str, regressors) -> RegressionResult:
    """Least squares of ``outcome`` on ``regressors`` plus an intercept.

    Standard errors are HC1. A rank-deficient design raises with the names
    of the offending columns.
    """
    regressors = list(regressors)
    y = np.asarray(data.column(outcome), dtype=float)
    x = np.column_stack([np.ones(len(y))] + [np.asarray(data.column(c), float) for c in regressors])
    names = ["intercept"] + regressors
    k = x.shape[1]
    if len(y) <= k:
        raise EstimationError("too few rows for the requested regression")
    # QR diagnoses collinearity column by column
    _, r_mat = np.linalg.qr(x)
    diag = np.abs(np.diag(r_mat))
    bad = diag < 1e-10 * max(diag.max(), 1.0)
    if np.any(bad):
        cols = [names[i] for i in np.nonzero(bad)[0]]
        raise RankError(f"design is rank deficient in columns: {', '.join(cols)}", cols)
    xtx_inv = np.linalg.inv(x.T @ x)
    beta = xtx_inv @ (x.T @ y)
    resid = y - x @ beta
    meat = (x * resid[:, None] ** 2).T @ x
    cov = xtx_inv @ meat @ xtx_inv * (len(y) / (len(y) - k))
    ses = np.sqrt(np.diag(cov))
    return RegressionResult(
        coefficients=dict(zip(names, beta.tolist())),
        robust_ses=dict(zip(names, ses.tolist())),
        n=len(y),
        residuals=resid,
    )


# ---------------------------------------------------------------------------
# Mixed-kernel local-linear regression
# ---------------------------------------------------------------------------


class CefFit:
    """Trained local-linear fit; immutable after construction."""

    def __init__(self, y, xc, xd, continuous, discrete, bandwidths, lambdas, cv_objective):
        self.y = np.asarray(y, dtype=float)
        self.xc = np.asarray(xc, dtype=float)
        self.xd = np.asarray(xd, dtype=float)
        self.continuous = tuple(continuous)
        self.discrete = tuple(discrete)
        self.bandwidths = np.asarray(bandwidths, dtype=float)
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.cv_objective = float(cv_objective)

    @property
    def n(self) -> int:
        return len(self.y)

    def _solve_chunk(self, xc0, xd0, drop_self=None):
        """Batched weighted local-linear solve at eval points (xc0, xd0).

        Returns (fitted values, slopes). ``drop_self`` gives, per eval row,
        the training index whose contribution is removed (leave-one-out).
        """
        n, pc = self.xc.shape
        m = xc0.shape[0]
        if pc == 1:
            dx = self.xc[:, 0][None, :] - xc0[:, 0][:, None]  # (m, n)
            w = np.exp(dx * dx * (-0.5 / self.bandwidths[0] ** 2))
            if self.xd.shape[1]:
                for d in range(self.xd.shape[1]):
                    mism = self.xd[None, :, d] != xd0[:, d][:, None]
                    np.multiply(w, np.where(mism, self.lambdas[d], 1.0), out=w)
            if drop_self is not None:
                w[np.arange(m), drop_self] = 0.0
            wdx = w * dx
            s0 = w.sum(axis=1)
            s1 = wdx.sum(axis=1)
            s2 = (wdx * dx).sum(axis=1)
            t0 = w @ self.y
            t1 = wdx @ self.y
            ridge = 1e-12 * (1.0 + s0)
            s0 = s0 + ridge
            s2 = s2 + ridge
            det = s0 * s2 - s1 * s1
            fitted = (s2 * t0 - s1 * t1) / det
            slope = (s0 * t1 - s1 * t0) / det
            return fitted, slope[:, None]
        dx = self.xc[None, :, :] - xc0[:, None, :]           # (m, n, pc)
        logw = -0.5 * np.einsum("mnp,p->mn", dx * dx, 1.0 / self.bandwidths**2)
        w = np.exp(logw)
        if self.xd.shape[1]:
            mism = self.xd[None, :, :] != xd0[:, None, :]
            lam = np.where(mism, self.lambdas[None, None, :], 1.0)
            w = w * lam.prod(axis=2)
        if drop_self is not None:
            w[np.arange(m), drop_self] = 0.0
        p1 = pc + 1
        a_mat = np.empty((m, p1, p1))
        c_vec = np.empty((m, p1))
        a_mat[:, 0, 0] = w.sum(axis=1)
        s1 = np.einsum("mn,mnp->mp", w, dx)
        a_mat[:, 0, 1:] = s1
        a_mat[:, 1:, 0] = s1
        wdx = w[:, :, None] * dx
        a_mat[:, 1:, 1:] = np.einsum("mnp,mnq->mpq", wdx, dx)
        c_vec[:, 0] = w @ self.y
        c_vec[:, 1:] = np.einsum("mnp,n->mp", wdx, self.y)
        # tiny ridge keeps near-empty neighborhoods solvable
        ridge = 1e-12 * (1.0 + a_mat[:, 0, 0])
        a_mat += ridge[:, None, None] * np.eye(p1)[None, :, :]
        sol = np.linalg.solve(a_mat, c_vec[:, :, None])[:, :, 0]
        return sol[:, 0], sol[:, 1:]

    def predict(self, xc, xd, return_slopes: bool = False, chunk: int = 256):
        xc = np.atleast_2d(np.asarray(xc, dtype=float))
        xd = np.atleast_2d(np.asarray(xd, dtype=float))
        m = xc.shape[0]
        fitted = np.empty(m)
        slopes = np.empty((m, self.xc.shape[1]))
        for s in range(0, m, chunk):
            e = min(s + chunk, m)
            f, g = self._solve_chunk(xc[s:e], xd[s:e])
            fitted[s:e] = f
            slopes[s:e] = g
        return (fitted, slopes) if return_slopes else fitted

    def predict_variants(self, xc, xd_variants, chunk: int = 512):
        """Fitted values and slopes at ``xc`` under several discrete settings.

        The continuous kernel depends only on ``xc``, so it is computed once
        per chunk and reweighted for every discrete variant; results equal
        separate ``predict`` calls.
        """
        if self.xc.shape[1] != 1:
            return [
                self.predict(xc, xd, return_slopes=True) for xd in xd_variants
            ]
        xc = np.atleast_2d(np.asarray(xc, dtype=float))
        m = xc.shape[0]
        out = [(np.empty(m), np.empty((m, 1))) for _ in xd_variants]
        train = self.xc[:, 0]
        for s in range(0, m, chunk):
            e = min(s + chunk, m)
            dx = train[None, :] - xc[s:e, 0][:, None]
            kern = np.exp(dx * dx * (-0.5 / self.bandwidths[0] ** 2))
            for k, xd in enumerate(xd_variants):
                w = kern
                if self.xd.shape[1]:
                    xdv = np.atleast_2d(np.asarray(xd, dtype=float))
                    w = kern.copy()
                    for d in range(self.xd.shape[1]):
                        mism = self.xd[None, :, d] != xdv[s:e, d][:, None]
                        np.multiply(w, np.where(mism, self.lambdas[d], 1.0), out=w)
                wdx = w * dx
                s0 = w.sum(axis=1)
                s1 = wdx.sum(axis=1)
                s2 = (wdx * dx).sum(axis=1)
                t0 = w @ self.y
                t1 = wdx @ self.y
                ridge = 1e-12 * (1.0 + s0)
                det = (s0 + ridge) * (s2 + ridge) - s1 * s1
                out[k][0][s:e] = ((s2 + ridge) * t0 - s1 * t1) / det
                out[k][1][s:e, 0] = ((s0 + ridge) * t1 - s1 * t0) / det
        return out

    def loo_objective(self, eval_idx, chunk: int = 256) -> float:
        total = 0.0
        for s in range(0, len(eval_idx), chunk):
            idx = eval_idx[s : s + chunk]
            f, _ = self._solve_chunk(self.xc[idx], self.xd[idx], drop_self=idx)
            if not np.all(np.isfinite(f)):
                return float("inf")
            total += float(np.sum((self.y[idx] - f) ** 2))
        return total / len(eval_idx)


class _CvWorkspace:
    """Precomputed leave-one-out machinery for the bandwidth search.

    Pairwise differences and discrete mismatches between the evaluation rows
    and the full sample do not depend on the smoothing parameters, so they
    are built once. Accumulation runs in single precision: the objective is
    only compared against itself across candidate parameters, and the spread
    between candidates dwarfs float32 noise.
    """

    def __init__(self, y, xc, xd, eval_idx, chunk: int = 512):
        self.n_eval = len(eval_idx)
        self.pc = xc.shape[1]
        self.chunks = []
        y32 = y.astype(np.float32)
        for s in range(0, len(eval_idx), chunk):
            idx = eval_idx[s : s + chunk]
            dx = (xc[idx][:, None, :] - xc[None, :, :]).astype(np.float32)
            mism = (
                (xd[idx][:, None, :] != xd[None, :, :])
                if xd.shape[1]
                else None
            )
            self.chunks.append((idx, dx, mism, y32[idx]))
        self.y32 = y32

    def objective(self, log_h, lam) -> float:
        inv = (-0.5 / np.exp(2.0 * np.asarray(log_h))).astype(np.float32)
        lam32 = np.asarray(lam, dtype=np.float32)
        total = 0.0
        for idx, dx, mism, y_eval in self.chunks:
            logw = (dx * dx) @ inv if self.pc > 1 else (dx[:, :, 0] ** 2) * inv[0]
            w = np.exp(logw)
            if mism is not None:
                for d in range(mism.shape[2]):
                    np.multiply(w, np.where(mism[:, :, d], lam32[d], np.float32(1.0)), out=w)
            w[np.arange(len(idx)), idx] = 0.0
            if self.pc == 1:
                dx1 = dx[:, :, 0]
                wdx = w * dx1
                s0 = w.sum(axis=1)
                s1 = wdx.sum(axis=1)
                s2 = (wdx * dx1).sum(axis=1)
                t0 = w @ self.y32
                t1 = wdx @ self.y32
                ridge = np.float32(1e-6) * (np.float32(1.0) + s0)
                det = (s0 + ridge) * (s2 + ridge) - s1 * s1
                fitted = ((s2 + ridge) * t0 - s1 * t1) / det
            else:
                p1 = self.pc + 1
                m = len(idx)
                a_mat = np.empty((m, p1, p1), dtype=np.float32)
                c_vec = np.empty((m, p1), dtype=np.float32)
                a_mat[:, 0, 0] = w.sum(axis=1)
                wdx = w[:, :, None] * dx
                s1 = wdx.sum(axis=1)
                a_mat[:, 0, 1:] = s1
                a_mat[:, 1:, 0] = s1
                a_mat[:, 1:, 1:] = np.einsum("mnp,mnq->mpq", wdx, dx)
                c_vec[:, 0] = w @ self.y32
                c_vec[:, 1:] = np.einsum("mnp,n->mp", wdx, self.y32)
                ridge = np.float32(1e-6) * (np.float32(1.0) + a_mat[:, 0, 0])
                a_mat += ridge[:, None, None] * np.eye(p1, dtype=np.float32)[None, :, :]
                try:
                    fitted = np.linalg.solve(a_mat, c_vec[:, :, None])[:, :, 0][:, 0]
                except np.linalg.LinAlgError:
                    return float("inf")
            if not np.all(np.isfinite(fitted)):
                return float("inf")
            total += float(np.sum((y_eval - fitted) ** 2, dtype=np.float64))
        return total / self.n_eval


def _golden_section(fn, lo, hi, iters=8):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def npreg_fit(data: Dataset, outcome: str, continuous_vars, discrete_vars=(),
              cv_restarts: int = 3, cv_max_updates: int = 40,
              cv_eval_cap: int = CV_EVAL_CAP) -> CefFit:
    """Local-linear fit with leave-one-out cross-validated smoothing.

    Search runs golden-section coordinate descent over log-bandwidths (one
    per continuous regressor) and mismatch weights lambda in [0, 1] (one per
    discrete regressor), with ``cv_restarts`` starting points and at most
    ``cv_max_updates`` coordinate updates per restart.
    """
    continuous_vars = list(continuous_vars)
    discrete_vars = list(discrete_vars)
    if not continuous_vars and not discrete_vars:
        raise EstimationError("need at least one regressor")
    if not continuous_vars:
        raise EstimationError("local-linear fit needs at least one continuous regressor")
    y = np.asarray(data.column(outcome), dtype=float)
    n = len(y)
    if n < 50:
        raise EstimationError("kernel regression needs at least 50 rows")
    xc = _columns_matrix(data, continuous_vars)
    xd = _columns_matrix(data, discrete_vars) if discrete_vars else np.empty((n, 0))
    sds = xc.std(axis=0)
    if np.any(sds == 0):
        degenerate = [c for c, s in zip(continuous_vars, sds) if s == 0]
        raise EstimationError(f"degenerate continuous variable(s): {', '.join(degenerate)}")

    if n <= cv_eval_cap:
        eval_idx = np.arange(n)
    else:
        eval_idx = np.unique(np.linspace(0, n - 1, cv_eval_cap).astype(int))

    pc, pd = xc.shape[1], xd.shape[1]
    rot = 1.06 * sds * n ** (-1.0 / (4 + pc))
    ranges = xc.max(axis=0) - xc.min(axis=0)
    # below ~a third of the reference bandwidth the subset CV objective is
    # noise-dominated for discrete outcomes; keep the search out of it
    log_lo = np.log(0.35 * rot)
    log_hi = np.log(3.0 * np.maximum(ranges, sds))

    workspace = _CvWorkspace(y, xc, xd, eval_idx)

    def objective(log_h, lam):
        return workspace.objective(log_h, lam)

    best = None
    start_scales = (1.0, 4.0, 0.5)
    start_lams = (0.5, 0.1, 0.9)
    for restart in range(cv_restarts):
        log_h = np.log(rot * start_scales[restart % len(start_scales)])
        log_h = np.clip(log_h, log_lo, log_hi)
        lam = np.full(pd, start_lams[restart % len(start_lams)])
        current = objective(log_h, lam)
        updates = 0
        improved = True
        while improved and updates < cv_max_updates:
            improved = False
            for j in range(pc):
                if updates >= cv_max_updates:
                    break

                def fn(v, j=j):
                    trial = log_h.copy()
                    trial[j] = v
                    return objective(trial, lam)

                v, f = _golden_section(fn, log_lo[j], log_hi[j])
                updates += 1
                if f < current - 1e-12:
                    if f < current * (1 - 1e-4):
                        improved = True
                    log_h[j], current = v, f
            for j in range(pd):
                if updates >= cv_max_updates:
                    break

                def fn(v, j=j):
                    trial = lam.copy()
                    trial[j] = math.exp(v)
                    return objective(log_h, trial)

                # log scale resolves near-zero mismatch weights
                v, f = _golden_section(fn, math.log(1e-6), 0.0)
                updates += 1
                if f < current - 1e-12:
                    if f < current * (1 - 1e-4):
                        improved = True
                    lam[j], current = math.exp(v), f
        if best is None or current < best[0]:
            best = (current, log_h.copy(), lam.copy())

    cv_value, log_h, lam = best
    return CefFit(y, xc, xd, continuous_vars, discrete_vars, np.exp(log_h), lam, cv_value)


def avg_marginal_effect(fit: CefFit, var: str) -> float:
    """Sample average of the local-linear slope in ``var`` at the data points."""
    if var not in fit.continuous:
        raise DomainError(f"{var!r} is not a continuous variable of this fit")
    j = fit.continuous.index(var)
    _, slopes = fit.predict(fit.xc, fit.xd, return_slopes=True)
    return float(slopes[:, j].mean())


def avg_discrete_contrast(fit: CefFit, var: str, a, b) -> float:
    """Sample average of CEF(var := a) - CEF(var := b) over the data points."""
    if var not in fit.discrete:
        raise DomainError(f"{var!r} is not a discrete variable of this fit")
    j = fit.discrete.index(var)
    levels = set(np.unique(fit.xd[:, j]).tolist())
    for lvl in (a, b):
        if float(lvl) not in levels:
            raise EstimationError(f"level {lvl!r} of {var!r} not present in the data")
    xd_a = fit.xd.copy()
    xd_a[:, j] = a
    xd_b = fit.xd.copy()
    xd_b[:, j] = b
    return float(np.mean(fit.predict(fit.xc, xd_a) - fit.predict(fit.xc, xd_b)))


@dataclass(frozen=True)
class LocalRatio:
    value: float
    dropped_rows: int
    n_rows: int
    warned: bool


def local_ratio(fit: CefFit, contrast_var: str, a, b, slope_var: str,
                slope_floor: float = 1e-6) -> LocalRatio:
    """Average over rows of the discrete CEF contrast divided by the local slope.

    Rows whose slope magnitude falls below ``slope_floor`` are dropped and
    counted; losing more than 1% of rows flags a warning, losing all raises.
    """
    if contrast_var not in fit.discrete:
        raise DomainError(f"{contrast_var!r} is not a discrete variable of this fit")
    if slope_var not in fit.continuous:
        raise DomainError(f"{slope_var!r} is not a continuous variable of this fit")
    jd = fit.discrete.index(contrast_var)
    jc = fit.continuous.index(slope_var)
    xd_a = fit.xd.copy()
    xd_a[:, jd] = a
    xd_b = fit.xd.copy()
    xd_b[:, jd] = b
    contrast = fit.predict(fit.xc, xd_a) - fit.predict(fit.xc, xd_b)
    _, slopes = fit.predict(fit.xc, fit.xd, return_slopes=True)
    slope = slopes[:, jc]
    keep = np.abs(slope) >= slope_floor
    dropped = int((~keep).sum())
    if dropped == len(slope):
        raise EstimationError("all rows dropped: local slope everywhere below floor")
    value = float(np.mean(contrast[keep] / slope[keep]))
    return LocalRatio(value, dropped, len(slope), dropped > 0.01 * len(slope))


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonparametricSummary:
    avg_slope: float
    avg_contrast: float
    local_ratio: float
    dropped_rows: int
    warned: bool


def nonparametric_summary(fit: CefFit, slope_var: str, contrast_var: str, a=1, b=0,
                          slope_floor: float = 1e-6) -> NonparametricSummary:
    """Average slope, average contrast, and their local ratio from one fit.

    Shares the three prediction passes the individual operations would each
    redo; numerically identical to calling them separately.
    """
    jc = fit.continuous.index(slope_var)
    jd = fit.discrete.index(contrast_var)
    xd_a = fit.xd.copy()
    xd_a[:, jd] = a
    xd_b = fit.xd.copy()
    xd_b[:, jd] = b
    (f_a, _), (f_b, _), (_, slopes) = fit.predict_variants(fit.xc, [xd_a, xd_b, fit.xd])
    contrast = f_a - f_b
    slope = slopes[:, jc]
    keep = np.abs(slope) >= slope_floor
    dropped = int((~keep).sum())
    if dropped == len(slope):
        raise EstimationError("all rows dropped: local slope everywhere below floor")
    return NonparametricSummary(
        avg_slope=float(slope.mean()),
        avg_contrast=float(contrast.mean()),
        local_ratio=float(np.mean(contrast[keep] / slope[keep])),
        dropped_rows=dropped,
        warned=dropped > 0.01 * len(slope),
    )


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    ci_low: float
    ci_high: float
    n_replicates: int
    n_failed: int


def bootstrap(statistic, data: Dataset, b: int = 500, seed: int = 0, jobs: int = 1) -> BootstrapResult:
    """Nonparametric row bootstrap of a rerunnable statistic.

    Replicate r resamples rows with a generator derived from (seed, r), so
    results are independent of evaluation order and worker count. Replicates
    in which the statistic raises are dropped and counted.
    """
    if b < 2:
        raise DomainError("need at least 2 bootstrap replicates")
    n = data.n

    def one(r):
        rng = derive_rng(seed, "bootstrap", r)
        idx = rng.integers(0, n, size=n)
        try:
            return float(statistic(data.take(idx)))
        except Exception:
            return None

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(one, range(b)))
    else:
        raw = [one(r) for r in range(b)]
    values = np.array([v for v in raw if v is not None])
    failed = b - len(values)
    if len(values) < 2:
        raise EstimationError("bootstrap failed in nearly all replicates")
    return BootstrapResult(
        se=float(values.std(ddof=1)),
        ci_low=float(np.percentile(values, 2.5)),
        ci_high=float(np.percentile(values, 97.5)),
        n_replicates=len(values),
        n_failed=failed,
    )


# ---------------------------------------------------------------------------
# Control function
# ---------------------------------------------------------------------------


def control_function(data: Dataset, endogenous: str, instruments, controls=(),
                     column_name: str = "eta", chunk: int = 512) -> Dataset:
    """Append the smoothed conditional rank of an endogenous regressor.

    eta_i estimates the conditional cdf of the endogenous variable at its own
    value given instruments and controls, via a Nadaraya-Watson weighting of
    the indicator 1(x_j <= x_i) with rule-of-thumb bandwidths. Values lie in
    [0, 1] by construction and can be added to any downstream fit as a
    control.
    """
    instruments = list(instruments)
    controls = list(controls)
    if data.n < 100:
        raise EstimationError("control function needs at least 100 rows")
    x = np.asarray(data.column(endogenous), dtype=float)
    z = _columns_matrix(data, instruments + controls)
    sds = z.std(axis=0)
    if np.any(sds == 0):
        flat = [c for c, s in zip(instruments + controls, sds) if s == 0]
        raise EstimationError(f"no variation in instrument/control(s): {', '.join(flat)}")
    n, pz = z.shape
    h = 1.06 * sds * n ** (-1.0 / (4 + pz))
    eta = np.empty(n)
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        dz = (z[s:e, None, :] - z[None, :, :]) / h[None, None, :]
        w = np.exp(-0.5 * np.sum(dz * dz, axis=2))
        ind = (x[None, :] <= x[s:e, None]).astype(float)
        eta[s:e] = np.sum(w * ind, axis=1) / np.sum(w, axis=1)
    return data.with_column(column_name, eta)


# ---------------------------------------------------------------------------
# Constructive index recovery for homogeneous-degree-one aggregators
# ---------------------------------------------------------------------------


def _cef_gradient(cef, point, step):
    """Fourth-order central differences with a step adapted to saturation.

    Monotone-transform CEFs can be numerically flat (a probit link beyond a
    few sigmas); the step grows until the symmetric difference clears the
    rounding floor, then a 4th-order stencil removes the curvature bias that
    would otherwise contaminate derivative ratios.
    """
    point = np.asarray(point, dtype=float)
    grad = np.empty(len(point))
    for j in range(len(point)):
        hj = step * max(1.0, abs(point[j]))
        cap = 0.02 * max(1.0, abs(point[j]))
        while hj < cap:
            up = point.copy()
            up[j] += hj
            dn = point.copy()
            dn[j] -= hj
            if abs(cef(up) - cef(dn)) >= 1e-13:
                break
            hj *= 4.0
        hj = min(hj, cap)
        p1 = point.copy()
        p2 = point.copy()
        m1 = point.copy()
        m2 = point.copy()
        p1[j] += hj
        p2[j] += 2.0 * hj
        m1[j] -= hj
        m2[j] -= 2.0 * hj
        grad[j] = (-cef(p2) + 8.0 * cef(p1) - 8.0 * cef(m1) + cef(m2)) / (12.0 * hj)
    return grad


def recover_g(cef, base_point, reference_var: int, target, order=None,
              n_panels: int = 24, gl_order: int = 8, fd_step: float = 1e-5) -> float:
    """Recover a degree-one homogeneous index from its monotone CEF transform.

    Integrates d log g along the coordinate-wise path from ``base_point`` to
    ``target`` using only CEF derivative ratios: at a path point p, the
    log-derivative in the moving coordinate j is grad_j(p) / sum_m grad_m(p)
    p_m, which is invariant to the unknown monotone transform. The result is
    normalized so g(base_point) = 1. ``reference_var`` indexes the coordinate
    whose CEF derivative must stay bounded away from zero along the path.
    """
    base_point = np.asarray(base_point, dtype=float)
    target = np.asarray(target, dtype=float)
    if base_point.shape != target.shape:
        raise DomainError("base point and target must have equal dimension")
    dim = len(base_point)
    if not (0 <= reference_var < dim):
        raise DomainError("reference variable index out of range")
    order = list(range(dim)) if order is None else list(order)
    if sorted(order) != list(range(dim)):
        raise DomainError("order must be a permutation of the coordinates")

    nodes, weights = np.polynomial.legendre.leggauss(gl_order)
    total = 0.0
    current = base_point.copy()
    for j in order:
        a, b = current[j], target[j]
        if a == b:
            current[j] = b
            continue
        edges = np.linspace(a, b, n_panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            for t, wt in zip(nodes, weights):
                p = current.copy()
                p[j] = mid + half * t
                grad = _cef_gradient(cef, p, fd_step)
                scale = float(np.max(np.abs(grad)))
                # singularity is relative to the gradient magnitude: a link
                # function deep in its tail shrinks every derivative together
                # without making the ratios ill-defined
                if scale == 0.0 or abs(grad[reference_var]) < 1e-8 * scale:
                    raise SingularPathError(
                        f"reference derivative vanishes at path point {p.tolist()}"
                    )
                denom = float(np.dot(grad, p))
                if abs(denom) < 1e-12 * scale * float(np.max(np.abs(p))):
                    raise SingularPathError("degenerate Euler denominator on path")
                total += wt * half * grad[j] / denom
        current[j] = b
    return float(math.exp(total))


def probit_cef(beta):
    """Convenience CEF x -> Phi(beta . x) for exercising ``recover_g``."""
    beta = np.asarray(beta, dtype=float)

    def cef(x):
        return float(ndtr(float(np.dot(beta, np.asarray(x, dtype=float)))))

    return cef
