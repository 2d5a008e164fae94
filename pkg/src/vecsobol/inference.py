"""Uncertainty quantification for the pick-freeze estimator.

The estimator is a smooth function of empirical means of per-pair statistics,
so its asymptotic variance is estimated by the delta method: gradient of the
ratio at the empirical means, sandwiched with the empirical covariance of the
statistic vector. A pair-resampling percentile bootstrap is provided as an
alternative, and clt_diagnostic runs a replication study (normality distance,
CI coverage) against an oracle target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ContractError, DegenerateSampleError
from .models import VectorModel
from .pickfreeze import (
    PickFreezeSample,
    estimate_index,
    evaluate_pairs,
    generate_design,
)
from .spaces import InputSpace, SeedLike, SubsetIndex, as_seed_sequence

_BOOTSTRAP_CHUNK = 256  # replicates per vectorized block, bounds peak memory


@dataclass
class IndexEstimate:
    """Point estimate with its variance estimate and confidence interval.

    sigma2_hat estimates the variance of sqrt(N) * (estimate - truth); the
    standard error of the estimate itself is sqrt(sigma2_hat / n).
    """

    value: float
    sigma2_hat: float
    ci_low: float
    ci_high: float
    ci_level: float
    method: str  # 'delta' | 'bootstrap'
    n: int
    b_reps: Optional[int] = None
    seed: Optional[int] = None


@dataclass
class ReplicationReport:
    """Summary of a replication study of the estimator at fixed sample size."""

    n_per_rep: int
    reps: int
    estimates: np.ndarray
    target: float
    std_empirical: float
    normality_stat: float  # KS distance of standardized estimates to N(0,1)
    coverage: float  # fraction of per-replicate CIs containing the target


def _pair_statistics(sample: PickFreezeSample) -> np.ndarray:
    """Per-pair statistic vector (3k columns): products, pair means, pair square means."""
    y, y_u = sample.y, sample.y_u
    return np.hstack([y * y_u, 0.5 * (y + y_u), 0.5 * (y * y + y_u * y_u)])


def delta_variance(sample: PickFreezeSample) -> float:
    """Delta-method estimate of the asymptotic variance of the index estimator.

    Treats the estimator as f(mean statistics) and returns grad^T Cov grad
    with everything evaluated empirically. Nonnegative by construction.
    """
    if sample.n < 10:
        raise ContractError(f"delta method needs n >= 10, got {sample.n}")
    value = estimate_index(sample)  # raises DegenerateSampleError when flat

    k = sample.out_dims
    t = _pair_statistics(sample)
    means = t.mean(axis=0)
    a, b, d = means[:k], means[k : 2 * k], means[2 * k :]
    denom = float(np.sum(d - b * b))

    grad = np.empty(3 * k)
    grad[:k] = 1.0 / denom
    grad[k : 2 * k] = -2.0 * b * (1.0 - value) / denom
    grad[2 * k :] = -value / denom

    cov = np.cov(t, rowvar=False, ddof=0)
    cov = np.atleast_2d(cov)
    sigma2 = float(grad @ cov @ grad)
    return max(sigma2, 0.0)


def delta_ci(sample: PickFreezeSample, level: float = 0.95) -> IndexEstimate:
    """Symmetric normal-approximation interval around the point estimate."""
    if not 0.0 < level < 1.0:
        raise ContractError(f"confidence level must be in (0, 1), got {level}")
    value = estimate_index(sample)
    sigma2 = delta_variance(sample)
    half = float(stats.norm.ppf(0.5 + level / 2.0) * np.sqrt(sigma2 / sample.n))
    return IndexEstimate(
        value=value,
        sigma2_hat=sigma2,
        ci_low=value - half,
        ci_high=value + half,
        ci_level=level,
        method="delta",
        n=sample.n,
    )


def _bootstrap_estimates(
    sample: PickFreezeSample, b_reps: int, rng: np.random.Generator
) -> np.ndarray:
    """Estimator values over pair-index resamples, vectorized in blocks."""
    y, y_u, n = sample.y, sample.y_u, sample.n
    out = np.empty(b_reps)
    done = 0
    while done < b_reps:
        block = min(_BOOTSTRAP_CHUNK, b_reps - done)
        idx = rng.integers(0, n, size=(block, n))
        ry, ryu = y[idx], y_u[idx]  # (block, n, k)
        m = (ry + ryu).sum(axis=1) / (2.0 * n)  # (block, k)
        centering = n * (m * m).sum(axis=1)
        num = np.einsum("bnk,bnk->b", ry, ryu) - centering
        den = 0.5 * (np.einsum("bnk,bnk->b", ry, ry) + np.einsum("bnk,bnk->b", ryu, ryu))
        den -= centering
        out[done : done + block] = num / den
        done += block
    return out


def bootstrap_ci(
    sample: PickFreezeSample, b_reps: int, level: float, seed: SeedLike
) -> IndexEstimate:
    """Percentile interval from resampling pairs (Y_i, Y_i^u) jointly.

    Pairs are never split: the estimator's law depends on the joint pair
    distribution, so resampling is over pair indices only. Deterministic in
    the seed.
    """
    if b_reps < 200:
        raise ContractError(f"bootstrap needs at least 200 replicates, got {b_reps}")
    if not 0.0 < level < 1.0:
        raise ContractError(f"confidence level must be in (0, 1), got {level}")
    value = estimate_index(sample)  # degenerate samples rejected here

    rng = np.random.Generator(np.random.Philox(as_seed_sequence(seed)))
    boot = _bootstrap_estimates(sample, b_reps, rng)
    alpha = 1.0 - level
    lo, hi = np.quantile(boot, [alpha / 2.0, 1.0 - alpha / 2.0])
    seed_int = int(seed) if isinstance(seed, (int, np.integer)) else None
    return IndexEstimate(
        value=value,
        sigma2_hat=sample.n * float(np.var(boot, ddof=1)),
        ci_low=float(lo),
        ci_high=float(hi),
        ci_level=level,
        method="bootstrap",
        n=sample.n,
        b_reps=b_reps,
        seed=seed_int,
    )


def clt_diagnostic(
    model: VectorModel,
    space: InputSpace,
    subset: SubsetIndex,
    n_per_rep: int,
    reps: int,
    target: float,
    seed: SeedLike,
    ci_level: float = 0.95,
    ci_method: str = "delta",
    b_reps: int = 200,
) -> ReplicationReport:
    """Replication study: estimate `reps` times with independent derived seeds.

    Reports the Kolmogorov-Smirnov distance between the standardized
    estimates and the standard normal, and the fraction of per-replicate
    confidence intervals that contain the oracle target.
    """
    if reps < 200:
        raise ContractError(f"replication study needs reps >= 200, got {reps}")
    if not np.isfinite(target):
        raise ContractError("target must be a finite oracle value")
    if ci_method not in ("delta", "bootstrap"):
        raise ContractError(f"ci_method must be 'delta' or 'bootstrap', got {ci_method!r}")

    root = as_seed_sequence(seed)
    children = root.spawn(reps)
    estimates = np.empty(reps)
    covered = 0
    for i, child in enumerate(children):
        # split each replicate stream so the resampling draws can never
        # alias the design draws
        design_ss, ci_ss = child.spawn(2)
        design = generate_design(space, subset, n_per_rep, design_ss)
        sample = evaluate_pairs(model, design)
        if ci_method == "delta":
            est = delta_ci(sample, ci_level)
        else:
            est = bootstrap_ci(sample, b_reps, ci_level, ci_ss)
        estimates[i] = est.value
        if est.ci_low <= target <= est.ci_high:
            covered += 1

    std = float(np.std(estimates, ddof=1))
    if std == 0.0:
        raise DegenerateSampleError("replicate estimates are all identical; cannot standardize")
    standardized = (estimates - estimates.mean()) / std
    ks = float(stats.kstest(standardized, "norm").statistic)
    return ReplicationReport(
        n_per_rep=n_per_rep,
        reps=reps,
        estimates=estimates,
        target=float(target),
        std_empirical=std,
        normality_stat=ks,
        coverage=covered / reps,
    )
