"""Nonparametric test utilities for the validation study.

Provides a Wilcoxon signed-rank test with an exact small-sample branch and
tie-corrected normal approximation, post-hoc effect size and power, the
Fisher-z sample-size formula for detecting a correlation increase, a
Pearson helper with a defined constant-input convention, and a step-down
runner that evaluates an ordered hypothesis list until the first failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import norm, pearsonr, rankdata

EXACT_LIMIT = 25
ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W+, the positive-difference rank sum
    n_used: int  # differences surviving the zero threshold
    p_value: float
    method: str  # "exact" or "normal"
    alternative: str
    effect_size: float  # Z / sqrt(n), Z from the p value


def _exact_tail_probabilities(doubled_ranks, w_plus):
    """P(W+ <= w) and P(W+ >= w) by dynamic programming over sign flips.

    Ranks are doubled so average ranks from ties become integers; the DP
    counts, for every achievable doubled rank sum, the number of the 2^n
    sign assignments realising it.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    counts /= counts.sum()
    w2 = int(round(2 * w_plus))
    return float(counts[: w2 + 1].sum()), float(counts[w2:].sum())


def wilcoxon_signed_rank(x, y=None, alternative="two-sided", zero_threshold=0.0,
                         exact_limit=EXACT_LIMIT):
    """Wilcoxon signed-rank test on x - y (or on x as differences).

    Differences with |d| <= zero_threshold are discarded. With at most
    exact_limit surviving differences the p value is exact over all 2^n
    sign assignments (ties handled through average ranks); otherwise a
    tie-corrected normal approximation is used.

    alternative "greater" tests for x tending to exceed y.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    d = np.asarray(x, dtype=np.float64)
    if y is not None:
        d = d - np.asarray(y, dtype=np.float64)
    d = d[np.abs(d) > zero_threshold]
    n = d.size
    if n == 0:
        raise ValueError("no differences survive the zero threshold")
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_limit:
        method = "exact"
        doubled = [int(round(2 * r)) for r in ranks]
        p_low, p_high = _exact_tail_probabilities(doubled, w_plus)
        if alternative == "greater":
            p = p_high
        elif alternative == "less":
            p = p_low
        else:
            p = min(1.0, 2.0 * min(p_low, p_high))
    else:
        method = "normal"
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - ((tie_counts**3 - tie_counts).sum()) / 48.0
        z = (w_plus - mean) / math.sqrt(var)
        if alternative == "greater":
            p = float(norm.sf(z))
        elif alternative == "less":
            p = float(norm.cdf(z))
        else:
            p = float(2.0 * norm.sf(abs(z)))
        p = min(1.0, p)
    return WilcoxonResult(
        statistic=w_plus,
        n_used=n,
        p_value=p,
        method=method,
        alternative=alternative,
        effect_size=effect_size_from_p(p, n, alternative),
    )


def effect_size_from_p(p, n, alternative="two-sided"):
    """e = Z / sqrt(n) with Z recovered from the (possibly two-sided) p value."""
    p = min(max(p, 1e-300), 1.0)
    z = norm.ppf(1.0 - p / 2.0) if alternative == "two-sided" else norm.ppf(1.0 - p)
    return float(max(z, 0.0) / math.sqrt(n))


def achieved_power(effect_size, n, alpha=0.05):
    """Post-hoc power Phi(e sqrt(n) - z_alpha) at one-sided level alpha."""
    z_alpha = norm.ppf(1.0 - alpha)
    return float(norm.cdf(effect_size * math.sqrt(n) - z_alpha))


def correlation_sample_size(rho0, rho1, alpha=0.05, z_power=0.84):
    """Fisher-z sample size to detect a correlation of rho1 against rho0.

    alpha is the one-sided significance level; z_power is the standard
    normal quantile of the target power, passed directly (0.84 for roughly
    80% power).
    """
    if not -1 < rho0 < 1 or not -1 < rho1 < 1:
        raise ValueError("correlations must lie strictly inside (-1, 1)")
    if rho0 == rho1:
        raise ValueError("rho0 and rho1 must differ")
    z_alpha = norm.ppf(1.0 - alpha)
    delta = math.atanh(rho1) - math.atanh(rho0)
    return int(math.ceil(3.0 + ((z_alpha + z_power) / delta) ** 2))


def pearson_correlation(x, y):
    """Pearson r and two-sided p; constant input gives r = 0, p = 1."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d arrays")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0, 1.0
    r, p = pearsonr(x, y)
    return float(r), float(p)


@dataclass(frozen=True)
class HypothesisResult:
    name: str
    status: str  # "passed", "failed" or "not_tested"
    p_value: float | None = None
    detail: str = ""


def step_down(hypotheses, alpha=0.05):
    """Run an ordered hypothesis list, stopping at the first failure.

    hypotheses is a sequence of (name, callable) where the callable returns
    a p value. A hypothesis passes when p < alpha; everything after the
    first failure is reported as not tested.
    """
    results = []
    failed = False
    for name, test in hypotheses:
        if failed:
            results.append(HypothesisResult(name=name, status="not_tested"))
            continue
        p = float(test())
        if p < alpha:
            results.append(HypothesisResult(name=name, status="passed", p_value=p))
        else:
            results.append(HypothesisResult(name=name, status="failed", p_value=p))
            failed = True
    return results


def write_hypothesis_report(results, path, alpha=0.05):
    payload = {
        "alpha": alpha,
        "hypotheses": [asdict(r) for r in results],
        "all_passed": all(r.status == "passed" for r in results),
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
