"""Statistical comparison of two accuracy samples.

Implements the paired t-test, the Wilcoxon signed-rank test (exact by sign
enumeration for n <= 12), a pooled-variance TOST equivalence test realized
through the CI-inclusion criterion, and a percentile-bootstrap equivalence
test. The Student-t CDF is computed from the regularized incomplete beta
function (continued fraction), so no external statistics library is needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PairedTestResult",
    "EquivalenceReport",
    "SummaryStats",
    "paired_t_test",
    "wilcoxon_signed_rank",
    "tost_equivalence",
    "bootstrap_equivalence",
    "summarize",
    "load_accuracy_csv",
    "t_cdf",
    "t_two_sided_p",
    "t_ppf",
    "regularized_incomplete_beta",
]

EXACT_WILCOXON_MAX_N = 12


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _ln_gamma(x: float) -> float:
    if x < 0.5:
        # Reflection keeps the Lanczos series in its accurate range.
        return math.log(math.pi / math.sin(math.pi * x)) - _ln_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(acc)


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz iteration)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to about 1e-12."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        _ln_gamma(a + b) - _ln_gamma(a) - _ln_gamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T_df| >= |t|)."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def t_cdf(t: float, df: float) -> float:
    half_tail = 0.5 * t_two_sided_p(t, df)
    return 1.0 - half_tail if t >= 0 else half_tail


def t_ppf(q: float, df: float) -> float:
    """Student-t quantile by bisection on the CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > q:
        lo *= 2.0
        if lo < -1e12:
            raise ArithmeticError("t_ppf bracket expansion failed")
    while t_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("t_ppf bracket expansion failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairedTestResult:
    statistic: float
    p_value: float
    n: int
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "method": self.method,
        }


@dataclass(frozen=True)
class EquivalenceReport:
    """Means, difference, CI on the difference and the equivalence verdict.

    Accuracies are in percentage points; verdict is "equivalent" exactly when
    [ci_low, ci_high] lies inside [-margin, +margin].
    """

    mean_a: float
    mean_b: float
    mean_diff: float
    ci_low: float
    ci_high: float
    margin: float
    verdict: str
    confidence: float
    method: str
    n_a: int
    n_b: int
    p_lower: float | None = None
    p_upper: float | None = None

    def to_dict(self) -> dict:
        out = {
            "mean_accuracy_a": self.mean_a,
            "mean_accuracy_b": self.mean_b,
            "mean_difference": self.mean_diff,
            "confidence_interval": [self.ci_low, self.ci_high],
            "confidence": self.confidence,
            "equivalence_margin": self.margin,
            "result": self.verdict,
            "method": self.method,
            "n_a": self.n_a,
            "n_b": self.n_b,
        }
        if self.p_lower is not None:
            out["p_lower"] = self.p_lower
            out["p_upper"] = self.p_upper
        return out


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float | None
    std_error: float | None
    n: int


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------

def _as_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("samples must be 1-D sequences")
    return a, b


def paired_t_test(a, b) -> PairedTestResult:
    """Two-sided paired t-test on a - b with the sample (n-1) std."""
    a, b = _as_pair(a, b)
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError(f"paired t-test needs at least 2 pairs, got {n}")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise ValueError("paired t-test is undefined for zero-variance differences")
    t = float(d.mean() / (sd / math.sqrt(n)))
    return PairedTestResult(statistic=t, p_value=t_two_sided_p(t, n - 1), n=n, method="paired-t")


def _rank_average(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1 with ties sharing their mid-rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(a, b) -> PairedTestResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes take mid-ranks. For
    n <= 12 the p-value is exact over all 2^n sign assignments; larger n
    uses the normal approximation with continuity and tie corrections.
    """
    a, b = _as_pair(a, b)
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    d = a - b
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        raise ValueError("wilcoxon test is undefined when all differences are zero")
    ranks = _rank_average(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = float(ranks.sum())
    w = min(w_plus, total - w_plus)
    if n <= EXACT_WILCOXON_MAX_N:
        signs = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
        all_w_plus = signs @ ranks
        all_w = np.minimum(all_w_plus, total - all_w_plus)
        p = float(np.mean(all_w <= w + 1e-12))
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        tie_term = float(((tie_counts**3 - tie_counts).sum()) / 48.0)
        sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
        z = (w - mu + 0.5) / sigma
        p = min(1.0, 2.0 * _norm_cdf(z))
        method = "normal-approximation"
    return PairedTestResult(statistic=w, p_value=p, n=n, method=f"wilcoxon-{method}")


def tost_equivalence(a, b, margin: float, confidence: float = 0.90) -> EquivalenceReport:
    """Unpaired pooled-variance equivalence test via CI inclusion.

    The CI on mean(a) - mean(b) uses the pooled standard error with
    n_a + n_b - 2 degrees of freedom; the samples are equivalent when the
    whole CI sits inside [-margin, +margin]. The two one-sided p-values are
    reported as well.
    """
    a, b = _as_pair(a, b)
    if len(a) < 2 or len(b) < 2:
        raise ValueError(f"equivalence test needs >= 2 values per sample, got {len(a)} and {len(b)}")
    if margin <= 0:
        raise ValueError(f"equivalence margin must be positive, got {margin}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    n_a, n_b = len(a), len(b)
    df = n_a + n_b - 2
    mean_a, mean_b = float(a.mean()), float(b.mean())
    diff = mean_a - mean_b
    pooled_var = ((n_a - 1) * a.var(ddof=1) + (n_b - 1) * b.var(ddof=1)) / df
    se = math.sqrt(pooled_var * (1.0 / n_a + 1.0 / n_b))
    if se == 0.0:
        ci_low = ci_high = diff
        inside = -margin <= diff <= margin
        p_lower = p_upper = 0.0 if inside else 1.0
    else:
        t_crit = t_ppf(0.5 * (1.0 + confidence), df)
        ci_low, ci_high = diff - t_crit * se, diff + t_crit * se
        p_lower = 1.0 - t_cdf((diff + margin) / se, df)
        p_upper = t_cdf((diff - margin) / se, df)
        inside = -margin <= ci_low and ci_high <= margin
    return EquivalenceReport(
        mean_a=mean_a,
        mean_b=mean_b,
        mean_diff=diff,
        ci_low=ci_low,
        ci_high=ci_high,
        margin=margin,
        verdict="equivalent" if inside else "not-equivalent",
        confidence=confidence,
        method="tost-pooled-t",
        n_a=n_a,
        n_b=n_b,
        p_lower=p_lower,
        p_upper=p_upper,
    )


def bootstrap_equivalence(
    a,
    b,
    margin: float,
    resamples: int = 10000,
    confidence: float = 0.90,
    seed: int = 0,
) -> EquivalenceReport:
    """Percentile-bootstrap equivalence test on the difference of means.

    Each iteration resamples a and b independently with replacement at their
    own sizes; the CI is the (alpha/2, 1-alpha/2) percentile pair (linear
    interpolation) of the resampled mean differences. Deterministic per seed.
    """
    a, b = _as_pair(a, b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("bootstrap samples must be non-empty")
    if resamples < 1000:
        raise ValueError(f"need at least 1000 resamples, got {resamples}")
    if margin <= 0:
        raise ValueError(f"equivalence margin must be positive, got {margin}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_a, n_b = len(a), len(b)
    diffs = np.empty(resamples)
    # Fixed block size keeps the draw order independent of memory tuning.
    block = 1000
    for start in range(0, resamples, block):
        k = min(block, resamples - start)
        idx_a = rng.integers(0, n_a, size=(k, n_a))
        idx_b = rng.integers(0, n_b, size=(k, n_b))
        diffs[start : start + k] = a[idx_a].mean(axis=1) - b[idx_b].mean(axis=1)
    alpha = 1.0 - confidence
    ci_low, ci_high = np.percentile(diffs, [100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)])
    inside = -margin <= ci_low and ci_high <= margin
    return EquivalenceReport(
        mean_a=float(a.mean()),
        mean_b=float(b.mean()),
        mean_diff=float(a.mean() - b.mean()),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        margin=margin,
        verdict="equivalent" if inside else "not-equivalent",
        confidence=confidence,
        method=f"bootstrap-percentile-{resamples}",
        n_a=n_a,
        n_b=n_b,
    )


def summarize(values) -> SummaryStats:
    """Mean, sample std (n-1) and standard error; std/SE are None for n = 1."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("summarize needs a non-empty 1-D sequence")
    n = len(values)
    if n == 1:
        return SummaryStats(mean=float(values[0]), std=None, std_error=None, n=1)
    std = float(values.std(ddof=1))
    return SummaryStats(mean=float(values.mean()), std=std, std_error=std / math.sqrt(n), n=n)


def load_accuracy_csv(path) -> np.ndarray:
    """Read the per-episode accuracy CSV written by the evaluation stage."""
    with open(path, "r", encoding="ascii") as f:
        header = f.readline().strip()
        if header != "accuracy_pct":
            raise ValueError(f"expected header 'accuracy_pct' in {path}, got {header!r}")
        values = [float(line) for line in f if line.strip()]
    if not values:
        raise ValueError(f"no accuracy values in {path}")
    return np.asarray(values)
