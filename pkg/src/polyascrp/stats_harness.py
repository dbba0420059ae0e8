"""Goodness-of-fit, independence and moment checks with reproducible reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

ALPHA = 0.001
# two-sided normal level of a 3-sigma band
THREE_SIGMA_ALPHA = float(2 * stats.norm.sf(3.0))


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    name: str
    statistic: float
    p_value: float
    n: int
    passed: bool
    alpha: float
    seed: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: stat={self.statistic:.6g} p={self.p_value:.4g} n={self.n}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def make_report(name, statistic, p_value, n, alpha, seed=None, **details) -> TestReport:
    p_value = float(p_value)
    return TestReport(
        name=name,
        statistic=float(statistic),
        p_value=p_value,
        n=int(n),
        passed=bool(p_value > alpha),
        alpha=float(alpha),
        seed=dict(seed or {}),
        details=_jsonable(details),
    )


def ks_test(
    samples,
    cdf: Callable,
    *,
    name: str = "ks",
    alpha: float = ALPHA,
    seed: dict | None = None,
) -> TestReport:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("ks_test needs a nonempty sample")
    res = stats.kstest(x, cdf, method="asymp")
    return make_report(name, res.statistic, res.pvalue, x.size, alpha, seed)


def pool_categories(expected: np.ndarray, min_expected: float = 5.0) -> list[slice]:
    """Contiguous groups whose expected counts are each at least ``min_expected``.

    Groups are formed left to right; a short final group is merged into the
    previous one.
    """
    groups: list[list[int]] = []
    acc, start = 0.0, 0
    for i, e in enumerate(expected):
        acc += e
        if acc >= min_expected:
            groups.append([start, i + 1])
            start, acc = i + 1, 0.0
    if start < len(expected):
        if groups:
            groups[-1][1] = len(expected)
        else:
            groups.append([0, len(expected)])
    return [slice(a, b) for a, b in groups]


def chi_square_gof(
    observed: Sequence[int] | np.ndarray,
    pmf: Callable,
    *,
    name: str = "chi2",
    alpha: float = ALPHA,
    min_expected: float = 5.0,
    seed: dict | None = None,
) -> TestReport:
    """Pearson chi-square of category counts ``observed[k]`` (k = 0, 1, ...)
    against ``pmf``; the last category absorbs the whole upper tail."""
    obs = np.asarray(observed, dtype=float)
    n = obs.sum()
    if n <= 0:
        raise ValueError("chi_square_gof needs at least one observation")
    probs = np.asarray(pmf(np.arange(len(obs))), dtype=float)
    probs[-1] = max(0.0, 1.0 - probs[:-1].sum())
    expected = n * probs
    groups = pool_categories(expected, min_expected)
    o = np.array([obs[g].sum() for g in groups])
    e = np.array([expected[g].sum() for g in groups])
    if len(groups) < 2:
        return make_report(name, 0.0, 1.0, n, alpha, seed, categories=1)
    stat = float(np.sum((o - e) ** 2 / e))
    dof = len(groups) - 1
    return make_report(name, stat, stats.chi2.sf(stat, dof), n, alpha, seed, dof=dof)


def histogram(values, length: int | None = None) -> np.ndarray:
    """Counts of nonnegative integers ``0..length-1``; larger values go into the last bin."""
    v = np.asarray(values, dtype=np.int64)
    length = int(v.max()) + 1 if length is None else length
    return np.bincount(np.minimum(v, length - 1), minlength=length)


def two_sample_chi_square(
    a_keys: Sequence,
    b_keys: Sequence,
    *,
    name: str = "chi2-two-sample",
    alpha: float = ALPHA,
    min_expected: float = 5.0,
    seed: dict | None = None,
) -> TestReport:
    """Homogeneity test of two samples of hashable categories.

    Categories with pooled expected count under ``min_expected`` in either
    row are lumped into a single rare bin.
    """
    cats = sorted(set(a_keys) | set(b_keys))
    index = {c: i for i, c in enumerate(cats)}
    table = np.zeros((2, len(cats)))
    for row, keys in enumerate((a_keys, b_keys)):
        for k in keys:
            table[row, index[k]] += 1
    n_rows = table.sum(axis=1)
    col = table.sum(axis=0)
    exp_min = np.outer(n_rows, col).min(axis=0) / n_rows.sum()
    common = exp_min >= min_expected
    pieces = [table[:, common]]
    if (~common).any():
        pieces.append(table[:, ~common].sum(axis=1, keepdims=True))
    merged = np.hstack(pieces)
    if merged.shape[1] < 2:
        return make_report(name, 0.0, 1.0, n_rows.sum(), alpha, seed, categories=1)
    res = stats.chi2_contingency(merged, correction=False)
    return make_report(
        name, res.statistic, res.pvalue, n_rows.sum(), alpha, seed, dof=int(res.dof)
    )


def independence_test(
    pairs,
    *,
    name: str = "independence",
    alpha: float = THREE_SIGMA_ALPHA,
    seed: dict | None = None,
) -> TestReport:
    """Empirical correlation against zero; passes iff |corr| < 3/sqrt(n)."""
    arr = np.asarray(pairs, dtype=float)
    x, y = arr[:, 0], arr[:, 1]
    if x.std() == 0 or y.std() == 0:
        raise ValueError("independence_test needs nonconstant margins")
    n = len(x)
    r = float(np.corrcoef(x, y)[0, 1])
    p = float(2 * stats.norm.sf(abs(r) * math.sqrt(n)))
    return make_report(name, r, p, n, alpha, seed, threshold=3 / math.sqrt(n))


def _z(diff: float, se: float) -> float:
    if se > 0:
        return abs(diff) / se
    return 0.0 if diff == 0 else math.inf


def moment_check(
    samples,
    target_mean: float,
    target_var: float,
    *,
    name: str = "moments",
    alpha: float = THREE_SIGMA_ALPHA,
    seed: dict | None = None,
) -> TestReport:
    """Sample mean and variance each within 3 standard errors of the targets."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    z_mean = _z(mean - target_mean, math.sqrt(max(target_var, 0.0) / n))
    m4 = float(np.mean((x - mean) ** 4))
    z_var = _z(var - target_var, math.sqrt(max(m4 - var * var, 0.0) / n))
    z = max(z_mean, z_var)
    p = float(2 * stats.norm.sf(z)) if math.isfinite(z) else 0.0
    return make_report(
        name, z, p, n, alpha, seed, mean=mean, var=var, target_mean=target_mean,
        target_var=target_var,
    )


def mean_check(
    diffs,
    *,
    target: float = 0.0,
    name: str = "mean",
    alpha: float = THREE_SIGMA_ALPHA,
    seed: dict | None = None,
    **details,
) -> TestReport:
    """Sample mean of ``diffs`` within 3 standard errors of ``target``."""
    x = np.asarray(diffs, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    z = _z(float(x.mean()) - target, se)
    p = float(2 * stats.norm.sf(z)) if math.isfinite(z) else 0.0
    return make_report(
        name, z, p, x.size, alpha, seed, mean=float(x.mean()), se=se, target=target, **details
    )


def exact_check(name: str, ok: bool, value: float = 0.0, n: int = 1, **details) -> TestReport:
    """Deterministic pass/fail recorded in report form (p = 1 or 0)."""
    return make_report(name, value, 1.0 if ok else 0.0, n, 0.5, None, **details)
