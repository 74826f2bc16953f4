"""Statistical aggregation: contingency tests, rank tests, t-tests, summaries.

Conventions, all recorded in output metadata:
- chi-square applies the Yates continuity correction to 2x2 tables by default;
- the t-test defaults to Welch (pooled available);
- Mann-Whitney U uses midranks; the p-value is exact (distribution
  enumeration) for tie-free samples with n1*n2 <= 10000, otherwise a normal
  approximation with tie correction and continuity correction;
- ordinal medians on even counts take the lower category (floor rule);
- standard deviations are population SDs (a single observation reports 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.stats import rankdata

EXACT_MW_LIMIT = 10_000


@dataclass
class ContingencyTable:
    row_labels: list[str]
    col_labels: list[str]
    counts: np.ndarray      # (r, c) non-negative ints

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2:
            raise ValueError("counts must be a 2-D matrix")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")


@dataclass
class TestResult:
    statistic: float
    p_value: float
    method: str
    df: float | None = None
    detail: dict = field(default_factory=dict)


def chi2_sf(stat: float, df: float) -> float:
    return float(special.gammaincc(df / 2.0, stat / 2.0))


def chi_square(table: ContingencyTable, yates: bool = True) -> TestResult:
    """Pearson chi-square test of independence.

    The Yates correction is only ever applied to 2x2 tables; for larger
    tables the flag is ignored.
    """
    obs = table.counts.astype(np.float64)
    row = obs.sum(axis=1)
    col = obs.sum(axis=0)
    if (row == 0).any() or (col == 0).any():
        raise ValueError("contingency table has a zero marginal")
    expected = np.outer(row, col) / obs.sum()

    diff = np.abs(obs - expected)
    corrected = yates and obs.shape == (2, 2)
    if corrected:
        diff = np.maximum(diff - 0.5, 0.0)
    stat = float((diff ** 2 / expected).sum())
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    return TestResult(
        statistic=stat,
        p_value=chi2_sf(stat, df),
        method="chi-square (Yates)" if corrected else "chi-square",
        df=float(df),
    )


def _mann_whitney_counts(n1: int, n2: int) -> np.ndarray:
    """Number of rank arrangements for each U value in 0..n1*n2 (tie-free)."""
    dp = np.zeros(n1 * n2 + 1)
    dp[0] = 1.0
    for j in range(1, n1 + 1):
        for r in range(j):                 # divide by (1 - q^j)
            dp[r::j] = np.cumsum(dp[r::j])
        m = n2 + j                          # multiply by (1 - q^(n2+j))
        if m < len(dp):
            dp[m:] -= dp[:-m].copy()
    return dp


def mann_whitney_u(a, b) -> TestResult:
    """Mann-Whitney U with midranks; U of the first sample is the statistic."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    combined = np.concatenate([a, b])
    ranks = rankdata(combined)              # midranks for ties
    u_a = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    u_b = n1 * n2 - u_a

    _, tie_sizes = np.unique(combined, return_counts=True)
    has_ties = bool((tie_sizes > 1).any())

    if not has_ties and n1 * n2 <= EXACT_MW_LIMIT:
        counts = _mann_whitney_counts(n1, n2)
        k = int(min(u_a, u_b))              # integer when tie-free
        p = 2.0 * counts[:k + 1].sum() / counts.sum()
        method = "mann-whitney (exact)"
    else:
        n = n1 + n2
        tie_term = float(((tie_sizes ** 3 - tie_sizes).sum()) / (n * (n - 1)))
        sigma2 = n1 * n2 / 12.0 * ((n + 1) - tie_term)
        if sigma2 <= 0:
            p = 1.0
        else:
            z = max(abs(u_a - n1 * n2 / 2.0) - 0.5, 0.0) / math.sqrt(sigma2)
            p = math.erfc(z / math.sqrt(2.0))
        method = "mann-whitney (normal approx)"
    return TestResult(
        statistic=u_a,
        p_value=min(p, 1.0),
        method=method,
        detail={"u_a": u_a, "u_b": u_b, "n1": n1, "n2": n2},
    )


def t_test(a, b, welch: bool = True) -> TestResult:
    """Two-sided independent-samples t-test (Welch by default)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ValueError("each sample needs at least 2 observations")
    m1, m2 = a.mean(), b.mean()
    v1 = a.var(ddof=1)
    v2 = b.var(ddof=1)
    if v1 == 0.0 and v2 == 0.0:
        if m1 == m2:
            return TestResult(0.0, 1.0, "t-test (degenerate)", df=float(n1 + n2 - 2))
        raise ValueError("zero variance in both samples with unequal means")

    if welch:
        se2 = v1 / n1 + v2 / n2
        t = (m1 - m2) / math.sqrt(se2)
        df = se2 ** 2 / (v1 ** 2 / (n1 ** 2 * (n1 - 1)) + v2 ** 2 / (n2 ** 2 * (n2 - 1)))
        method = "t-test (Welch)"
    else:
        df = n1 + n2 - 2
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        t = (m1 - m2) / math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))
        method = "t-test (pooled)"
    p = 2.0 * float(special.stdtr(df, -abs(t)))
    return TestResult(statistic=float(t), p_value=p, method=method, df=float(df),
                      detail={"mean_a": float(m1), "mean_b": float(m2), "n1": n1, "n2": n2})


# ---------------------------------------------------------------------------
# Grouped summaries over analysis records
# ---------------------------------------------------------------------------

DEFAULT_FIELD_KINDS = {
    "age": "continuous",
    "mst": "continuous",
    "perla": "continuous",
    "fst": "ordinal",
    "gender": "categorical",
    "race": "categorical",
}

DEFAULT_ORDINAL_ORDERS = {
    "fst": ["I", "II", "III", "IV", "V", "VI"],
}


@dataclass
class GroupSummary:
    key: dict
    n: int
    metrics: dict   # field -> {"mean","sd","median"} or {"median","distribution"} etc.


def _ordinal_median(values: list, order: list) -> str:
    rank = {v: i for i, v in enumerate(order)}
    missing = [v for v in values if v not in rank]
    if missing:
        raise ValueError(f"ordinal values outside declared order: {sorted(set(missing))}")
    ranks = sorted(rank[v] for v in values)
    return order[ranks[(len(ranks) - 1) // 2]]    # floor rule on even counts


def summarize(records: list[dict], group_by: list[str], fields: list[str],
              field_kinds: dict | None = None,
              ordinal_orders: dict | None = None) -> list[GroupSummary]:
    """Per-group statistics for the requested fields.

    Continuous fields get mean/sd/median; ordinal fields get a floor-rule
    median plus a category distribution; categorical fields get a count
    distribution. Groups are emitted in sorted key order.
    """
    kinds = dict(DEFAULT_FIELD_KINDS)
    kinds.update(field_kinds or {})
    orders = dict(DEFAULT_ORDINAL_ORDERS)
    orders.update(ordinal_orders or {})

    for name in list(group_by) + list(fields):
        if records and not all(name in r for r in records):
            raise ValueError(f"unknown field: {name!r}")

    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        key = tuple(rec[g] for g in group_by)
        groups.setdefault(key, []).append(rec)

    summaries = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        members = groups[key]
        metrics: dict = {}
        for name in fields:
            kind = kinds.get(name)
            if kind is None:
                raise ValueError(f"no field kind registered for {name!r}")
            values = [m[name] for m in members]
            if kind == "continuous":
                arr = np.asarray(values, dtype=np.float64)
                metrics[name] = {
                    "mean": float(arr.mean()),
                    "sd": float(arr.std(ddof=0)),
                    "median": float(np.median(arr)),
                }
            elif kind == "ordinal":
                order = orders.get(name)
                if order is None:
                    raise ValueError(f"no ordinal order registered for {name!r}")
                dist = {cat: values.count(cat) for cat in order}
                metrics[name] = {
                    "median": _ordinal_median(values, order),
                    "distribution": dist,
                }
            elif kind == "categorical":
                dist: dict = {}
                for v in values:
                    dist[v] = dist.get(v, 0) + 1
                metrics[name] = {"distribution": dist}
            else:
                raise ValueError(f"unknown field kind {kind!r} for {name!r}")
        summaries.append(GroupSummary(
            key=dict(zip(group_by, key)), n=len(members), metrics=metrics))
    return summaries
