"""Agreement statistics between an automatic grader and a human grader."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

EXACT_TOL = 1e-9


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class GradePair:
    id: str
    auto: float
    human: float


@dataclass
class GradePairSet:
    pairs: list[GradePair]

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise StatsError("problem ids must be unique")
        for p in self.pairs:
            if not (0 <= p.auto <= 1 and 0 <= p.human <= 1):
                raise StatsError(f"grades for {p.id!r} must lie in [0, 1]")

    @classmethod
    def from_values(cls, auto: Sequence[float], human: Sequence[float]) -> "GradePairSet":
        return cls([GradePair(str(i), float(a), float(h)) for i, (a, h) in enumerate(zip(auto, human))])


def load_pairs(path: str | Path) -> GradePairSet:
    """Read ``id,auto,human`` records from CSV (with header) or JSON lines."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix in (".jsonl", ".json"):
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
        else:
            records = list(csv.DictReader(io.StringIO(text)))
        pairs = [GradePair(str(r["id"]), float(r["auto"]), float(r["human"])) for r in records]
    except (KeyError, ValueError, TypeError) as exc:
        raise StatsError(f"{path}: bad grade-pair record ({exc})") from None
    return GradePairSet(pairs)


def average_ranks(xs: Sequence[float]) -> list[float]:
    """1-based ranks, tied values sharing the mean of the ranks they span."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return None
    return sxy / math.sqrt(sxx * syy)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Spearman's rho with mid-ranks for ties; None when either side is constant."""
    if len(xs) != len(ys):
        raise StatsError("vectors differ in length")
    if len(xs) < 2:
        return None
    rho = pearson(average_ranks(xs), average_ranks(ys))
    return None if rho is None else max(-1.0, min(1.0, rho))


@dataclass
class StatsReport:
    count: int
    avg_abs_diff: float
    avg_rel_diff_pct: float | None
    pct_over: float
    pct_under: float
    pct_exact: float
    joint_full_credit_pct: float | None
    spearman: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def compute_stats(pairs: GradePairSet) -> StatsReport:
    items = pairs.pairs
    if not items:
        raise StatsError("no grade pairs")
    n = len(items)
    # differences inside the tolerance count as ties everywhere
    diffs = [0.0 if abs(p.auto - p.human) <= EXACT_TOL else p.auto - p.human for p in items]
    exact = sum(d == 0 for d in diffs)
    over = sum(d > 0 for d in diffs)
    under = n - exact - over

    rel = [100.0 * (p.auto - p.human) / p.human for p in items if p.human > 0]
    both_full = sum(p.auto == 1 and p.human == 1 for p in items)
    either_full = sum(p.auto == 1 or p.human == 1 for p in items)

    return StatsReport(
        count=n,
        avg_abs_diff=sum(abs(d) for d in diffs) / n,
        avg_rel_diff_pct=sum(rel) / len(rel) if rel else None,
        pct_over=100.0 * over / n,
        pct_under=100.0 * under / n,
        pct_exact=100.0 * exact / n,
        joint_full_credit_pct=100.0 * both_full / either_full if either_full else None,
        spearman=spearman([p.auto for p in items], [p.human for p in items]),
    )


# label, attribute, is-percentage
ROWS = [
    ("Avg. Absolute Difference", "avg_abs_diff", False),
    ("Avg. Relative Difference (%)", "avg_rel_diff_pct", True),
    ("Auto Overestimated (%)", "pct_over", True),
    ("Auto Underestimated (%)", "pct_under", True),
    ("Exact Match (%)", "pct_exact", True),
    ("Joint Full Credit (%)", "joint_full_credit_pct", True),
    ("Spearman Correlation Coefficient", "spearman", False),
]


def render_stats(report: StatsReport) -> str:
    width = max(len(label) for label, _, _ in ROWS)
    lines = [f"{'Statistic':<{width}}  Value", f"{'-' * width}  -----"]
    for label, attr, pct in ROWS:
        value = getattr(report, attr)
        if value is None:
            cell = "n/a"
        elif attr == "avg_rel_diff_pct":
            cell = f"{value:+.2f}"
        elif pct:
            cell = f"{value:.2f}"
        else:
            cell = f"{value:.3f}"
        lines.append(f"{label:<{width}}  {cell}")
    return "\n".join(lines) + "\n"


def parse_stats_table(text: str) -> dict[str, float | None]:
    """Inverse of :func:`render_stats`, keyed by report attribute."""
    by_label = {label: attr for label, attr, _ in ROWS}
    out: dict[str, float | None] = {}
    for line in text.splitlines():
        m = re.match(r"^(.*?)\s{2,}(\S+)$", line)
        if not m or m.group(1).strip() not in by_label:
            continue
        cell = m.group(2)
        out[by_label[m.group(1).strip()]] = None if cell == "n/a" else float(cell)
    return out
