"""Board statistics and the inference battery.

Three summary statistics describe a board's low-order structure: the
red-minus-blue tile count, the matching-minus-mismatching count over
4-adjacent pairs, and the monochrome-minus-mixed count over length-2
paths.  On top of those sit a pooled two-sample t-test and a three-way
factorial ANOVA, with p-values computed from a hand-rolled regularized
incomplete beta function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .board import GRID_SIZE, Board, neighbors4

BETA_TOL = 1e-12
BETA_MAX_ITER = 500


class DegenerateVarianceError(ValueError):
    """Raised when a t-test's pooled variance is zero."""


class EmptyCellError(ValueError):
    """Raised when a factorial design has an empty factor combination."""


class StatTriple(NamedTuple):
    first: int
    second: int
    third: int


class TTestResult(NamedTuple):
    t: float
    df: int
    p: float


class ObservationRecord(NamedTuple):
    value: float
    performer: str
    condition: str
    kind: str


@dataclass(frozen=True)
class AnovaRow:
    effect: str
    df: int
    ss: float
    f: float
    p: float


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple[AnovaRow, ...]
    residual_df: int
    residual_ss: float
    total_ss: float

    def to_json(self) -> dict:
        return {
            "rows": [
                {"effect": r.effect, "df": r.df, "F": r.f, "p": r.p} for r in self.rows
            ],
            "residual_df": self.residual_df,
        }


# ---------------------------------------------------------------------------
# board statistics


def _adjacent_pairs():
    pairs = []
    for r in range(GRID_SIZE):
        for c in range(GRID_SIZE):
            if c + 1 < GRID_SIZE:
                pairs.append(((r, c), (r, c + 1)))
            if r + 1 < GRID_SIZE:
                pairs.append(((r, c), (r + 1, c)))
    return pairs


def _two_paths():
    """All unordered length-2 simple paths: a center and two distinct
    4-neighbors, bent or straight."""
    paths = []
    for r in range(GRID_SIZE):
        for c in range(GRID_SIZE):
            nbrs = list(neighbors4(r, c))
            for i in range(len(nbrs)):
                for j in range(i + 1, len(nbrs)):
                    paths.append((nbrs[i], (r, c), nbrs[j]))
    return paths


_PAIRS = _adjacent_pairs()
_PATHS = _two_paths()


def board_statistics(board: Board) -> StatTriple:
    tiles = board.tiles
    first = int(tiles.sum()) * 2 - tiles.size

    second = 0
    for (r1, c1), (r2, c2) in _PAIRS:
        second += 1 if tiles[r1, c1] == tiles[r2, c2] else -1

    third = 0
    for (r1, c1), (r2, c2), (r3, c3) in _PATHS:
        mono = tiles[r1, c1] == tiles[r2, c2] == tiles[r3, c3]
        third += 1 if mono else -1

    return StatTriple(first, second, third)


# ---------------------------------------------------------------------------
# special functions

# Continued-fraction evaluation (modified Lentz); the even/odd coefficient
# pattern follows the standard I_x(a,b) expansion.


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, BETA_MAX_ITER + 1):
        m2 = 2 * m
        coef = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_TOL:
            return h
    raise RuntimeError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        a * math.log(x)
        + b * math.log1p(-x)
        - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    )
    front = math.exp(log_front)
    # The continued fraction converges fast only for x below the
    # distribution's bulk; reflect otherwise.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - math.exp(
        b * math.log1p(-x)
        + a * math.log(x)
        - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    ) * _beta_continued_fraction(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def f_sf(f: float, df1: int, df2: int) -> float:
    """Upper-tail probability of the F distribution."""
    if df1 < 1 or df2 < 1:
        raise ValueError("dfs must be >= 1")
    if f <= 0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# t-test


def two_sample_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    n1, n2 = xa.size, xb.size
    if n1 < 2 or n2 < 2:
        raise ValueError("both groups need at least two observations")
    df = n1 + n2 - 2
    pooled = ((n1 - 1) * xa.var(ddof=1) + (n2 - 1) * xb.var(ddof=1)) / df
    if pooled <= 0.0:
        raise DegenerateVarianceError("pooled variance is zero")
    t = float((xa.mean() - xb.mean()) / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2)))
    return TTestResult(t=t, df=df, p=t_two_sided_p(t, df))


# ---------------------------------------------------------------------------
# three-way ANOVA


def _levels(records: Sequence[ObservationRecord], field: str) -> list:
    return sorted({getattr(r, field) for r in records})


def _dummy(values: list, levels: list) -> np.ndarray:
    """Treatment-coded columns (levels beyond the first)."""
    cols = np.zeros((len(values), len(levels) - 1))
    index = {lv: i for i, lv in enumerate(levels)}
    for row, v in enumerate(values):
        i = index[v]
        if i > 0:
            cols[row, i - 1] = 1.0
    return cols


def _interaction(*blocks: np.ndarray) -> np.ndarray:
    out = blocks[0]
    for block in blocks[1:]:
        out = np.einsum("ni,nj->nij", out, block).reshape(out.shape[0], -1)
    return out


def _sse(design: np.ndarray, y: np.ndarray) -> float:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid)


def three_way_anova(records: Sequence[ObservationRecord]) -> AnovaTable:
    records = list(records)
    if not records:
        raise ValueError("no records")
    performers = _levels(records, "performer")
    conditions = _levels(records, "condition")
    kinds = _levels(records, "kind")
    if len(performers) != 2 or len(conditions) != 2:
        raise ValueError("performer and condition must each have exactly two levels")
    if len(kinds) < 2:
        raise ValueError("need at least two kinds")

    counts = {}
    for r in records:
        counts[(r.performer, r.condition, r.kind)] = counts.get((r.performer, r.condition, r.kind), 0) + 1
    for p in performers:
        for c in conditions:
            for k in kinds:
                if (p, c, k) not in counts:
                    raise EmptyCellError(
                        f"empty design cell: performer={p}, condition={c}, kind={k}"
                    )

    y = np.array([r.value for r in records], dtype=np.float64)
    if not np.isfinite(y).all():
        raise ValueError("non-finite observation value")

    perf = _dummy([r.performer for r in records], performers)
    cond = _dummy([r.condition for r in records], conditions)
    kind = _dummy([r.kind for r in records], kinds)

    effects = [
        ("performer", perf),
        ("kind", kind),
        ("condition", cond),
        ("performer x condition", _interaction(perf, cond)),
        ("performer x kind", _interaction(perf, kind)),
        ("kind x condition", _interaction(kind, cond)),
        ("performer x kind x condition", _interaction(perf, kind, cond)),
    ]

    n = len(records)
    design = np.ones((n, 1))
    sse_prev = _sse(design, y)
    total_ss = sse_prev
    seq = []
    for name, block in effects:
        design = np.hstack([design, block])
        sse_next = _sse(design, y)
        seq.append((name, block.shape[1], max(sse_prev - sse_next, 0.0)))
        sse_prev = sse_next

    residual_ss = sse_prev
    model_df = sum(df for _, df, _ in seq)
    residual_df = n - 1 - model_df
    if residual_df < 1:
        raise ValueError("no residual degrees of freedom")
    mse = residual_ss / residual_df

    # Rounding debris from lstsq on exactly-collinear data must not turn
    # into spurious infinite F ratios.
    tiny = total_ss * 1e-12
    rows = []
    for name, df, ss in seq:
        if residual_ss <= tiny:
            f_val = 0.0 if ss <= tiny else math.inf
        else:
            f_val = (ss / df) / mse
        p = f_sf(f_val, df, residual_df) if math.isfinite(f_val) else 0.0
        rows.append(AnovaRow(effect=name, df=df, ss=ss, f=f_val, p=p))

    return AnovaTable(
        rows=tuple(rows),
        residual_df=residual_df,
        residual_ss=residual_ss,
        total_ss=total_ss,
    )


# ---------------------------------------------------------------------------
# distribution match report

STAT_NOTE = (
    "pairs use 4-connectivity; triples are all unordered length-2 simple "
    "paths (bent and straight)"
)


def match_report(boards_a: Sequence[Board], boards_b: Sequence[Board]) -> dict:
    """Per-statistic comparison of two board samples.

    Keys a/b are reported as abstract/metamer respectively; the caller
    decides which sample plays which role.
    """
    stats_a = np.array([board_statistics(b) for b in boards_a], dtype=np.float64)
    stats_b = np.array([board_statistics(b) for b in boards_b], dtype=np.float64)
    report: dict = {"note": STAT_NOTE, "n_abstract": len(boards_a), "n_metamer": len(boards_b)}
    for i, name in enumerate(("first", "second", "third")):
        a_col, b_col = stats_a[:, i], stats_b[:, i]
        entry = {
            "mean_abstract": float(a_col.mean()),
            "mean_metamer": float(b_col.mean()),
        }
        try:
            t, df, p = two_sample_ttest(a_col, b_col)
            entry.update(t=t, df=df, p=p)
        except DegenerateVarianceError:
            entry.update(t=None, df=len(boards_a) + len(boards_b) - 2, p=None)
        report[name] = entry
    return report
