"""Ranking metrics for uplift predictions: QINI, AUUC, WAU and LIFT@k.

All four derive from one cumulative curve built by sorting rows by predicted
uplift (descending, ties kept in original index order) and accumulating
treated/control counts and positive-outcome sums per prefix.

Definitions and degenerate-prefix conventions (every curve is a total
function):

* qini value q(j) = Yt(j) - Yc(j) * (Nt(n)/Nc(n)): cumulative treated
  positives minus control positives reweighted by the overall group ratio.
  Per-row increments are then order-independent constants, which is what
  makes the treated-positives-first ordering provably area-maximal, the
  coefficient bounded by 1, and score negation exactly area-antisymmetric.
* uplift-curve value g(j) = (Yt(j)/Nt(j) - Yc(j)/Nc(j))*j; 0 while either
  group is absent from the prefix.
* a zero normalization denominator makes the qini coefficient 0.

Areas are trapezoids over the prefix fraction j/n with an implicit (0, 0)
anchor point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """Metric undefined for the given inputs (e.g. a treatment group is empty)."""


@dataclass
class RankedUpliftCurve:
    """Cumulative counts/sums per ranked prefix, j = 1..n after sorting.

    n_treated[j-1] is the number of treated rows among the top j, y_treated
    their positive-outcome sum; same for control. ``order`` maps rank to the
    original row index.
    """

    n_treated: np.ndarray
    n_control: np.ndarray
    y_treated: np.ndarray
    y_control: np.ndarray
    order: np.ndarray

    @property
    def n(self) -> int:
        return len(self.n_treated)

    def treatment_in_rank_order(self) -> np.ndarray:
        return np.diff(self.n_treated, prepend=0.0)

    def outcome_in_rank_order(self) -> np.ndarray:
        return np.diff(self.y_treated + self.y_control, prepend=0.0)


@dataclass
class EvalReport:
    """The four ranking metrics for one (model, split) evaluation."""

    qini: float
    auuc: float
    wau: float
    lift_at_k: float
    k_percent: int = 30
    split: str = ""
    model: str = ""
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "qini": float(self.qini),
            "auuc": float(self.auuc),
            "wau": float(self.wau),
            f"lift_at_{self.k_percent}": float(self.lift_at_k),
        }


def rank_and_accumulate(tau_hat, t, y) -> RankedUpliftCurve:
    """Sort by predicted uplift (descending, stable) and accumulate the curve."""
    tau_hat = np.asarray(tau_hat, dtype=np.float64).ravel()
    t = np.asarray(t, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if not (len(tau_hat) == len(t) == len(y)):
        raise MetricError("tau_hat, t, y must have equal lengths")
    if len(tau_hat) == 0:
        raise MetricError("empty inputs")
    if not np.all(np.isfinite(tau_hat)):
        raise MetricError("non-finite uplift scores")
    if t.sum() == 0 or t.sum() == len(t):
        raise MetricError("metric undefined without both treatment groups")

    order = np.argsort(-tau_hat, kind="stable")
    t_sorted = t[order]
    y_sorted = y[order]
    n_treated = np.cumsum(t_sorted)
    n_control = np.cumsum(1.0 - t_sorted)
    y_treated = np.cumsum(y_sorted * t_sorted)
    y_control = np.cumsum(y_sorted * (1.0 - t_sorted))
    return RankedUpliftCurve(n_treated, n_control, y_treated, y_control, order)


def qini_values(curve: RankedUpliftCurve) -> np.ndarray:
    """q(j) for j = 1..n: treated positives minus ratio-reweighted control
    positives. Prefixes without control rows reduce to Yt(j) since Yc=0."""
    ratio = curve.n_treated[-1] / curve.n_control[-1]
    return curve.y_treated - curve.y_control * ratio


def uplift_curve_values(curve: RankedUpliftCurve) -> np.ndarray:
    """g(j) for j = 1..n under the documented empty-group convention."""
    g = np.zeros(curve.n)
    both = (curve.n_treated > 0) & (curve.n_control > 0)
    j = np.arange(1, curve.n + 1, dtype=np.float64)
    g[both] = (
        curve.y_treated[both] / curve.n_treated[both]
        - curve.y_control[both] / curve.n_control[both]
    ) * j[both]
    return g


def _area(values: np.ndarray) -> float:
    """Trapezoid area of curve values over j/n with a (0, 0) anchor."""
    n = len(values)
    extended = np.concatenate(([0.0], values))
    return float(np.trapezoid(extended, dx=1.0 / n))


def optimal_ordering(t, y) -> np.ndarray:
    """Row permutation maximizing the qini area for the given (t, y) multiset.

    Stable order: treated positives, control negatives, treated negatives,
    control positives; original index order within each block.
    """
    t = np.asarray(t, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    block = np.where(
        (t == 1) & (y == 1), 0, np.where((t == 0) & (y == 0), 1, np.where(t == 1, 2, 3))
    )
    return np.argsort(block, kind="stable")


def qini_coefficient(curve: RankedUpliftCurve) -> float:
    """Area between the qini curve and the random line, self-normalized.

    Normalizer: the same area for the optimal ordering of the same (t, y)
    rows. A perfect ranking scores exactly 1.0; a zero normalizer (e.g. no
    positive outcomes at all) scores 0.0 by convention.
    """
    q = qini_values(curve)
    q_area = _area(q)
    random_area = 0.5 * q[-1]
    t_ranked = curve.treatment_in_rank_order()
    y_ranked = curve.outcome_in_rank_order()

    best = optimal_ordering(t_ranked, y_ranked)
    best_curve = _accumulate_in_order(t_ranked[best], y_ranked[best])
    best_area = _area(qini_values(best_curve))

    denom = best_area - random_area
    if denom == 0.0:
        return 0.0
    return float((q_area - random_area) / denom)


def _accumulate_in_order(t_sorted: np.ndarray, y_sorted: np.ndarray) -> RankedUpliftCurve:
    return RankedUpliftCurve(
        np.cumsum(t_sorted),
        np.cumsum(1.0 - t_sorted),
        np.cumsum(y_sorted * t_sorted),
        np.cumsum(y_sorted * (1.0 - t_sorted)),
        np.arange(len(t_sorted)),
    )


def auuc(curve: RankedUpliftCurve) -> float:
    """Area between the uplift curve and its random-targeting line, over n."""
    g = uplift_curve_values(curve)
    random_area = 0.5 * g[-1]
    return float((_area(g) - random_area) / curve.n)


def weighted_average_uplift(curve: RankedUpliftCurve, bins: int = 10) -> float:
    """Treated-count-weighted mean of per-bin (non-cumulative) uplifts.

    The ranked list is cut into ``bins`` contiguous blocks of near-equal size
    (remainder spread over the leading blocks). Bins missing either group are
    skipped. Returns 0.0 if every bin is skipped.
    """
    if bins < 1:
        raise MetricError("bins must be >= 1")
    n = curve.n
    base, rem = divmod(n, bins)
    sizes = [base + (1 if b < rem else 0) for b in range(bins)]
    edges = np.cumsum([0] + sizes)

    cum_nt = np.concatenate(([0.0], curve.n_treated))
    cum_nc = np.concatenate(([0.0], curve.n_control))
    cum_yt = np.concatenate(([0.0], curve.y_treated))
    cum_yc = np.concatenate(([0.0], curve.y_control))

    weighted = 0.0
    total_weight = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi == lo:
            continue
        nt = cum_nt[hi] - cum_nt[lo]
        nc = cum_nc[hi] - cum_nc[lo]
        if nt == 0 or nc == 0:
            continue
        uplift = (cum_yt[hi] - cum_yt[lo]) / nt - (cum_yc[hi] - cum_yc[lo]) / nc
        weighted += uplift * nt
        total_weight += nt
    if total_weight == 0.0:
        return 0.0
    return float(weighted / total_weight)


def lift_at_k(curve: RankedUpliftCurve, k_percent: float = 30) -> float:
    """Difference of positive rates between groups within the top-k% ranks."""
    if not 0 < k_percent <= 100:
        raise MetricError("k_percent must be in (0, 100]")
    m = int(np.ceil(k_percent * curve.n / 100.0))
    nt = curve.n_treated[m - 1]
    nc = curve.n_control[m - 1]
    if nt == 0 or nc == 0:
        raise MetricError(f"both groups required in the top {k_percent}% (m={m})")
    return float(curve.y_treated[m - 1] / nt - curve.y_control[m - 1] / nc)


def evaluate_uplift(tau_hat, t, y, k_percent: int = 30, bins: int = 10, *,
                    split: str = "", model: str = "", seed: int = 0) -> EvalReport:
    """All four metrics from raw predictions in one pass."""
    curve = rank_and_accumulate(tau_hat, t, y)
    return EvalReport(
        qini=qini_coefficient(curve),
        auuc=auuc(curve),
        wau=weighted_average_uplift(curve, bins=bins),
        lift_at_k=lift_at_k(curve, k_percent=k_percent),
        k_percent=k_percent,
        split=split,
        model=model,
        seed=seed,
    )


def curve_to_csv(curve: RankedUpliftCurve, path) -> None:
    """Export (j, Nt, Nc, Yt, Yc, q, g) rows for external plotting."""
    q = qini_values(curve)
    g = uplift_curve_values(curve)
    header = "j,n_treated,n_control,y_treated,y_control,q,g"
    rows = np.column_stack(
        (
            np.arange(1, curve.n + 1),
            curve.n_treated,
            curve.n_control,
            curve.y_treated,
            curve.y_control,
            q,
            g,
        )
    )
    np.savetxt(path, rows, delimiter=",", header=header, comments="")
