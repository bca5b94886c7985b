"""Independent definitional oracles used by the tests.

These deliberately avoid the library's curve machinery: ranking metrics are
recomputed per prefix from scratch (O(n^2) overall), and gradients come from
central finite differences on the model's own loss value. Slow and obviously
correct is the point.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np


def rank_order(tau, n=None):
    """Stable descending order by score, ties broken by original index."""
    tau = np.asarray(tau, dtype=float).ravel()
    n = len(tau) if n is None else n
    return sorted(range(n), key=lambda i: (-tau[i], i))


def prefix_counts(order, t, y, j):
    """Recount treated/control counts and positive sums of the top-j prefix."""
    prefix = order[:j]
    nt = sum(1 for i in prefix if t[i] == 1)
    nc = j - nt
    yt = sum(y[i] for i in prefix if t[i] == 1)
    yc = sum(y[i] for i in prefix if t[i] == 0)
    return nt, nc, yt, yc


def qini_point(yt, yc, overall_ratio):
    return yt - yc * overall_ratio


def uplift_point(nt, nc, yt, yc, j):
    if nt == 0 or nc == 0:
        return 0.0
    return (yt / nt - yc / nc) * j


def trapezoid_area(values, n):
    """Trapezoid area over j/n of [0, v1, ..., vn]."""
    extended = [0.0] + list(values)
    area = 0.0
    for j in range(1, len(extended)):
        area += 0.5 * (extended[j - 1] + extended[j]) / n
    return area


def optimal_order(t, y):
    """Treated positives, control negatives, treated negatives, control
    positives; stable within blocks."""

    def block(i):
        if t[i] == 1 and y[i] == 1:
            return 0
        if t[i] == 0 and y[i] == 0:
            return 1
        if t[i] == 1:
            return 2
        return 3

    return sorted(range(len(t)), key=lambda i: (block(i), i))


def overall_group_ratio(t):
    nt = sum(1 for v in t if v == 1)
    return nt / (len(t) - nt)


def qini_area_for_order(order, t, y):
    n = len(order)
    ratio = overall_group_ratio(t)
    values = []
    for j in range(1, n + 1):
        _, _, yt, yc = prefix_counts(order, t, y, j)
        values.append(qini_point(yt, yc, ratio))
    return trapezoid_area(values, n)


def oracle_qini(tau, t, y):
    n = len(t)
    order = rank_order(tau, n)
    q_area = qini_area_for_order(order, t, y)
    _, _, yt, yc = prefix_counts(order, t, y, n)
    random_area = 0.5 * qini_point(yt, yc, overall_group_ratio(t))
    best_area = qini_area_for_order(optimal_order(t, y), t, y)
    denom = best_area - random_area
    if denom == 0.0:
        return 0.0
    return (q_area - random_area) / denom


def oracle_qini_best_area_exhaustive(t, y):
    """Max qini area over all distinct orderings; n <= 8 only."""
    n = len(t)
    assert n <= 8
    best = -np.inf
    for perm in permutations(range(n)):
        best = max(best, qini_area_for_order(list(perm), t, y))
    return best


def oracle_auuc(tau, t, y):
    n = len(t)
    order = rank_order(tau, n)
    values = [uplift_point(*prefix_counts(order, t, y, j), j) for j in range(1, n + 1)]
    random_area = 0.5 * values[-1]
    return (trapezoid_area(values, n) - random_area) / n


def oracle_wau(tau, t, y, bins=10):
    n = len(t)
    order = rank_order(tau, n)
    base, rem = divmod(n, bins)
    weighted, total_weight = 0.0, 0.0
    start = 0
    for b in range(bins):
        size = base + (1 if b < rem else 0)
        members = order[start:start + size]
        start += size
        treated = [y[i] for i in members if t[i] == 1]
        control = [y[i] for i in members if t[i] == 0]
        if not treated or not control:
            continue
        uplift = np.mean(treated) - np.mean(control)
        weighted += uplift * len(treated)
        total_weight += len(treated)
    return weighted / total_weight if total_weight else 0.0


def oracle_lift_at_k(tau, t, y, k_percent=30):
    n = len(t)
    order = rank_order(tau, n)
    m = int(np.ceil(k_percent * n / 100.0))
    top = order[:m]
    treated = [y[i] for i in top if t[i] == 1]
    control = [y[i] for i in top if t[i] == 0]
    assert treated and control, "oracle: a group is absent from the top-k"
    return float(np.mean(treated) - np.mean(control))


def random_metric_instance(rng, max_n=200):
    """Random (tau, t, y) with distinct scores, both groups present, and both
    groups represented in the top 30% (the lift@30 precondition)."""
    n = int(rng.integers(10, max_n + 1))
    tau = rng.permutation(n) + rng.random(n) * 0.5  # distinct by construction
    t = (rng.random(n) < rng.uniform(0.2, 0.8)).astype(float)
    top_two = np.argsort(-tau)[:2]
    t[top_two[0]], t[top_two[1]] = 1.0, 0.0
    y = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(float)
    return tau, t, y


def finite_difference_max_error(model, X, t, y, h=1e-5, tol=1e-4,
                                coords_per_tensor=8, coord_seed=0, noise_seed=77):
    """Max relative error between autodiff and central differences.

    Samples up to ``coords_per_tensor`` coordinates per parameter tensor
    (all of them for small tensors). A coordinate is held to the relative
    tolerance only when central differences can certify it in float64: the
    cancellation noise of (f+ - f-) is ~eps*|f|, so the FD value carries an
    absolute error around eps*|f|/h and gradients below that budget divided
    by ``tol`` are unverifiable by FD regardless of implementation. Those
    (plus the |g| <= 1e-8 cutoff) are skipped; returns (max error, number of
    coordinates checked, number sampled).
    """

    def loss_value():
        total, _ = model.loss(X, t, y, rng=np.random.default_rng(noise_seed))
        return float(total.values)

    total, _ = model.loss(X, t, y, rng=np.random.default_rng(noise_seed))
    for p in model.params.values():
        p.grad = None
    total.backward()
    f0 = float(total.values)
    fd_noise = 5.0 * np.finfo(float).eps * max(1.0, abs(f0)) / h
    certifiable = max(1e-8, fd_noise / tol)

    worst = 0.0
    checked = 0
    sampled = 0
    coord_rng = np.random.default_rng(coord_seed)
    for p in model.params.values():
        grad = p.grad if p.grad is not None else np.zeros_like(p.values)
        flat = p.values.ravel()
        count = min(coords_per_tensor, flat.size)
        coords = coord_rng.choice(flat.size, size=count, replace=False)
        for i in coords:
            sampled += 1
            analytic = grad.ravel()[i]
            if abs(analytic) <= certifiable:
                continue
            original = flat[i]
            flat[i] = original + h
            f_plus = loss_value()
            flat[i] = original - h
            f_minus = loss_value()
            flat[i] = original
            fd = (f_plus - f_minus) / (2.0 * h)
            checked += 1
            worst = max(worst, abs(analytic - fd) / max(abs(analytic), abs(fd)))
    return worst, checked, sampled
