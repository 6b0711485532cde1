"""Task-evaluation statistics: ranking metrics, bootstrap confidence
intervals, reaction top-k aggregation, and power-law loss fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(labels, scores) -> float:
    """Mann-Whitney statistic: probability a random positive outscores a
    random negative, ties counting one half."""
    y = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    npos = int((y == 1).sum())
    nneg = int((y == 0).sum())
    if npos + nneg != len(y):
        raise ValueError("labels must be 0/1")
    if npos == 0 or nneg == 0:
        raise ValueError("ROC-AUC needs both classes")
    ranks = _average_ranks(s)
    u = ranks[y == 1].sum() - npos * (npos + 1) / 2.0
    return float(u / (npos * nneg))


def prc_auc(labels, scores) -> float:
    """Precision-recall area by right-continuous step integration (average
    precision), thresholds at distinct scores."""
    y = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    total_pos = int((y == 1).sum())
    if total_pos == 0:
        raise ValueError("PRC-AUC needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    y = y[order]
    s = s[order]
    tp = fp = 0
    prev_recall = 0.0
    area = 0.0
    i = 0
    n = len(y)
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        tp += int(y[i : j + 1].sum())
        fp += (j - i + 1) - int(y[i : j + 1].sum())
        recall = tp / total_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(area)


def rmse(xs, ys) -> float:
    a, b = _pair(xs, ys)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(xs, ys) -> float:
    a, b = _pair(xs, ys)
    return float(np.mean(np.abs(a - b)))


def spearman(xs, ys) -> float:
    """Rank correlation with average ranks for ties."""
    a, b = _pair(xs, ys)
    if len(a) < 2:
        raise ValueError("spearman needs at least two points")
    ra = _average_ranks(a)
    rb = _average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra**2).sum() * (rb**2).sum())
    if denom == 0:
        raise ValueError("constant input has undefined rank correlation")
    return float((ra * rb).sum() / denom)


def _pair(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(xs, dtype=np.float64)
    b = np.asarray(ys, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError("inputs must be equal-length nonempty vectors")
    return a, b


def bootstrap_ci(
    metric,
    labels,
    scores,
    n_resamples: int = 100,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float, float]:
    """Percentile bootstrap over `n_resamples` equal-size redraws with
    replacement. Per-resample generators are derived from (seed, index) so
    the result is independent of execution order. A resample on which the
    metric is undefined is redrawn up to 10 times."""
    y = np.asarray(labels)
    s = np.asarray(scores)
    if len(y) == 0 or len(y) != len(s):
        raise ValueError("labels and scores must be nonempty and aligned")
    point = float(metric(y, s))
    stats = np.empty(n_resamples, dtype=np.float64)
    n = len(y)
    for k in range(n_resamples):
        rng = np.random.default_rng((seed, k))
        for _ in range(10):
            idx = rng.integers(0, n, n)
            try:
                stats[k] = float(metric(y[idx], s[idx]))
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"metric undefined on resample {k} after 10 redraws")
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return point, float(lo), float(hi)


@dataclass(frozen=True)
class ScoredPrediction:
    candidate: str
    votes: int
    total_logprob: float


def aggregate_topk(
    beams: list[list[tuple[str, float]]], k: int
) -> list[ScoredPrediction]:
    """Merge beams from several augmented inputs: group by (canonical)
    candidate string, rank by votes, then summed log-probability, then
    lexicographic candidate. Candidates must be canonicalized upstream."""
    if not beams or all(not b for b in beams):
        raise ValueError("no beam results to aggregate")
    votes: dict[str, int] = {}
    addends: dict[str, list[float]] = {}
    for beam in beams:
        seen_here = set()
        for cand, lp in beam:
            addends.setdefault(cand, []).append(float(lp))
            if cand not in seen_here:
                votes[cand] = votes.get(cand, 0) + 1
                seen_here.add(cand)
    # sum in sorted order so the result is exactly independent of the order
    # in which beams were concatenated
    logp = {c: math.fsum(sorted(vals)) for c, vals in addends.items()}
    ranked = sorted(votes, key=lambda c: (-votes[c], -logp[c], c))
    return [ScoredPrediction(c, votes[c], logp[c]) for c in ranked[:k]]


def topk_accuracy(
    ranked: list[ScoredPrediction] | list[str],
    truth: str,
    ks: tuple[int, ...] = (1, 3, 5),
) -> dict[int, bool]:
    names = [r.candidate if isinstance(r, ScoredPrediction) else r for r in ranked]
    out = {}
    for k in ks:
        out[k] = truth in names[:k]
    return out


@dataclass
class PowerLawFit:
    a: float
    b: float
    c: float
    residual: float
    converged: bool

    def predict(self, n) -> np.ndarray:
        return self.a * np.asarray(n, dtype=np.float64) ** (-self.b) + self.c


def fit_power_law(points: list[tuple[float, float]]) -> PowerLawFit:
    """Least-squares fit of L(N) = a*N^-b + c.

    Grid-initialize c below min(L) with a log-linear solve for (a, b) at each
    c, then polish with a damped Gauss-Newton whose steps are only accepted
    when the residual decreases (so the residual trace is non-increasing).
    Degenerate data (b <= 0 at the end) is flagged, best effort returned.
    """
    if len(points) < 4:
        raise ValueError("power-law fit needs at least 4 points")
    ns = np.array([p[0] for p in points], dtype=np.float64)
    ls = np.array([p[1] for p in points], dtype=np.float64)
    if not np.all(np.diff(ns) > 0):
        raise ValueError("parameter counts must be strictly increasing")

    logn = np.log(ns)
    starts: list[tuple[float, float, float, float]] = []
    for c in np.linspace(0.0, ls.min(), 400, endpoint=False):
        resid_log = ls - c
        if np.any(resid_log <= 0):
            continue
        y = np.log(resid_log)
        slope, intercept = np.polyfit(logn, y, 1)
        a = float(np.exp(intercept))
        b = float(-slope)
        r = float(np.linalg.norm(a * ns ** (-b) + c - ls))
        starts.append((a, b, float(c), r))
    if not starts:
        return PowerLawFit(
            0.0, 0.0, float(ls.mean()), float(np.linalg.norm(ls - ls.mean())), False
        )

    # polish the most promising grid candidates; parameters are strongly
    # correlated near the optimum, so a single start can stall locally
    starts.sort(key=lambda t: t[3])
    best: tuple[float, float, float, float] | None = None
    for a, b, c, residual in starts[:8]:
        a, b, c, residual = _gauss_newton_polish(ns, ls, logn, a, b, c, residual)
        if best is None or residual < best[3]:
            best = (a, b, c, residual)
    a, b, c, residual = best
    converged = b > 0 and np.isfinite(residual)
    return PowerLawFit(a, b, c, residual, bool(converged))


def _gauss_newton_polish(ns, ls, logn, a, b, c, residual):
    """Damped Gauss-Newton; steps only accepted when the residual norm
    decreases, so the per-start residual trace is non-increasing."""
    lam = 1e-3
    for _ in range(200):
        nb = ns ** (-b)
        r = a * nb + c - ls
        jac = np.column_stack([nb, -a * logn * nb, np.ones_like(ns)])
        g = jac.T @ r
        if float(np.linalg.norm(g)) < 1e-10:
            break
        jtj = jac.T @ jac
        try:
            delta = np.linalg.solve(jtj + lam * np.eye(3), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        a2, b2, c2 = a + delta[0], b + delta[1], c + delta[2]
        r2 = float(np.linalg.norm(a2 * ns ** (-b2) + c2 - ls))
        if np.isfinite(r2) and r2 < residual:
            a, b, c, residual = float(a2), float(b2), float(c2), r2
            lam = max(lam / 3.0, 1e-12)
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    return a, b, c, residual
