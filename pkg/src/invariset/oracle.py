"""
White-box checks for the built-in examples.

Grid evaluation of the sets O_k, Monte-Carlo estimates of escape and sandwich
measures, closed-form failure bounds, and brute-force references for the
nearest-neighbour and delta* computations.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import ConstraintBox
from .sampling import VERIFY_STREAM, binomial_sigma, sample_uniform

log = logging.getLogger(__name__)


def _tolerant_exit_times(system, X, box, horizon):
    """Exit times like :func:`dynamics.exit_times`, but non-finite steps count as exits."""
    X = np.array(X, dtype=float)
    out = np.zeros(len(X), dtype=np.int64)
    alive = np.arange(len(X))
    n_bad = 0
    batch = getattr(system, "step_batch", None)
    for t in range(1, horizon + 1):
        if alive.size == 0:
            break
        with np.errstate(all="ignore"):
            if batch is not None:
                Y = np.asarray(batch(X[alive]), dtype=float)
            else:
                Y = np.array([system.step(x) for x in X[alive]], dtype=float)
        finite = np.all(np.isfinite(Y), axis=1)
        n_bad += int((~finite).sum())
        X[alive] = np.where(finite[:, None], Y, np.nan)
        left = ~finite | ~box.contains(X[alive])
        out[alive[left]] = t
        alive = alive[~left]
    if n_bad:
        log.warning("%d states became non-finite; treated as outside", n_bad)
    return out


@dataclass
class GridSet:
    """Membership of cell centres in O_k on a regular grid over ``box``."""

    box: ConstraintBox
    resolution: tuple
    mask: np.ndarray
    k: int

    @property
    def measure(self) -> float:
        return float(self.mask.mean())

    def centers(self) -> np.ndarray:
        return grid_centers(self.box, self.resolution)


def _resolution(box, resolution) -> tuple:
    res = (resolution,) * box.dim if np.isscalar(resolution) else tuple(resolution)
    if len(res) != box.dim or min(res) < 2:
        raise ValueError("need a resolution >= 2 for every axis")
    return tuple(int(r) for r in res)


def grid_centers(box: ConstraintBox, resolution) -> np.ndarray:
    """Cell centres in C order (last axis fastest)."""
    res = _resolution(box, resolution)
    axes = [lo + (np.arange(r) + 0.5) * (hi - lo) / r for lo, hi, r in zip(box.lower, box.upper, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


class GridOracle:
    """Exit times of every cell centre, computed once and sliced per ``k``."""

    def __init__(self, system, box: ConstraintBox, resolution=500, k_max: int = 10):
        self.box = box
        self.resolution = _resolution(box, resolution)
        self.k_max = int(k_max)
        self.centers = grid_centers(box, self.resolution)
        self.exit_times = _tolerant_exit_times(system, self.centers, box, self.k_max + 1)

    def mask(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.k_max + 1:
            raise ValueError(f"k must lie in [0, {self.k_max + 1}]")
        return (self.exit_times == 0) | (self.exit_times > k)

    def O_k(self, k: int) -> GridSet:
        return GridSet(self.box, self.resolution, self.mask(k), k)

    def fixed_point(self):
        """Smallest ``k <= k_max`` with identical masks at ``k`` and ``k+1``, else None."""
        for k in range(self.k_max + 1):
            if not np.any(self.exit_times == k + 1):
                return k
        return None


def grid_O_k(system, box: ConstraintBox, k: int, resolution=500) -> GridSet:
    if k < 0:
        raise ValueError("k must be non-negative")
    return GridOracle(system, box, resolution, max(k - 1, 0)).O_k(k)


def grid_fixed_point(system, box: ConstraintBox, resolution=500, k_max: int = 100):
    return GridOracle(system, box, resolution, k_max).fixed_point()


@dataclass
class ViolationEstimate:
    count: int
    n_mc: int
    seed: int

    @property
    def point_estimate(self) -> float:
        return self.count / self.n_mc

    @property
    def sigma(self) -> float:
        return binomial_sigma(self.point_estimate, self.n_mc)


def mc_points(box: ConstraintBox, n_mc: int, seed: int, stream: int = 0) -> np.ndarray:
    return sample_uniform(box, n_mc, seed, stream=VERIFY_STREAM + stream).points


def violation_S_k(system, box: ConstraintBox, k: int, n_mc: int, seed: int, stream: int = 0) -> ViolationEstimate:
    """Monte-Carlo estimate of the measure of ``O_k \\ O_{k+1}``.

    A point lies there exactly when its first exit happens at step ``k + 1``.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    X = mc_points(box, n_mc, seed, stream)
    exits = _tolerant_exit_times(system, X, box, k + 1)
    return ViolationEstimate(int(np.sum(exits == k + 1)), n_mc, seed)


def measure_O_k(system, box: ConstraintBox, k: int, n_mc: int, seed: int, stream: int = 0) -> ViolationEstimate:
    X = mc_points(box, n_mc, seed, stream)
    exits = _tolerant_exit_times(system, X, box, k)
    return ViolationEstimate(int(np.sum(exits == 0)), n_mc, seed)


@dataclass
class SandwichMeasures:
    inner_excess: ViolationEstimate
    outer_deficit: ViolationEstimate
    measure_inner: float
    measure_outer: float
    measure_target: float


def sandwich_measures(inner, outer, system, box: ConstraintBox, t_star: int, n_mc: int, seed: int,
                      stream: int = 1) -> SandwichMeasures:
    """Estimate how much of the inner set lies outside O_{t*}, and how much of O_{t*} the outer set misses.

    Membership in O_{t*} is decided by simulating each point ``t_star`` steps.
    """
    X = mc_points(box, n_mc, seed, stream)
    in_target = _tolerant_exit_times(system, X, box, t_star) == 0
    in_inner = inner.contains(X)
    in_outer = outer.contains(X)
    return SandwichMeasures(
        ViolationEstimate(int(np.sum(in_inner & ~in_target)), n_mc, seed),
        ViolationEstimate(int(np.sum(in_target & ~in_outer)), n_mc, seed),
        float(in_inner.mean()),
        float(in_outer.mean()),
        float(in_target.mean()),
    )


@dataclass
class BoundRow:
    N: int
    thm1: float
    thm2: float
    hoeffding: float


def bound_table(epsilon: float, N: int) -> BoundRow:
    """Failure-probability bounds at sample size ``N``.

    ``thm2 = (1-eps)^N`` for the max-exit horizon, ``thm1 = thm2 / eps`` for the
    first-plateau horizon and ``hoeffding = (2/eps) exp(-2 N eps^2)``.
    """
    if not 0 < epsilon < 1 or N < 1:
        raise ValueError("need 0 < epsilon < 1 and N >= 1")
    log_thm2 = N * math.log1p(-epsilon)
    return BoundRow(
        N,
        math.exp(log_thm2 - math.log(epsilon)),
        math.exp(log_thm2),
        math.exp(math.log(2.0 / epsilon) - 2.0 * N * epsilon * epsilon),
    )


def brute_force_nn_distance(points, queries, chunk: int = 256) -> np.ndarray:
    """Minimum Euclidean distance from each query to ``points`` by exhaustive scan."""
    P = np.asarray(points, dtype=float)
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    if len(P) == 0:
        return np.full(len(Q), np.inf)
    out = np.empty(len(Q))
    for s in range(0, len(Q), chunk):
        diff = Q[s:s + chunk, None, :] - P[None, :, :]
        out[s:s + chunk] = np.sqrt((diff * diff).sum(axis=2)).min(axis=1)
    return out


def brute_force_delta_star(test_points, test_inside, ref_points, ref_inside) -> float:
    """Plain double loop over (test, reference) pairs."""
    refs = [(tuple(y), bool(lab)) for y, lab in zip(np.asarray(ref_points, float).tolist(),
                                                    np.asarray(ref_inside, bool).tolist())]
    best = 0.0
    for x, lab in zip(np.asarray(test_points, float).tolist(), np.asarray(test_inside, bool).tolist()):
        h = math.inf
        for y, rlab in refs:
            if rlab == lab:
                h = min(h, math.dist(x, y))
        best = max(best, h)
    return best


def write_grid_csv(path, centers, in_O_k: Sequence[bool], in_inner: Sequence[bool], in_outer: Sequence[bool]):
    """CSV with one row per cell: coordinates, then 0/1 membership flags."""
    centers = np.asarray(centers, dtype=float)
    header = [f"x{i + 1}" for i in range(centers.shape[1])] + ["in_O_k", "in_inner", "in_outer"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for c, a, b, o in zip(centers, in_O_k, in_inner, in_outer):
            w.writerow([repr(float(v)) for v in c] + [int(a), int(b), int(o)])
