"""
Seeded uniform sampling over a box and a-priori sample-size calculators.

Samples come from a Philox counter-based generator keyed by ``(seed, stream)``.
Point ``i`` of a stream occupies a fixed slot of the counter sequence, so any
block of points can be regenerated on its own (see :func:`sample_block`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ConstraintBox

# reserved stream ids; Phase-II rounds use PHASE2_STREAM + round
OMEGA_STREAM = 0
PHASE2_STREAM = 1
VERIFY_STREAM = 1 << 32

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter increment


def _philox(seed: int, stream: int) -> np.random.Philox:
    if not (0 <= seed < 1 << 64) or not (0 <= stream < 1 << 64):
        raise ValueError("seed and stream must be unsigned 64-bit integers")
    return np.random.Philox(key=(stream << 64) | seed)


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    seed: int
    stream: int = OMEGA_STREAM

    @property
    def count(self) -> int:
        return len(self.points)

    def __len__(self):
        return len(self.points)


def _scale(box: ConstraintBox, u: np.ndarray) -> np.ndarray:
    pts = box.lower + u * (box.upper - box.lower)
    # u < 1 but rounding could in principle land exactly on/over the upper face
    return np.minimum(pts, box.upper)


def sample_block(box: ConstraintBox, start: int, count: int, seed: int, stream: int = OMEGA_STREAM) -> np.ndarray:
    """Points ``start .. start+count-1`` of the stream, without drawing the earlier ones."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    bitgen = _philox(seed, stream)
    offset = start * box.dim
    bitgen.advance(offset // _WORDS_PER_BLOCK)
    rng = np.random.Generator(bitgen)
    skip = offset % _WORDS_PER_BLOCK
    if skip:
        rng.random(skip)
    u = rng.random((count, box.dim))
    return _scale(box, u)


def sample_uniform(box: ConstraintBox, n: int, seed: int, stream: int = OMEGA_STREAM) -> SampleSet:
    """``n`` i.i.d. uniform points in ``box``; a pure function of ``(box, n, seed, stream)``."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    u = np.random.Generator(_philox(seed, stream)).random((n, box.dim))
    return SampleSet(_scale(box, u), seed, stream)


def _check_prob(name, p, allow_one=True):
    hi_ok = p <= 1 if allow_one else p < 1
    if not (0 < p and hi_ok) or math.isnan(p):
        raise ValueError(f"{name} must lie in (0, 1], got {p}")


def _smallest_n(log_bound_per_sample: float, log_target: float) -> int:
    """Smallest integer N >= 1 with ``N * log_bound_per_sample <= log_target``."""
    if log_target >= 0:
        return 1
    n = max(1, math.ceil(log_target / log_bound_per_sample))
    # guard against the ratio rounding up across an integer
    while n > 1 and (n - 1) * log_bound_per_sample <= log_target:
        n -= 1
    return n


def phase1_sample_size(epsilon: float, beta: float) -> int:
    """Trajectories needed so that ``(1 - eps)^N <= beta``."""
    _check_prob("epsilon", epsilon)
    _check_prob("beta", beta)
    if epsilon == 1 or beta == 1:
        return 1
    return _smallest_n(math.log1p(-epsilon), math.log(beta))


def phase1_sample_size_conservative(epsilon: float, beta: float) -> int:
    """Trajectories needed so that ``(1/eps)(1 - eps)^N <= beta`` (plateau-based horizon)."""
    _check_prob("epsilon", epsilon)
    _check_prob("beta", beta)
    if epsilon == 1:
        return 1
    return _smallest_n(math.log1p(-epsilon), math.log(epsilon * beta))


def hoeffding_sample_size(epsilon: float, beta: float) -> int:
    """Smallest N with ``(2/eps) exp(-2 N eps^2) <= beta``."""
    _check_prob("epsilon", epsilon)
    _check_prob("beta", beta)
    return _smallest_n(-2.0 * epsilon * epsilon, math.log(beta * epsilon / 2.0))


def log_scenario_confidence(n_delta: int, eps_tilde: float, d: int = 1) -> float:
    """Natural log of :func:`scenario_confidence`."""
    if d < 1 or n_delta < d:
        raise ValueError(f"need n_delta >= d >= 1, got n_delta={n_delta}, d={d}")
    _check_prob("eps_tilde", eps_tilde)
    if eps_tilde == 1:
        # only the i = n term could survive and it is excluded since i < d <= n
        return -math.inf
    log_e, log_q = math.log(eps_tilde), math.log1p(-eps_tilde)
    terms = [
        math.lgamma(n_delta + 1) - math.lgamma(i + 1) - math.lgamma(n_delta - i + 1)
        + i * log_e + (n_delta - i) * log_q
        for i in range(d)
    ]
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def scenario_confidence(n_delta: int, eps_tilde: float, d: int = 1) -> float:
    """Binomial tail ``sum_{i<d} C(N, i) e^i (1-e)^(N-i)``.

    With ``d = 1`` this is ``(1 - eps)^N``. ``d = 2`` (one decision variable
    plus its sign constraint) gives 0.0476 at ``N = 4800, eps = 1e-3``.
    """
    return math.exp(log_scenario_confidence(n_delta, eps_tilde, d))


def scenario_sample_size(eps_tilde: float, beta_tilde: float, d: int = 1) -> int:
    """Smallest ``N >= d`` with ``scenario_confidence(N, eps_tilde, d) < beta_tilde``."""
    _check_prob("eps_tilde", eps_tilde)
    _check_prob("beta_tilde", beta_tilde)
    log_beta = math.log(beta_tilde)

    def ok(n):
        return log_scenario_confidence(n, eps_tilde, d) < log_beta

    lo = d
    if ok(lo):
        return lo
    hi = 2 * d
    while not ok(hi):
        lo, hi = hi, 2 * hi
        if hi > 1 << 62:
            raise ValueError("no finite sample size reaches the requested confidence")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def binomial_sigma(p: float, n: int) -> float:
    """Standard deviation of a Monte-Carlo proportion estimate."""
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)
