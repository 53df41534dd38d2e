"""
Phase II: explicit inner/outer approximations of the horizon set.

Reference points are labelled inside/outside by short simulations. A point is
a member of ``Pi(I, O, r)`` when it lies in the box and its distance to the
inside points minus its distance to the outside points is at most ``r``. The
radius ``delta_star`` comes from the sampled program ``min delta >= 0`` subject
to ``h(x) <= delta`` on fresh test points, whose optimum is simply the largest
test-point h-value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import ConstraintBox, SimulationError, exit_times
from .sampling import PHASE2_STREAM, sample_uniform, scenario_confidence, scenario_sample_size

log = logging.getLogger(__name__)


class NearestNeighborIndex:
    """Exact Euclidean nearest-neighbour distances to a fixed point set.

    Distance to an empty index is ``+inf``. Safe for concurrent queries.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(0, 0) if pts.size == 0 else pts[None, :]
        self.points = pts
        self._tree = cKDTree(pts) if len(pts) else None

    def __len__(self):
        return len(self.points)

    def query(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if self._tree is None:
            d = np.full(len(X), np.inf)
        else:
            d, _ = self._tree.query(X, k=1)
        return d[0] if single else d


def nn_distance(index: NearestNeighborIndex, x) -> float:
    return float(index.query(np.asarray(x, dtype=float)))


@dataclass
class LabeledReference:
    """Reference points with their inside/outside labels for horizon ``t_star``."""

    points: np.ndarray
    inside_mask: np.ndarray
    t_star: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.inside_mask = np.asarray(self.inside_mask, dtype=bool)
        if len(self.points) != len(self.inside_mask):
            raise ValueError("points and labels differ in length")

    @classmethod
    def from_sets(cls, inside, outside, t_star: int, dim: Optional[int] = None) -> "LabeledReference":
        inside = np.asarray(inside, dtype=float)
        outside = np.asarray(outside, dtype=float)
        dim = dim or (inside.shape[-1] if inside.size else outside.shape[-1])
        inside = inside.reshape(-1, dim)
        outside = outside.reshape(-1, dim)
        mask = np.r_[np.ones(len(inside), bool), np.zeros(len(outside), bool)]
        return cls(np.vstack([inside, outside]), mask, t_star)

    @property
    def inside(self) -> np.ndarray:
        return self.points[self.inside_mask]

    @property
    def outside(self) -> np.ndarray:
        return self.points[~self.inside_mask]

    def __len__(self):
        return len(self.points)

    def merged(self, other: "LabeledReference") -> "LabeledReference":
        if other.t_star != self.t_star:
            raise ValueError("cannot merge references labelled with different horizons")
        return LabeledReference(
            np.vstack([self.points, other.points]),
            np.r_[self.inside_mask, other.inside_mask],
            self.t_star,
        )

    def indices(self):
        return NearestNeighborIndex(self.inside), NearestNeighborIndex(self.outside)


def label_points(system, points, box: ConstraintBox, t_star: int) -> LabeledReference:
    """Label each point by whether its orbit stays in ``box`` for ``t_star`` steps."""
    pts = np.asarray(points, dtype=float)
    if t_star < 0:
        raise ValueError("t_star must be non-negative")
    if len(pts) and not np.all(box.contains(pts)):
        raise ValueError("reference points must lie in the box")
    if t_star == 0:
        return LabeledReference(pts, np.ones(len(pts), bool), 0)
    try:
        exits = exit_times(system, pts, box, t_star)
    except SimulationError as err:
        raise SimulationError(f"labelling failed at point {err.index}: {err}", err.state, err.index) from err
    return LabeledReference(pts, exits == 0, t_star)


def signed_distance(reference: LabeledReference, X, indices=None) -> np.ndarray:
    """``dist(x, inside) - dist(x, outside)`` for each row of ``X``."""
    idx_in, idx_out = indices or reference.indices()
    d_in = idx_in.query(np.atleast_2d(X))
    d_out = idx_out.query(np.atleast_2d(X))
    with np.errstate(invalid="ignore"):
        return d_in - d_out


@dataclass
class SetClassifier:
    """Membership oracle for ``Pi(inside, outside, radius)`` within ``box``.

    When both reference sides are empty the signed distance is undefined and
    nothing is a member.
    """

    reference: LabeledReference
    radius: float
    box: ConstraintBox
    _indices: tuple = field(default=None, init=False, repr=False)

    @property
    def indices(self):
        if self._indices is None:
            self._indices = self.reference.indices()
        return self._indices

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        s = signed_distance(self.reference, X, self.indices)
        with np.errstate(invalid="ignore"):
            member = self.box.contains(X) & (s <= self.radius)
        return bool(member[0]) if single else member

    def with_radius(self, radius: float) -> "SetClassifier":
        out = SetClassifier(self.reference, radius, self.box)
        out._indices = self._indices
        return out


def classify(classifier: SetClassifier, x) -> bool:
    return bool(classifier.contains(np.asarray(x, dtype=float)))


def h_values(points, inside_mask, reference: LabeledReference, indices=None) -> np.ndarray:
    """Distance of each point to the reference side carrying its own label."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside_mask = np.asarray(inside_mask, dtype=bool)
    idx_in, idx_out = indices or reference.indices()
    h = np.empty(len(pts))
    if np.any(inside_mask):
        h[inside_mask] = idx_in.query(pts[inside_mask])
    if np.any(~inside_mask):
        h[~inside_mask] = idx_out.query(pts[~inside_mask])
    return h


def h_value(x, inside: bool, reference: LabeledReference) -> float:
    return float(h_values(np.asarray(x, dtype=float)[None, :], [inside], reference)[0])


def solve_delta_star(test: LabeledReference, reference: LabeledReference, indices=None) -> float:
    """Optimum of ``min delta >= 0`` s.t. ``h(x) <= delta`` for every test point."""
    if test.t_star != reference.t_star:
        raise ValueError("test and reference were labelled with different horizons")
    if len(test) == 0:
        return 0.0
    h = h_values(test.points, test.inside_mask, reference, indices)
    return float(max(0.0, h.max()))


@dataclass
class Phase2Config:
    """Identification settings; ``n_delta`` overrides the automatic test-set size."""

    delta_bar: float
    eps_tilde: float = 1e-3
    beta_tilde: float = 0.01
    d: int = 1
    max_rounds: int = 500
    n_delta: Optional[int] = None

    def validate(self):
        if not self.delta_bar > 0:
            raise ValueError(f"delta_bar must be positive, got {self.delta_bar}")
        if not 0 < self.eps_tilde <= 1 or not 0 < self.beta_tilde <= 1:
            raise ValueError("eps_tilde and beta_tilde must lie in (0, 1]")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.n_delta is not None and self.n_delta < self.d:
            raise ValueError("n_delta must be >= d")

    def test_size(self) -> int:
        if self.n_delta is not None:
            return int(self.n_delta)
        return scenario_sample_size(self.eps_tilde, self.beta_tilde, self.d)


@dataclass
class Round:
    n_reference: int
    delta_star: float
    n_test_inside: int
    n_test_outside: int


@dataclass
class Phase2Result:
    reference: LabeledReference
    delta_star: float
    rounds: list
    inner: SetClassifier
    outer: SetClassifier
    n_delta: int
    beta_delta: float
    converged: bool

    @property
    def hit_round_cap(self) -> bool:
        return not self.converged


def identify_set(system, omega, horizon, box: ConstraintBox, cfg: Phase2Config, seed: int,
                 callback=None) -> Phase2Result:
    """Grow the reference with fresh test batches until ``delta_star <= delta_bar``.

    Round ``r`` draws its test batch from stream ``PHASE2_STREAM + r`` of
    ``seed``. Each batch is scored against the current reference and merged
    into it afterwards. ``callback(round)`` is called after every round.
    """
    cfg.validate()
    t_star = int(getattr(horizon, "t_star", horizon))
    pts = np.asarray(getattr(omega, "points", omega), dtype=float)
    n_delta = cfg.test_size()
    beta_delta = scenario_confidence(n_delta, cfg.eps_tilde, cfg.d)

    reference = label_points(system, pts, box, t_star)
    rounds = []
    delta_star = np.inf
    converged = False
    for r in range(cfg.max_rounds):
        test_pts = sample_uniform(box, n_delta, seed, stream=PHASE2_STREAM + r).points
        test = label_points(system, test_pts, box, t_star)
        delta_star = solve_delta_star(test, reference)
        rounds.append(Round(len(reference), delta_star, int(test.inside_mask.sum()),
                            int((~test.inside_mask).sum())))
        log.info("round %d: reference %d, delta* %.6g", r, len(reference), delta_star)
        reference = reference.merged(test)
        if callback is not None:
            callback(rounds[-1])
        if delta_star <= cfg.delta_bar:
            converged = True
            break
    if not converged:
        log.warning("identification stopped after %d rounds with delta* = %g > %g",
                    cfg.max_rounds, delta_star, cfg.delta_bar)

    outer = SetClassifier(reference, delta_star, box)
    inner = outer.with_radius(-delta_star)
    return Phase2Result(reference, delta_star, rounds, inner, outer, n_delta, beta_delta, converged)
