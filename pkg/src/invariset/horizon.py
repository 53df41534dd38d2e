"""
Phase I: estimate the invariance horizon from long trajectories.

Every sample is simulated until it leaves the box (its exit step is recorded)
or until it is judged to stay forever: the horizon is at least ``t_bar_horizon``
and its newest state lies within ``delta_traj`` of its own past orbit. The
horizon ``t_star`` is the largest recorded exit step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dynamics import ConstraintBox, SimulationError, step_batch

log = logging.getLogger(__name__)

RECURRENCE = "recurrence"
ALL_EXITED = "all_exited"
HARD_CAP = "hard_cap"


@dataclass
class Phase1Config:
    """Stopping parameters.

    ``delta_traj`` defaults to ``1e-3`` times the box diameter. With
    ``lockstep=True`` the run only stops when, at one common step, no sample
    exits and every survivor passes the recurrence test together; otherwise
    each survivor is retired as soon as it passes on its own.
    """

    delta_traj: Optional[float] = None
    t_bar_horizon: int = 100
    max_steps_hard: int = 10_000
    lockstep: bool = False

    def resolved(self, box: ConstraintBox) -> "Phase1Config":
        delta = 1e-3 * box.diameter if self.delta_traj is None else float(self.delta_traj)
        cfg = Phase1Config(delta, int(self.t_bar_horizon), int(self.max_steps_hard), self.lockstep)
        cfg.validate()
        return cfg

    def validate(self):
        if self.delta_traj is not None and not self.delta_traj > 0:
            raise ValueError(f"delta_traj must be positive, got {self.delta_traj}")
        if self.t_bar_horizon < 1:
            raise ValueError(f"t_bar_horizon must be >= 1, got {self.t_bar_horizon}")
        if self.max_steps_hard < self.t_bar_horizon:
            raise ValueError("max_steps_hard must be >= t_bar_horizon")


@dataclass
class HorizonReport:
    """Outcome of a Phase I run.

    ``exit_times[i]`` is the first-exit step of sample ``i`` or 0 when it
    never left. ``survivors[k]`` counts samples still inside after ``k`` steps,
    so ``theta[k] = survivors[k] / n``. ``final_horizon`` is the step count at
    termination (what a literal reading of the lockstep loop would report as
    the horizon); ``t_star`` is the maximum exit step.
    """

    n: int
    survivors: list
    t_bar: int
    t_star: int
    exit_times: np.ndarray
    terminated_by: str
    final_horizon: int
    steps_simulated: int = 0
    config: Phase1Config = field(default_factory=Phase1Config)

    @property
    def theta(self) -> list:
        return [Fraction(s, self.n) for s in self.survivors]

    @property
    def hit_hard_cap(self) -> bool:
        return self.terminated_by == HARD_CAP


def theta_sequence(exit_times: Sequence[Optional[int]], n: int, k_max: int) -> list:
    """Fraction of samples still inside after ``k`` steps, for ``k = 0..k_max``.

    ``exit_times`` entries are ``None`` (or 0) for samples that never left.
    """
    if n <= 0:
        raise ValueError("need at least one sample")
    times = np.array([0 if t is None else int(t) for t in exit_times], dtype=np.int64)
    if np.any(times < 0) or np.any(times > k_max):
        raise ValueError("exit times must lie in [1, k_max] or be absent")
    return [Fraction(s, n) for s in _survivor_counts(times, n, k_max)]


def _survivor_counts(times: np.ndarray, n: int, k_max: int) -> list:
    exited = np.bincount(times[times > 0], minlength=k_max + 1)[: k_max + 1]
    return [int(v) for v in n - np.cumsum(exited)]


def t_bar(theta: Sequence) -> int:
    """First index ``k`` with ``theta[k] == theta[k+1]``."""
    if len(theta) < 2:
        raise ValueError("need at least two theta values")
    for k in range(len(theta) - 1):
        if theta[k] == theta[k + 1]:
            return k
    raise ValueError("theta sequence has no plateau; extend it")


def estimate_horizon(system, omega, box: ConstraintBox, cfg: Phase1Config | None = None) -> HorizonReport:
    """Run the horizon estimation on the sample ``omega`` (array or SampleSet)."""
    cfg = (cfg or Phase1Config()).resolved(box)
    X = np.array(getattr(omega, "points", omega), dtype=float)
    if X.ndim != 2 or X.shape[1] != box.dim:
        raise ValueError(f"samples must be an (N, {box.dim}) array")
    n = len(X)
    if n == 0:
        raise ValueError("need at least one sample")
    if not np.all(box.contains(X)):
        raise ValueError("all samples must lie inside the box")

    exits = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    # per-survivor orbit; rows follow `active`
    cap = min(cfg.t_bar_horizon + 2, cfg.max_steps_hard + 1)
    hist = np.empty((n, cap, box.dim))
    hist[:, 0] = X
    T = 0
    terminated_by = HARD_CAP
    while T < cfg.max_steps_hard:
        try:
            new = step_batch(system, hist[:, T])
        except SimulationError as err:
            if err.index is not None:
                err.index = int(active[err.index])
            raise
        left = ~box.contains(new)
        exits[active[left]] = T + 1

        stay = ~left
        retire = np.zeros(len(active), dtype=bool)
        if T >= cfg.t_bar_horizon and np.any(stay):
            past = hist[stay, : T + 1]
            dist = np.sqrt(((past - new[stay, None, :]) ** 2).sum(axis=2)).min(axis=1)
            close = dist <= cfg.delta_traj
            if cfg.lockstep:
                if not np.any(left) and np.all(close):
                    retire[:] = True
            else:
                retire[np.flatnonzero(stay)[close]] = True

        keep = stay & ~retire
        T += 1
        if not np.any(keep):
            terminated_by = ALL_EXITED if np.all(exits > 0) else RECURRENCE
            break
        if T + 1 > hist.shape[1]:
            grown = np.empty((len(active), min(2 * hist.shape[1], cfg.max_steps_hard + 1), box.dim))
            grown[:, : T] = hist[:, :T]
            hist = grown
        hist[:, T] = new
        if not np.all(keep):
            hist = hist[keep]
            active = active[keep]

    if terminated_by == HARD_CAP:
        log.warning("horizon estimation hit the hard cap of %d steps with %d samples unresolved",
                    cfg.max_steps_hard, len(active))
    t_star = int(exits.max()) if np.any(exits) else 0
    survivors = _survivor_counts(exits, n, T + 1)
    return HorizonReport(
        n=n,
        survivors=survivors,
        t_bar=t_bar(survivors),
        t_star=t_star,
        exit_times=exits,
        terminated_by=terminated_by,
        final_horizon=T - 1,
        steps_simulated=T,
        config=cfg,
    )
