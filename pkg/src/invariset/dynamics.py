"""
Black-box discrete-time systems and trajectory simulation.

A system is anything with ``dim()`` and ``step(x)``. Built-in systems also
provide ``step_batch(X)`` operating on an ``(m, n)`` array of states; for
any other model :func:`step_batch` falls back to calling ``step`` row by row.
Batch and single-state evaluation of the built-in systems use the same
elementwise arithmetic so both routes give bitwise-equal results.
"""
from __future__ import annotations

import math
import shlex
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np


class SimulationError(RuntimeError):
    """A step produced a non-finite state."""

    def __init__(self, message, state=None, index=None):
        super().__init__(message)
        self.state = None if state is None else np.asarray(state, dtype=float)
        self.index = index


class ExternalSystemError(RuntimeError):
    """Base class for failures of an external simulator process."""


class ProcessDiedError(ExternalSystemError):
    pass


class ProtocolError(ExternalSystemError):
    """The process answered with a line that is not a list of floats."""


class DimensionMismatchError(ExternalSystemError):
    pass


@runtime_checkable
class SystemModel(Protocol):
    def dim(self) -> int: ...

    def step(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstraintBox:
    """Axis-aligned compact constraint set with the uniform measure on it."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError(f"need lower < upper on every axis, got {lo} / {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, *half_widths: float) -> "ConstraintBox":
        h = np.asarray(half_widths, dtype=float)
        return cls(-h, h)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x) -> np.ndarray | bool:
        """Closed-box membership; works on one state or an ``(m, n)`` array."""
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def measure(self, volume: float) -> float:
        return volume / self.volume

    def __eq__(self, other):
        if not isinstance(other, ConstraintBox):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


def _check_finite(y: np.ndarray, x) -> np.ndarray:
    if not np.all(np.isfinite(y)):
        raise SimulationError(f"non-finite state produced from {np.asarray(x).tolist()}", state=x)
    return y


def step(system: SystemModel, x) -> np.ndarray:
    """One step ``x -> f(x)`` with the finiteness contract enforced."""
    x = np.asarray(x, dtype=float)
    if x.shape != (system.dim(),):
        raise ValueError(f"state has shape {x.shape}, system dimension is {system.dim()}")
    y = np.asarray(system.step(x), dtype=float)
    return _check_finite(y, x)


def step_batch(system: SystemModel, X: np.ndarray) -> np.ndarray:
    """Step every row of ``X``. Uses the system's vectorised route when present."""
    X = np.asarray(X, dtype=float)
    batch = getattr(system, "step_batch", None)
    if batch is not None:
        Y = np.asarray(batch(X), dtype=float)
    else:
        Y = np.array([np.asarray(system.step(x), dtype=float) for x in X]).reshape(X.shape)
    bad = ~np.all(np.isfinite(Y), axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise SimulationError(f"non-finite state produced from {X[i].tolist()}", state=X[i], index=i)
    return Y


@dataclass
class Trajectory:
    """Simulated orbit; ``first_exit`` is None when the orbit stayed inside."""

    states: np.ndarray
    first_exit: Optional[int] = None

    def __len__(self):
        return len(self.states)


def simulate(system: SystemModel, x0, box: ConstraintBox, max_steps: int) -> Trajectory:
    """Simulate from ``x0`` until the state leaves ``box`` or ``max_steps`` steps are taken.

    The exit state, when there is one, is stored as the last entry and
    ``first_exit`` is its time index (always >= 1).
    """
    x = np.asarray(x0, dtype=float)
    if not box.contains(x):
        raise ValueError(f"initial state {x.tolist()} is outside the constraint box")
    states = [x]
    for t in range(1, max_steps + 1):
        x = step(system, x)
        states.append(x)
        if not box.contains(x):
            return Trajectory(np.array(states), first_exit=t)
    return Trajectory(np.array(states), first_exit=None)


def exit_times(system: SystemModel, X: np.ndarray, box: ConstraintBox, horizon: int) -> np.ndarray:
    """First-exit time of every row of ``X`` within ``horizon`` steps, 0 if none.

    Rows that have already left are not stepped any further.
    """
    X = np.array(X, dtype=float)
    out = np.zeros(len(X), dtype=np.int64)
    alive = np.arange(len(X))
    for t in range(1, horizon + 1):
        if alive.size == 0:
            break
        try:
            X[alive] = step_batch(system, X[alive])
        except SimulationError as err:
            err.index = int(alive[err.index]) if err.index is not None else None
            raise
        left = ~box.contains(X[alive])
        out[alive[left]] = t
        alive = alive[~left]
    return out


# --- built-in example systems -------------------------------------------------


class Example1:
    """Polynomial map, asymptotically stable at the origin, on ``[-1, 1]^2``."""

    name = "example1"
    default_box = ConstraintBox.symmetric(1.0, 1.0)

    def dim(self):
        return 2

    def step_batch(self, X):
        x1, x2 = X[:, 0], X[:, 1]
        y1 = 2.0 * (x1 * x1) + x2
        y2 = -2.0 * (y1 * y1) - 0.8 * x1
        return np.stack([y1, y2], axis=1)

    def step(self, x):
        return self.step_batch(np.asarray(x, dtype=float)[None, :])[0]


def lure_nonlinearity(y):
    """Odd, saturating piecewise-linear sector nonlinearity.

    Breakpoints at 2 and 4: identity, then slope 1/4, then flat at 2.5.
    """
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    mag = np.where(a < 2.0, a, np.where(a < 4.0, 0.25 * a + 1.5, 2.5))
    out = np.sign(y) * mag
    return float(out) if out.ndim == 0 else out


class Lure:
    """Lur'e system ``x+ = A x - B phi(F^T x)``."""

    name = "lure"
    default_box = ConstraintBox(np.array([-15.0, -10.0]), np.array([15.0, 10.0]))
    A = np.array([[1.2, 1.0], [0.0, 1.2]])
    B = np.array([0.5, 1.0])
    F = np.array([0.6290, 1.2261])

    def dim(self):
        return 2

    def step_batch(self, X):
        x1, x2 = X[:, 0], X[:, 1]
        u = lure_nonlinearity(0.6290 * x1 + 1.2261 * x2)
        y1 = 1.2 * x1 + 1.0 * x2 - 0.5 * u
        y2 = 1.2 * x2 - 1.0 * u
        return np.stack([y1, y2], axis=1)

    def step(self, x):
        return self.step_batch(np.asarray(x, dtype=float)[None, :])[0]


class Chatala:
    """Quadratic map with an attractor inside ``[-2, 2]^2``."""

    name = "chatala"
    default_box = ConstraintBox.symmetric(2.0, 2.0)

    def dim(self):
        return 2

    def step_batch(self, X):
        x1, x2 = X[:, 0], X[:, 1]
        return np.stack([x1 + x2, -0.5952 + x1 * x1], axis=1)

    def step(self, x):
        return self.step_batch(np.asarray(x, dtype=float)[None, :])[0]


def _expm_rotation_2x2(a: float, k: np.ndarray) -> np.ndarray:
    # exp(a I + K) with K @ K = -w^2 I
    k2 = k @ k
    w2 = -k2[0, 0]
    if not (np.allclose(k2, -w2 * np.eye(2), rtol=0, atol=1e-15) and w2 > 0):
        raise ValueError("K must square to a negative multiple of the identity")
    w = math.sqrt(w2)
    return math.exp(a) * (math.cos(w) * np.eye(2) + (math.sin(w) / w) * k)


PWA_GENERATORS = (
    np.array([[-0.1, 5.0], [-1.0, -0.1]]),
    np.array([[-0.1, 1.0], [-5.0, -0.1]]),
)
PWA_MATRICES = tuple(
    _expm_rotation_2x2(g[0, 0], g - g[0, 0] * np.eye(2)) for g in PWA_GENERATORS
)


class PWA:
    """Switched linear map: ``A1 x`` when ``|x1| > |x2|``, otherwise ``A2 x``."""

    name = "pwa"
    default_box = ConstraintBox.symmetric(5.0, 5.0)
    A1, A2 = PWA_MATRICES

    def dim(self):
        return 2

    def step_batch(self, X):
        x1, x2 = X[:, 0], X[:, 1]
        first = np.abs(x1) > np.abs(x2)
        A1, A2 = self.A1, self.A2
        y1 = np.where(first, A1[0, 0] * x1 + A1[0, 1] * x2, A2[0, 0] * x1 + A2[0, 1] * x2)
        y2 = np.where(first, A1[1, 0] * x1 + A1[1, 1] * x2, A2[1, 0] * x1 + A2[1, 1] * x2)
        return np.stack([y1, y2], axis=1)

    def step(self, x):
        return self.step_batch(np.asarray(x, dtype=float)[None, :])[0]


class LinearMap:
    """``x -> M x``; handy for contraction tests."""

    name = "linear"

    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))

    def dim(self):
        return self.matrix.shape[0]

    def step_batch(self, X):
        # elementwise sums keep batch and single-state results identical
        return np.stack([(X * row).sum(axis=1) for row in self.matrix], axis=1)

    def step(self, x):
        return self.step_batch(np.asarray(x, dtype=float)[None, :])[0]


EXAMPLES = {cls.name: cls for cls in (Example1, Lure, Chatala, PWA)}


def example_system(tag: str):
    """Return ``(system, default_box)`` for a built-in example tag."""
    try:
        cls = EXAMPLES[tag]
    except KeyError:
        raise ValueError(f"unknown example {tag!r}; choose from {sorted(EXAMPLES)}") from None
    return cls(), cls.default_box


# --- external black-box simulators -------------------------------------------


def format_state(x) -> str:
    # repr gives the shortest string that round-trips a binary64 exactly
    return " ".join(repr(float(v)) for v in x)


def parse_state(line: str, dim: Optional[int] = None) -> np.ndarray:
    parts = line.split()
    try:
        x = np.array([float(p) for p in parts], dtype=float)
    except ValueError:
        raise ProtocolError(f"malformed state line: {line!r}") from None
    if x.size == 0:
        raise ProtocolError("empty state line")
    if dim is not None and x.size != dim:
        raise DimensionMismatchError(f"expected {dim} numbers, got {x.size}: {line.strip()!r}")
    return x


@dataclass
class ExternalSystem:
    """A system whose step is computed by a child process over stdin/stdout.

    Protocol: the tool writes ``DIM?`` and reads back ``n``; afterwards each
    state is one line of ``n`` floats and each reply is one line of ``n`` floats.
    Calls are serialised per process; spawn one instance per worker.
    """

    command: Sequence[str] | str
    timeout: float = 30.0
    _proc: subprocess.Popen = field(init=False, repr=False, default=None)
    _dim: int = field(init=False, default=0)

    def __post_init__(self):
        cmd = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        self.command = cmd
        self._proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        reply = self._roundtrip("DIM?")
        try:
            self._dim = int(reply.strip())
        except ValueError:
            self.close()
            raise ProtocolError(f"bad DIM reply: {reply!r}") from None
        if self._dim < 1:
            self.close()
            raise ProtocolError(f"non-positive dimension {self._dim}")

    def _roundtrip(self, line: str) -> str:
        proc = self._proc
        if proc.poll() is not None:
            raise ProcessDiedError(f"simulator exited with code {proc.returncode}")
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as err:
            raise ProcessDiedError(f"simulator pipe closed: {err}") from None
        if not reply:
            proc.wait(timeout=self.timeout)
            raise ProcessDiedError(f"simulator exited with code {proc.returncode}")
        return reply

    def dim(self):
        return self._dim

    def step(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self._dim,):
            raise DimensionMismatchError(f"state of shape {x.shape} sent to a {self._dim}-D simulator")
        return parse_state(self._roundtrip(format_state(x)), self._dim)

    def clone(self) -> "ExternalSystem":
        return ExternalSystem(self.command, self.timeout)

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def external_system(command) -> ExternalSystem:
    return ExternalSystem(command)


def serve(system: SystemModel, stdin=None, stdout=None) -> None:
    """Answer the line protocol on stdin/stdout for ``system`` until EOF.

    Lets any Python model be exercised as a black box, e.g.
    ``python -m invariset.dynamics example1``.
    """
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    n = system.dim()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        if line == "DIM?":
            stdout.write(f"{n}\n")
        else:
            x = parse_state(line, n)
            stdout.write(format_state(system.step(x)) + "\n")
        stdout.flush()


if __name__ == "__main__":
    serve(example_system(sys.argv[1] if len(sys.argv) > 1 else "example1")[0])
