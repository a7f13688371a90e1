"""Fixed-step classical RK4 propagation with cubic Hermite dense output.

Two execution paths produce bit-identical states:

* a generic Python loop over :func:`rk4_step` for any ``f(t, y)`` callable;
* a numba kernel for :class:`~henonlab.dynamics.ClassicalSystem` and
  :class:`~henonlab.dynamics.SemiclassicalSystem`, used automatically.

Both emit :class:`Trajectory` chunks.  Observers see every step bracket,
either one :class:`StepRecord` pair at a time or a whole chunk at once.
"""

from dataclasses import dataclass, field as dataclass_field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
from numba import njit

from .dynamics import MIN_WIDTH, _classical_rhs, _semiclassical_rhs
from .errors import (
    HenonLabError,
    NonFinite,
    NonPositiveWidth,
    ObserverError,
    OutOfBracket,
    ZeroReferenceEnergy,
)

DEFAULT_DT = 0.02
DEFAULT_T_TOTAL = 20_000.0
DEFAULT_CHUNK = 50_000


class StepRecord(NamedTuple):
    t: float
    state: np.ndarray
    derivative: np.ndarray


class Trajectory(NamedTuple):
    """A run of consecutive step records held as arrays.

    Row ``i`` is the node at global step ``start + i``; time is computed as
    ``step * dt`` rather than accumulated.
    """

    start: int
    dt: float
    states: np.ndarray
    derivs: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def steps(self) -> np.ndarray:
        return self.start + np.arange(self.states.shape[0])

    @property
    def t(self) -> np.ndarray:
        return self.steps * self.dt

    def record(self, i: int) -> StepRecord:
        return StepRecord((self.start + i) * self.dt, self.states[i], self.derivs[i])

    def brackets(self) -> Iterator[tuple]:
        for i in range(self.n_steps):
            yield self.record(i), self.record(i + 1)


class Observer:
    """Base class for per-step observers.

    Subclasses implement :meth:`observe`; overriding :meth:`observe_chunk`
    with a vectorized equivalent is optional.
    """

    def observe(self, a: StepRecord, b: StepRecord) -> None:
        raise NotImplementedError

    def observe_chunk(self, chunk: Trajectory) -> None:
        for a, b in chunk.brackets():
            self.observe(a, b)


@dataclass(frozen=True)
class IntegrationPlan:
    dt: float = DEFAULT_DT
    t_total: float = DEFAULT_T_TOTAL
    observers: Sequence[Observer] = dataclass_field(default=())

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_total >= self.dt:
            raise ValueError(f"t_total must be >= dt, got {self.t_total!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))


class IntegrationResult(NamedTuple):
    state: np.ndarray
    t: float
    observers: Sequence[Observer]


def rk4_step(field, s, t, dt):
    """One classical fourth-order Runge-Kutta step of ``y' = field(t, y)``.

    Raises
    ------
    NonFinite
        If the updated state contains NaN or Inf.
    """
    y = np.asarray(s, dtype=np.float64)
    k1 = np.asarray(field(t, y), dtype=np.float64)
    k2 = np.asarray(field(t + 0.5 * dt, y + 0.5 * dt * k1), dtype=np.float64)
    k3 = np.asarray(field(t + 0.5 * dt, y + 0.5 * dt * k2), dtype=np.float64)
    k4 = np.asarray(field(t + dt, y + dt * k3), dtype=np.float64)
    out = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"non-finite state after step from t={t:.17g}")
    return out


@njit(cache=True, nogil=True)
def _eval(kind, hbar, y, out):
    # status: 0 ok, 1 width violation
    if kind == 0:
        _classical_rhs(y, out)
        return 0
    if not (y[4] >= MIN_WIDTH and y[5] >= MIN_WIDTH):
        return 1
    _semiclassical_rhs(y, hbar, out)
    return 0


@njit(cache=True, nogil=True)
def _rk4_chunk(kind, hbar, dt, states, derivs):
    """Fill ``states[1:]`` and ``derivs`` from ``states[0]``.

    Returns ``(status, i)``: status 0 ok, 1 width violation, 2 non-finite;
    ``i`` is the row whose step failed.
    """
    n = states.shape[0] - 1
    m = states.shape[1]
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    for i in range(n):
        y = states[i]
        k1 = derivs[i]
        if _eval(kind, hbar, y, k1) != 0:
            return 1, i
        for j in range(m):
            tmp[j] = y[j] + 0.5 * dt * k1[j]
        if _eval(kind, hbar, tmp, k2) != 0:
            return 1, i
        for j in range(m):
            tmp[j] = y[j] + 0.5 * dt * k2[j]
        if _eval(kind, hbar, tmp, k3) != 0:
            return 1, i
        for j in range(m):
            tmp[j] = y[j] + dt * k3[j]
        if _eval(kind, hbar, tmp, k4) != 0:
            return 1, i
        nxt = states[i + 1]
        for j in range(m):
            v = y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not np.isfinite(v):
                return 2, i
            nxt[j] = v
    if _eval(kind, hbar, states[n], derivs[n]) != 0:
        return 1, n
    return 0, n


def _uses_kernel(field, dim):
    return getattr(field, "kind", None) in (0, 1) and getattr(field, "dim", None) == dim


def propagate(field, s0, plan: IntegrationPlan, chunk_steps: int = DEFAULT_CHUNK) -> Iterator[Trajectory]:
    """Yield the run as consecutive :class:`Trajectory` chunks.

    Each chunk repeats the previous chunk's last node as its first row so
    that every step bracket lies inside exactly one chunk.
    """
    y = np.array(s0, dtype=np.float64)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise NonFinite("initial state must be a finite 1-d vector")
    dt = float(plan.dt)
    total = plan.n_steps
    fast = _uses_kernel(field, y.shape[0])
    done = 0
    while done < total:
        n = min(chunk_steps, total - done)
        states = np.empty((n + 1, y.shape[0]))
        derivs = np.empty_like(states)
        states[0] = y
        if fast:
            status, i = _rk4_chunk(field.kind, float(field.hbar), dt, states, derivs)
            if status == 1:
                raise NonPositiveWidth(
                    f"width parameter below {MIN_WIDTH:g} during step"
                ).at_step(done + i, (done + i) * dt)
            if status == 2:
                raise NonFinite("non-finite state produced by step").at_step(done + i, (done + i) * dt)
        else:
            for i in range(n + 1):
                t = (done + i) * dt
                try:
                    derivs[i] = field(t, states[i])
                    if i < n:
                        states[i + 1] = rk4_step(field, states[i], t, dt)
                except HenonLabError as exc:
                    raise exc.at_step(done + i, t)
        yield Trajectory(done, dt, states, derivs)
        y = states[-1]
        done += n


def integrate(field, s0, plan: IntegrationPlan, chunk_steps: int = DEFAULT_CHUNK) -> IntegrationResult:
    """Advance ``plan.n_steps`` fixed steps, feeding ``plan.observers``.

    Errors raised by a step or an observer propagate with the step index
    and time attached; non-domain observer errors become
    :class:`~henonlab.errors.ObserverError`.
    """
    last = np.array(s0, dtype=np.float64)
    t_end = 0.0
    for chunk in propagate(field, s0, plan, chunk_steps):
        feed_observers(plan.observers, chunk)
        last = chunk.states[-1]
        t_end = (chunk.start + chunk.n_steps) * chunk.dt
    return IntegrationResult(last.copy(), t_end, plan.observers)


def feed_observers(observers, chunk: Trajectory) -> None:
    for obs in observers:
        try:
            obs.observe_chunk(chunk)
        except HenonLabError as exc:
            if exc.step is None:
                exc.at_step(chunk.start, chunk.start * chunk.dt)
            raise
        except Exception as exc:
            raise ObserverError(f"{type(obs).__name__} failed: {exc}").at_step(
                chunk.start, chunk.start * chunk.dt
            ) from exc


def hermite_weights(theta):
    theta2 = theta * theta
    theta3 = theta2 * theta
    h00 = 2.0 * theta3 - 3.0 * theta2 + 1.0
    h10 = theta3 - 2.0 * theta2 + theta
    h01 = -2.0 * theta3 + 3.0 * theta2
    h11 = theta3 - theta2
    return h00, h10, h01, h11


def hermite_eval(t0, y0, f0, t1, y1, f1, t):
    """Vectorized cubic Hermite interpolant.

    ``t0, t1, t`` have shape ``(k,)`` and the state arrays ``(k, m)``; no
    bracket check is made here.
    """
    h = np.asarray(t1 - t0, dtype=np.float64)
    theta = (t - t0) / h
    h00, h10, h01, h11 = hermite_weights(theta)
    h = h[..., None]
    return (
        h00[..., None] * y0 + (h10[..., None] * h) * f0
        + h01[..., None] * y1 + (h11[..., None] * h) * f1
    )


def hermite_interpolate(a: StepRecord, b: StepRecord, t: float) -> np.ndarray:
    """State at time ``t`` between two step records."""
    if not (a.t <= t <= b.t):
        raise OutOfBracket(f"t={t!r} outside [{a.t!r}, {b.t!r}]")
    if t == a.t:
        return np.array(a.state, dtype=np.float64)
    if t == b.t:
        return np.array(b.state, dtype=np.float64)
    out = hermite_eval(
        np.array([a.t]), np.asarray(a.state)[None], np.asarray(a.derivative)[None],
        np.array([b.t]), np.asarray(b.state)[None], np.asarray(b.derivative)[None],
        np.array([t]),
    )
    return out[0]


def energy_drift(energies) -> float:
    """Maximum relative deviation ``|E(t) - E(0)| / |E(0)|``."""
    e = np.asarray(energies, dtype=np.float64)
    if e.size == 0:
        raise ValueError("energy_drift needs at least one sample")
    if e[0] == 0.0:
        raise ZeroReferenceEnergy("reference energy E(0) is zero")
    return float(np.max(np.abs(e - e[0])) / abs(e[0]))


class EnergyMonitor(Observer):
    """Tracks the largest relative energy deviation over every node."""

    def __init__(self, energy, keep_trace: bool = False):
        self._energy = energy
        self.e0: Optional[float] = None
        self.max_dev = 0.0
        self.trace = [] if keep_trace else None

    def observe(self, a, b):
        if self.e0 is None:
            self._take(np.array([self._energy(a.state)]))
        self._take(np.array([self._energy(b.state)]))

    def observe_chunk(self, chunk):
        e = np.asarray(self._energy(chunk.states), dtype=np.float64)
        self._take(e if self.e0 is None else e[1:])

    def _take(self, e):
        if e.size == 0:
            return
        if self.e0 is None:
            self.e0 = float(e[0])
        self.max_dev = max(self.max_dev, float(np.max(np.abs(e - self.e0))))
        if self.trace is not None:
            self.trace.extend(e.tolist())

    @property
    def drift(self) -> float:
        if self.e0 is None:
            raise ValueError("no energies observed")
        if self.e0 == 0.0:
            raise ZeroReferenceEnergy("reference energy E(0) is zero")
        return self.max_dev / abs(self.e0)
