"""Chaos diagnostics: Poincare sections and two-orbit Lyapunov exponents.

The section plane is fixed to ``x1 = 0`` crossed with ``p1 > 0``; points are
recorded in ``(x2, p2)``.  The Lyapunov estimate follows two literal orbits
without renormalization, so ``d(t)`` saturates for chaotic motion.
"""

import math
from typing import List, NamedTuple

import numpy as np

from .dynamics import classical_energy, effective_energy
from .errors import (
    DegenerateOffset,
    InvalidBranch,
    NegativeDiscriminant,
    RefinementFailure,
    SeparationUnderflow,
)
from .integrator import (
    IntegrationPlan,
    Observer,
    Trajectory,
    feed_observers,
    hermite_weights,
    propagate,
)

X1_TOL = 1e-9
MAX_BISECTION = 200
DEFAULT_DX2 = 1e-4
DEFAULT_STRIDE = 50


class SectionPoint(NamedTuple):
    t: float
    x2: float
    p2: float


class NeighborPair(NamedTuple):
    primary: np.ndarray
    shadow: np.ndarray
    d0: float


class LyapunovSeries(NamedTuple):
    t: np.ndarray
    d: np.ndarray
    lam: np.ndarray
    d0: float

    @property
    def final(self) -> float:
        return float(self.lam[-1]) if self.lam.size else float("nan")


def _bracket_mask(x):
    a = x[:-1]
    b = x[1:]
    # a node exactly on the plane belongs to the bracket that ends there
    return ((a < 0.0) & (b >= 0.0)) | ((a > 0.0) & (b <= 0.0))


def refine_crossings(t0, y0, f0, t1, y1, f1, tol=X1_TOL, max_iter=MAX_BISECTION):
    """Bisect the Hermite interpolant of ``x1`` on a batch of brackets.

    Returns the crossing times and the interpolated full states there.
    Raises :class:`RefinementFailure` if some bracket does not reach ``tol``.
    """
    t0 = np.asarray(t0, dtype=np.float64)
    t1 = np.asarray(t1, dtype=np.float64)
    h = t1 - t0
    a0, b0, a1, b1 = y0[:, 0], h * f0[:, 0], y1[:, 0], h * f1[:, 0]

    def x1_at(t):
        w00, w10, w01, w11 = hermite_weights((t - t0) / h)
        return w00 * a0 + w10 * b0 + w01 * a1 + w11 * b1

    lo = t0.copy()
    hi = t1.copy()
    lo_neg = y0[:, 0] < 0.0
    root = np.where(np.abs(y1[:, 0]) <= tol, t1, np.nan)
    for _ in range(max_iter):
        todo = np.isnan(root)
        if not todo.any():
            break
        mid = 0.5 * (lo + hi)
        xm = x1_at(mid)
        hit = todo & (np.abs(xm) <= tol)
        root[hit] = mid[hit]
        go_right = (xm < 0.0) == lo_neg
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    if np.isnan(root).any():
        k = int(np.flatnonzero(np.isnan(root))[0])
        raise RefinementFailure(
            f"bisection did not reach |x1| <= {tol:g} in {max_iter} iterations "
            f"on bracket [{t0[k]!r}, {t1[k]!r}]"
        )
    w00, w10, w01, w11 = hermite_weights((root - t0) / h)
    hh = h[:, None]
    states = (
        w00[:, None] * y0 + (w10[:, None] * hh) * f0
        + w01[:, None] * y1 + (w11[:, None] * hh) * f1
    )
    on_node = root == t1
    states[on_node] = y1[on_node]
    return root, states


class CrossingDetector(Observer):
    """Collects refined ``x1 = 0, p1 > 0`` crossings of the observed orbit."""

    def __init__(self, tol=X1_TOL, max_iter=MAX_BISECTION):
        self.tol = tol
        self.max_iter = max_iter
        self._times: List[np.ndarray] = []
        self._states: List[np.ndarray] = []
        self.rejected_times: List[float] = []

    def observe(self, a, b):
        x = np.array([a.state[0], b.state[0]])
        if not _bracket_mask(x)[0]:
            return
        t, s = refine_crossings(
            [a.t], np.asarray(a.state)[None], np.asarray(a.derivative)[None],
            [b.t], np.asarray(b.state)[None], np.asarray(b.derivative)[None],
            self.tol, self.max_iter,
        )
        self._accept(t, s)

    def observe_chunk(self, chunk: Trajectory):
        idx = np.flatnonzero(_bracket_mask(chunk.states[:, 0]))
        if idx.size == 0:
            return
        t = chunk.t
        try:
            roots, states = refine_crossings(
                t[idx], chunk.states[idx], chunk.derivs[idx],
                t[idx + 1], chunk.states[idx + 1], chunk.derivs[idx + 1],
                self.tol, self.max_iter,
            )
        except RefinementFailure as exc:
            raise exc.at_step(chunk.start + int(idx[0]), float(t[idx[0]]))
        self._accept(roots, states)

    def _accept(self, roots, states):
        keep = states[:, 2] > 0.0
        self.rejected_times.extend(roots[~keep].tolist())
        self._times.append(roots[keep])
        self._states.append(states[keep])

    @property
    def times(self) -> np.ndarray:
        return np.concatenate(self._times) if self._times else np.empty(0)

    @property
    def states(self) -> np.ndarray:
        """Refined full states at each recorded crossing."""
        if not self._states:
            return np.empty((0, 0))
        return np.concatenate(self._states)

    def as_array(self) -> np.ndarray:
        """``(n, 3)`` array of ``t, x2, p2``."""
        s = self.states
        if s.size == 0:
            return np.empty((0, 3))
        return np.column_stack([self.times, s[:, 1], s[:, 3]])

    @property
    def points(self) -> List[SectionPoint]:
        return [SectionPoint(*row) for row in self.as_array().tolist()]


def detect_crossings(trajectory: Trajectory) -> List[SectionPoint]:
    """Section points for one already computed trajectory chunk."""
    det = CrossingDetector()
    det.observe_chunk(trajectory)
    return det.points


def config_distance(a, b):
    """Configuration-space distance; broadcasts over leading axes."""
    a = np.asarray(a)
    b = np.asarray(b)
    dx1 = b[..., 0] - a[..., 0]
    dx2 = b[..., 1] - a[..., 1]
    return np.sqrt(dx1 * dx1 + dx2 * dx2)


def equal_energy_neighbor(s, dx2=DEFAULT_DX2, hbar=0.0) -> NeighborPair:
    """Shadow initial point at equal energy, shifted by ``dx2`` in ``x2``.

    Momenta (and widths ``G``, ``Pi`` for semiclassical states) are copied;
    ``x1`` is re-solved on the positive root so the classical energy, and
    hence the effective energy when ``G1 == G2``, is unchanged.
    """
    y = np.array(s, dtype=np.float64)
    if y.shape[0] == 8 and hbar > 0.0 and y[4] != y[5]:
        raise ValueError("equal effective energy requires G1 == G2")
    x1, x2 = float(y[0]), float(y[1])
    x2p = x2 + dx2
    denom = 2.0 * x2p + 1.0
    if not denom > 0.0:
        raise InvalidBranch(f"2*x2' + 1 = {denom!r} is not positive")
    if dx2 == 0.0:
        if x1 >= 0.0:
            raise DegenerateOffset("zero offset reproduces the primary configuration")
        x1p = abs(x1)
    else:
        c = (2.0 * x2 + 1.0) * x1 * x1 + (x2 * x2 - x2p * x2p) - 2.0 / 3.0 * (x2 ** 3 - x2p ** 3)
        if c < 0.0:
            raise NegativeDiscriminant(f"C = {c!r} < 0, no equal-energy neighbor")
        x1p = math.sqrt(c / denom)
    shadow = y.copy()
    shadow[0] = x1p
    shadow[1] = x2p
    d0 = float(config_distance(y, shadow))
    if d0 == 0.0:
        raise DegenerateOffset("neighbor coincides with the primary point")
    return NeighborPair(y, shadow, d0)


def pair_energy_mismatch(pair: NeighborPair, hbar=None) -> float:
    """Relative energy difference of a pair (effective energy if ``hbar`` given)."""
    if hbar is None or pair.primary.shape[0] == 4:
        e, f = classical_energy(pair.primary), classical_energy(pair.shadow)
    else:
        e, f = effective_energy(pair.primary, hbar), effective_energy(pair.shadow, hbar)
    return abs(f - e) / abs(e)


def lyapunov_series(field, pair: NeighborPair, plan: IntegrationPlan, sample_stride=DEFAULT_STRIDE,
                    chunk_steps=None) -> LyapunovSeries:
    """Finite-time exponent ``(ln d(t) - ln d(0)) / t`` of a neighbor pair.

    Both orbits advance in lockstep with the same stepper; ``plan.observers``
    watch the primary orbit only.  Samples are taken every ``sample_stride``
    steps and at the final step.
    """
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    kw = {} if chunk_steps is None else {"chunk_steps": chunk_steps}
    shadow_plan = IntegrationPlan(plan.dt, plan.t_total)
    d0 = pair.d0
    total = plan.n_steps
    ts, ds = [], []
    for ca, cb in zip(propagate(field, pair.primary, plan, **kw),
                      propagate(field, pair.shadow, shadow_plan, **kw)):
        feed_observers(plan.observers, ca)
        steps = ca.steps[1:]
        pick = (steps % sample_stride == 0) | (steps == total)
        rows = np.flatnonzero(pick) + 1
        d = config_distance(ca.states[rows], cb.states[rows])
        if np.any(d == 0.0):
            k = int(rows[np.flatnonzero(d == 0.0)[0]])
            raise SeparationUnderflow("orbits coincide, ln d(t) undefined").at_step(
                ca.start + k, (ca.start + k) * ca.dt
            )
        ts.append((ca.start + rows) * ca.dt)
        ds.append(d)
    t = np.concatenate(ts) if ts else np.empty(0)
    d = np.concatenate(ds) if ds else np.empty(0)
    lam = (np.log(d) - math.log(d0)) / t
    return LyapunovSeries(t, d, lam, d0)


def hull_area(points) -> float:
    """Area of the convex hull of 2-d points (0 for degenerate sets)."""
    from scipy.spatial import ConvexHull, QhullError

    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 3:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0
