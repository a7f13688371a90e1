"""Machine-checkable acceptance criteria.

Each ``criterion_*`` method returns a :class:`CriterionResult`; nothing is
raised for a failing criterion.  Full-length runs are cached on the suite so
criteria that share a scenario do not integrate it twice.
"""

import filecmp
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from numba import njit

from .diagnostics import X1_TOL, equal_energy_neighbor, hull_area, pair_energy_mismatch
from .dynamics import (
    ClassicalSystem,
    SemiclassicalSystem,
    effective_energy,
    semiclassical_vector_field,
)
from .errors import HenonLabError
from .experiments import (
    PRESET_DATA,
    PRESET_ENERGIES,
    SEMICLASSICAL,
    ScenarioConfig,
    emit,
    preset_families,
    simulate,
    sweep_member,
)
from .integrator import IntegrationPlan, propagate

ENERGY_TOL = 5e-6
HEFF_TOL = 1e-15
DRIFT_TOL = 1e-6
FD_TOL = 1e-6
FD_STEP = 1e-6
REDUCTION_TOL = 1e-10
NEIGHBOR_TOL = 1e-13
CROSSING_TIME_TOL = 1e-6
ORDER_RANGE = (14.0, 18.0)
ORACLE_DT = 1e-5
WINDOW = 100.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    threshold: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:>2}. {self.name}: {self.measured} (required {self.threshold})"


@njit(cache=True)
def _oracle_upward_crossings(y0, dt, n):
    # Plain RK4 on the classical field with linear interpolation of x1
    # between fine nodes; shares no code with the integrator under test.
    y = y0.copy()
    out = np.empty(n // 100 + 16)
    m = 0
    k = np.empty((4, 4))
    for i in range(n):
        for s in range(4):
            if s == 0:
                c = 0.0
                base = y
            else:
                c = 0.5 * dt if s < 3 else dt
                base = y + c * k[s - 1]
            x1, x2, p1, p2 = base[0], base[1], base[2], base[3]
            k[s, 0] = p1
            k[s, 1] = p2
            k[s, 2] = -x1 * (1.0 + 2.0 * x2)
            k[s, 3] = x2 * x2 - x1 * x1 - x2
        nxt = y + (dt / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
        if y[0] < 0.0 and nxt[0] >= 0.0:
            frac = -y[0] / (nxt[0] - y[0])
            if m >= out.shape[0]:
                grown = np.empty(2 * out.shape[0])
                grown[:m] = out[:m]
                out = grown
            out[m] = (i + frac) * dt
            m += 1
        y = nxt
    return out[:m]


def oracle_crossing_times(y0, t_total=WINDOW, dt=ORACLE_DT) -> np.ndarray:
    """Upward ``x1 = 0`` crossing times of a classical orbit by brute force."""
    return _oracle_upward_crossings(np.asarray(y0, dtype=np.float64), dt, int(round(t_total / dt)))


def symplectic_gradient_error(states, hbar, field: Callable = semiclassical_vector_field,
                              step=FD_STEP) -> float:
    """Worst scaled mismatch between ``field`` and Hamilton's equations.

    Central differences of the effective energy give ``x' = dH/dp``,
    ``p' = -dH/dx``, ``G' = dH/dPi / hbar`` and ``Pi' = -dH/dG / hbar``; the
    error of each component is ``|fd - f| / max(|f|, 1)``.
    """
    states = np.asarray(states, dtype=np.float64)
    grad = np.empty_like(states)
    for j in range(8):
        up = states.copy()
        dn = states.copy()
        up[:, j] += step
        dn[:, j] -= step
        grad[:, j] = (effective_energy(up, hbar) - effective_energy(dn, hbar)) / (2.0 * step)
    fd = np.empty_like(states)
    fd[:, 0:2] = grad[:, 2:4]
    fd[:, 2:4] = -grad[:, 0:2]
    fd[:, 4:6] = grad[:, 6:8] / hbar
    fd[:, 6:8] = -grad[:, 4:6] / hbar
    exact = np.array([field(s, hbar) for s in states])
    return float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1.0)))


def random_semiclassical_states(n, seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = np.array([-0.6, -0.6, -0.6, -0.6, 0.1, 0.1, -1.0, -1.0])
    hi = np.array([0.6, 0.6, 0.6, 0.6, 3.0, 3.0, 1.0, 1.0])
    return lo + (hi - lo) * rng.random((n, 8))


def _trace(system, y0, t_total, dt=0.02):
    plan = IntegrationPlan(dt, t_total)
    return np.vstack([c.states[(0 if c.start == 0 else 1):] for c in propagate(system, y0, plan)])


class AcceptanceSuite:
    """Runs the numbered acceptance criteria at full desk scale."""

    def __init__(self, t_total: float = 20_000.0):
        self.t_total = t_total
        self._runs: Dict[ScenarioConfig, object] = {}
        fams = preset_families()
        self.classical = [fam[0].replace(t_total=t_total) for label, fam in fams.items()
                          if label.startswith("classical")]
        self.semiclassical = [cfg.replace(t_total=t_total) for label, fam in fams.items()
                              if label.startswith("semi") for cfg in fam]

    def run(self, cfg: ScenarioConfig):
        """Cached :func:`simulate`; a failed run is cached as its exception."""
        if cfg not in self._runs:
            try:
                self._runs[cfg] = simulate(cfg)
            except HenonLabError as exc:
                self._runs[cfg] = exc
        return self._runs[cfg]

    def criterion_1(self) -> CriterionResult:
        errs = [abs(cfg.energy - ref) for cfg, ref in zip(self.classical, PRESET_ENERGIES)]
        shown = ", ".join(f"{cfg.energy:.5f}" for cfg in self.classical)
        return CriterionResult(1, "preset energies", max(errs) <= ENERGY_TOL,
                               f"E = {shown}; max |dE| = {max(errs):.2e}", f"<= {ENERGY_TOL:g}")

    def criterion_2(self) -> CriterionResult:
        errs = [abs((cfg.initial_energy() - cfg.energy) - cfg.hbar) for cfg in self.semiclassical]
        return CriterionResult(2, "initial effective energy H_eff - E = hbar",
                               max(errs) <= HEFF_TOL, f"max error {max(errs):.2e} over "
                               f"{len(errs)} semiclassical presets", f"<= {HEFF_TOL:g}")

    def criterion_3(self) -> CriterionResult:
        worst = 0.0
        failures = []
        for cfg in self.classical + self.semiclassical:
            res = self.run(cfg)
            if isinstance(res, Exception):
                failures.append(f"{cfg.label} aborted ({type(res.cause).__name__})")
                continue
            drift = res.summary.max_energy_drift
            worst = max(worst, drift)
            if not drift <= DRIFT_TOL:
                failures.append(f"{cfg.label} {drift:.2e}")
        n = len(self.classical) + len(self.semiclassical)
        measured = f"worst drift {worst:.2e}; {len(failures)}/{n} runs over bound"
        if failures:
            measured += ": " + "; ".join(failures)
        return CriterionResult(3, "energy conservation over full runs", not failures,
                               measured, f"<= {DRIFT_TOL:g} relative")

    def criterion_4(self, field: Callable = semiclassical_vector_field,
                    hbars=(0.001, 0.01), n=1000) -> CriterionResult:
        states = random_semiclassical_states(n, seed=2022)
        errs = {h: symplectic_gradient_error(states, h, field) for h in hbars}
        worst = max(errs.values())
        shown = ", ".join(f"hbar={h:g}: {e:.2e}" for h, e in errs.items())
        return CriterionResult(4, "symplectic-gradient consistency", worst <= FD_TOL,
                               f"{n} states, {shown}", f"<= {FD_TOL:g}")

    def criterion_5(self) -> CriterionResult:
        worst = 0.0
        bad = []
        for x0, p0 in PRESET_DATA:
            yc = np.array([x0, x0, p0, p0])
            ys = np.array([x0, x0, p0, p0, 0.5, 0.5, 0.0, 0.0])
            try:
                a = _trace(ClassicalSystem(), yc, WINDOW)
                b = _trace(SemiclassicalSystem(0.0), ys, WINDOW)[:, :4]
            except HenonLabError as exc:
                bad.append(f"x0={x0:g} aborted ({type(exc).__name__})")
                continue
            worst = max(worst, float(np.max(np.abs(a - b))))
        ok = not bad and worst <= REDUCTION_TOL
        measured = f"max |dx|,|dp| = {worst:.2e} over {len(PRESET_DATA)} presets, T={WINDOW:g}"
        if bad:
            measured += "; " + "; ".join(bad)
        return CriterionResult(5, "hbar -> 0 reduction", ok, measured, f"<= {REDUCTION_TOL:g}")

    def criterion_6(self) -> CriterionResult:
        worst = 0.0
        count = 0
        for x0, p0 in PRESET_DATA:
            base = ScenarioConfig("nb", x0, p0, mode=SEMICLASSICAL)
            worst = max(worst, pair_energy_mismatch(equal_energy_neighbor([x0, x0, p0, p0])))
            count += 1
            for h in (base.energy / 100.0, base.energy / 30.0, base.energy / 10.0):
                pair = equal_energy_neighbor(base.initial_state(), base.dx2, h)
                worst = max(worst, pair_energy_mismatch(pair, h))
                count += 1
        return CriterionResult(6, "equal-energy neighbor", worst <= NEIGHBOR_TOL,
                               f"max |dE|/E = {worst:.2e} over {count} pairs", f"<= {NEIGHBOR_TOL:g}")

    def criterion_7(self) -> CriterionResult:
        worst_x1 = 0.0
        min_p1 = math.inf
        n_points = 0
        n_runs = 0
        monotone = True
        for cfg in self.classical + self.semiclassical:
            res = self.run(cfg)
            if isinstance(res, Exception):
                continue
            n_runs += 1
            s = res.section_states
            if s.size:
                worst_x1 = max(worst_x1, float(np.max(np.abs(s[:, 0]))))
                min_p1 = min(min_p1, float(np.min(s[:, 2])))
                n_points += s.shape[0]
                monotone &= bool(np.all(np.diff(res.section[:, 0]) > 0))
        per_preset = {}
        count_ok = True
        for cfg in self.classical:
            window = simulate(cfg.replace(t_total=WINDOW, outputs=("section",)))
            ref = oracle_crossing_times(cfg.initial_state())
            got = window.section[:, 0]
            if got.shape != ref.shape:
                count_ok = False
                per_preset[cfg.label] = math.inf
                continue
            per_preset[cfg.label] = float(np.max(np.abs(got - ref))) if got.size else 0.0
        worst_dt = max(per_preset.values())
        ok = (worst_x1 <= X1_TOL and min_p1 > 0.0 and monotone and count_ok
              and worst_dt <= CROSSING_TIME_TOL)
        shown = ", ".join(f"{lab.split('-', 1)[1]} {v:.1e}" for lab, v in per_preset.items())
        measured = (f"{n_points} points in {n_runs} runs: max |x1| {worst_x1:.1e}, min p1 "
                    f"{min_p1:.3g}; oracle max |dt| {worst_dt:.2e} ({shown})"
                    f"{'' if count_ok else ' (crossing count mismatch)'}")
        return CriterionResult(7, "section residuals and crossing oracle", ok, measured,
                               f"|x1| <= {X1_TOL:g}, p1 > 0, |dt| <= {CROSSING_TIME_TOL:g}")

    def criterion_8(self) -> CriterionResult:
        y0 = np.array([0.20, 0.20, 0.01, 0.01])
        sys = ClassicalSystem()
        end = {dt: _trace(sys, y0, 10.0, dt)[-1] for dt in (0.02, 0.01, ORACLE_DT)}
        e1 = float(np.max(np.abs(end[0.02] - end[ORACLE_DT])))
        e2 = float(np.max(np.abs(end[0.01] - end[ORACLE_DT])))
        ratio = e1 / e2
        lo, hi = ORDER_RANGE
        return CriterionResult(8, "RK4 order check", lo <= ratio <= hi,
                               f"err(0.02)={e1:.3e}, err(0.01)={e2:.3e}, ratio {ratio:.2f}",
                               f"ratio in [{lo:g}, {hi:g}]")

    def _lambda(self, cfg) -> float:
        res = self.run(cfg)
        return float("nan") if isinstance(res, Exception) else res.summary.lambda_final

    def criterion_9(self) -> CriterionResult:
        regular = self._lambda(self.classical[0])
        chaotic = self._lambda(self.classical[5])
        return CriterionResult(9, "regular vs chaotic ordering", chaotic > regular,
                               f"lambda(0.35,0.01)={chaotic:.4e}, lambda(0.12,0.001)={regular:.4e}",
                               "lambda(0.35) > lambda(0.12)")

    def criterion_10(self) -> CriterionResult:
        base = ScenarioConfig("semi-x0.2-p0.01", 0.20, 0.01, mode=SEMICLASSICAL,
                              t_total=self.t_total)
        e = base.energy
        members = {name: sweep_member(base, h) for name, h in
                   (("0", 0.0), ("E/30", e / 30.0), ("E/10", e / 10.0))}
        lam = {name: self._lambda(cfg) for name, cfg in members.items()}
        area = {}
        for name in ("0", "E/10"):
            res = self.run(members[name])
            area[name] = float("nan") if isinstance(res, Exception) else hull_area(res.section[:, 1:])
        ok = lam["E/30"] > lam["0"] and lam["E/10"] > lam["0"] and area["E/10"] > area["0"]
        measured = (f"lambda: hbar=0 {lam['0']:.4e}, E/30 {lam['E/30']:.4e}, E/10 {lam['E/10']:.4e}; "
                    f"hull area: hbar=0 {area['0']:.3e}, E/10 {area['E/10']:.3e}")
        return CriterionResult(10, "quantum-induced chaos trend", ok, measured,
                               "lambda(E/30), lambda(E/10) > lambda(0); area(E/10) > area(0)")

    def criterion_11(self, configs: Optional[List[ScenarioConfig]] = None) -> CriterionResult:
        if configs is None:
            configs = [self.classical[2], next(c for c in self.semiclassical
                                                if c.x0 == 0.20 and c.hbar == c.energy / 10.0)]
        same = True
        names = []
        with tempfile.TemporaryDirectory() as tmp:
            for cfg in configs:
                dirs = [Path(tmp) / "a", Path(tmp) / "b"]
                files = [emit(simulate(cfg), d) for d in dirs]
                for key in ("section", "lyapunov"):
                    names.append(files[0][key].name)
                    same &= filecmp.cmp(files[0][key], files[1][key], shallow=False)
        return CriterionResult(11, "determinism", same,
                               f"{len(names)} CSVs compared byte-for-byte: "
                               f"{'identical' if same else 'DIFFER'}", "bit-identical")

    def criteria(self) -> List[Callable[[], CriterionResult]]:
        return [getattr(self, f"criterion_{i}") for i in range(1, 12)]

    def run_all(self, echo: Optional[Callable[[str], None]] = None) -> List[CriterionResult]:
        results = []
        for crit in self.criteria():
            r = crit()
            results.append(r)
            if echo is not None:
                echo(r.line())
        return results
