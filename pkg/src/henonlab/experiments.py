"""Scenario registry and runner for the section / exponent experiments.

Every scenario starts from ``x1 = x2 = x0`` and ``p1 = p2 = p0``.  The
semiclassical variants add ``G1 = G2 = g0`` and ``Pi1 = Pi2 = pi0``, which at
the defaults (0.5, 0) puts the initial effective energy at ``E + hbar``.
"""

import dataclasses
import io
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import (
    DEFAULT_DX2,
    DEFAULT_STRIDE,
    CrossingDetector,
    LyapunovSeries,
    equal_energy_neighbor,
    lyapunov_series,
)
from .dynamics import (
    ESCAPE_ENERGY,
    ClassicalSystem,
    SemiclassicalSystem,
    classical_energy,
    effective_energy,
    potential_value,
)
from .errors import HbarTooLarge, HenonLabError, ScenarioFailed
from .integrator import (
    DEFAULT_DT,
    DEFAULT_T_TOTAL,
    EnergyMonitor,
    IntegrationPlan,
    integrate,
)

log = logging.getLogger(__name__)

CLASSICAL = "classical"
SEMICLASSICAL = "semiclassical"

#: (x0, p0) initial data of the six classical presets, in figure order.
PRESET_DATA: Tuple[Tuple[float, float], ...] = (
    (0.12, 0.001),
    (0.10, 0.01),
    (0.20, 0.01),
    (0.30, 0.01),
    (0.33, 0.01),
    (0.35, 0.01),
)

#: Classical energies printed for the presets (5 decimals).
PRESET_ENERGIES: Tuple[float, ...] = (0.01555, 0.01077, 0.04543, 0.10810, 0.13296, 0.15118)

#: Number of leading presets that get a semiclassical hbar family.
N_SEMICLASSICAL_FAMILIES = 4

#: Default hbar sweep as E / divisor; the largest member sits on the E/10 bound.
DEFAULT_SWEEP_DIVISORS = (100.0, 30.0, 10.0)

OUTPUTS = ("section", "lyapunov")
CSV_FMT = "%.17g"


def base_label(x0, p0):
    return f"x{x0:g}-p{p0:g}"


@dataclass(frozen=True)
class ScenarioConfig:
    label: str
    x0: float
    p0: float
    mode: str = CLASSICAL
    hbar: float = 0.0
    g0: float = 0.5
    pi0: float = 0.0
    dt: float = DEFAULT_DT
    t_total: float = DEFAULT_T_TOTAL
    dx2: float = DEFAULT_DX2
    stride: int = DEFAULT_STRIDE
    out_dir: Optional[str] = None
    outputs: Tuple[str, ...] = OUTPUTS
    allow_large_hbar: bool = False

    def __post_init__(self):
        if self.mode not in (CLASSICAL, SEMICLASSICAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (math.isfinite(self.hbar) and self.hbar >= 0.0):
            raise ValueError(f"hbar must be finite and >= 0, got {self.hbar!r}")
        if self.mode == CLASSICAL and self.hbar != 0.0:
            raise ValueError("classical scenarios take no hbar; use mode='semiclassical'")
        if not self.g0 > 0.0:
            raise ValueError(f"g0 must be positive, got {self.g0!r}")
        if not self.stride >= 1:
            raise ValueError("stride must be >= 1")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ValueError(f"unknown outputs {sorted(bad)}")
        IntegrationPlan(self.dt, self.t_total)
        bound = self.energy / 10.0
        if self.mode == SEMICLASSICAL and self.hbar > bound and not self.allow_large_hbar:
            raise HbarTooLarge(
                f"hbar={self.hbar:g} exceeds E/10={bound:g}; pass allow_large_hbar to override"
            )

    @property
    def semiclassical(self) -> bool:
        return self.mode == SEMICLASSICAL

    def initial_state(self) -> np.ndarray:
        y = [self.x0, self.x0, self.p0, self.p0]
        if self.semiclassical:
            y += [self.g0, self.g0, self.pi0, self.pi0]
        return np.array(y, dtype=np.float64)

    @property
    def energy(self) -> float:
        return classical_energy(np.array([self.x0, self.x0, self.p0, self.p0]))

    def system(self):
        return SemiclassicalSystem(self.hbar) if self.semiclassical else ClassicalSystem()

    def initial_energy(self) -> float:
        y = self.initial_state()
        return effective_energy(y, self.hbar) if self.semiclassical else classical_energy(y)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class RunSummary:
    label: str
    mode: str
    E: float
    H_eff_initial: float
    lambda_final: float
    n_section_points: int
    max_energy_drift: float
    wall_time: float
    config: ScenarioConfig
    error: Optional[str] = None

    @property
    def hbar(self) -> float:
        return self.config.hbar

    def to_text(self) -> str:
        """Flat ``key=value`` block; config fields are prefixed ``config.``."""
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "config":
                continue
            lines.append(f"{f.name}={_fmt(getattr(self, f.name))}")
        for f in dataclasses.fields(self.config):
            lines.append(f"config.{f.name}={_fmt(getattr(self.config, f.name))}")
        return "\n".join(lines) + "\n"


@dataclass
class ScenarioResult:
    summary: RunSummary
    section: np.ndarray  # (n, 3): t, x2, p2
    section_states: np.ndarray
    lyapunov: Optional[LyapunovSeries]
    files: Dict[str, Path] = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, float):
        return CSV_FMT % v
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    return "" if v is None else str(v)


def _atomic_write(path: Path, write):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows) -> Path:
    """Comma-separated numeric table with a header row, 17 significant digits."""
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, len(header))

    def write(fh):
        fh.write(",".join(header) + "\n")
        if rows.size:
            np.savetxt(fh, rows, fmt=CSV_FMT, delimiter=",")

    return _atomic_write(path, write)


def write_text(path, text: str) -> Path:
    return _atomic_write(path, lambda fh: fh.write(text))


def read_csv(path) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        body = fh.read()
    if not body.strip():
        return header, np.empty((0, len(header)))
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    return header, data


def preset_families() -> Dict[str, List[ScenarioConfig]]:
    """Six classical singletons followed by four semiclassical hbar families."""
    fams: Dict[str, List[ScenarioConfig]] = {}
    for x0, p0 in PRESET_DATA:
        label = f"classical-{base_label(x0, p0)}"
        fams[label] = [ScenarioConfig(label, x0, p0)]
    for x0, p0 in PRESET_DATA[:N_SEMICLASSICAL_FAMILIES]:
        base = ScenarioConfig(f"semi-{base_label(x0, p0)}", x0, p0, mode=SEMICLASSICAL)
        fams[base.label] = [sweep_member(base, h) for h in default_sweep(base)]
    return fams


def preset_scenarios() -> List[ScenarioConfig]:
    return [cfg for fam in preset_families().values() for cfg in fam]


def find_preset(label: str) -> ScenarioConfig:
    """Look up a preset by its own label or by its family label."""
    fams = preset_families()
    if label in fams:
        return fams[label][0]
    for cfg in (c for fam in fams.values() for c in fam):
        if cfg.label == label:
            return cfg
    raise KeyError(f"unknown preset {label!r}; known: {', '.join(fams)}")


def default_sweep(base: ScenarioConfig) -> List[float]:
    e = base.energy
    return [e / k for k in DEFAULT_SWEEP_DIVISORS]


def sweep_member(base: ScenarioConfig, hbar: float) -> ScenarioConfig:
    family = base.label.split("-hbar")[0]
    return base.replace(label=f"{family}-hbar{hbar:.6g}", hbar=float(hbar), mode=SEMICLASSICAL)


def simulate(cfg: ScenarioConfig, chunk_steps: int = 50_000) -> ScenarioResult:
    """Run a scenario in memory: section on the primary orbit, exponent on the pair."""
    t_start = time.perf_counter()
    try:
        system = cfg.system()
        y0 = cfg.initial_state()
        detector = CrossingDetector()
        monitor = EnergyMonitor(system.energy)
        observers = [monitor]
        if "section" in cfg.outputs:
            observers.insert(0, detector)
        plan = IntegrationPlan(cfg.dt, cfg.t_total, tuple(observers))
        lyap = None
        if "lyapunov" in cfg.outputs:
            pair = equal_energy_neighbor(y0, cfg.dx2, cfg.hbar)
            lyap = lyapunov_series(system, pair, plan, cfg.stride, chunk_steps=chunk_steps)
        else:
            integrate(system, y0, plan, chunk_steps=chunk_steps)
    except HenonLabError as exc:
        raise ScenarioFailed(cfg.label, exc) from exc
    section = detector.as_array()
    summary = RunSummary(
        label=cfg.label,
        mode=cfg.mode,
        E=cfg.energy,
        H_eff_initial=cfg.initial_energy(),
        lambda_final=lyap.final if lyap is not None else float("nan"),
        n_section_points=int(section.shape[0]),
        max_energy_drift=monitor.drift,
        wall_time=time.perf_counter() - t_start,
        config=cfg,
    )
    return ScenarioResult(summary, section, detector.states, lyap)


def output_paths(cfg: ScenarioConfig, out_dir=None) -> Dict[str, Path]:
    root = Path(out_dir if out_dir is not None else cfg.out_dir)
    return {
        "section": root / f"{cfg.label}_section.csv",
        "lyapunov": root / f"{cfg.label}_lyapunov.csv",
        "summary": root / f"{cfg.label}_summary.txt",
    }


def emit(result: ScenarioResult, out_dir) -> Dict[str, Path]:
    cfg = result.summary.config
    paths = output_paths(cfg, out_dir)
    files = {}
    if "section" in cfg.outputs:
        files["section"] = write_csv(paths["section"], ("t", "x2", "p2"), result.section)
    if result.lyapunov is not None:
        ly = result.lyapunov
        files["lyapunov"] = write_csv(
            paths["lyapunov"], ("t", "d", "lambda"), np.column_stack([ly.t, ly.d, ly.lam])
        )
    files["summary"] = write_text(paths["summary"], result.summary.to_text())
    result.files = files
    return files


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Simulate and, when ``cfg.out_dir`` is set, write CSVs and the summary."""
    result = simulate(cfg)
    if cfg.out_dir is not None:
        emit(result, cfg.out_dir)
    log.info("%s: E=%.5f lambda_final=%.6g points=%d drift=%.3g",
             cfg.label, result.summary.E, result.summary.lambda_final,
             result.summary.n_section_points, result.summary.max_energy_drift)
    return result


def _failed_summary(cfg: ScenarioConfig, exc: Exception) -> RunSummary:
    return RunSummary(
        label=cfg.label, mode=cfg.mode, E=cfg.energy, H_eff_initial=cfg.initial_energy(),
        lambda_final=float("nan"), n_section_points=0, max_energy_drift=float("nan"),
        wall_time=0.0, config=cfg, error=str(exc),
    )


def hbar_sweep(base: ScenarioConfig, hbars: Sequence[float], workers: int = 1) -> List[RunSummary]:
    """Run ``base`` once per hbar, ordered by hbar.

    A member that fails is reported with ``error`` set and ``NaN`` results;
    the remaining members still run.  With ``base.out_dir`` set, a combined
    ``<family>_sweep.csv`` is written.
    """
    if any(not (h >= 0.0) for h in hbars):
        raise ValueError("sweep hbar values must be >= 0")
    members = [sweep_member(base, h) for h in sorted(hbars)]

    def one(cfg):
        try:
            return run_scenario(cfg).summary
        except HenonLabError as exc:
            log.warning("sweep member %s failed: %s", cfg.label, exc)
            return _failed_summary(cfg, exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(one, members))
    else:
        summaries = [one(cfg) for cfg in members]
    if base.out_dir is not None:
        family = base.label.split("-hbar")[0]
        rows = [[s.hbar, s.lambda_final, s.E, s.H_eff_initial] for s in summaries]
        write_csv(Path(base.out_dir) / f"{family}_sweep.csv",
                  ("hbar", "lambda_final", "E", "H_eff_initial"), rows)
    return summaries


@dataclass
class PotentialGrid:
    rows: np.ndarray  # (n, 3): x1, x2, V
    escape_level: float = ESCAPE_ENERGY

    def write(self, path) -> Path:
        path = Path(path)
        write_text(path.with_name(path.stem + "_meta.txt"),
                   f"escape_level={CSV_FMT % self.escape_level}\nrows={self.rows.shape[0]}\n")
        return write_csv(path, ("x1", "x2", "V"), self.rows)


def potential_grid(x1_range, x2_range, resolution: int) -> PotentialGrid:
    """Potential sampled on a uniform ``resolution x resolution`` grid, x1-major."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lo1, hi1 = map(float, x1_range)
    lo2, hi2 = map(float, x2_range)
    if not all(map(math.isfinite, (lo1, hi1, lo2, hi2))):
        raise ValueError("grid ranges must be finite")
    a, b = np.meshgrid(np.linspace(lo1, hi1, resolution), np.linspace(lo2, hi2, resolution),
                       indexing="ij")
    a, b = a.ravel(), b.ravel()
    return PotentialGrid(np.column_stack([a, b, potential_value(a, b)]))
