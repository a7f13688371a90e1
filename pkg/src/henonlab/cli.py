"""Command-line front end.

Exit status: 0 success, 1 domain error (or a failed validation criterion),
2 usage error.  Data go to files under ``--out``; diagnostics to stderr.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import EmptyData, HenonLabError, MissingColumn
from .experiments import (
    CLASSICAL,
    SEMICLASSICAL,
    ScenarioConfig,
    base_label,
    default_sweep,
    find_preset,
    hbar_sweep,
    potential_grid,
    preset_families,
    read_csv,
    run_scenario,
)

log = logging.getLogger("henonlab")

OUT_ENV = "HENONLAB_OUT"
DEFAULT_OUT = "henonlab-out"

#: Every scenario setting and its default; config files use the same keys.
DEFAULTS = {
    "x0": None,
    "p0": None,
    "hbar": None,
    "g0": 0.5,
    "pi0": 0.0,
    "dt": 0.02,
    "t": 20_000.0,
    "dx2": 1e-4,
    "stride": 50,
    "out": None,
    "preset": None,
    "label": None,
    "sweep": None,
    "allow_large_hbar": False,
}

_CONVERT = {
    "x0": float, "p0": float, "hbar": float, "g0": float, "pi0": float, "dt": float,
    "t": float, "dx2": float, "stride": int, "out": str, "preset": str, "label": str,
    "sweep": str,
    "allow_large_hbar": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


class UsageError(Exception):
    pass


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        try:
            values[key] = _CONVERT[key](val)
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: bad value for {key}: {exc}") from None
    return values


def parse_sweep(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--sweep expects comma-separated numbers, got {text!r}") from None


def resolve_settings(args) -> dict:
    """Defaults, then the config file, then explicitly given flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            settings[key] = val
    if settings["out"] is None:
        settings["out"] = os.environ.get(OUT_ENV, DEFAULT_OUT)
    return settings


def build_config(settings: dict, force_semiclassical=False) -> ScenarioConfig:
    base = {}
    if settings["preset"]:
        try:
            preset = find_preset(settings["preset"])
        except KeyError as exc:
            raise UsageError(str(exc).strip("'\"")) from None
        base = {"x0": preset.x0, "p0": preset.p0, "label": preset.label}
        if preset.semiclassical:
            base["hbar"] = preset.hbar
    x0 = settings["x0"] if settings["x0"] is not None else base.get("x0")
    p0 = settings["p0"] if settings["p0"] is not None else base.get("p0")
    if x0 is None or p0 is None:
        raise UsageError("initial data required: give --x0 and --p0, or --preset")
    hbar = settings["hbar"] if settings["hbar"] is not None else base.get("hbar")
    semi = hbar is not None or force_semiclassical
    explicit_ic = settings["x0"] is not None or settings["p0"] is not None or settings["hbar"] is not None
    label = settings["label"]
    if label is None and force_semiclassical:
        label = f"semi-{base_label(x0, p0)}"
    elif label is None and not explicit_ic:
        label = base.get("label")
    if label is None:
        label = f"{'semi' if semi else 'classical'}-{base_label(x0, p0)}"
        if hbar is not None:
            label += f"-hbar{hbar:.6g}"
    return ScenarioConfig(
        label=label, x0=x0, p0=p0, mode=SEMICLASSICAL if semi else CLASSICAL,
        hbar=float(hbar or 0.0), g0=settings["g0"], pi0=settings["pi0"], dt=settings["dt"],
        t_total=settings["t"], dx2=settings["dx2"], stride=settings["stride"],
        out_dir=settings["out"], allow_large_hbar=settings["allow_large_hbar"],
    )


def render_scatter(csv_path, columns, output_path, label=None) -> Path:
    """Scatter plot of two CSV columns written as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, data = read_csv(csv_path)
    xcol, ycol = columns
    for col in (xcol, ycol):
        if col not in header:
            raise MissingColumn(f"{csv_path}: no column {col!r} in {header}")
    if data.shape[0] == 0:
        raise EmptyData(f"{csv_path}: no data rows")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(data[:, header.index(xcol)], data[:, header.index(ycol)], ".", ms=1.5, color="k")
    ax.set_xlabel(xcol)
    ax.set_ylabel(ycol)
    ax.set_title(label or Path(csv_path).stem)
    fig.tight_layout()
    output_path = Path(output_path)
    fig.savefig(output_path, format="svg")
    plt.close(fig)
    return output_path


def _plot_outputs(files, label):
    specs = {"section": ("x2", "p2"), "lyapunov": ("t", "lambda")}
    for key, cols in specs.items():
        path = files.get(key)
        if path is None:
            continue
        try:
            out = render_scatter(path, cols, path.with_suffix(".svg"), label)
            print(f"wrote {out}", file=sys.stderr)
        except EmptyData as exc:
            log.warning("skipping plot: %s", exc)


def cmd_run(args, outputs):
    cfg = build_config(resolve_settings(args)).replace(outputs=outputs)
    result = run_scenario(cfg)
    sys.stdout.write(result.summary.to_text())
    for path in result.files.values():
        print(f"wrote {path}", file=sys.stderr)
    if args.plot:
        _plot_outputs(result.files, cfg.label)
    return 0


def cmd_sweep(args):
    settings = resolve_settings(args)
    base = build_config({**settings, "hbar": None}, force_semiclassical=True)
    hbars = parse_sweep(settings["sweep"]) if settings["sweep"] else default_sweep(base)
    summaries = hbar_sweep(base, hbars, workers=args.workers)
    print("hbar,lambda_final,E,H_eff_initial,error")
    for s in summaries:
        print(f"{s.hbar:.17g},{s.lambda_final:.17g},{s.E:.17g},{s.H_eff_initial:.17g},{s.error or ''}")
    failed = [s for s in summaries if s.error]
    for s in failed:
        print(f"henonlab: scenario {s.label}: {s.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_potential(args):
    out = Path(args.out or os.environ.get(OUT_ENV, DEFAULT_OUT))
    grid = potential_grid(args.xrange, args.yrange, args.res)
    path = grid.write(out / "potential_grid.csv")
    print(f"wrote {path} ({grid.rows.shape[0]} rows)", file=sys.stderr)
    return 0


def cmd_presets(args):
    for label, fam in preset_families().items():
        cfg = fam[0]
        if cfg.semiclassical:
            hs = ", ".join(f"{c.hbar:.6g}" for c in fam)
            print(f"{label}\tE={cfg.energy:.5f}\thbar sweep: {hs}")
        else:
            print(f"{label}\tE={cfg.energy:.5f}")
    return 0


def cmd_validate(args):
    from .validation import AcceptanceSuite

    results = AcceptanceSuite(t_total=args.t or 20_000.0).run_all(echo=print)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria passed")
    return 0 if n_ok == len(results) else 1


def _scenario_flags(p, sweep=False):
    p.add_argument("--x0", type=float, help="x1(0) = x2(0)")
    p.add_argument("--p0", type=float, help="p1(0) = p2(0)")
    if not sweep:
        p.add_argument("--hbar", type=float, help="semiclassical run at this hbar (0 = classical limit)")
    p.add_argument("--g0", type=float, help="initial widths G1 = G2 (default 0.5)")
    p.add_argument("--pi0", type=float, help="initial Pi1 = Pi2 (default 0)")
    p.add_argument("--dt", type=float, help="time step (default 0.02)")
    p.add_argument("--t", type=float, help="total time (default 20000)")
    p.add_argument("--dx2", type=float, help="neighbor offset in x2 (default 1e-4)")
    p.add_argument("--stride", type=int, help="Lyapunov sampling stride in steps (default 50)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--config", help="key = value file; explicit flags take precedence")
    p.add_argument("--preset", help="start from a preset label (see `presets`)")
    p.add_argument("--label", help="override the run label used in file names")
    p.add_argument("--allow-large-hbar", action="store_true", default=None,
                   help="permit hbar above E/10")
    p.add_argument("--plot", action="store_true", help="also render SVG scatter plots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="henonlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "section and Lyapunov series for one scenario"),
        ("poincare", "section points only"),
        ("lyapunov", "Lyapunov series only"),
    ):
        _scenario_flags(sub.add_parser(name, help=text))
    p = sub.add_parser("sweep", help="run one initial condition over several hbar values")
    _scenario_flags(p, sweep=True)
    p.add_argument("--sweep", help="comma-separated hbar values (default E/100, E/30, E/10)")
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("potential", help="potential values on a uniform grid")
    p.add_argument("--res", type=int, default=101)
    p.add_argument("--xrange", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--yrange", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--out")
    sub.add_parser("presets", help="list preset scenarios and their energies")
    p = sub.add_parser("validate", help="run the acceptance criteria")
    p.add_argument("--t", type=float, help="horizon of the full-length runs (default 20000)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_run(args, ("section", "lyapunov"))
        if args.command == "poincare":
            return cmd_run(args, ("section",))
        if args.command == "lyapunov":
            return cmd_run(args, ("lyapunov",))
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "potential":
            return cmd_potential(args)
        if args.command == "presets":
            return cmd_presets(args)
        return cmd_validate(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"henonlab: error: {exc}", file=sys.stderr)
        return 2
    except HenonLabError as exc:
        where = f"scenario {exc.label}: " if exc.label else ""
        cause = getattr(exc, "cause", exc)
        print(f"henonlab: {where}{type(cause).__name__}: {cause}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"henonlab: invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
