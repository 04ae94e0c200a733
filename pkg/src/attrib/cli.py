"""Command-line driver.

Commands
--------
``attrib run --config run.json``
    Decompose each business year at each granularity and write CSV reports.
``attrib demo example1``
    Hedged S&P 500 position: OAT, SU and ASU contributions of the FX rate.
``attrib synth --seed 7 --out panel.csv``
    Write a seeded synthetic panel in the canonical format.

Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 pricing
domain error. Reports are only written once every computation succeeded.

The output directory is taken from ``--output-dir``, else the
``ATTRIB_OUTPUT_DIR`` environment variable, else the config file.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Any, Sequence

from .core import AttribError, DataError, EvaluationError, InputError, Method, PricingModel, RiskFactorPanel
from .data import (
    BOND_FACTORS,
    FactorPath,
    Granularity,
    business_years,
    generate_synthetic_panel,
    make_partition,
    read_panel,
    write_panel,
)
from .decomp import decompose_multiperiod, enumerate_orders, hedged_contribution_x
from .models import ConstantMaturityBond, HedgedForeignEquity, hedged_price
from .report import (
    ASU_CHECK,
    YearlyAttributionTable,
    emit_diagnostics,
    emit_long,
    emit_table,
    granularity_sensitivity,
    mean_abs_unexplained,
    permutation_range,
)

log = logging.getLogger("attrib")

OUTPUT_ENV = "ATTRIB_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DOMAIN = 4

MODEL_FACTORS = {"bond": ("IR", "CS", "FX"), "hedged": ("FX", "EQ")}

HEDGED_FACTORS = {
    "FX": FactorPath(0.95, 0.006, kind="geometric"),
    "EQ": FactorPath(880.0, 0.012, kind="geometric"),
}


class ConfigError(AttribError, ValueError):
    pass


@dataclass
class RunConfig:
    """Validated run configuration."""

    model: str
    factor_columns: dict[str, str]
    methods: tuple[Method, ...]
    output_dir: Path
    panel: Path | None = None
    maturity: float = 10.0
    x0: float | None = None
    y0: float | None = None
    su_orders: str | list[tuple[str, ...]] = "all"
    granularities: tuple[Granularity, ...] = (Granularity.ANNUAL,)
    years: tuple[int, int] | None = None
    layout: str = "combined"
    percent_factors: tuple[str, ...] = ()
    forward_fill: bool = False
    seed: int | None = None
    synthetic_steps: int = 252
    synthetic_start: date = date(2002, 12, 31)

    @property
    def factors(self) -> tuple[str, ...]:
        return MODEL_FACTORS[self.model]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def parse_config(raw: dict[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    """Validate a decoded JSON config; relative paths resolve against ``base_dir``."""
    _require(isinstance(raw, dict), "config must be a JSON object")
    known = {
        "panel", "percent_factors", "forward_fill", "model", "factor_columns", "methods",
        "su_orders", "granularities", "years", "output_dir", "layout", "seed", "synthetic",
    }  # fmt: skip
    extra = sorted(set(raw) - known)
    _require(not extra, f"unknown config keys: {extra}")

    model_raw = raw.get("model", {"type": "bond"})
    if isinstance(model_raw, str):
        model_raw = {"type": model_raw}
    _require(isinstance(model_raw, dict), "model must be an object or a name")
    kind = model_raw.get("type")
    _require(kind in MODEL_FACTORS, f"model type must be one of {sorted(MODEL_FACTORS)}, got {kind!r}")
    factors = MODEL_FACTORS[kind]

    mapping = raw.get("factor_columns", {f: f for f in factors})
    _require(isinstance(mapping, dict), "factor_columns must map model factors to panel columns")
    _require(
        set(mapping) == set(factors),
        f"factor_columns must cover exactly {list(factors)}, got {sorted(mapping)}",
    )
    _require(all(isinstance(v, str) and v for v in mapping.values()), "factor_columns values must be column names")
    _require(len(set(mapping.values())) == len(mapping), "factor_columns maps two factors to one column")

    methods_raw = raw.get("methods", ["oat", "su", "asu"])
    _require(isinstance(methods_raw, list) and methods_raw, "methods must be a non-empty list")
    try:
        methods = tuple(Method(str(m).upper()) for m in methods_raw)
    except ValueError:
        raise ConfigError(f"methods must be drawn from oat/su/asu, got {methods_raw}") from None
    methods = tuple(m for m in Method if m in methods)

    su_raw = raw.get("su_orders", "all")
    if su_raw == "all":
        su_orders: str | list[tuple[str, ...]] = "all"
    else:
        _require(isinstance(su_raw, list) and su_raw, 'su_orders must be "all" or a list of orders')
        su_orders = []
        for o in su_raw:
            _require(
                isinstance(o, list) and sorted(o) == sorted(factors) and len(set(o)) == len(o),
                f"SU order {o} is not a permutation of {list(factors)}",
            )
            su_orders.append(tuple(o))

    gran_raw = raw.get("granularities", ["annual"])
    _require(isinstance(gran_raw, list) and gran_raw, "granularities must be a non-empty list")
    try:
        grans = {Granularity.parse(str(g)) for g in gran_raw}
    except InputError as exc:
        raise ConfigError(str(exc)) from None
    granularities = tuple(g for g in Granularity if g in grans)

    years = raw.get("years")
    if years is not None:
        if isinstance(years, int):
            years = [years, years]
        _require(
            isinstance(years, list) and len(years) == 2 and all(isinstance(y, int) for y in years)
            and years[0] <= years[1],
            f"years must be [first, last], got {years!r}",
        )  # fmt: skip
        years = (years[0], years[1])

    layout = raw.get("layout", "combined")
    _require(layout in ("combined", "split"), f'layout must be "combined" or "split", got {layout!r}')

    synth = raw.get("synthetic") or {}
    _require(isinstance(synth, dict), "synthetic must be an object")
    panel = raw.get("panel")
    seed = raw.get("seed", synth.get("seed"))
    _require(seed is None or isinstance(seed, int), "seed must be an integer")
    _require(panel is not None or seed is not None, "give either a panel path or a synthetic seed")

    cfg = RunConfig(
        model=kind,
        factor_columns=dict(mapping),
        methods=methods,
        output_dir=base_dir / raw.get("output_dir", "reports"),
        panel=None if panel is None else base_dir / panel,
        su_orders=su_orders,
        granularities=granularities,
        years=years,
        layout=layout,
        percent_factors=tuple(raw.get("percent_factors", ())),
        forward_fill=bool(raw.get("forward_fill", False)),
        seed=seed,
    )
    if "steps" in synth:
        _require(isinstance(synth["steps"], int) and synth["steps"] >= 1, "synthetic.steps must be >= 1")
        cfg.synthetic_steps = synth["steps"]
    if "start" in synth:
        try:
            cfg.synthetic_start = date.fromisoformat(synth["start"])
        except (TypeError, ValueError):
            raise ConfigError(f"synthetic.start must be an ISO date, got {synth['start']!r}") from None
    if kind == "bond":
        mat = model_raw.get("maturity", 10.0)
        _require(isinstance(mat, (int, float)) and mat > 0, f"maturity must be positive, got {mat!r}")
        cfg.maturity = float(mat)
    else:
        for key in ("x0", "y0"):
            v = model_raw.get(key)
            _require(v is None or (isinstance(v, (int, float)) and v > 0), f"{key} must be positive, got {v!r}")
        cfg.x0 = model_raw.get("x0")
        cfg.y0 = model_raw.get("y0")
        _require((cfg.x0 is None) == (cfg.y0 is None), "give both x0 and y0 or neither")
    return cfg


def load_config(path: Path) -> RunConfig:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw, path.parent)


# -- run -------------------------------------------------------------------


def load_panel(cfg: RunConfig) -> RiskFactorPanel:
    """Read (or synthesize) the panel and rename columns to model factor names."""
    if cfg.panel is None:
        spec = BOND_FACTORS if cfg.model == "bond" else HEDGED_FACTORS
        panel = generate_synthetic_panel(
            {cfg.factor_columns[f]: spec[f] for f in cfg.factors},
            steps=cfg.synthetic_steps,
            seed=cfg.seed,
            start_date=cfg.synthetic_start,
        )
    else:
        try:
            with open(cfg.panel, encoding="utf-8", newline="") as fh:
                panel = read_panel(fh, percent_factors=cfg.percent_factors, forward_fill=cfg.forward_fill)
        except OSError as exc:
            raise DataError(f"cannot read panel {cfg.panel}: {exc}") from None
    missing = [c for c in cfg.factor_columns.values() if c not in panel.factors]
    if missing:
        raise ConfigError(f"factor_columns refer to columns not in the panel: {missing}")
    inverse = {col: f for f, col in cfg.factor_columns.items()}
    return panel.select(cfg.factor_columns[f] for f in cfg.factors).rename(inverse)


def build_model(cfg: RunConfig, panel: RiskFactorPanel, year_start: date) -> PricingModel:
    if cfg.model == "bond":
        return ConstantMaturityBond(cfg.maturity)
    if cfg.x0 is not None:
        return HedgedForeignEquity(cfg.x0, cfg.y0)
    # hedge struck at the start of each business year
    row = panel.row(year_start)
    return HedgedForeignEquity(row["FX"], row["EQ"])


def default_years(panel: RiskFactorPanel) -> tuple[int, int]:
    return panel.dates[0].year + 1, panel.dates[-1].year


@dataclass
class RunOutput:
    table: YearlyAttributionTable
    diagnostics: list = field(default_factory=list)


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-14)


def compute(cfg: RunConfig, panel: RiskFactorPanel) -> RunOutput:
    """Run every (year, granularity, method[, order]) decomposition in memory."""
    factors = cfg.factors
    table = YearlyAttributionTable(factors)
    diags: list = []
    years = cfg.years or default_years(panel)
    oat_by_gran: dict[Granularity, list] = {g: [] for g in cfg.granularities}
    orders = enumerate_orders(factors) if cfg.su_orders == "all" else cfg.su_orders

    for (start, end), year in zip(business_years(panel, *years), range(years[0], years[1] + 1)):
        model = build_model(cfg, panel, start)
        asu_by_gran = {}
        for g in cfg.granularities:
            part = make_partition(panel, start, end, g)
            log.debug("year %d %s: m=%d", year, g.value, part.m)
            if Method.OAT in cfg.methods:
                res = decompose_multiperiod(model, panel, part, Method.OAT)
                table.add(year, g, res)
                oat_by_gran[g].append(res)
                diags.append((year, "oat_unexplained", g.value, "", res.unexplained * 100))
            asu = None
            if Method.ASU in cfg.methods:
                asu = decompose_multiperiod(model, panel, part, Method.ASU)
                table.add(year, g, asu)
                asu_by_gran[g] = asu
            if Method.SU in cfg.methods:
                sus = [decompose_multiperiod(model, panel, part, Method.SU, o) for o in orders]
                for res in sus:
                    table.add(year, g, res)
                if cfg.su_orders == "all":
                    for f in factors:
                        diags.append(
                            (year, "permutation_range", g.value, f, permutation_range(sus, f) * 100)
                        )
                    check = replace(
                        sus[0],
                        method=Method.ASU,
                        permutation=None,
                        contributions={
                            f: math.fsum(r.contributions[f] for r in sus) / len(sus) for f in factors
                        },
                    )
                    reference = asu or decompose_multiperiod(model, panel, part, Method.ASU)
                    bad = [f for f in factors if not _close(check.contributions[f], reference.contributions[f])]
                    if bad:
                        raise AssertionError(
                            f"mean of SU orders disagrees with ASU for {bad} in {year}/{g.value}"
                        )
                    table.add(year, g, check, method_label=ASU_CHECK)
        if len(asu_by_gran) == len(Granularity):
            for f in factors:
                diags.append(
                    (year, "granularity_sensitivity", "", f, granularity_sensitivity(asu_by_gran, f) * 100)
                )
    for g, results in oat_by_gran.items():
        if results:
            diags.append(("all", "mean_abs_unexplained", g.value, "", mean_abs_unexplained(results) * 100))
    return RunOutput(table, diags)


def _render(out: RunOutput, layout: str) -> dict[str, str]:
    files: dict[str, str] = {}

    def text(fn, table) -> str:
        buf = io.StringIO()
        fn(table, buf)
        return buf.getvalue()

    if layout == "combined":
        files["attribution.csv"] = text(emit_table, out.table)
        files["attribution_long.csv"] = text(emit_long, out.table)
    else:
        keys = sorted({(r.year, Method(r.method).value if r.method != ASU_CHECK else "ASU") for r in out.table.rows})
        for year, method in keys:
            sub = YearlyAttributionTable(
                out.table.factors,
                out.table.nominal,
                [r for r in out.table.rows if r.year == year and (r.method == method or (method == "ASU" and r.method == ASU_CHECK))],
            )
            files[f"attribution_{year}_{method.lower()}.csv"] = text(emit_table, sub)
    files["diagnostics.csv"] = text(emit_diagnostics, out.diagnostics)
    return files


def write_files(files: dict[str, str], outdir: Path) -> None:
    """Write every file to a temporary name first, then rename them all into place."""
    outdir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, content in sorted(files.items()):
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=outdir)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(content)
            staged.append((tmp, outdir / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def run(cfg: RunConfig) -> dict[str, str]:
    """Compute and write the reports; returns file name -> content."""
    panel = load_panel(cfg)
    out = compute(cfg, panel)
    files = _render(out, cfg.layout)
    write_files(files, cfg.output_dir)
    return files


# -- demo ----------------------------------------------------------------------


def demo_example1(stream=None) -> dict[str, float]:
    """Hedged S&P 500 position over 2003 from year-start and year-end levels only."""
    stream = stream or sys.stdout
    x0, x1, y0, y1 = 0.95, 0.79, 880.0, 1110.0
    model = HedgedForeignEquity(x0, y0)
    p0 = hedged_price(x0, y0, x0, y0)
    p1 = hedged_price(x1, y1, x0, y0)
    first, second, asu_x = hedged_contribution_x(model, x0, x1, y0, y1)
    out = {
        "P0": p0,
        "P1": p1,
        "delta_p": p1 - p0,
        "oat_x": first,
        "su_x_first_x": first,
        "su_y_first_x": second,
        "asu_x": asu_x,
        "asu_y": (p1 - p0) - asu_x,
    }
    print("Hedged S&P 500 position (EUR), FX 0.95 -> 0.79, S&P 500 880 -> 1110", file=stream)
    print(f"P(0)                      {p0:10.1f}", file=stream)
    print(f"P(1)                      {p1:10.1f}", file=stream)
    print(f"delta P                   {p1 - p0:10.1f}", file=stream)
    print("FX contribution", file=stream)
    print(f"  OAT                     {first:10.1f}", file=stream)
    print(f"  SU (FX first)           {first:10.1f}", file=stream)
    print(f"  SU (EQ first)           {second:10.1f}", file=stream)
    print(f"  ASU                     {asu_x:10.1f}", file=stream)
    print(f"EQ contribution (ASU)     {out['asu_y']:10.1f}", file=stream)
    return out


# -- argument handling ---------------------------------------------------------


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="attrib", description="P&L attribution by OAT, SU and ASU decompositions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="decompose business years and write reports")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--panel", type=Path, help="override the panel path")
    r.add_argument("--output-dir", type=Path)
    r.add_argument("--methods", type=_csv_list, help="e.g. oat,su,asu")
    r.add_argument("--granularities", type=_csv_list, help="e.g. annual,monthly,daily")
    r.add_argument("--years", help="FIRST:LAST or a single year")
    r.add_argument("--layout", choices=("combined", "split"))
    r.add_argument("--seed", type=int, help="synthetic panel seed (when no panel is configured)")

    d = sub.add_parser("demo", help="worked examples")
    d.add_argument("example", choices=("example1",))

    s = sub.add_parser("synth", help="write a seeded synthetic panel")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--steps", type=int, default=252)
    s.add_argument("--start", type=date.fromisoformat, default=date(2002, 12, 31))
    s.add_argument("--model", choices=sorted(MODEL_FACTORS), default="bond")
    s.add_argument("--out", type=Path, help="output file (default: stdout)")
    return p


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, Any] = {}
    if args.panel is not None:
        overrides["panel"] = str(args.panel)
    if args.methods:
        overrides["methods"] = args.methods
    if args.granularities:
        overrides["granularities"] = args.granularities
    if args.years:
        try:
            parts = [int(y) for y in args.years.split(":")]
        except ValueError:
            raise ConfigError(f"--years must be FIRST:LAST, got {args.years!r}") from None
        overrides["years"] = parts if len(parts) == 2 else parts * 2
    if args.layout:
        overrides["layout"] = args.layout
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        raw = json.loads(args.config.read_text(encoding="utf-8"))
        raw.update(overrides)
        if "panel" in overrides:
            raw["panel"] = str(Path(overrides["panel"]).resolve())
        cfg = parse_config(raw, args.config.parent)
    env_dir = os.environ.get(OUTPUT_ENV)
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    elif env_dir:
        cfg.output_dir = Path(env_dir)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "demo":
        demo_example1()
        return EXIT_OK

    if args.command == "synth":
        spec = BOND_FACTORS if args.model == "bond" else HEDGED_FACTORS
        try:
            panel = generate_synthetic_panel(spec, steps=args.steps, seed=args.seed, start_date=args.start)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.out is None:
            write_panel(panel, sys.stdout)
        else:
            buf = io.StringIO()
            write_panel(panel, buf)
            write_files({args.out.name: buf.getvalue()}, args.out.parent if str(args.out.parent) else Path("."))
        return EXIT_OK

    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        files = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        print(f"pricing error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (DataError, InputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for name in sorted(files):
        log.info("wrote %s", cfg.output_dir / name)
    print(f"wrote {len(files)} report file(s) to {cfg.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
