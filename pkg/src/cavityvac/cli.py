"""Batch command-line driver.

Usage::

    cavityvac <scenario> --config run.cfg [--out data.csv] [--format csv|json]
              [--sweep key=v1,v2,...] [--threads n] [--timestamp]

The configuration is a flat ``key = value`` document with dotted section
prefixes; ``#`` starts a comment. Example::

    cavity.L0 = 1e-5
    cavity.M = 1e-11
    cavity.omega_osc = 1e5
    cavity.omega_cut = 1e16
    grid.start = 0
    grid.stop = 1e-5
    grid.count = 200

Exit codes: 0 success, 1 usage or configuration error, 2 numerical error,
3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import CODATA, CavityConfig, evaluate_grid, resolve_threads
from .emfield import (PolarizableProbe, b2_correction, casimir_polder_energy, e2_correction,
                      em_energy_density)
from .errors import (CavityVacError, ConfigurationError, ConvergenceError, DomainError,
                     NonFiniteResultError)
from .mirror import REGULATORS, scalar_density_correction, static_scalar_density
from .resonance import (UNIT_CONVENTION, AtomPair, PhotonicCrystal, QuadratureSpec,
                        crystal_inside_gap_energy, crystal_outside_gap_energy, dos,
                        vacuum_resonance_energy)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

SCENARIOS = ("density-scalar", "density-em", "casimir-polder", "resonance-vacuum",
             "resonance-crystal-out", "resonance-crystal-in", "dos")

_REQUIRED_GROUPS = {
    "density-scalar": ("cavity",),
    "density-em": ("cavity",),
    "casimir-polder": ("cavity", "probe"),
    "resonance-vacuum": ("pair",),
    "resonance-crystal-out": ("pair", "crystal"),
    "resonance-crystal-in": ("pair", "crystal"),
    "dos": ("crystal",),
}

_COLUMNS = {
    "density-scalar": ("x", "static_density", "correction", "total"),
    "density-em": ("x", "e2_static", "e2_correction", "b2_static", "b2_correction",
                   "correction_total", "total_energy_density"),
    "casimir-polder": ("x0", "energy_fixed_wall", "energy_correction", "energy_total"),
    "resonance-vacuum": ("r", "energy"),
    "resonance-crystal-out": ("r", "energy", "energy_vacuum"),
    "resonance-crystal-in": ("r", "energy"),
    "dos": ("omega", "dos"),
}

# key -> (kind, required-within-group)
_KEYS = {
    "scenario": ("str", False),
    "cavity.L0": ("float", True),
    "cavity.M": ("float", True),
    "cavity.omega_osc": ("float", True),
    "cavity.omega_cut": ("float", True),
    "cavity.regulator": ("str", False),
    "probe.alpha_E": ("float", True),
    "probe.alpha_M": ("float", True),
    "pair.direction": ("vec", True),
    "pair.omega_a": ("float", True),
    "pair.mu_A": ("vec", True),
    "pair.mu_B": ("vec", True),
    "pair.symmetry": ("int", False),
    "crystal.omega_l": ("float", True),
    "crystal.omega_u": ("float", True),
    "crystal.k0": ("float", True),
    "quadrature.panels": ("int", False),
    "quadrature.order": ("int", False),
    "quadrature.levels": ("int", False),
    "quadrature.rtol": ("float", False),
    "quadrature.grading": ("float", False),
    "quadrature.k_max_factor": ("float", False),
    "grid.start": ("float", True),
    "grid.stop": ("float", True),
    "grid.count": ("int", True),
    "grid.spacing": ("str", False),
    "output.path": ("str", False),
    "output.format": ("str", False),
}


class ConfigParseError(ConfigurationError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UsageError(CavityVacError):
    pass


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise ConfigurationError(f"grid.count must be >= 2, got {self.count}", key="grid.count")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or not self.start < self.stop:
            raise ConfigurationError("grid.start must be below grid.stop", key="grid.start")
        if self.spacing not in ("linear", "log"):
            raise ConfigurationError(f"grid.spacing must be linear or log, got {self.spacing!r}",
                                     key="grid.spacing")
        if self.spacing == "log" and not self.start > 0:
            raise ConfigurationError("log grids need grid.start > 0", key="grid.start")

    def points(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    grid: Grid
    values: dict = field(default_factory=dict)
    cavity: CavityConfig | None = None
    regulator: str = "sharp"
    probe: tuple[float, float] | None = None
    pair: AtomPair | None = None
    crystal: PhotonicCrystal | None = None
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    output_path: str | None = None
    output_format: str = "csv"


@dataclass
class OutputRecord:
    columns: tuple
    rows: np.ndarray
    metadata: dict


def _convert(key, kind, raw, line):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == "vec":
            parts = [float(p) for p in raw.replace(" ", "").split(",") if p]
            if len(parts) != 3:
                raise ValueError
            return tuple(parts)
        return raw
    except ValueError:
        raise ConfigParseError(f"bad {kind} value {raw!r} for {key}", line) from None


def _read_document(text):
    values, lines = {}, {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigParseError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigParseError(f"duplicate key {key!r}", lineno)
        if not raw:
            raise ConfigParseError(f"empty value for {key}", lineno)
        values[key] = _convert(key, _KEYS[key][0], raw, lineno)
        lines[key] = lineno
    return values, lines


def _group(values, name, required):
    present = {k: v for k, v in values.items() if k.startswith(name + ".")}
    if not required:
        return present or None
    missing = [k for k, (kind, req) in _KEYS.items() if k.startswith(name + ".") and req and k not in present]
    if missing:
        raise ConfigurationError(f"missing required key(s): {', '.join(missing)}", key=missing[0])
    return present


def _prefixed(group, fn):
    try:
        return fn()
    except ConfigurationError as exc:
        key = f"{group}.{exc.key}" if exc.key and "." not in exc.key else exc.key
        raise ConfigurationError(f"{key}: {exc}", key=key) from None
    except DomainError as exc:
        raise ConfigurationError(f"{group}: {exc}", key=group) from None


def parse_config(text: str, scenario: str | None = None) -> RunConfig:
    """Parse and validate a configuration document.

    ``scenario`` (e.g. from the command line) takes the place of a
    ``scenario`` key; giving both with different values is an error.
    """
    values, _ = _read_document(text)
    doc_scenario = values.get("scenario")
    if scenario and doc_scenario and scenario != doc_scenario:
        raise ConfigurationError(f"scenario {scenario!r} conflicts with document scenario {doc_scenario!r}",
                                 key="scenario")
    scenario = scenario or doc_scenario
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"unknown or missing scenario {scenario!r}", key="scenario")
    values["scenario"] = scenario
    needed = _REQUIRED_GROUPS[scenario]
    for group in ("cavity", "probe", "pair", "crystal"):
        if group not in needed and _group(values, group, False):
            raise ConfigurationError(f"section {group!r} is not used by scenario {scenario!r}", key=group)

    grid_vals = _group(values, "grid", True)
    grid = _prefixed("grid", lambda: Grid(grid_vals["grid.start"], grid_vals["grid.stop"],
                                          grid_vals["grid.count"], grid_vals.get("grid.spacing", "linear")))
    kwargs = dict(scenario=scenario, grid=grid, values=dict(values))

    if "cavity" in needed:
        cav = _group(values, "cavity", True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kwargs["cavity"] = _prefixed("cavity", lambda: CavityConfig(
                L0=cav["cavity.L0"], M=cav["cavity.M"], omega_osc=cav["cavity.omega_osc"],
                omega_cut=cav["cavity.omega_cut"]))
        reg = cav.get("cavity.regulator", "sharp")
        if reg not in REGULATORS:
            raise ConfigurationError(f"cavity.regulator must be one of {REGULATORS}", key="cavity.regulator")
        kwargs["regulator"] = reg
        L0 = kwargs["cavity"].L0
        if grid.start < 0 or grid.stop > L0:
            raise ConfigurationError("cavity positions must lie within [0, cavity.L0]", key="grid.stop")
    if "probe" in needed:
        pr = _group(values, "probe", True)
        _prefixed("probe", lambda: PolarizableProbe(pr["probe.alpha_E"], pr["probe.alpha_M"], 0.5 * L0))
        kwargs["probe"] = (pr["probe.alpha_E"], pr["probe.alpha_M"])
    if "pair" in needed:
        pa = _group(values, "pair", True)
        if grid.start <= 0:
            raise ConfigurationError("interatomic distances must be positive", key="grid.start")
        kwargs["pair"] = _prefixed("pair", lambda: AtomPair(
            pa["pair.direction"], pa["pair.omega_a"], pa["pair.mu_A"], pa["pair.mu_B"],
            pa.get("pair.symmetry", 1)))
    if "crystal" in needed:
        cr = _group(values, "crystal", True)
        kwargs["crystal"] = _prefixed("crystal", lambda: PhotonicCrystal(
            cr["crystal.omega_l"], cr["crystal.omega_u"], cr["crystal.k0"]))
        if scenario == "dos" and grid.start < 0:
            raise ConfigurationError("frequencies must be non-negative", key="grid.start")
    quad = _group(values, "quadrature", False)
    if quad:
        if scenario != "resonance-crystal-in":
            raise ConfigurationError("quadrature settings only apply to resonance-crystal-in", key="quadrature")
        kwargs["quadrature"] = QuadratureSpec(**{k.split(".", 1)[1]: v for k, v in quad.items()})
    pair, crystal = kwargs.get("pair"), kwargs.get("crystal")
    if scenario == "resonance-crystal-out" and not pair.omega_a > crystal.omega_u:
        raise ConfigurationError("resonance-crystal-out needs pair.omega_a above crystal.omega_u",
                                 key="pair.omega_a")
    if scenario == "resonance-crystal-in" and not crystal.omega_l < pair.omega_a < crystal.omega_u:
        raise ConfigurationError("resonance-crystal-in needs pair.omega_a inside the gap", key="pair.omega_a")

    fmt = values.get("output.format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"output.format must be csv or json, got {fmt!r}", key="output.format")
    kwargs["output_path"] = values.get("output.path")
    kwargs["output_format"] = fmt
    return RunConfig(**kwargs)


def grid_points(config: RunConfig) -> np.ndarray:
    """Grid for the scenario; cavity grids are moved off the walls."""
    pts = config.grid.points()
    if config.cavity is not None:
        L0 = config.cavity.L0
        gaps = np.diff(pts)
        head = max(gaps[0] * 1e-3, 1e-9 * L0)
        tail = max(gaps[-1] * 1e-3, 1e-9 * L0)
        if pts[0] <= 0.0:
            pts[0] = head
        if pts[-1] >= L0:
            pts[-1] = L0 - tail
        if np.any(np.diff(pts) <= 0):
            raise ConfigurationError("grid too coarse or too short after moving points off the walls",
                                     key="grid.count")
    return pts


def _point_function(config: RunConfig):
    s = config.scenario
    cav = config.cavity
    if s == "density-scalar":
        def f(x):
            static = static_scalar_density(x, cav, config.regulator)
            corr = scalar_density_correction(x, cav)
            return (x, static, corr, static + corr)
    elif s == "density-em":
        def f(x):
            b = em_energy_density(x, cav)
            return (x, b.e2_static, b.e2_correction, b.b2_static, b.b2_correction,
                    b.correction_total, b.total_energy_density)
    elif s == "casimir-polder":
        aE, aM = config.probe

        def f(x):
            probe = PolarizableProbe(aE, aM, x)
            fixed = casimir_polder_energy(probe, cav, include_motion=False)
            corr = -0.5 * aE * e2_correction(x, cav) - 0.5 * aM * b2_correction(x, cav)
            return (x, fixed, corr, casimir_polder_energy(probe, cav))
    elif s == "resonance-vacuum":
        def f(r):
            return (r, vacuum_resonance_energy(config.pair.at_distance(r)))
    elif s == "resonance-crystal-out":
        def f(r):
            p = config.pair.at_distance(r)
            return (r, crystal_outside_gap_energy(p, config.crystal), vacuum_resonance_energy(p))
    elif s == "resonance-crystal-in":
        def f(r):
            p = config.pair.at_distance(r)
            return (r, crystal_inside_gap_energy(p, config.crystal, config.quadrature))
    elif s == "dos":
        def f(w):
            return (w, dos(w, config.crystal))
    else:  # pragma: no cover - guarded by parse_config
        raise ValueError(s)
    return f


def _metadata(config: RunConfig, timestamp: bool):
    meta = {"scenario": config.scenario, "code_version": f"cavityvac {__version__}",
            "constants.c": repr(CODATA.c), "constants.hbar": repr(CODATA.hbar)}
    for key in sorted(config.values):
        if key in ("scenario", "output.path", "output.format"):
            continue
        v = config.values[key]
        meta[key] = ",".join(repr(float(c)) for c in v) if isinstance(v, tuple) else (
            repr(v) if isinstance(v, float) else str(v))
    if config.cavity is not None:
        meta["cavity.mode_count"] = str(config.cavity.mode_count)
        meta["cavity.regulator"] = config.regulator
        meta["static_em_regulator"] = "exponential exp(-omega/omega_cut)"
        meta["energy_density_units"] = "J/m (one-dimensional normalization)"
    if config.pair is not None:
        meta["unit_convention"] = UNIT_CONVENTION
    if config.scenario == "resonance-crystal-in":
        q = config.quadrature
        meta["quadrature"] = (f"panels={q.panels} order={q.order} levels={q.levels} rtol={q.rtol!r} "
                              f"grading={q.grading!r} k_max_factor={q.k_max_factor!r}")
    if config.scenario == "dos":
        meta["dos_units"] = "s/m^3"
    if timestamp:
        meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return meta


def run(config: RunConfig, threads: int | None = None, timestamp: bool = False) -> OutputRecord:
    """Evaluate the scenario on its grid."""
    pts = grid_points(config)
    f = _point_function(config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = evaluate_grid(f, pts, threads)
    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise NonFiniteResultError(f"non-finite result at grid point {arr[bad, 0]!r}")
    return OutputRecord(_COLUMNS[config.scenario], arr, _metadata(config, timestamp))


# -- serialization ---------------------------------------------------------------

def render_csv(record: OutputRecord) -> str:
    lines = [f"# {k} = {v}" for k, v in record.metadata.items()]
    lines.append(",".join(record.columns))
    for row in record.rows:
        lines.append(",".join(f"{v:.16e}" for v in row))
    return "\n".join(lines) + "\n"


def render_json(record: OutputRecord) -> str:
    doc = {"metadata": record.metadata, "columns": list(record.columns),
           "rows": [[float(v) for v in row] for row in record.rows]}
    return json.dumps(doc, indent=1) + "\n"


def parse_csv(text: str) -> OutputRecord:
    meta, header, rows = {}, None, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition(" = ")
            meta[k] = v
        elif header is None:
            header = tuple(line.split(","))
        elif line:
            rows.append([float(v) for v in line.split(",")])
    return OutputRecord(header, np.asarray(rows, dtype=float), meta)


def parse_json(text: str) -> OutputRecord:
    doc = json.loads(text)
    return OutputRecord(tuple(doc["columns"]), np.asarray(doc["rows"], dtype=float), doc["metadata"])


def write_output(record: OutputRecord, path, fmt: str = "csv") -> Path:
    """Write atomically: temporary file in the target directory, then rename."""
    path = Path(path)
    text = render_csv(record) if fmt == "csv" else render_json(record)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _override(text: str, key: str, value: str) -> str:
    if key not in _KEYS:
        raise ConfigurationError(f"cannot sweep unknown key {key!r}", key=key)
    kept = [ln for ln in text.splitlines() if ln.split("#", 1)[0].split("=", 1)[0].strip() != key]
    kept.append(f"{key} = {value}")
    return "\n".join(kept) + "\n"


def sweep_path(out, value: str) -> Path:
    out = Path(out)
    token = value.replace("/", "_").replace(os.sep, "_").replace(" ", "")
    return out.with_name(f"{out.stem}_{token}{out.suffix}")


@dataclass
class SweepPoint:
    value: str
    path: Path | None
    status: int
    error: str | None = None
    record: OutputRecord | None = None


def sweep(text: str, key: str, values, out, scenario: str | None = None, fmt: str = "csv",
          threads: int | None = None, timestamp: bool = False) -> list[SweepPoint]:
    """Run once per value of ``key``; one output file per value.

    A failing point is recorded and the remaining points still run.
    """
    values = [v for v in values]
    if not values:
        raise UsageError("sweep needs at least one value")
    results = []
    for value in values:
        target = sweep_path(out, value)
        try:
            cfg = parse_config(_override(text, key, value), scenario)
            rec = run(cfg, threads=threads, timestamp=timestamp)
            write_output(rec, target, fmt)
            results.append(SweepPoint(value, target, EXIT_OK, record=rec))
        except BaseException as exc:  # noqa: BLE001 - collected into the summary
            if isinstance(exc, (KeyboardInterrupt, SystemExit)):
                raise
            results.append(SweepPoint(value, None, _exit_code(exc), f"{type(exc).__name__}: {exc}"))
    return results


def _exit_code(exc) -> int:
    if isinstance(exc, (ConfigurationError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, (ConvergenceError, NonFiniteResultError, ArithmeticError, DomainError)):
        return EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERICAL


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cavityvac", description="Vacuum energy densities and resonance interactions.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", required=True, help="key = value configuration file")
    p.add_argument("--out", help="output file (default: output.path from the config, else stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default: csv)")
    p.add_argument("--sweep", help="key=v1,v2,... run once per value")
    p.add_argument("--threads", type=int, help="worker threads (default: $CAVITYVAC_THREADS or 1)")
    p.add_argument("--timestamp", action="store_true", help="record the run time in the metadata header")
    p.add_argument("--version", action="version", version=f"cavityvac {__version__}")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = resolve_threads(args.threads)
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"cavityvac: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        if args.sweep:
            key, sep, raw = args.sweep.partition("=")
            if not sep or not key.strip():
                raise UsageError("--sweep expects key=v1,v2,...")
            values = [v.strip() for v in raw.split(",") if v.strip()]
            base = parse_config(text, args.scenario)
            out = args.out or base.output_path
            if not out:
                raise UsageError("a sweep needs --out or output.path")
            results = sweep(text, key.strip(), values, out, args.scenario,
                            args.format or base.output_format, threads, args.timestamp)
            for r in results:
                where = r.path if r.path else r.error
                print(f"sweep {key.strip()}={r.value}: exit {r.status} {where}", file=sys.stderr)
            ok = [r for r in results if r.status == EXIT_OK]
            return EXIT_OK if ok else results[0].status
        cfg = parse_config(text, args.scenario)
        record = run(cfg, threads=threads, timestamp=args.timestamp)
        fmt = args.format or cfg.output_format
        out = args.out or cfg.output_path
        if out:
            write_output(record, out, fmt)
        else:
            sys.stdout.write(render_csv(record) if fmt == "csv" else render_json(record))
        return EXIT_OK
    except UsageError as exc:
        print(f"cavityvac: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"cavityvac: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cavityvac: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, ArithmeticError, DomainError) as exc:
        print(f"cavityvac: numerical error: {exc}", file=sys.stderr)
        if getattr(exc, "diagnostics", None):
            print(f"cavityvac: diagnostics: {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERICAL


def console_main():  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    console_main()
