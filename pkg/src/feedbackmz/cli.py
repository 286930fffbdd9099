"""Scenario files, scan execution and result serialisation.

A scenario is a line-oriented document with ``[section]`` headers and
``key = value`` lines. ``#`` starts a comment. Sections::

    [device]    preset, input_delay, shifter_delay, loop_delay,
                mirror_reflectivity, max_passes
    [source.1]  center_time, width, carrier_freq, phase_offset
    [source.2]  same keys as source.1
    [scan]      engine, quantity, t0, separation, axis (repeatable:
                ``axis = name start stop steps``)
    [output]    csv, plot

Output paths are resolved against the output directory.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .correlations import (ENGINES, QUANTITIES, SCAN_AXES, ScanAxis, ScanResult, beat_scan,
                           ratio_diagnostics)
from .device import PRESETS, Fig1Params, check_device, preset
from .errors import ConfigError, FeedbackMZError, NumericalError, ParameterError
from .wavepacket import WavepacketParams

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 0, 1, 2, 3
ENGINE_CHOICES = ENGINES + ("both",)

_DEFAULTS = {
    "device": {"preset": "fig1", "input_delay": 0.0, "shifter_delay": 0.5, "loop_delay": 76.0,
               "mirror_reflectivity": -1.0 + 0j, "max_passes": 2},
    "source.1": {"center_time": 0.0, "width": 1.0, "carrier_freq": 0.0, "phase_offset": 0.0},
    "source.2": {"center_time": 0.0, "width": 1.0, "carrier_freq": 0.0, "phase_offset": 0.0},
    "scan": {"engine": "closed_form", "quantity": "probability", "t0": 0.0, "separation": 0.0},
    "output": {"csv": "scan.csv", "plot": ""},
}


@dataclass
class Scenario:
    preset: str
    device_params: Fig1Params
    max_passes: int
    sources: tuple
    engine: str
    quantity: str
    t0: float
    separation: float
    axes: tuple
    csv: str
    plot: str = ""
    echo: dict = field(default_factory=dict)


def _as_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _as_complex(text):
    value = complex(text.replace(" ", ""))
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError("must be finite")
    return value


def _as_int(text):
    return int(text)


_CONVERTERS = {
    "device": {"preset": str, "input_delay": _as_float, "shifter_delay": _as_float,
               "loop_delay": _as_float, "mirror_reflectivity": _as_complex, "max_passes": _as_int},
    "source.1": dict.fromkeys(("center_time", "width", "carrier_freq", "phase_offset"), _as_float),
    "source.2": dict.fromkeys(("center_time", "width", "carrier_freq", "phase_offset"), _as_float),
    "scan": {"engine": str, "quantity": str, "t0": _as_float, "separation": _as_float, "axis": str},
    "output": {"csv": str, "plot": str},
}


def _parse_axis(value, line, errors):
    parts = value.split()
    if len(parts) != 4:
        errors.append((line, f"axis: expected 'name start stop steps', got {value!r}"))
        return None
    name, start, stop, steps = parts
    if name not in SCAN_AXES:
        errors.append((line, f"axis: unknown axis {name!r}; valid axes: {', '.join(SCAN_AXES)}"))
        return None
    try:
        start, stop = _as_float(start), _as_float(stop)
        steps = int(steps)
    except ValueError:
        errors.append((line, f"axis {name}: start/stop must be numbers and steps an integer"))
        return None
    if steps < 1:
        errors.append((line, f"axis {name}: steps must be >= 1, got {steps}"))
        return None
    return ScanAxis(name, start, stop, steps)


def parse_config(text):
    """Parse a scenario document; raise ConfigError listing every problem with its line."""
    errors = []
    values = {sec: {} for sec in _DEFAULTS}
    where = {}
    axes = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append((lineno, f"malformed section header {raw.strip()!r}"))
                section = None
                continue
            name = line[1:-1].strip()
            if name not in _DEFAULTS:
                errors.append((lineno, f"unknown section [{name}]; valid sections: {', '.join(_DEFAULTS)}"))
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            errors.append((lineno, f"expected 'key = value', got {raw.strip()!r}"))
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if section is None:
            errors.append((lineno, f"key {key!r} outside a known section"))
            continue
        conv = _CONVERTERS[section].get(key)
        if conv is None:
            errors.append((lineno, f"unknown key {key!r} in [{section}]; valid keys: "
                                   f"{', '.join(_CONVERTERS[section])}"))
            continue
        if key == "axis":
            axis = _parse_axis(value, lineno, errors)
            if axis is not None:
                axes.append((lineno, axis))
            continue
        if key in values[section]:
            errors.append((lineno, f"duplicate key {key!r} in [{section}] (first on line {where[section, key]})"))
            continue
        try:
            values[section][key] = conv(value)
        except ValueError as exc:
            errors.append((lineno, f"{key}: cannot parse {value!r} ({exc})"))
            continue
        where[section, key] = lineno

    merged = {sec: {**_DEFAULTS[sec], **values[sec]} for sec in _DEFAULTS}

    def check(sec, key, ok, msg):
        if not ok:
            errors.append((where.get((sec, key)), f"{key}: {msg}"))

    dev, scan = merged["device"], merged["scan"]
    check("device", "preset", dev["preset"] in PRESETS,
          f"unknown preset {dev['preset']!r}; available: {', '.join(sorted(PRESETS))}")
    check("device", "max_passes", dev["max_passes"] >= 0, "must be >= 0")
    check("scan", "engine", scan["engine"] in ENGINE_CHOICES,
          f"unknown engine {scan['engine']!r}; valid: {', '.join(ENGINE_CHOICES)}")
    check("scan", "quantity", scan["quantity"] in QUANTITIES,
          f"unknown quantity {scan['quantity']!r}; valid: {', '.join(QUANTITIES)}")
    check("output", "csv", merged["output"]["csv"].endswith(".csv"), "must name a .csv file")
    plot = merged["output"]["plot"]
    check("output", "plot", plot == "" or plot.endswith(".svg"), "must name an .svg file")
    if dev["preset"] != "fig1" and scan["engine"] != "history_sum" and dev["preset"] in PRESETS:
        check("scan", "engine", False, f"preset {dev['preset']!r} only supports history_sum")

    seen = {}
    for lineno, axis in axes:
        if axis.name in seen:
            errors.append((lineno, f"axis {axis.name} repeated (first on line {seen[axis.name]})"))
        seen[axis.name] = lineno
    if not axes:
        errors.append((None, "[scan] needs at least one 'axis = name start stop steps' line"))

    try:
        params = Fig1Params(dev["input_delay"], dev["shifter_delay"], dev["loop_delay"],
                            dev["mirror_reflectivity"])
    except ParameterError as exc:
        errors.append((None, f"[device] {exc}"))
        params = None
    sources = []
    for sec in ("source.1", "source.2"):
        try:
            sources.append(WavepacketParams(**merged[sec]))
        except ParameterError as exc:
            key = str(exc).split()[0]
            errors.append((where.get((sec, key)), f"[{sec}] {exc}"))

    if errors:
        errors.sort(key=lambda e: (e[0] is None, e[0] or 0))
        raise ConfigError(errors)

    echo = {sec: dict(merged[sec]) for sec in merged}
    r = echo["device"]["mirror_reflectivity"]
    echo["device"]["mirror_reflectivity"] = [r.real, r.imag]
    echo["scan"]["axes"] = [{"name": a.name, "start": a.start, "stop": a.stop, "steps": a.steps}
                            for _, a in axes]
    return Scenario(dev["preset"], params, dev["max_passes"], tuple(sources), scan["engine"],
                    scan["quantity"], scan["t0"], scan["separation"], tuple(a for _, a in axes),
                    merged["output"]["csv"], plot, echo)


def run_scenario(s, threads=1, engine=None):
    """Run the scan(s). Returns ``(results, diagnostics)``.

    ``results`` maps engine name to ScanResult. With both engines the
    diagnostics hold the mean and coefficient of variation of their ratio.
    """
    engine = engine or s.engine
    engines = ENGINES if engine == "both" else (engine,)
    device = None
    if s.preset != "fig1":
        device = check_device(preset(s.preset))
    else:
        check_device(preset("fig1", s.device_params))
    p1, p2 = s.sources
    results = {}
    for eng in engines:
        try:
            r = beat_scan(s.axes, p1, p2, s.device_params, eng, device, s.t0, s.separation,
                          s.max_passes, threads, s.quantity)
        except (NumericalError, ArithmeticError) as exc:
            raise NumericalError(f"{eng} scan of preset {s.preset!r} failed: {exc}") from exc
        r.metadata["scenario"] = s.echo
        r.metadata["version"] = __version__
        results[eng] = r
    diagnostics = {}
    if len(results) == 2:
        diagnostics["engine_ratio"] = ratio_diagnostics(results["history_sum"].grid,
                                                        results["closed_form"].grid)
    return results, diagnostics


# -- serialisation -------------------------------------------------------------

def _fmt(x):
    return "%.17g" % x


def write_csv(r, path, metadata_path=None):
    """Header of axis names then ``probability``; one row per grid point, row-major.

    Also writes the metadata sidecar (``<stem>.json`` by default).
    """
    points = r.points()
    names = [a.name for a in r.axes]
    lines = [",".join(names + ["probability"])]
    for coords, value in zip(points, r.grid):
        lines.append(",".join([_fmt(c) for c in coords] + [_fmt(value)]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    metadata_path = metadata_path or os.path.splitext(path)[0] + ".json"
    with open(metadata_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(r.metadata, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path, metadata_path


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def read_csv(path, metadata=None):
    """Inverse of write_csv: rebuild a ScanResult from the CSV (and optional metadata)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = fh.read().split("\n")
    if rows and rows[-1] == "":
        rows.pop()
    if not rows:
        raise ParameterError(f"{path}: empty file")
    header = rows[0].split(",")
    if header[-1] != "probability":
        raise ParameterError(f"{path}: last column must be 'probability'")
    names = header[:-1]
    data = np.array([[float(x) for x in row.split(",")] for row in rows[1:]], dtype=float)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    axes = []
    meta_axes = {a["name"]: a for a in (metadata or {}).get("axes", [])}
    for k, name in enumerate(names):
        if name in meta_axes:
            a = meta_axes[name]
            axes.append(ScanAxis(name, a["start"], a["stop"], a["steps"]))
        else:
            vals = np.unique(data[:, k])
            axes.append(ScanAxis(name, float(vals[0]), float(vals[-1]), len(vals)))
    return ScanResult(tuple(axes), data[:, -1], dict(metadata or {}))


def emit_plot(r, path):
    """Write an SVG: line plot for one axis, heat map for two."""
    if r.grid.size == 0:
        raise ParameterError("cannot plot an empty grid")
    if len(r.axes) not in (1, 2):
        raise ParameterError(f"plots support 1 or 2 axes, result has {len(r.axes)}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    label = r.metadata.get("quantity", "probability") + " density"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        if len(r.axes) == 1:
            ax.plot(r.axes[0].values(), r.grid, lw=1.2)
            ax.set_xlabel(r.axes[0].name)
            ax.set_ylabel(label)
        else:
            a0, a1 = r.axes
            img = ax.imshow(r.as_array(), origin="lower", aspect="auto", cmap="viridis",
                            extent=(a1.start, a1.stop, a0.start, a0.stop))
            ax.set_xlabel(a1.name)
            ax.set_ylabel(a0.name)
            fig.colorbar(img, ax=ax, label=label)
        ax.set_title(f"{r.metadata.get('device', '')} / {r.metadata.get('engine', '')}")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return path


def _output_paths(s, out_dir, engine, multiple):
    stem = os.path.splitext(s.csv)[0]
    suffix = f".{engine}" if multiple else ""
    csv = os.path.join(out_dir, f"{stem}{suffix}.csv")
    plot = os.path.join(out_dir, f"{os.path.splitext(s.plot)[0]}{suffix}.svg") if s.plot else ""
    return csv, plot


# -- command line ----------------------------------------------------------------

def _load(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def cmd_run(args):
    s = _load(args.config)
    results, diags = run_scenario(s, threads=args.threads, engine=args.engine)
    os.makedirs(args.out_dir, exist_ok=True)
    for eng, r in results.items():
        csv, plot = _output_paths(s, args.out_dir, eng, len(results) > 1)
        write_csv(r, csv)
        print(f"wrote {csv}")
        if plot:
            if len(r.axes) > 2:
                print(f"skipping plot: {len(r.axes)} axes", file=sys.stderr)
            else:
                emit_plot(r, plot)
                print(f"wrote {plot}")
    if "engine_ratio" in diags:
        d = diags["engine_ratio"]
        print(f"engine ratio history_sum/closed_form: mean {d['mean']:.12g}, "
              f"cv {d['cv']:.3e} over {d['points']} points")
    return EXIT_OK


def cmd_validate(args):
    s = _load(args.config)
    if s.preset == "fig1":
        check_device(preset("fig1", s.device_params))
    else:
        check_device(preset(s.preset))
    n = int(np.prod([a.steps for a in s.axes]))
    print(f"ok: preset {s.preset}, engine {args.engine or s.engine}, {len(s.axes)} axes, {n} points")
    print(json.dumps(s.echo, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_presets(args):
    for name in sorted(PRESETS):
        spec = preset(name)
        print(f"{name}: {len(spec.nodes)} nodes, {len(spec.edges)} edges, "
              f"inputs {', '.join(spec.inputs)}, detectors {', '.join(spec.detectors)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="feedbackmz",
                                     description="Two-photon coincidence scans for feedback interferometers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (("run", cmd_run, "run a scenario and write CSV/metadata/plot"),
                                 ("validate", cmd_validate, "parse and check a scenario")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--engine", choices=ENGINE_CHOICES, default=None,
                       help="override the engine named in the scenario")
        p.set_defaults(func=func)
        if name == "run":
            p.add_argument("--out-dir", default=".", help="directory for output files")
            p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    p = sub.add_parser("presets", help="list built-in devices")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error in {args.config}:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FeedbackMZError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
