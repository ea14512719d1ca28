"""Command-line front end for simulations, calibration fits, time-tag
analysis and synthetic stream generation.

Design rules: configs are JSON files echoed verbatim into every output,
outputs are byte-identical for identical inputs and seeds, sweep rows
appear in deterministic sweep order regardless of worker scheduling, and
nothing is written until the whole computation has succeeded.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
failure.
"""

import argparse
import itertools
import json
import pathlib
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .fock import TruncationError
from .channels import ConditioningError
from .source import (
    SourceParams,
    cross_correlation_model,
    cross_correlation_sim,
    g2_zero,
    simulate_source,
)
from .hom import analytic_hom_from_g2, simulate_hom
from .device import DeviceParams, extract_g0, fit_cavity_shift, nth_from_asymmetry, \
    nth_from_counts, phonon_decay_fit
from .timetags import (
    GateConfig,
    TimeTagFormatError,
    MAGIC,
    cross_g2,
    dark_count_fraction,
    gate_events,
    heralded_g2,
    hom_coincidences,
    merge_tables,
    parse_timetags,
    write_timetags,
)
from . import synth


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


SOURCE_KEYS = {
    "p_s": "p_s",
    "p_as": "p_as",
    "n_write": "n_write",
    "n_read": "n_read",
    "t_delay_s": "t_delay",
    "tau_m_s": "tau_m",
    "eta": "eta",
    "trunc": "trunc",
    "tail_tol": "tail_tol",
}


def _load_config(path):
    if path is None:
        raise ConfigError("a --config file is required for this command")
    p = pathlib.Path(path)
    if not p.exists():
        raise ConfigError("config file not found: %s" % path)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("invalid JSON in %s: %s" % (path, e))


def _source_params(cfg, overrides=()):
    src = cfg.get("source")
    if not isinstance(src, dict):
        raise ConfigError("config needs a 'source' object")
    kw = {}
    for key, val in src.items():
        if key not in SOURCE_KEYS:
            raise ConfigError("unknown source field %r" % key)
        kw[SOURCE_KEYS[key]] = val
    for key, val in overrides:
        if key not in SOURCE_KEYS:
            raise ConfigError("unknown sweep parameter %r" % key)
        kw[SOURCE_KEYS[key]] = val
    if "trunc" in kw:
        kw["trunc"] = int(kw["trunc"])
    try:
        return SourceParams(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError("invalid source parameters: %s" % e)


def parse_sweep_specs(specs):
    """--sweep name=start:stop:count (inclusive linspace) or
    name=v1,v2,...; multiple flags form a cartesian product in order."""
    axes = []
    for s in specs or ():
        name, sep, rest = s.partition("=")
        name = name.strip()
        if not sep or not name or not rest:
            raise ConfigError("bad sweep spec %r (want name=start:stop:count "
                              "or name=v1,v2,...)" % s)
        if ":" in rest:
            parts = rest.split(":")
            if len(parts) != 3:
                raise ConfigError("bad sweep range %r" % s)
            try:
                start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigError("non-numeric sweep range %r" % s)
            if count < 1:
                raise ConfigError("sweep count must be >= 1 in %r" % s)
            vals = [float(v) for v in np.linspace(start, stop, count)]
        else:
            try:
                vals = [float(v) for v in rest.split(",") if v.strip() != ""]
            except ValueError:
                raise ConfigError("non-numeric sweep value in %r" % s)
            if not vals:
                raise ConfigError("empty sweep list %r" % s)
        axes.append((name, vals))
    return axes


def _sweep_points(axes):
    if not axes:
        return [()]
    names = [a[0] for a in axes]
    return [
        tuple(zip(names, combo))
        for combo in itertools.product(*(a[1] for a in axes))
    ]


def _echo(args, cfg, axes):
    return {
        "version": __version__,
        "command": args.command,
        "subcommand": getattr(args, "subcommand", None),
        "seed": getattr(args, "seed", None),
        "config": cfg,
        "sweep": [[n, v] for n, v in axes],
    }


def _format_rows(echo, columns, rows, fmt):
    """Sweep table as CSV with a '#'-commented JSON echo header, or as a
    JSON document."""
    if fmt == "json":
        doc = {"echo": echo, "columns": columns,
               "rows": [dict(zip(columns, r)) for r in rows]}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    lines = ["# " + json.dumps(echo, sort_keys=True, separators=(",", ":"))]
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(repr(float(v)) for v in r))
    return "\n".join(lines) + "\n"


def _format_report(echo, result, fmt):
    if fmt not in (None, "json"):
        raise ConfigError("this command reports JSON only")
    doc = {"echo": echo, "result": result}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _map_points(fn, points, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, points))
    return [fn(p) for p in points]


def cmd_simulate(args):
    cfg = _load_config(args.config)
    axes = parse_sweep_specs(args.sweep)
    points = _sweep_points(axes)
    sweep_names = [a[0] for a in axes]

    if args.subcommand == "correlations":
        def run(point):
            params = _source_params(cfg, point)
            g2_sim = cross_correlation_sim(params)
            n_th = params.n_write + params.n_read
            g2_model = cross_correlation_model(
                params.p_s, n_th, params.t_delay, params.tau_m
            )
            rel = abs(g2_sim - g2_model) / g2_model
            base = [v for _, v in point]
            return base + [params.p_s, n_th, g2_sim, g2_model, rel]

        columns = sweep_names + ["p_s", "n_th", "g2_sim", "g2_model", "rel_diff"]
    elif args.subcommand == "hbt":
        def run(point):
            params = _source_params(cfg, point)
            rho, p_h = simulate_source(params, heralded=True)
            return [v for _, v in point] + [g2_zero(rho), p_h]

        columns = sweep_names + ["g2_0", "herald_prob"]
    else:  # hom
        pol = cfg.get("polarization", "co")
        if pol not in ("co", "cross"):
            raise ConfigError("polarization must be 'co' or 'cross'")
        hom_trunc = int(cfg.get("hom_trunc", 4))

        def run(point):
            params = _source_params(cfg, point)
            rho, _ = simulate_source(params, heralded=True)
            res = simulate_hom(rho, rho, polarization=pol, trunc=hom_trunc)
            g2 = g2_zero(rho)
            return [v for _, v in point] + [
                res.g2_hom, res.p_d1, res.p_d2, res.p_c, g2,
                analytic_hom_from_g2(g2),
            ]

        columns = sweep_names + [
            "g2_hom", "p_d1", "p_d2", "p_c", "g2_0", "g2_hom_from_g2_0",
        ]

    rows = _map_points(run, points, args.threads)
    fmt = args.format or "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError("simulate format must be csv or json")
    return _format_rows(_echo(args, cfg, axes), columns, rows, fmt)


def _read_csv_table(path, required):
    p = pathlib.Path(path)
    if not p.exists():
        raise DataError("input file not found: %s" % path)
    lines = [ln for ln in p.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DataError("%s: empty input table" % path)
    header = [h.strip() for h in lines[0].split(",")]
    for col in required:
        if col not in header:
            raise DataError("%s: missing required column %r" % (path, col))
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = [x.strip() for x in ln.split(",")]
        if len(parts) != len(header):
            raise DataError("%s: line %d has %d fields, expected %d"
                            % (path, i, len(parts), len(header)))
        try:
            rows.append({h: float(v) for h, v in zip(header, parts)})
        except ValueError:
            raise DataError("%s: line %d has a non-numeric field" % (path, i))
    return rows


def cmd_calibrate(args):
    cfg = _load_config(args.config) if args.config else {}
    sub = args.subcommand
    if sub == "lifetime":
        rows = _read_csv_table(args.data, ("t_delay_s", "counts"))
        tau, err = phonon_decay_fit(
            [(r["t_delay_s"], r["counts"]) for r in rows]
        )
        result = {"tau_s": tau, "stderr_s": err, "n_points": len(rows)}
    elif sub == "g0":
        rows = _read_csv_table(args.data, ("c_s_per_pulse", "n_pulse_photons"))
        dev = _device_from(cfg)
        eta_total = _require(cfg, "eta_total", float)
        vals = [
            extract_g0(r["c_s_per_pulse"], eta_total, dev, r["n_pulse_photons"])
            for r in rows
        ]
        hz = [v / (2.0 * np.pi) for v in vals]
        result = {
            "g0_over_2pi_hz": float(np.mean(hz)),
            "per_point_over_2pi_hz": hz,
        }
    elif sub == "nth":
        rows = _read_csv_table(args.data, ("c_as_per_pulse", "p_as"))
        eta_total = _require(cfg, "eta_total", float)
        vals = [
            nth_from_counts(r["c_as_per_pulse"], eta_total, r["p_as"])
            for r in rows
        ]
        result = {"n_th": float(np.mean(vals)), "per_point": vals}
    elif sub == "asymmetry":
        rows = _read_csv_table(args.data, ("c_s", "c_as"))
        vals = [nth_from_asymmetry(r["c_s"], r["c_as"]) for r in rows]
        result = {"n_th": float(np.mean(vals)), "per_point": vals}
    else:  # cavity-shift
        rows = _read_csv_table(args.data, ("n_c", "shift"))
        a, power, a_err, p_err = fit_cavity_shift(
            [r["n_c"] for r in rows], [r["shift"] for r in rows]
        )
        result = {"a": a, "power": power, "a_err": a_err, "power_err": p_err}
    return _format_report(_echo(args, cfg, []), result, args.format)


def _require(cfg, key, conv=float):
    if key not in cfg:
        raise ConfigError("config missing required field %r" % key)
    try:
        return conv(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError("config field %r must be numeric" % key)


def _device_from(cfg):
    dev = cfg.get("device")
    if not isinstance(dev, dict):
        raise ConfigError("config needs a 'device' object")
    try:
        return DeviceParams.from_config(dev)
    except (KeyError, ValueError) as e:
        raise ConfigError(str(e))


def _gate_from(cfg):
    gate = cfg.get("gate")
    if not isinstance(gate, dict):
        raise ConfigError("config needs a 'gate' object")
    try:
        return GateConfig.from_dict(gate)
    except (KeyError, ValueError) as e:
        raise ConfigError("invalid gate config: %s" % e)


def _estimate_dict(est):
    return {
        "value": est.value,
        "error": est.error,
        "num_counts": est.num_counts,
        "den_counts": est.den_counts,
    }


def cmd_analyze(args):
    cfg = _load_config(args.config)
    gate = _gate_from(cfg)
    estimators = cfg.get("estimators", ["heralded_g2", "cross_g2"])
    known = {"heralded_g2", "cross_g2", "hom_coincidences", "dark_count_fraction"}
    for name in estimators:
        if name not in known:
            raise ConfigError("unknown estimator %r" % name)
    tables = []
    for path in args.files:
        p = pathlib.Path(path)
        if not p.exists():
            raise DataError("time-tag file not found: %s" % path)
        raw = p.read_bytes()
        fmt = "binary" if raw[:4] == MAGIC else "csv"
        try:
            events = parse_timetags(raw, fmt)
        except TimeTagFormatError as e:
            raise DataError("%s: %s" % (path, e))
        tables.append(gate_events(events, gate))
    table = merge_tables(tables)
    result = {"n_periods": table.n_periods}
    if "heralded_g2" in estimators:
        dn_range = int(cfg.get("dn_range", gate.n_max))
        g2 = heralded_g2(table, dn_range)
        result["heralded_g2"] = {
            str(dn): _estimate_dict(g2[dn]) for dn in sorted(g2)
        }
    if "cross_g2" in estimators:
        result["cross_g2"] = _estimate_dict(cross_g2(table))
    if "hom_coincidences" in estimators:
        mode = cfg.get("mode", "fourfold")
        hh = hom_coincidences(table, mode)
        result["hom_coincidences"] = {
            str(dn): _estimate_dict(hh[dn]) for dn in sorted(hh)
        }
    if "dark_count_fraction" in estimators:
        result["dark_count_fraction"] = dark_count_fraction(table)
    return _format_report(_echo(args, cfg, []), result, args.format)


def cmd_gen(args):
    cfg = _load_config(args.config)
    gate = _gate_from(cfg)
    kind = cfg.get("generator")
    n_periods = int(cfg.get("n_periods", 0))
    if n_periods <= 0:
        raise ConfigError("config needs n_periods > 0")
    par = cfg.get("params", {})
    if not isinstance(par, dict):
        raise ConfigError("'params' must be an object")
    seed = args.seed
    try:
        if kind == "ideal":
            events = synth.gen_ideal(
                gate, n_periods, par.get("p_herald", 0.1),
                par.get("p_read", 0.5), seed,
            )
        elif kind == "thermal":
            events = synth.gen_thermal(
                gate, n_periods, par.get("p_herald", 0.1),
                par.get("n_bar", 0.5), par.get("eta", 0.5), seed,
            )
        elif kind == "pairs":
            events = synth.gen_pairs(
                gate, n_periods, par.get("p_pair", 0.01),
                par.get("eta_w", 0.5), par.get("eta_r", 0.5),
                par.get("dark_rate_hz", 0.0), seed,
            )
        elif kind == "poisson":
            probs = {}
            for key, p in par.get("p_click", {}).items():
                label, _, ch = key.partition("/")
                probs[(label, int(ch))] = float(p)
            events = synth.gen_poisson(gate, n_periods, probs, seed)
        elif kind in ("hom", "hom-distinguishable"):
            events = synth.gen_hom(
                gate, n_periods, par.get("p_herald", 0.3),
                par.get("eta", 0.6), par.get("lam", 0.5),
                kind == "hom-distinguishable", seed,
            )
        else:
            raise ConfigError(
                "unknown generator %r (want ideal, thermal, pairs, poisson, "
                "hom, hom-distinguishable)" % kind
            )
    except (TypeError, KeyError) as e:
        raise ConfigError("bad generator params: %s" % e)
    fmt = args.format or "csv"
    if fmt not in ("csv", "binary"):
        raise ConfigError("gen format must be csv or binary")
    return write_timetags(events, fmt)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="omphoton",
        description="Simulation and analysis toolkit for a heralded "
                    "optomechanical single-photon source.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--format", choices=("csv", "json", "binary"),
                       help="output format")
        p.add_argument("--threads", type=int, default=1)
        if seed:
            p.add_argument("--seed", type=int, default=1)

    p_sim = sub.add_parser("simulate", help="density-matrix simulations")
    p_sim.add_argument("subcommand", choices=("correlations", "hbt", "hom"))
    p_sim.add_argument("--sweep", action="append", metavar="NAME=SPEC",
                       help="name=start:stop:count or name=v1,v2,...; "
                            "repeat the flag for a cartesian product")
    common(p_sim)

    p_cal = sub.add_parser("calibrate", help="calibration fits")
    p_cal.add_argument(
        "subcommand", choices=("g0", "nth", "asymmetry", "lifetime", "cavity-shift")
    )
    p_cal.add_argument("--data", required=True, help="input CSV file")
    common(p_cal)

    p_an = sub.add_parser("analyze", help="time-tag coincidence analysis")
    p_an.add_argument("files", nargs="+", help="time-tag stream files")
    common(p_an)

    p_gen = sub.add_parser("gen", help="synthetic time-tag streams")
    common(p_gen)

    return ap


def _dispatch(args):
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "calibrate":
        return cmd_calibrate(args)
    if args.command == "analyze":
        return cmd_analyze(args)
    if args.command == "gen":
        return cmd_gen(args)
    raise ConfigError("unknown command %r" % args.command)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        payload = _dispatch(args)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2
    except DataError as e:
        print("data error: %s" % e, file=sys.stderr)
        return 3
    except (TruncationError, ConditioningError, ValueError, ZeroDivisionError,
            RuntimeError) as e:
        print("numerical failure: %s" % e, file=sys.stderr)
        return 4
    # nothing is written until the computation has fully succeeded
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    if args.out:
        pathlib.Path(args.out).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
