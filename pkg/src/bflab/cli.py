"""Command-line interface.

Subcommands: simulate, ode, tc, singularity, experiment.  Configuration
precedence, highest first: command-line flags, environment variables
(``BFLAB_<NAME>``, e.g. ``BFLAB_THREADS=4``), a JSON config file given with
``--config``, built-in defaults.  The fully resolved configuration is echoed
into every output file.

Exit codes: 0 success, 1 computational error (a machine-readable error
record is written), 2 usage or validation error.
"""

import argparse
import json
import os
import sys

from . import experiments as ex
from . import ode, serialize, singularity
from .errors import BflabError, InvalidArgumentError
from .process import new_process, parse_rule, run_until

# key -> (parser, default); parsers also apply to env and config-file strings
_COMMON = {
    "out": (str, None),
    "format": (str, "json"),
    "threads": (int, 0),
}


def _floatlist(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _intlist(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _table(value):
    # decision table for bounded rules: JSON list (config file) or its string
    if value is None or isinstance(value, (list, tuple)):
        return value
    return json.loads(str(value))


_SCHEMAS = {
    "tc": {**_COMMON, "rule": (str, "bf"), "precision": (float, 1e-6)},
    "simulate": {**_COMMON, "rule": (str, "er"), "n": (int, 1000),
                 "t": (float, 1.0), "seed": (int, 0),
                 "checkpoints": (_floatlist, []), "i_track": (int, 2048),
                 "k_max": (int, 2), "cap_l": (int, 0),
                 "decision_table": (_table, None)},
    "ode": {**_COMMON, "rule": (str, "bf"), "t_end": (float, 1.0),
            "i_max": (int, 2048), "rel_tol": (float, 1e-10),
            "abs_tol": (float, 1e-12), "checkpoints": (_floatlist, []),
            "conservation": (_bool, True)},
    "singularity": {**_COMMON, "rule": (str, "bf"),
                    "t_values": (_floatlist, None), "curvature": (_bool, False)},
    "experiment": {**_COMMON, "kind": (str, None), "rule": (str, "bf"),
                   "n": (_intlist, [100000]), "replicas": (int, 20),
                   "epsilon": (_floatlist, [0.2]), "t": (_floatlist, []),
                   "seed": (int, 0), "cap_l": (int, 100),
                   "i_report": (int, 10), "decision_table": (_table, None)},
}

_EXPERIMENT_KINDS = ("concentration", "susceptibility", "cycles",
                     "c1-scaling", "c2-scaling", "giant-growth")


def _build_parser():
    p = argparse.ArgumentParser(
        prog="bflab",
        description="Random graph process laboratory: simulation, density "
                    "ODEs, critical points, singularity analysis, ensembles.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text, flags):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None,
                        help="JSON config file (flag values override it)")
        for flag, help_ in flags:
            sp.add_argument(flag, dest=flag.lstrip("-").replace("-", "_"),
                            default=None, help=help_)
        return sp

    common = [("--out", "output path (default stdout)"),
              ("--format", "csv | json"),
              ("--threads", "worker threads for ensembles (0 = all cores)")]

    add("tc", "critical point of a rule", common + [
        ("--rule", "er | bf | bounded:K"),
        ("--precision", "bracket width for the blow-up root")])
    add("simulate", "run one seeded trajectory and dump checkpoint stats",
        common + [
            ("--rule", "er | bf | bounded:K"), ("--n", "vertex count"),
            ("--t", "final time (average degree)"), ("--seed", "64-bit seed"),
            ("--checkpoints", "comma-separated times for extra snapshots"),
            ("--i-track", "exact size-histogram cutoff"),
            ("--k-max", "susceptibility moments reported"),
            ("--cap-l", "restricted susceptibility cap (0 = i_track)")])
    add("ode", "integrate the component-density system", common + [
        ("--rule", "er | bf"), ("--t-end", "integration target"),
        ("--i-max", "truncation order"), ("--rel-tol", "relative tolerance"),
        ("--abs-tol", "absolute tolerance"),
        ("--checkpoints", "comma-separated profile times"),
        ("--conservation", "assert subcritical mass conservation (true/false)")])
    add("singularity", "dominant singularity of the generating function",
        common + [
            ("--rule", "er | bf"),
            ("--t-values", "comma-separated times"),
            ("--curvature", "also report rho', rho'' at t_c (true/false)")])
    add("experiment", "Monte Carlo ensemble vs deterministic predictions",
        common + [
            ("--kind", " | ".join(_EXPERIMENT_KINDS)),
            ("--rule", "er | bf | bounded:K"),
            ("--n", "comma-separated vertex counts"),
            ("--replicas", "replicas per configuration"),
            ("--epsilon", "comma-separated distances from t_c"),
            ("--t", "comma-separated checkpoint times"),
            ("--seed", "ensemble base seed"),
            ("--cap-l", "restricted susceptibility cap"),
            ("--i-report", "component sizes reported (concentration)")])
    return p


def _resolve(command, args):
    schema = _SCHEMAS[command]
    resolved = {k: d for k, (_p, d) in schema.items()}
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidArgumentError(f"cannot read config file: {e}") from e
        for k, v in file_cfg.items():
            key = k.replace("-", "_")
            if key not in schema:
                raise InvalidArgumentError(
                    f"unknown config key {k!r} for command {command!r}")
            resolved[key] = schema[key][0](v)
    for k, (parse, _d) in schema.items():
        env = os.environ.get(f"BFLAB_{k.upper()}")
        if env is not None:
            resolved[k] = parse(env)
    for k, (parse, _d) in schema.items():
        v = getattr(args, k, None)
        if v is not None:
            resolved[k] = parse(v)
    missing = [k for k, v in resolved.items()
               if v is None and k not in ("out", "decision_table")]
    if missing:
        raise InvalidArgumentError(
            f"missing required option(s): {', '.join('--' + m for m in missing)}")
    if resolved["format"] not in ("csv", "json"):
        raise InvalidArgumentError(f"unknown format {resolved['format']!r}")
    resolved["command"] = command
    return resolved


def _echo_config(cfg):
    return {k: v for k, v in cfg.items() if k != "out"}


def _cmd_tc(cfg):
    crit = ode.find_tc(parse_rule(cfg["rule"]), precision=cfg["precision"])
    if cfg["format"] == "csv":
        serialize.write_csv(("rule", "t_c", "bracket_width"),
                            [[crit.rule, crit.t_c, crit.bracket_width]],
                            path=cfg["out"], kind="tc", config=_echo_config(cfg))
    else:
        serialize.write_json(serialize.payload("tc", _echo_config(cfg),
                                               crit.to_json_dict()),
                             path=cfg["out"])


def _cmd_simulate(cfg):
    rule = parse_rule(cfg["rule"], table=cfg.get("decision_table"))
    state = new_process(cfg["n"], rule, cfg["seed"], i_track=cfg["i_track"])
    cap_l = cfg["cap_l"] or None
    times = sorted(set(cfg["checkpoints"]) | {cfg["t"]})
    stats_list = [run_until(state, t, k_max=cfg["k_max"], L=cap_l)
                  for t in times]
    if cfg["format"] == "csv":
        serialize.write_csv(stats_list[0].csv_header(),
                            [s.csv_row() for s in stats_list],
                            path=cfg["out"], kind="trajectory",
                            config=_echo_config(cfg))
    else:
        head = serialize.payload("trajectory", _echo_config(cfg), {})
        records = [head] + [s.to_json_dict() for s in stats_list]
        serialize.write_ndjson(records, path=cfg["out"])


def _cmd_ode(cfg):
    rule = parse_rule(cfg["rule"])
    config = ode.OdeConfig(i_max=cfg["i_max"], rel_tol=cfg["rel_tol"],
                           abs_tol=cfg["abs_tol"],
                           checkpoints=tuple(cfg["checkpoints"]))
    profiles = ode.integrate_profile(rule, cfg["t_end"], config,
                                     assert_conservation=cfg["conservation"])
    if cfg["format"] == "csv":
        rows = [[p.t, i + 1, float(x)] for p in profiles
                for i, x in enumerate(p.x)]
        serialize.write_csv(("t", "i", "x_i"), rows, path=cfg["out"],
                            kind="profile", config=_echo_config(cfg))
    else:
        body = {"profiles": [{"t": p.t, "tail_mass": p.tail_mass,
                              "x": [float(v) for v in p.x]} for p in profiles]}
        serialize.write_json(serialize.payload("profile", _echo_config(cfg),
                                               body), path=cfg["out"])


def _cmd_singularity(cfg):
    rule = parse_rule(cfg["rule"])
    loci = singularity.rho_curve(cfg["t_values"], rule)
    if cfg["format"] == "csv":
        serialize.write_csv(singularity.SingularLocus.CSV_HEADER,
                            [l.csv_row() for l in loci], path=cfg["out"],
                            kind="singular-locus", config=_echo_config(cfg))
        return
    body = {"loci": [l.to_json_dict() for l in loci]}
    if cfg["curvature"]:
        rep = singularity.rho_curvature(rule)
        body["curvature"] = {"t_c": rep.t_center, "h": rep.h,
                             "rho_prime": rep.rho_prime,
                             "rho_second": rep.rho_second,
                             "rho_second_halved": rep.rho_second_halved}
    serialize.write_json(serialize.payload("singular-locus", _echo_config(cfg),
                                           body), path=cfg["out"])


def _cmd_experiment(cfg):
    kind = cfg["kind"]
    if kind not in _EXPERIMENT_KINDS:
        raise InvalidArgumentError(
            f"unknown experiment kind {kind!r}; expected one of "
            f"{', '.join(_EXPERIMENT_KINDS)}")
    rule = parse_rule(cfg["rule"], table=cfg.get("decision_table"))
    eps = cfg["epsilon"]
    if kind in ("concentration", "susceptibility"):
        config = ex.EnsembleConfig(
            rule=rule, n_list=tuple(cfg["n"]), replicas=cfg["replicas"],
            base_seed=cfg["seed"], checkpoints=tuple(sorted(cfg["t"])),
            L=cfg["cap_l"], i_report=cfg["i_report"], threads=cfg["threads"])
        fn = (ex.concentration_experiment if kind == "concentration"
              else ex.susceptibility_concentration)
        report = fn(config)
    elif kind == "cycles":
        report = ex.cycle_census(eps[0], cfg["n"][0], cfg["replicas"],
                                 rule=rule, base_seed=cfg["seed"],
                                 threads=cfg["threads"])
    elif kind == "c1-scaling":
        report = ex.c1_scaling(eps, cfg["n"], cfg["replicas"], rule=rule,
                               base_seed=cfg["seed"], threads=cfg["threads"])
    elif kind == "c2-scaling":
        report = ex.c2_scaling(eps[0], cfg["n"], cfg["replicas"], rule=rule,
                               base_seed=cfg["seed"], threads=cfg["threads"])
    else:
        report = ex.giant_growth(eps, cfg["n"][0], cfg["replicas"], rule=rule,
                                 base_seed=cfg["seed"], threads=cfg["threads"])
    if cfg["format"] == "csv":
        serialize.write_csv(ex.EnsembleReport.CSV_HEADER, report.csv_rows(),
                            path=cfg["out"], kind=f"experiment-{kind}",
                            config=_echo_config(cfg))
    else:
        body = report.to_json_dict()
        body.pop("kind", None)          # the payload carries experiment-<kind>
        serialize.write_json(serialize.payload(f"experiment-{kind}",
                                               _echo_config(cfg), body),
                             path=cfg["out"])


_RUNNERS = {"tc": _cmd_tc, "simulate": _cmd_simulate, "ode": _cmd_ode,
            "singularity": _cmd_singularity, "experiment": _cmd_experiment}


def _error_record(exc, exit_code):
    rec = {"format_version": serialize.FORMAT_VERSION, "kind": "error",
           "error": {"type": type(exc).__name__, "message": str(exc)},
           "exit_code": exit_code}
    extra = {k: v for k, v in vars(exc).items()
             if isinstance(v, (int, float, str)) and not k.startswith("_")}
    if extra:
        rec["error"].update(extra)
    return rec


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve(args.command, args)
    except InvalidArgumentError as e:
        serialize.write_json(_error_record(e, 2))
        return 2
    try:
        _RUNNERS[args.command](cfg)
    except InvalidArgumentError as e:
        serialize.write_json(_error_record(e, 2))
        return 2
    except BflabError as e:
        serialize.write_json(_error_record(e, 1))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
