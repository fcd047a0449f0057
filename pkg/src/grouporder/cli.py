"""Command-line entry point: ``grouporder <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 invalid data or arguments,
3 numerical failure. Results go to ``--out`` (or standard output), everything
else to standard error. Options may also come from a flat ``key=value`` file
given with ``--config``; explicit flags win over the file, the file over
built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .classifier import ClassifierConfig, classify_for_K, select_K
from .confidence import confidence_sets
from .data import comparability_graph, load_panel, pair_coverage, participant_set_histogram, write_panel
from .errors import DataError, NumericalError
from .identification import ComparabilityGraph, check_identified
from .manifest import RunManifest, dumps
from .metrics import HAD_LEVELS
from .pairwise import PValueMatrices, TestConfig, index_kind, pvalue_matrices
from .pipeline import PipelineConfig, run_pipeline
from .simulation import (DESIGNS, TwoStepConfig, custom_design, default_kind, design, generate,
                         run_montecarlo, two_step_experiment)

log = logging.getLogger("grouporder")

FIXTURES = {
    "figure3a": ("figure3_graph.json", "figure3_tau_a.json"),
    "figure3b": ("figure3_graph.json", "figure3_tau_b.json"),
    "figure4": ("figure4_graph.json", "figure4_tau.json"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass(frozen=True)
class Opt:
    flag: str
    type: Callable = str
    default: Any = None
    help: str = ""
    choices: tuple | None = None
    required: bool = False

    @property
    def dest(self):
        return self.flag.lstrip("-").replace("-", "_")


def _int_list(text):
    try:
        vals = tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


ENGINE = [
    Opt("--index", str, "cdf", "pairwise index", ("mean", "cdf", "presence")),
    Opt("--orientation", str, "value", "cdf index: 'value' (higher outcome = higher type) or 'procurement'",
        ("value", "procurement")),
    Opt("--conditioning", str, "joint", "cdf index: joint presence or each agent's own markets",
        ("joint", "marginal")),
    Opt("--grid", int, 100, "quadrature grid size"),
    Opt("--trim-lo", float, 0.05, "lower trim quantile"),
    Opt("--trim-hi", float, 0.95, "upper trim quantile"),
    Opt("--bandwidth-constant", float, 1.06, "kernel bandwidth constant"),
]

PANEL = [
    Opt("--input", str, None, "long-format panel file", required=True),
    Opt("--format", str, "csv", "panel file format", ("csv", "tsv")),
]

DGP = [
    Opt("--design", str, "S1", "group structure", tuple(DESIGNS) + ("custom",)),
    Opt("--group-sizes", _int_list, None, "custom design: comma-separated group sizes"),
    Opt("--L", int, 400, "number of markets"),
    Opt("--Dmu", float, 0.6, "gap between consecutive group means"),
    Opt("--sigma", float, 0.5, "outcome standard deviation"),
    Opt("--participation", str, "full", "who enters each market", ("full", "pairs")),
]

COMMANDS = {
    "pvalues": ("pairwise bootstrap p-values for a panel", PANEL + ENGINE + [
        Opt("--draws", int, 199, "bootstrap draws B"),
        Opt("--seed", int, 0, "random seed"),
        Opt("--threshold", int, None, "test only pairs sharing at least this many markets"),
        Opt("--histogram", str, None, "also write the participant-set histogram as CSV"),
        Opt("--out", str, None, "output JSON (default: standard output)"),
    ]),
    "classify": ("ordered groups from a p-value file", [
        Opt("--pvalues", str, None, "JSON written by 'pvalues'", required=True),
        Opt("--markets", int, None, "number of markets L (default: from the p-value file)"),
        Opt("--K", int, None, "fixed number of groups (default: penalised choice)"),
        Opt("--k-max", int, None, "largest number of groups considered"),
        Opt("--out", str, None, "output JSON (default: standard output)"),
    ]),
    "identify": ("identification diagnostics for a graph and candidate types", [
        Opt("--graph", str, None, "graph JSON: {vertices: [...], edges: [[a, b], ...]}"),
        Opt("--tau", str, None, "types JSON: {agent: type}"),
        Opt("--fixture", str, None, "bundled example instead of --graph/--tau", tuple(FIXTURES)),
        Opt("--K0", int, None, "number of types (default: longest monotone path + 1)"),
        Opt("--out", str, None, "output JSON (default: standard output)"),
    ]),
    "confidence": ("bootstrap confidence set for an estimated group", PANEL + ENGINE + [
        Opt("--group-index", _int_list, None, "1-based group index (comma-separated for several)",
            required=True),
        Opt("--alpha", float, 0.05, "one minus the coverage level"),
        Opt("--draws", int, 99, "outer bootstrap draws B2"),
        Opt("--pvalue-draws", int, 199, "bootstrap draws for each p-value"),
        Opt("--seed", int, 0, "random seed"),
        Opt("--out", str, None, "output JSON (default: standard output)"),
    ]),
    "simulate": ("draw a synthetic panel", DGP + [
        Opt("--seed", int, 0, "random seed"),
        Opt("--out", str, None, "output CSV (default: standard output)"),
    ]),
    "montecarlo": ("classification accuracy over simulated panels", DGP + [
        Opt("--reps", int, 200, "replications R"),
        Opt("--draws", int, 199, "bootstrap draws B"),
        Opt("--seed", int, 0, "random seed"),
        Opt("--out", str, None, "output CSV table (default: standard output)"),
    ]),
    "twostep": ("classification followed by moment estimation", [
        Opt("--group-sizes", _int_list, (4, 4, 4, 4), "comma-separated group sizes"),
        Opt("--L", int, 400, "number of markets"),
        Opt("--Dmu", float, 0.4, "gap between consecutive group means"),
        Opt("--sigma", float, 0.5, "outcome standard deviation"),
        Opt("--reps", int, 200, "replications"),
        Opt("--draws", int, 199, "bootstrap draws B"),
        Opt("--seed", int, 0, "random seed"),
        Opt("--out", str, None, "output JSON (default: standard output)"),
    ]),
}


def build_parser() -> _Parser:
    parser = _Parser(prog="grouporder", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"grouporder {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="flat key=value option file")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
    common.add_argument("--verbose", "-v", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, parents=[common])
        for o in opts:
            extra = f" (default: {o.default})" if o.default is not None else ""
            p.add_argument(o.flag, dest=o.dest, type=o.type, choices=o.choices, default=None,
                           help=o.help + extra)
    return parser


def read_config(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge flags, config-file values and defaults for ``command``."""
    opts = COMMANDS[command][1]
    from_file = read_config(args.config) if args.config else {}
    known = {o.dest: o for o in opts} | {"threads": Opt("--threads", int)}
    unknown = sorted(set(from_file) - set(known))
    if unknown:
        raise UsageError(f"unknown option(s) in config file: {', '.join(unknown)}")
    values = {}
    for dest, o in known.items():
        v = getattr(args, dest, None)
        if v is None and dest in from_file:
            try:
                v = o.type(from_file[dest])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config value for {dest}: {exc}") from None
            if o.choices and v not in o.choices:
                raise UsageError(f"config value for {dest} must be one of {', '.join(o.choices)}")
        if v is None:
            v = o.default
        if o.required and v is None:
            raise UsageError(f"{command}: {o.flag} is required")
        values[dest] = v
    if values["threads"] is None:
        values["threads"] = os.cpu_count() or 1
    if values["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return values


def _echo(values: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in values.items()
            if k not in ("out", "threads", "config")}


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _write_json(payload: dict, manifest: RunManifest, out: str | None) -> None:
    _write_text(dumps(dict(payload, manifest=manifest.to_dict())), out)


def _write_sidecar(manifest: RunManifest, out: str | None, extra: dict | None = None) -> None:
    body = dict(manifest.to_dict(), **(extra or {}))
    if out is None:
        sys.stderr.write(dumps(body))
    else:
        Path(f"{out}.manifest.json").write_text(dumps(body), encoding="utf-8", newline="\n")


def _kind(v: dict):
    return index_kind(v["index"], v["orientation"], v["conditioning"])


def _test_config(v: dict, draws: int) -> TestConfig:
    return TestConfig(draws=draws, bandwidth_constant=v["bandwidth_constant"], grid_size=v["grid"],
                      trim=(v["trim_lo"], v["trim_hi"]), seed=v["seed"])


def _dgp(v: dict):
    if v["design"] == "custom" or v.get("group_sizes") is not None:
        if v.get("group_sizes") is None:
            raise UsageError("--design custom needs --group-sizes")
        return custom_design(v["group_sizes"], v["L"], v["Dmu"], v["sigma"], v["participation"])
    return design(v["design"], v["L"], v["Dmu"], v["sigma"], v["participation"])


# --------------------------------------------------------------------------
# subcommands


def cmd_pvalues(v: dict) -> None:
    panel = load_panel(v["input"], v["format"])
    manifest = RunManifest("pvalues", _echo(v), v["seed"])
    manifest.add_input(v["input"])
    cfg = _test_config(v, v["draws"])
    if v["threshold"] is None:
        graph, require = None, True
    else:
        graph, require = comparability_graph(pair_coverage(panel, v["threshold"])), False
    pv = pvalue_matrices(panel, graph, _kind(v), cfg, require_complete=require, workers=v["threads"])
    payload = pv.to_dict()
    payload["complete"] = pv.complete
    _write_json(payload, manifest, v["out"])
    if v["histogram"]:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["times_set_appears", "distinct_sets"])
        w.writerows(participant_set_histogram(panel))
        Path(v["histogram"]).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
        _write_sidecar(manifest, v["histogram"])


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None


def cmd_classify(v: dict) -> None:
    raw = _load_json(v["pvalues"])
    try:
        pv = PValueMatrices.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{v['pvalues']}: not a p-value file ({exc})") from None
    L = v["markets"] if v["markets"] is not None else pv.n_markets
    manifest = RunManifest("classify", _echo(dict(v, markets=L)),
                           raw.get("manifest", {}).get("seed") if isinstance(raw.get("manifest"), dict) else None)
    manifest.add_input(v["pvalues"])
    cfg = ClassifierConfig(k_max=v["k_max"])
    sel = select_K(pv.roster, pv, cfg, L)
    payload = sel.to_dict(pv.roster)
    payload["roster"] = list(pv.roster)
    if sel.truncated:
        log.warning("splitting stopped early: objective evaluated up to K=%d", len(sel.objective))
    if v["K"] is not None:
        part = classify_for_K(pv.roster, pv, v["K"], cfg, L)
        payload["K"] = v["K"]
        payload["groups"] = part.to_lists(pv.roster)
    _write_json(payload, manifest, v["out"])


def _fixture_path(name):
    return resources.files("grouporder") / "fixtures" / name


def cmd_identify(v: dict) -> None:
    manifest = RunManifest("identify", _echo(v))
    if v["fixture"]:
        gpath, tpath = (_fixture_path(f) for f in FIXTURES[v["fixture"]])
    else:
        if not (v["graph"] and v["tau"]):
            raise UsageError("identify needs --graph and --tau, or --fixture")
        gpath, tpath = v["graph"], v["tau"]
    g, tau = _load_json(gpath), _load_json(tpath)
    manifest.add_input(gpath)
    manifest.add_input(tpath)
    try:
        graph = ComparabilityGraph.from_edges([str(a) for a in g["vertices"]],
                                              [(str(a), str(b)) for a, b in g["edges"]])
        tau = {str(a): int(t) for a, t in tau.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed graph or tau file ({exc})") from None
    missing = sorted(set(graph.vertices) - set(tau))
    if missing:
        raise DataError(f"tau has no type for: {', '.join(missing)}")
    report = check_identified(graph, tau, v["K0"])
    _write_json(report.to_dict(graph.vertices), manifest, v["out"])


def cmd_confidence(v: dict) -> None:
    panel = load_panel(v["input"], v["format"])
    manifest = RunManifest("confidence", _echo(v), v["seed"])
    manifest.add_input(v["input"])
    cfg = PipelineConfig(_kind(v), _test_config(v, v["pvalue_draws"]))
    base = run_pipeline(panel, cfg)
    res = confidence_sets(panel, v["group_index"], cfg, v["alpha"], v["draws"], v["seed"], base)
    payload = {
        "K_hat": base.selection.k_hat,
        "groups": base.selection.partition.to_lists(panel.roster),
        "sets": [res[k].to_dict(panel.roster) for k in sorted(res)],
    }
    _write_json(payload, manifest, v["out"])


def cmd_simulate(v: dict) -> None:
    dgp = _dgp(v)
    panel, truth = generate(dgp, v["seed"])
    manifest = RunManifest("simulate", _echo(v), v["seed"])
    buf = io.StringIO()
    write_panel(panel, buf)
    _write_text(buf.getvalue(), v["out"])
    _write_sidecar(manifest, v["out"], {"dgp": dgp.to_dict(), "true_groups": truth.to_lists(panel.roster)})


def cmd_montecarlo(v: dict) -> None:
    dgp = _dgp(v)
    cfg = PipelineConfig(default_kind(dgp), TestConfig(draws=v["draws"]))
    mc = run_montecarlo(dgp, v["reps"], cfg, v["seed"], workers=min(v["threads"], v["reps"]))
    row = mc.table_row()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(row))
    w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row.values()])
    _write_text(buf.getvalue(), v["out"])
    manifest = RunManifest("montecarlo", _echo(v), v["seed"])
    extra = {"failures": mc.failures, "failure_messages": [r.error for r in mc.replications if r.error],
             "k_hat": [r.k_hat for r in mc.replications],
             "discrepancy": [r.delta for r in mc.replications],
             "had_levels": list(HAD_LEVELS)}
    _write_sidecar(manifest, v["out"], extra)


def cmd_twostep(v: dict) -> None:
    dgp = custom_design(v["group_sizes"], v["L"], v["Dmu"], v["sigma"], "pairs")
    cfg = TwoStepConfig(dgp, v["reps"], TestConfig(draws=v["draws"]))
    report = two_step_experiment(cfg, v["seed"])
    manifest = RunManifest("twostep", _echo(v), v["seed"])
    _write_json(dict(report.to_dict(), dgp=dgp.to_dict()), manifest, v["out"])


HANDLERS = {
    "pvalues": cmd_pvalues,
    "classify": cmd_classify,
    "identify": cmd_identify,
    "confidence": cmd_confidence,
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "twostep": cmd_twostep,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv:
            raise UsageError(parser.format_usage().rstrip() + "\ngrouporder: error: no subcommand given")
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().rstrip() + "\ngrouporder: error: no subcommand given")
        values = resolve(args.command, args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        HANDLERS[args.command](values)
    except UsageError as exc:
        print(f"grouporder {args.command}: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"grouporder {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError) as exc:
        print(f"grouporder {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
