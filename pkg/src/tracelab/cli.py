"""``tracelab`` command-line front end.

Usage::

    tracelab <sample|mean-trace|reconstruct|separation|certify|arc> --config FILE
             [--seed S] [--out DIR] [--threads K]

Each run writes its CSV outputs into ``--out`` and then ``manifest.json``
last; a directory without a manifest holds an incomplete run.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bits import as_bits, bits_to_str
from .channel import ChannelSpec, TraceBatch, channel_from_dict, sample_traces, validate_channel_dict
from .errors import ConfigError, ConvergenceError, DomainError, TracelabError
from .genfun import ArcSpec, arc_quadratic_bound_check, arc_max
from .mean_trace import (
    choose_truncation,
    empirical_mean_trace,
    estimate_mean_trace,
    exact_mean_trace,
    write_mean_trace_csv,
)
from .reconstruction import (
    CandidateSet,
    certify_lower_bound,
    pairwise_separation,
    reconstruct,
    separation_scaling,
    trace_complexity_experiment,
    write_certification_csv,
    write_separation_csv,
    write_success_csv,
    write_trials_csv,
)
from .streams import CHUNK_TRACES, STAGE_PAIRS, STAGE_SAMPLE_CMD, resolve_threads, substream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
MANIFEST = "manifest.json"

_BITS = {
    "oneOf": [
        {"type": "string", "pattern": "^[+-]+$"},
        {"type": "array", "minItems": 1, "items": {"enum": [-1, 1]}},
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "channel": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "x": _BITS,
        "t": {"type": "integer", "minimum": 0},
        "N": {"type": "integer", "minimum": 1},
        "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "n": {"type": "integer", "minimum": 1},
        "n_values": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "mode": {"enum": ["all_pairs", "sampled"]},
        "pairs": {"type": "integer", "minimum": 1},
        "pair_list": {"type": "array", "items": {"type": "array", "prefixItems": [_BITS, _BITS], "minItems": 2, "maxItems": 2}},
        "t_grid": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "trials": {"type": "integer", "minimum": 1},
        "traces_file": {"type": "string"},
        "L": {"type": "number", "exclusiveMinimum": 0},
        "phis": {"type": "array", "items": {"type": "number"}},
        "coeffs": {
            "oneOf": [
                {"type": "string", "pattern": "^[-0+]+$"},
                {"type": "array", "minItems": 1, "items": {"enum": [-1, 0, 1]}},
            ]
        },
        "tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-8},
    },
}

_REQUIRED = {
    "sample": [["channel", "x", "t"]],
    "mean-trace": [["channel", "x"]],
    "reconstruct": [["channel", "x", "t"], ["channel", "n", "traces_file"], ["channel", "n", "t_grid", "trials"]],
    "separation": [["channel", "n"], ["channel", "n_values"]],
    "certify": [["channel", "n", "pairs"], ["channel", "pair_list"]],
    "arc": [["coeffs"], ["channel", "phis"]],
}


def load_config(path, command: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    validate_config(doc, command)
    return doc


def validate_config(doc, command: str) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(errors[0].message, tuple(errors[0].absolute_path))
    if not any(all(k in doc for k in req) for req in _REQUIRED[command]):
        options = " or ".join("{" + ", ".join(r) + "}" for r in _REQUIRED[command])
        raise ConfigError(f"{command} needs {options}")
    if "channel" in doc:
        validate_channel_dict(doc["channel"], ("channel",))


def config_digest(config: dict) -> str:
    canon = {k: v for k, v in config.items() if k != "out"}
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, config: dict, seed: int, started: str, outputs: list) -> None:
    doc = {
        "tool": "tracelab",
        "tool_version": __version__,
        "command": command,
        "config_digest": config_digest(config),
        "root_seed": seed,
        "config": config,
        "started": started,
        "finished": _now(),
        "outputs": [{"file": name, "sha256": _sha256(out / name)} for name in outputs],
    }
    fd, tmp = tempfile.mkstemp(dir=out, prefix=".manifest-")
    with os.fdopen(fd, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out / MANIFEST)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _f(v) -> str:
    return repr(float(v))


def _truncation(cfg, spec: ChannelSpec, n: int) -> int:
    if "N" in cfg:
        return int(cfg["N"])
    return choose_truncation(spec, n, cfg.get("eps", 1e-12))


# ---------------------------------------------------------------------------
# commands; each returns the list of files it wrote


def cmd_sample(cfg, spec, seed, threads, out: Path) -> list:
    x = as_bits(cfg["x"])
    t = int(cfg["t"])
    with open(out / "traces.txt", "w") as fh:
        for c, start in enumerate(range(0, t, CHUNK_TRACES)):
            size = min(CHUNK_TRACES, t - start)
            batch = sample_traces(spec, x, size, substream(seed, STAGE_SAMPLE_CMD, c))
            for tr in batch:
                fh.write(str(tr) + "\n")
    return ["traces.txt"]


def cmd_mean_trace(cfg, spec, seed, threads, out: Path) -> list:
    x = as_bits(cfg["x"])
    N = _truncation(cfg, spec, len(x))
    exact = exact_mean_trace(spec, x, N)
    emp = estimate_mean_trace(spec, x, cfg["t"], N, seed, threads=threads) if cfg.get("t") else None
    write_mean_trace_csv(out / "mean_trace.csv", exact, emp)
    return ["mean_trace.csv"]


def _read_traces(path) -> list:
    with open(path) as fh:
        return [as_bits(line.strip(), allow_empty=True) for line in fh]


def cmd_reconstruct(cfg, spec, seed, threads, out: Path) -> list:
    if "t_grid" in cfg:
        n = int(cfg["n"])
        N = _truncation(cfg, spec, n)
        res = trace_complexity_experiment(spec, n, cfg["t_grid"], cfg["trials"], seed, N, threads)
        write_success_csv(out / "success_curve.csv", res.curve)
        write_trials_csv(out / "trials.csv", res.trials)
        return ["success_curve.csv", "trials.csv"]
    if "traces_file" in cfg:
        n = int(cfg["n"])
        traces = _read_traces(cfg["traces_file"])
        truth = None
    else:
        truth = as_bits(cfg["x"])
        n = len(truth)
        traces = None
    if n > 12:
        raise DomainError("exhaustive reconstruction is limited to n <= 12")
    N = _truncation(cfg, spec, n)
    if traces is not None:
        est = empirical_mean_trace(traces, N)
    else:
        est = estimate_mean_trace(spec, truth, int(cfg["t"]), N, seed, threads=threads)
    x_hat = reconstruct(est.values, spec, CandidateSet.exhaustive(n), N)
    fit = exact_mean_trace(spec, x_hat, N).values
    with open(out / "reconstruct.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "N", "t", "x", "x_hat", "success", "l1_to_x_hat"])
        w.writerow(
            [
                n,
                N,
                est.t,
                bits_to_str(truth) if truth is not None else "",
                bits_to_str(x_hat),
                "" if truth is None else int(np.array_equal(truth, x_hat)),
                _f(math.fsum(np.abs(est.values - fit))),
            ]
        )
    return ["reconstruct.csv"]


def cmd_separation(cfg, spec, seed, threads, out: Path) -> list:
    n_values = cfg.get("n_values", [cfg.get("n")])
    mode = cfg.get("mode", "all_pairs")
    reports = []
    for n in n_values:
        N = _truncation(cfg, spec, n)
        reports.append(pairwise_separation(spec, n, N, mode, cfg.get("pairs", 1000), seed, threads))
    write_separation_csv(out / "separation.csv", reports)
    files = ["separation.csv"]
    if len(n_values) >= 2 and mode == "all_pairs":
        fit = separation_scaling(spec, n_values, lambda n: _truncation(cfg, spec, n), threads)
        with open(out / "separation_fit.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["C", "intercept", "n_min", "n_max"])
            w.writerow([_f(fit.C), _f(fit.intercept), min(n_values), max(n_values)])
        files.append("separation_fit.csv")
    return files


def cmd_certify(cfg, spec, seed, threads, out: Path) -> list:
    if "pair_list" in cfg:
        pairs = [(as_bits(a), as_bits(b)) for a, b in cfg["pair_list"]]
    else:
        n = int(cfg["n"])
        rng = substream(seed, STAGE_PAIRS, n)
        pairs = []
        while len(pairs) < cfg["pairs"]:
            a = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
            b = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
            if not np.array_equal(a, b):
                pairs.append((a, b))
    rows = []
    for a, b in pairs:
        N = _truncation(cfg, spec, len(a))
        rows.append((a, b, certify_lower_bound(spec, a, b, cfg.get("L"), N)))
    write_certification_csv(out / "certify.csv", rows)
    return ["certify.csv"]


def _coeffs(value) -> list:
    if isinstance(value, str):
        return [{"+": 1, "-": -1, "0": 0}[c] for c in value]
    return list(value)


def cmd_arc(cfg, spec, seed, threads, out: Path) -> list:
    files = []
    if "coeffs" in cfg:
        coeffs = _coeffs(cfg["coeffs"])
        L = cfg.get("L", len(coeffs) ** (1.0 / 3.0))
        am = arc_max(coeffs, ArcSpec(L))
        with open(out / "arc.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["length", "L", "phi_star", "w_re", "w_im", "max_abs", "c_hat"])
            c_hat = -math.log(am.max_abs) / L
            w.writerow([len(coeffs), _f(L), _f(am.phi_star), _f(am.w_star.real), _f(am.w_star.imag), _f(am.max_abs), _f(c_hat)])
        files.append("arc.csv")
    if "phis" in cfg:
        if spec is None:
            raise ConfigError("inversion diagnostics need a channel", ("channel",))
        rep = arc_quadratic_bound_check(spec, cfg["phis"], cfg.get("tol", 1e-12))
        with open(out / "inversion.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi", "z_re", "z_im", "abs_z", "ratio", "abs_gw", "lower_ok", "gw_ok"])
            for k in range(len(rep.phis)):
                z = rep.z[k]
                w.writerow(
                    [_f(rep.phis[k]), _f(z.real), _f(z.imag), _f(abs(z)), _f(rep.ratios[k]), _f(rep.abs_gw[k]), int(rep.lower_ok[k]), int(rep.gw_ok[k])]
                )
        files.append("inversion.csv")
    return files


COMMANDS = {
    "sample": cmd_sample,
    "mean-trace": cmd_mean_trace,
    "reconstruct": cmd_reconstruct,
    "separation": cmd_separation,
    "certify": cmd_certify,
    "arc": cmd_arc,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracelab", description="Mean-based trace reconstruction lab.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (env TRACELAB_THREADS)")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        cfg = load_config(args.config, args.command)
        cfg = copy.deepcopy(cfg)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        cfg["seed"] = seed
        out = Path(args.out or cfg.get("out", "tracelab_out"))
        threads = resolve_threads(args.threads)
        spec = channel_from_dict(cfg["channel"]) if "channel" in cfg else None
        out.mkdir(parents=True, exist_ok=True)
        (out / MANIFEST).unlink(missing_ok=True)
        files = COMMANDS[args.command](cfg, spec, seed, threads, out)
        write_manifest(out, args.command, cfg, seed, started, files)
    except ConvergenceError as exc:
        print(f"tracelab: convergence error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TracelabError, ValueError) as exc:
        print(f"tracelab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"tracelab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
