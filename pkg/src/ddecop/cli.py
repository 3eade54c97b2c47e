"""Batch command-line frontend: fit, simulate, sample, evaluate.

Every subcommand takes a mandatory --seed and is a pure function of its
inputs: reruns with the same seed and worker count produce byte-identical
outputs. Files are written to a temp path and atomically renamed, so failed
runs leave no partial artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import evaluate as ev
from . import simulate as sim
from .em import FitConfig, fit
from .frame import build_rank_frame, load_table
from .model import (
    DdeDims,
    canonicalize,
    canonicalize_exact,
    ancestral_sample,
    load_params,
    params_from_dict,
    params_to_dict,
)

CANONICAL_SAMPLE = 100_000
EXIT_USAGE = 2

_VARIANT_NAMES = {"csp-meanfield": "mean-field", "csp-exactgibbs": "exact-gibbs"}

_CONFIG_TYPES = {
    "depth": int,
    "max_iters": int,
    "burn_in": int,
    "tau0": float,
    "tau_increment": float,
    "xi": float,
    "conv_window": int,
    "conv_tol": float,
    "monte_carlo_count": int,
    "solver_tol": float,
    "seed": int,
    "variant": str,
    "workers": int,
}


class CliError(RuntimeError):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def parse_config_file(path):
    """Flat key = value lines mirroring FitConfig field names; '#' comments."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "lambda1":
                out[key] = tuple(float(v) for v in value.split(","))
            elif key in _CONFIG_TYPES:
                out[key] = _CONFIG_TYPES[key](value)
            else:
                raise CliError(f"{path}:{lineno}: unknown configuration key '{key}'")
    return out


def _atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write_json(path, doc):
    _atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def _write_table_csv(path, table):
    lines = [",".join(table.names)]
    for row in table.values:
        lines.append(",".join(_format_value(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _format_value(v):
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def _require_file(path, flag):
    if path is None:
        raise CliError(f"{flag} is required", code=EXIT_USAGE)
    if not os.path.isfile(path):
        raise CliError(f"input path not found: {path}", code=EXIT_USAGE)
    return path


def _outdir(args):
    os.makedirs(args.output_dir, exist_ok=True)
    return args.output_dir


def _build_fit_config(args):
    overrides = parse_config_file(args.config) if args.config else {}
    overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.variant is not None:
        overrides["variant"] = _VARIANT_NAMES[args.variant]
    return FitConfig(**overrides)


def cmd_fit(args):
    path = _require_file(args.input, "--input")
    config = _build_fit_config(args)
    out = _outdir(args)
    table = load_table(path, delimiter=args.delimiter, header=not args.no_header)
    feasible = DdeDims.max_feasible_depth(table.n_cols)
    if feasible < 1:
        raise CliError(f"table has too few columns ({table.n_cols}) for any latent layer")
    if config.depth > feasible:
        print(f"note: clamping depth {config.depth} -> {feasible} for {table.n_cols} columns")
        config.depth = feasible
    frame = build_rank_frame(table)
    result = fit(frame, config)
    sample = ancestral_sample(
        result.params, CANONICAL_SAMPLE, np.random.default_rng([config.seed, 90])
    )
    canonical = canonicalize(result.params, sample)
    model_path = os.path.join(out, "model.json")
    _atomic_write_json(model_path, params_to_dict(canonical, seed=config.seed, canonical=True))
    _write_trace_csv(os.path.join(out, "trace.csv"), result)
    report = [
        f"converged: {result.converged}",
        f"iterations: {result.iterations_run}",
        f"effective widths: {list(result.effective_widths)}",
        f"kernel sweeps per iteration: {frame.n_cols}",
        f"rows: {frame.n}",
    ]
    _atomic_write_text(os.path.join(out, "report.txt"), "\n".join(report) + "\n")
    print(f"model written to {model_path}")
    return 0


def _write_trace_csv(path, result):
    depth = len(result.trace["rel_change"])
    header = (
        ["iteration", "tau", "gauss_loglik"]
        + [f"rel_change_b{d}" for d in range(1, depth + 1)]
        + [f"k_star_{d}" for d in range(1, depth + 1)]
    )
    lines = [",".join(header)]
    for t in range(result.iterations_run):
        row = [str(t), repr(result.trace["tau"][t]), repr(result.trace["gauss_loglik"][t])]
        row += [repr(result.trace["rel_change"][d][t]) for d in range(depth)]
        row += [str(result.trace["k_star"][d][t]) for d in range(depth)]
        lines.append(",".join(row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_simulate(args):
    out = _outdir(args)
    if args.spec:
        spec_path = _require_file(args.spec, "--spec")
        spec = sim.load_spec(spec_path)
        if args.n:
            spec.n = args.n
    else:
        if args.preset is None or args.preset not in sim.PRESETS:
            raise CliError(
                f"unknown preset '{args.preset}'; valid presets: {', '.join(sim.PRESETS)}",
                code=EXIT_USAGE,
            )
        spec = sim.make_preset(args.preset, args.n, args.seed)
    table, _state = sim.generate_synthetic_dataset(spec, np.random.default_rng([args.seed, 11]))
    _write_table_csv(os.path.join(out, "data.csv"), table)
    _atomic_write_json(os.path.join(out, "truth.json"), spec.to_dict(seed=args.seed))
    print(f"dataset written to {os.path.join(out, 'data.csv')}")
    return 0


def cmd_sample(args):
    model_path = _require_file(args.model, "--model")
    data_path = _require_file(args.input, "--input")
    out = _outdir(args)
    params = load_params(model_path)
    table = load_table(data_path, delimiter=args.delimiter, header=not args.no_header)
    if table.n_cols != params.dims.observed_dim:
        raise CliError(
            f"model expects {params.dims.observed_dim} columns, data has {table.n_cols}"
        )
    frame = build_rank_frame(table)
    synthetic = sim.sample_from_fit(params, frame, args.m, np.random.default_rng([args.seed, 21]))
    path = os.path.join(out, "synthetic.csv")
    _write_table_csv(path, synthetic)
    print(f"synthetic data written to {path}")
    return 0


def _load_truth_params(path):
    with open(path) as fh:
        doc = json.load(fh)
    if "params" in doc:  # SyntheticSpec document
        return params_from_dict(doc["params"])
    return params_from_dict(doc)


def _ensure_canonical(params, seed):
    if sum(params.dims.widths) <= 12:
        return canonicalize_exact(params)
    sample = ancestral_sample(params, CANONICAL_SAMPLE, np.random.default_rng([seed, 91]))
    return canonicalize(params, sample)


EVAL_HEADER = ["layer", "graph_recovery", "entrywise_mse", "k_true", "k_est", "padded"]


def cmd_evaluate(args):
    out = _outdir(args)
    if args.real or args.synthetic:
        real_path = _require_file(args.real, "--real")
        syn_path = _require_file(args.synthetic, "--synthetic")
        real = load_table(real_path, delimiter=args.delimiter, header=not args.no_header)
        syn = load_table(syn_path, delimiter=args.delimiter, header=not args.no_header)
        score = ev.pmse_evaluate(real, syn, rng=np.random.default_rng([args.seed, 31]))
        _atomic_write_text(os.path.join(out, "pmse.txt"), f"pmse: {score!r}\n")
        print(f"pmse: {score}")
        return 0
    truth_path = _require_file(args.truth, "--truth")
    est_path = _require_file(args.estimate, "--estimate")
    truth = _ensure_canonical(_load_truth_params(truth_path), args.seed)
    est = _ensure_canonical(load_params(est_path), args.seed)
    alignment = ev.align_permutations(truth.B, est.B)
    recovery = ev.graph_recovery(alignment.true_aligned, alignment.est_aligned)
    mse = ev.entrywise_mse(alignment.true_aligned, alignment.est_aligned)
    k_true = [int(np.sum(np.any(b[:, 1:] != 0, axis=0))) for b in truth.B]
    k_est = [int(np.sum(np.any(b[:, 1:] != 0, axis=0))) for b in est.B]
    rows = [EVAL_HEADER]
    for d in range(len(recovery)):
        rows.append(
            [
                str(d + 1),
                repr(recovery[d]),
                repr(mse[d]),
                str(k_true[d]),
                str(k_est[d]),
                str(alignment.padded).lower(),
            ]
        )
    _atomic_write_text(
        os.path.join(out, "evaluation.csv"), "\n".join(",".join(r) for r in rows) + "\n"
    )
    text = [
        f"layer {d + 1}: recovery={recovery[d]:.4f} mse={mse[d]:.6f} "
        f"k_true={k_true[d]} k_est={k_est[d]}"
        for d in range(len(recovery))
    ]
    _atomic_write_text(os.path.join(out, "evaluation.txt"), "\n".join(text) + "\n")
    print("\n".join(text))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddecop",
        description="Fit, simulate, sample, and evaluate deep binary-latent copulas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, required=True, help="root RNG seed")
        p.add_argument("--output-dir", default=".", help="directory for output files")
        p.add_argument("--workers", type=int, default=None, help="parallel workers")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--no-header", action="store_true")

    p_fit = sub.add_parser("fit", help="fit a model to a CSV table")
    common(p_fit)
    p_fit.add_argument("--input", help="input CSV path")
    p_fit.add_argument("--config", help="flat key=value configuration file")
    p_fit.add_argument("--variant", choices=sorted(_VARIANT_NAMES))
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="generate a benchmark dataset")
    common(p_sim)
    p_sim.add_argument("--preset", help="built-in generator name")
    p_sim.add_argument("--spec", help="simulation spec JSON (overrides --preset)")
    p_sim.add_argument("--n", type=int, default=1000)
    p_sim.set_defaults(func=cmd_simulate)

    p_sam = sub.add_parser("sample", help="sample synthetic rows from a fitted model")
    common(p_sam)
    p_sam.add_argument("--model", help="model JSON path")
    p_sam.add_argument("--input", help="original data CSV path")
    p_sam.add_argument("--m", type=int, default=1000, help="rows to synthesize")
    p_sam.set_defaults(func=cmd_sample)

    p_eval = sub.add_parser("evaluate", help="score an estimate or a synthetic table")
    common(p_eval)
    p_eval.add_argument("--truth", help="truth JSON (model or simulation spec)")
    p_eval.add_argument("--estimate", help="estimated model JSON")
    p_eval.add_argument("--real", help="real data CSV (pMSE mode)")
    p_eval.add_argument("--synthetic", help="synthetic data CSV (pMSE mode)")
    p_eval.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
