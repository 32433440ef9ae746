"""Command-line entry point.

Subcommands: eval, ablate, sweep-lambda, sweep-patches, variance, synth
(generate a synthetic GGFS dataset), validate (GGFS lint). Exit codes:
0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import core, harness
from .episodes import EpisodeSpec, subseed_rng
from .errors import ConfigError, DataError
from .estimator import CovarianceDiag, FusionConfig, LambdaDiag
from .oracle import GaussianImageModel, generate_dataset, write_truth_sidecar
from .store import read_dataset, write_dataset

EXIT_CONFIG = 2
EXIT_DATA = 3


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _parse_lambda(text: str) -> LambdaDiag:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
        return LambdaDiag(values[0] if len(values) == 1 else values)
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _add_eval_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dataset", required=True, help="GGFS dataset path")
    sub.add_argument("--n-way", type=int, default=5)
    sub.add_argument("--k-shot", type=int, default=1)
    sub.add_argument("--q-query", type=int, default=15)
    sub.add_argument("--groups", type=int, default=5)
    sub.add_argument("--episodes", type=int, default=2000, help="episodes per group")
    sub.add_argument("--lambda", dest="lam", type=_parse_lambda, default=LambdaDiag(0.5),
                     metavar="FLOAT|CSV", help="blend weight: scalar or D comma-separated entries")
    sub.add_argument("--patches", type=int, default=5, help="patches subsampled per image")
    sub.add_argument("--metric", choices=("sqeuclid", "cosine"), default="sqeuclid")
    sub.add_argument("--normalize", action="store_true", help="L2-normalize features before distances")
    sub.add_argument("--apply-support", type=_parse_bool, default=True, metavar="BOOL")
    sub.add_argument("--apply-query", type=_parse_bool, default=True, metavar="BOOL")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default=None, help="output path (default: stdout)")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--backend", choices=core.available_backends(), default=None)


def _spec_from(args) -> EpisodeSpec:
    return EpisodeSpec(args.n_way, args.k_shot, args.q_query, args.groups, args.episodes)


def _config_from(args) -> FusionConfig:
    return FusionConfig(
        lam=args.lam,
        patches_m=args.patches,
        apply_support=args.apply_support,
        apply_query=args.apply_query,
        metric=args.metric,
        normalize=args.normalize,
    )


def _emit(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _rows_csv(rows: list[dict], columns: list[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _rows_json(rows: list[dict], meta: dict) -> str:
    payload = {"meta": meta, "rows": rows}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def _cmd_eval(args) -> int:
    dataset = read_dataset(args.dataset)
    report = harness.run_eval(dataset, _spec_from(args), _config_from(args), args.seed,
                              backend=args.backend)
    _emit(report.canonical_json(), args.out)
    return 0


def _cmd_ablate(args) -> int:
    dataset = read_dataset(args.dataset)
    rows = harness.ablate(dataset, _spec_from(args), _config_from(args), args.seed,
                          backend=args.backend)
    slim = [
        {k: row[k] for k in ("apply_support", "apply_query", "accuracy", "ci95")}
        for row in rows
    ]
    if args.format == "csv":
        _emit(_rows_csv(slim, ["apply_support", "apply_query", "accuracy", "ci95"]), args.out)
    else:
        meta = {"seed": args.seed, "episode_stream_hash": rows[0]["report"].episode_stream_hash}
        _emit(_rows_json(slim, meta), args.out)
    return 0


def _cmd_sweep_lambda(args) -> int:
    dataset = read_dataset(args.dataset)
    rows = harness.sweep_lambda(dataset, _spec_from(args), args.lambda_grid, args.m_values,
                                args.seed, config=_config_from(args), backend=args.backend)
    if args.format == "csv":
        _emit(_rows_csv(rows, ["lambda", "m", "accuracy", "ci95"]), args.out)
    else:
        _emit(_rows_json(rows, {"seed": args.seed}), args.out)
    return 0


def _cmd_sweep_patches(args) -> int:
    dataset = read_dataset(args.dataset)
    rows = harness.sweep_patches(dataset, _spec_from(args), args.m_values, args.lam,
                                 args.seed, config=_config_from(args), backend=args.backend)
    if args.format == "csv":
        _emit(_rows_csv(rows, ["m", "lambda", "accuracy", "ci95"]), args.out)
    else:
        _emit(_rows_json(rows, {"seed": args.seed}), args.out)
    return 0


def _cmd_variance(args) -> int:
    dataset = read_dataset(args.dataset)
    result = harness.variance_report(dataset, _config_from(args), args.seed,
                                     spec=_spec_from(args), grid=args.lambda_grid,
                                     backend=args.backend)
    _emit(json.dumps(result, sort_keys=True, separators=(",", ":")) + "\n", args.out)
    return 0


def _cmd_synth(args) -> int:
    rng = subseed_rng(args.seed, 99)
    means = rng.standard_normal((args.classes, args.dim)) * args.class_sep
    model = GaussianImageModel(
        dim=args.dim,
        class_means=means,
        class_spread=CovarianceDiag.isotropic(args.dim, args.class_spread**2),
        patch_cov=CovarianceDiag.isotropic(args.dim, args.patch_std**2),
        seed=args.seed,
        totality_cov=(
            None if args.totality_std is None
            else CovarianceDiag.isotropic(args.dim, args.totality_std**2)
        ),
    )
    dataset, truths = generate_dataset(model, args.images_per_class, args.patches)
    n_bytes = write_dataset(dataset, args.out)
    truth_path = args.truth_out or (args.out + ".truth.jsonl")
    write_truth_sidecar(truth_path, dataset, truths)
    sys.stdout.write(
        json.dumps(
            {
                "dataset": args.out,
                "truth_sidecar": truth_path,
                "bytes": n_bytes,
                "records": len(dataset.records),
                "classes": args.classes,
                "dim": args.dim,
            },
            sort_keys=True,
        )
        + "\n"
    )
    return 0


def _cmd_validate(args) -> int:
    dataset = read_dataset(args.dataset)
    patch_counts = [r.patch_count for r in dataset.records]
    summary = {
        "valid": True,
        "dim": dataset.dim,
        "classes": len(dataset.class_names),
        "records": len(dataset.records),
        "provenance": dataset.provenance,
        "min_patches": min(patch_counts) if patch_counts else 0,
        "max_patches": max(patch_counts) if patch_counts else 0,
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gestalteval",
                                     description="Episodic evaluation with totality/closure feature fusion")
    subs = parser.add_subparsers(dest="command", required=True)

    p_eval = subs.add_parser("eval", help="run one evaluation and report accuracy")
    _add_eval_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_ablate = subs.add_parser("ablate", help="2x2 support/query rectification table")
    _add_eval_flags(p_ablate)
    p_ablate.set_defaults(func=_cmd_ablate)

    p_sl = subs.add_parser("sweep-lambda", help="accuracy per (lambda, m) grid point")
    _add_eval_flags(p_sl)
    p_sl.add_argument("--lambda-grid", type=_parse_float_list,
                      default=[round(0.1 * i, 1) for i in range(11)], metavar="CSV")
    p_sl.add_argument("--m-values", type=_parse_int_list, default=[5], metavar="CSV")
    p_sl.set_defaults(func=_cmd_sweep_lambda)

    p_sp = subs.add_parser("sweep-patches", help="accuracy per patch count (0 = totality only)")
    _add_eval_flags(p_sp)
    p_sp.add_argument("--m-values", type=_parse_int_list, default=[0, 1, 2, 5, 10], metavar="CSV")
    p_sp.set_defaults(func=_cmd_sweep_patches)

    p_var = subs.add_parser("variance", help="intra-class variance before/after fusion")
    _add_eval_flags(p_var)
    p_var.add_argument("--lambda-grid", type=_parse_float_list,
                       default=[round(0.1 * i, 1) for i in range(11)], metavar="CSV")
    p_var.set_defaults(func=_cmd_variance)

    p_synth = subs.add_parser("synth", help="generate a synthetic GGFS dataset with truth sidecar")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--truth-out", default=None)
    p_synth.add_argument("--classes", type=int, default=8)
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--images-per-class", type=int, default=40)
    p_synth.add_argument("--patches", type=int, default=20)
    p_synth.add_argument("--class-sep", type=float, default=1.0,
                         help="std of class mean placement per dimension")
    p_synth.add_argument("--class-spread", type=float, default=0.25,
                         help="std of image latent means around their class mean")
    p_synth.add_argument("--patch-std", type=float, default=1.0,
                         help="std of patch noise around the latent mean")
    p_synth.add_argument("--totality-std", type=float, default=None,
                         help="std of totality noise (default: same as --patch-std)")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(func=_cmd_synth)

    p_val = subs.add_parser("validate", help="lint a GGFS file and print a summary")
    p_val.add_argument("--dataset", required=True)
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
