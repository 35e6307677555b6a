"""Batch command-line front door.

Subcommands: synth, features, embed, import-embeddings, run, sweep,
evaluate. Run-like commands accept a flat key=value config file via
--config; any key can be overridden by the CLI flag of the same name.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

import argparse
import os
import sys
import traceback

from .dataset import synth_corpus
from .embeddings import read_embeddings, write_embeddings
from .errors import DataError
from .gbdt import TrainConfig
from .metrics import SPEC_FLOOR
from .pipeline import (
    RunConfig,
    evaluate_saved_model,
    extract_feature_dumps,
    export_baseline_embeddings,
    run_pipeline,
    run_sweep,
)
from .validation import MODALITIES

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


def _parse_int(value, key):
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"{key} must be an integer, got {value!r}") from None


def _parse_float(value, key):
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"{key} must be a number, got {value!r}") from None


def _parse_optional_int(value, key):
    if value in (None, "", "none", "None"):
        return None
    return _parse_int(value, key)


# key -> (converter, default); shared by the config file and CLI flags
RUN_KEYS = {
    "manifest": (str, None),
    "out_dir": (str, None),
    "track": (str, "all"),
    "frontend": (str, "logmel"),
    "embedder": (str, "baseline"),
    "embeddings": (str, ""),
    "rho": (_parse_float, 0.0),
    "oversample_m": (_parse_optional_int, None),
    "valid_fraction": (_parse_float, 0.2),
    "min_spec": (_parse_float, SPEC_FLOOR),
    "seed": (_parse_int, 0),
    "learning_rate": (_parse_float, 0.02),
    "num_iterations": (_parse_int, 10000),
    "early_stopping_rounds": (_parse_int, 1000),
    "row_subsample": (_parse_float, 0.68),
    "feature_subsample": (_parse_float, 0.28),
    "subsample_freq": (_parse_int, 1),
    "num_leaves": (_parse_int, 31),
    "min_leaf_samples": (_parse_int, 20),
}


def read_config_file(path) -> dict:
    """Flat key=value lines; '#' starts a comment, blank lines ignored."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{line_no}: expected key=value")
                key, value = line.split("=", 1)
                key = key.strip()
                if key not in RUN_KEYS:
                    raise UsageError(f"{path}:{line_no}: unknown key {key!r}")
                values[key] = value.strip()
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    return values


def parse_embeddings_value(value: str) -> dict:
    """'path.csv' or 'breathing=a.csv;cough=b.csv;speech=c.csv'."""
    if not value:
        return {}
    if "=" not in value:
        return {"all": value}
    table = {}
    for pair in value.split(";"):
        pair = pair.strip()
        if not pair:
            continue
        if "=" not in pair:
            raise UsageError(f"bad embeddings entry {pair!r}; expected modality=path")
        modality, path = pair.split("=", 1)
        if modality not in MODALITIES and modality != "all":
            raise UsageError(f"bad embeddings modality {modality!r}")
        table[modality] = path
    return table


def _merge_run_settings(args) -> dict:
    file_values = read_config_file(args.config) if args.config else {}
    settings = {}
    for key, (convert, default) in RUN_KEYS.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            settings[key] = convert(cli_value, key) if convert is not str else cli_value
        elif key in file_values:
            raw = file_values[key]
            settings[key] = convert(raw, key) if convert is not str else raw
        else:
            settings[key] = default
    for required in ("manifest", "out_dir"):
        if not settings[required]:
            raise UsageError(f"{required} is required (flag --{required} or config key)")
    return settings


def _run_config_from_settings(settings) -> RunConfig:
    train_config = TrainConfig(
        learning_rate=settings["learning_rate"],
        num_iterations=settings["num_iterations"],
        early_stopping_rounds=settings["early_stopping_rounds"],
        row_subsample=settings["row_subsample"],
        feature_subsample=settings["feature_subsample"],
        subsample_freq=settings["subsample_freq"],
        num_leaves=settings["num_leaves"],
        min_leaf_samples=settings["min_leaf_samples"],
    )
    return RunConfig(
        manifest=settings["manifest"],
        out_dir=settings["out_dir"],
        track=settings["track"],
        frontend=settings["frontend"],
        embedder=settings["embedder"],
        embeddings=parse_embeddings_value(settings["embeddings"]),
        rho=settings["rho"],
        oversample_m=settings["oversample_m"],
        valid_fraction=settings["valid_fraction"],
        min_spec=settings["min_spec"],
        seed=settings["seed"],
        train=train_config,
    )


def _add_run_flags(parser):
    parser.add_argument("--config", help="flat key=value config file")
    for key in RUN_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)


def _build_parser() -> _Parser:
    parser = _Parser(prog="respscreen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--n-dev", type=int, default=120)
    p_synth.add_argument("--n-test", type=int, default=60)
    p_synth.add_argument("--positive-rate", type=float, default=0.25)
    p_synth.add_argument("--boost-db", type=float, default=6.0)
    p_synth.add_argument("--out-dir", required=True)

    p_feat = sub.add_parser("features", help="write spectrogram dumps per record")
    p_feat.add_argument("--manifest", required=True)
    p_feat.add_argument("--frontend", default="logmel")
    p_feat.add_argument("--out-dir", required=True)

    p_embed = sub.add_parser("embed", help="export baseline embeddings to CSV")
    p_embed.add_argument("--manifest", required=True)
    p_embed.add_argument("--frontend", default="logmel")
    p_embed.add_argument("--out", required=True)

    p_import = sub.add_parser(
        "import-embeddings", help="validate an external embeddings CSV"
    )
    p_import.add_argument("--path", required=True)
    p_import.add_argument("--out", help="optional canonical re-export path")

    p_run = sub.add_parser("run", help="run one track end to end")
    _add_run_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="rho x oversampling grid of runs")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--rho-grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p_sweep.add_argument("--m-grid", default="none,2,3,4,5")
    p_sweep.add_argument("--sweep-out", default=None)

    p_eval = sub.add_parser("evaluate", help="score a saved model on a manifest")
    _add_run_flags(p_eval)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--masks-dir", default=None)

    return parser


def _cmd_synth(args) -> int:
    manifest = synth_corpus(
        seed=args.seed,
        n_dev=args.n_dev,
        n_test=args.n_test,
        positive_rate=args.positive_rate,
        out_dir=args.out_dir,
        boost_db=args.boost_db,
    )
    print(f"wrote corpus manifest: {manifest}")
    return EXIT_OK


def _cmd_features(args) -> int:
    counters = extract_feature_dumps(args.manifest, args.frontend, args.out_dir)
    print(
        f"features: {counters['written']} written, "
        f"{counters['skipped']} skipped, {counters['failed']} failed"
    )
    return EXIT_OK


def _cmd_embed(args) -> int:
    count = export_baseline_embeddings(args.manifest, args.frontend, args.out)
    print(f"wrote {count} embeddings to {args.out}")
    return EXIT_OK


def _cmd_import_embeddings(args) -> int:
    loaded = read_embeddings(args.path)
    print(f"valid: {len(loaded)} vectors, dim {loaded.dim}, source {loaded.source}")
    if args.out:
        write_embeddings(loaded, args.out)
        print(f"re-exported to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _run_config_from_settings(_merge_run_settings(args))
    result = run_pipeline(config)
    print(result.report.to_text(), end="")
    print(f"artifacts in {config.out_dir}")
    return EXIT_OK


def _parse_grid(raw, converter, key):
    values = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        values.append(converter(token, key))
    if not values:
        raise UsageError(f"{key} is empty")
    return values


def _cmd_sweep(args) -> int:
    settings = _merge_run_settings(args)
    config = _run_config_from_settings(settings)
    rho_grid = _parse_grid(args.rho_grid, _parse_float, "rho_grid")
    m_grid = _parse_grid(args.m_grid, _parse_optional_int, "m_grid")
    out_path = args.sweep_out or os.path.join(config.out_dir, "sweep.csv")
    os.makedirs(config.out_dir, exist_ok=True)
    rows = run_sweep(config, rho_grid, m_grid, out_path)
    done = sum(1 for row in rows if row["error"] == "")
    print(f"sweep: {done}/{len(rows)} cells completed, results in {out_path}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    config = _run_config_from_settings(_merge_run_settings(args))
    masks_dir = args.masks_dir or os.path.dirname(os.path.abspath(args.model))
    report, _, _ = evaluate_saved_model(config, args.model, masks_dir)
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    print(report.to_text(), end="")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "features": _cmd_features,
    "embed": _cmd_embed,
    "import-embeddings": _cmd_import_embeddings,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        raise
    except Exception:
        print("internal error:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
