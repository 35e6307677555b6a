"""Standalone extraction CLI.

    respextract extract --source pann --manifest m.csv --out pann.csv --weights random
    respextract train-lenet --manifest m.csv --checkpoint lenet.pt --epochs 20
    respextract extract --source lenet --manifest m.csv --out lenet.csv --checkpoint lenet.pt
"""

import argparse
import sys

import torch

from .export import extract_to_csv, train_lenet_on_manifest
from .pretrained import ModelUnavailableError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="respextract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train-lenet", help="train the compact CNN on dev rows")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--checkpoint", required=True)
    p_train.add_argument("--epochs", type=int, default=20)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--features-dir", default=None,
                         help="read dumped spectrogram patches instead of audio")
    p_train.add_argument("--frontend", default="logmel",
                         help="dump kind when --features-dir is used")

    p_extract = sub.add_parser("extract", help="export embeddings to CSV")
    p_extract.add_argument("--source", required=True,
                           choices=("lenet", "pann", "openl3", "trill"))
    p_extract.add_argument("--manifest", required=True)
    p_extract.add_argument("--out", required=True)
    p_extract.add_argument("--weights", default=None,
                           help="state-dict path, or 'random' for the surrogate")
    p_extract.add_argument("--checkpoint", default=None, help="lenet checkpoint path")
    p_extract.add_argument("--seed", type=int, default=0)
    p_extract.add_argument("--features-dir", default=None)
    p_extract.add_argument("--frontend", default="logmel")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train-lenet":
            model = train_lenet_on_manifest(
                args.manifest, epochs=args.epochs, seed=args.seed,
                features_dir=args.features_dir, frontend=args.frontend,
            )
            torch.save(model.state_dict(), args.checkpoint)
            print(f"saved checkpoint to {args.checkpoint}")
        else:
            count = extract_to_csv(
                args.source, args.manifest, args.out,
                weights=args.weights, checkpoint=args.checkpoint, seed=args.seed,
                features_dir=args.features_dir, frontend=args.frontend,
            )
            print(f"wrote {count} rows to {args.out}")
        return 0
    except ModelUnavailableError as exc:
        print(f"model unavailable: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
