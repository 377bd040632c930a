"""Command-line surface: export, finetune, and init-toy.

Each command prints a one-line JSON summary on success and exits 0;
operational failures (missing files, bad inputs) print an error to stderr
and exit 2; usage errors exit with argparse's standard code.
"""

from __future__ import annotations

import argparse
import json
import sys

from .checkpoint import build_vocab, new_toy_checkpoint, save_checkpoint
from .export import ExportJob, read_corpus, run_export
from .finetune import FinetuneConfig, run_finetune

EXIT_OK = 0
EXIT_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-exporter",
        description="Dump per-layer transformer representations of ad corpora to VLEMB1",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="export per-layer representations to a VLEMB1 file")
    p_export.add_argument("--checkpoint", required=True, help="checkpoint file to load")
    p_export.add_argument("--corpus", required=True, help="ad corpus JSONL")
    p_export.add_argument("--mode", required=True, choices=("cls", "token"))
    p_export.add_argument("--out", required=True, help="output VLEMB1 path")
    p_export.add_argument("--batch-size", type=int, default=32)
    p_export.add_argument(
        "--max-seq", type=int, default=None, help="truncate sequences to this many tokens"
    )

    p_ft = sub.add_parser("finetune", help="fine-tune a checkpoint on a labeled corpus")
    p_ft.add_argument("--checkpoint", required=True)
    p_ft.add_argument("--corpus", required=True)
    p_ft.add_argument("--labels", required=True, help="JSON file {vendor: class_index}")
    p_ft.add_argument("--out", required=True, help="output checkpoint path")
    p_ft.add_argument("--lr", type=float, default=1e-3)
    p_ft.add_argument("--batch-size", type=int, default=32)
    p_ft.add_argument("--epochs", type=int, default=3)
    p_ft.add_argument("--warmup-steps", type=int, default=500)
    p_ft.add_argument("--weight-decay", type=float, default=0.01)
    p_ft.add_argument("--seed", type=int, default=1111)
    p_ft.add_argument("--max-steps", type=int, default=None)

    p_init = sub.add_parser(
        "init-toy", help="create a small randomly initialized checkpoint from a corpus"
    )
    p_init.add_argument("--corpus", required=True, help="corpus whose tokens seed the vocabulary")
    p_init.add_argument("--n-classes", type=int, required=True)
    p_init.add_argument("--out", required=True)
    p_init.add_argument("--dim", type=int, default=16)
    p_init.add_argument("--blocks", type=int, default=2)
    p_init.add_argument("--heads", type=int, default=2)
    p_init.add_argument("--ffn-dim", type=int, default=32)
    p_init.add_argument("--max-seq", type=int, default=512)
    p_init.add_argument("--seed", type=int, default=0)
    p_init.add_argument("--name", default="toy")
    return parser


def _cmd_export(args) -> dict:
    return run_export(
        ExportJob(
            checkpoint_path=args.checkpoint,
            corpus_path=args.corpus,
            mode=args.mode,
            out_path=args.out,
            batch_size=args.batch_size,
            max_seq=args.max_seq,
        )
    )


def _cmd_finetune(args) -> dict:
    return run_finetune(
        args.checkpoint,
        args.corpus,
        args.labels,
        args.out,
        FinetuneConfig(
            learning_rate=args.lr,
            batch_size=args.batch_size,
            epochs=args.epochs,
            warmup_steps=args.warmup_steps,
            weight_decay=args.weight_decay,
            seed=args.seed,
            max_steps=args.max_steps,
        ),
    )


def _cmd_init_toy(args) -> dict:
    records = read_corpus(args.corpus)
    checkpoint = new_toy_checkpoint(
        build_vocab([rec.text for rec in records]),
        args.n_classes,
        dim=args.dim,
        n_blocks=args.blocks,
        n_heads=args.heads,
        ffn_dim=args.ffn_dim,
        max_seq=args.max_seq,
        seed=args.seed,
        name=args.name,
    )
    save_checkpoint(checkpoint, args.out)
    return {
        "out": str(args.out),
        "vocab_size": checkpoint.config.vocab_size,
        "n_layers": checkpoint.n_export_layers,
        "dim": checkpoint.config.dim,
        "checkpoint_tag": checkpoint.tag,
    }


_COMMANDS = {"export": _cmd_export, "finetune": _cmd_finetune, "init-toy": _cmd_init_toy}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        summary = _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
