"""capadapter command line: export ensembles, validate files, make demo checkpoints."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportJob, export_ensemble_records
from .model import init_checkpoint
from .schema import RecordValidationError, validate_ensemble_records, validate_features


def cmd_export(args) -> int:
    job = ExportJob(checkpoint_paths=tuple(args.checkpoints),
                    item_source=args.items, K=args.samples_k,
                    temperature=args.temperature, top_k=args.top_k,
                    max_len=args.max_len, seed=args.seed,
                    greedy=args.decode == "greedy")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scores_path = out / "ensemble_scores.jsonl"
    features_path = out / "features.jsonl"
    stats = export_ensemble_records(job, scores_path, features_path)
    validate_ensemble_records(scores_path)
    validate_features(features_path)
    print(f"exported {stats['records']} records for {stats['items']} items "
          f"to {out}")
    return 0


def cmd_validate(args) -> int:
    if args.kind == "ensemble-scores":
        stats = validate_ensemble_records(args.path)
        print(f"ok: {stats['records']} records, {stats['items']} items")
    else:
        count = validate_features(args.path)
        print(f"ok: {count} feature records")
    return 0


def cmd_init(args) -> int:
    init_checkpoint(args.out, vocab_size=args.vocab_size,
                    feature_dim=args.feature_dim, seed=args.seed,
                    embed_dim=args.embed_dim, hidden_dim=args.hidden_dim,
                    tokenizer_id=args.tokenizer_id)
    print(f"wrote checkpoint {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capadapter",
        description="Export a captioning ensemble into the engine's record schema.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_exp = sub.add_parser("export", help="sample + force-decode an ensemble")
    p_exp.add_argument("--checkpoints", nargs="+", required=True,
                       help="two or more captioner checkpoints")
    p_exp.add_argument("--items", required=True,
                       help="features JSONL (vectors or temporal stacks)")
    p_exp.add_argument("--samples-k", type=int, default=8)
    p_exp.add_argument("--temperature", type=float, default=0.8)
    p_exp.add_argument("--top-k", type=int, default=64)
    p_exp.add_argument("--max-len", type=int, default=12)
    p_exp.add_argument("--decode", choices=["sample", "greedy"], default="sample")
    p_exp.add_argument("--seed", type=int, default=0)
    p_exp.add_argument("--out-dir", required=True)
    p_exp.set_defaults(handler=cmd_export)

    p_val = sub.add_parser("validate", help="check a file against the schema")
    p_val.add_argument("kind", choices=["ensemble-scores", "features"])
    p_val.add_argument("path")
    p_val.set_defaults(handler=cmd_validate)

    p_init = sub.add_parser("init", help="write a randomly initialized checkpoint")
    p_init.add_argument("--out", required=True)
    p_init.add_argument("--vocab-size", type=int, required=True)
    p_init.add_argument("--feature-dim", type=int, required=True)
    p_init.add_argument("--embed-dim", type=int, default=32)
    p_init.add_argument("--hidden-dim", type=int, default=64)
    p_init.add_argument("--tokenizer-id", default="unit-bpe-v1")
    p_init.add_argument("--seed", type=int, default=0)
    p_init.set_defaults(handler=cmd_init)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (RecordValidationError, ValueError, OSError) as exc:
        print(f"capadapter: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
