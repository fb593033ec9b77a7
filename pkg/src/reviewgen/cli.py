"""Command-line surface: data preparation, training, gradient checking,
generation, and sentiment evaluation.

stdout carries only JSON payloads; progress and errors go to stderr.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint
from .generation import GenerationConfig, GenerationError, generate, \
    load_lexicon, sentiment_divergence
from .guidance import ConfigError
from .numerics import ShapeError
from .textdata import DataError, ReviewExample, Vocabulary, load_dataset, \
    load_embeddings, read_features, write_features
from .training import DivergenceError, TrainConfig, gradcheck, train

log = logging.getLogger(__name__)

VOCAB_FILE = "vocab.json"
EXAMPLES_FILE = "examples.jsonl"
FEATURES_FILE = "features.bin"
STATS_FILE = "stats.json"


def write_prepared_dir(outdir: Path, result) -> dict:
    """Lay out a prepared dataset directory; returns the stats payload."""
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / VOCAB_FILE, "w", encoding="utf-8") as fh:
        json.dump(result.vocab.to_json(), fh, sort_keys=True)
        fh.write("\n")
    with open(outdir / EXAMPLES_FILE, "w", encoding="utf-8") as fh:
        for ex in result.examples:
            fh.write(json.dumps({"product_id": ex.product_id,
                                 "rating": ex.rating,
                                 "token_ids": ex.tokens},
                                sort_keys=True) + "\n")
    features = {}
    for ex in result.examples:
        features.setdefault(ex.product_id, ex.feature)
    write_features(outdir / FEATURES_FILE, features)
    stats = {
        "examples": result.stats.to_json(),
        "vocab_size": len(result.vocab),
        "feature_dim": result.feature_dim,
    }
    with open(outdir / STATS_FILE, "w", encoding="utf-8") as fh:
        json.dump(stats, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return stats


def read_prepared_dir(datadir: Path):
    """Load a directory written by prepare-data."""
    datadir = Path(datadir)
    for name in (VOCAB_FILE, EXAMPLES_FILE, FEATURES_FILE):
        if not (datadir / name).exists():
            raise DataError(f"{datadir} is not a prepared dataset "
                            f"(missing {name})")
    with open(datadir / VOCAB_FILE, encoding="utf-8") as fh:
        vocab = Vocabulary.from_json(json.load(fh))
    features = read_features(datadir / FEATURES_FILE)
    examples = []
    with open(datadir / EXAMPLES_FILE, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            pid = record["product_id"]
            if pid not in features:
                raise DataError(
                    f"{datadir / EXAMPLES_FILE}:{lineno}: no feature for "
                    f"product {pid!r}")
            for tid in record["token_ids"]:
                if not 0 <= tid < len(vocab):
                    raise DataError(
                        f"{datadir / EXAMPLES_FILE}:{lineno}: token id {tid} "
                        f"outside vocabulary of {len(vocab)}")
            examples.append(ReviewExample(
                product_id=pid, rating=record["rating"],
                tokens=record["token_ids"], feature=features[pid]))
    if not examples:
        raise DataError(f"{datadir}: no examples")
    feature_dim = next(iter(features.values())).shape[0]
    return examples, vocab, feature_dim


def _emit(payload: dict):
    print(json.dumps(payload, sort_keys=True))


def cmd_prepare_data(args) -> int:
    result = load_dataset(args.reviews, args.features,
                          max_len=args.max_len, min_count=args.min_count)
    stats = write_prepared_dir(Path(args.out), result)
    _emit(stats)
    return 0


def cmd_train(args) -> int:
    examples, vocab, feature_dim = read_prepared_dir(args.data)
    if args.feat_dim is not None and args.feat_dim != feature_dim:
        raise DataError(f"--feat-dim {args.feat_dim} does not match the "
                        f"dataset's feature dim {feature_dim}")
    config = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, optimizer=args.optimizer,
        grad_clip_norm=args.grad_clip, seed=args.seed,
        feat_dim=feature_dim, hidden_dim=args.hidden_dim,
        embed_dim=args.embed_dim)
    embedding_init = None
    if args.embeddings:
        table = load_embeddings(args.embeddings, vocab, args.embed_dim)
        embedding_init = table.weights
    model, report = train(
        examples, vocab, config, checkpoint_path=args.out,
        report_path=args.report, embedding_init=embedding_init,
        train_embedding=not args.freeze_embeddings)
    _emit({
        "checkpoint": str(args.out),
        "epochs": len(report.epochs),
        "final_loss": report.final_loss,
        "final_perplexity": report.epochs[-1].perplexity,
    })
    return 0


def _parse_dims(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise DataError(
            f"--dims expects vocab,feat,hidden,embed (4 integers), "
            f"got {text!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise DataError(f"--dims expects integers, got {text!r}") from None
    if dims[0] < 5 or any(d < 1 for d in dims):
        raise DataError(f"--dims {text!r} out of range (vocab >= 5, rest >= 1)")
    return dims


def cmd_gradcheck(args) -> int:
    report = gradcheck(seed=args.seed, dims=_parse_dims(args.dims))
    _emit(report.to_json())
    if not report.passed:
        log.error("gradient check FAILED (cell %.3g, model %.3g, tol %.1g)",
                  report.cell_max_rel_err, report.model_max_rel_err,
                  report.tolerance)
        return 1
    return 0


def _resolve_feature(args, expect_dim: int) -> np.ndarray:
    if args.feature_file:
        with open(args.feature_file, encoding="utf-8") as fh:
            values = json.load(fh)
        if not isinstance(values, list) or \
                not all(isinstance(v, (int, float)) for v in values):
            raise DataError(f"{args.feature_file}: expected a JSON array "
                            f"of numbers")
        feature = np.asarray(values, dtype=np.float64)
    else:
        if not args.features:
            raise DataError("--feature-id needs --features FILE to look "
                            "the id up in")
        table = read_features(args.features)
        if args.feature_id not in table:
            raise DataError(
                f"{args.features}: no feature for id {args.feature_id!r}")
        feature = table[args.feature_id]
    if feature.shape[0] != expect_dim:
        raise DataError(f"feature has {feature.shape[0]} values, model "
                        f"expects {expect_dim}")
    return feature


def cmd_generate(args) -> int:
    model, vocab, _ = load_checkpoint(args.ckpt)
    feature = _resolve_feature(args, model.config.feature_dim)
    cfg = GenerationConfig(mode="beam" if args.beam > 1 else "greedy",
                           beam_width=args.beam, max_len=args.max_len)
    review = generate(model, vocab, feature, args.rating, cfg)
    _emit(review.to_json())
    return 0


def cmd_eval_sentiment(args) -> int:
    model, vocab, _ = load_checkpoint(args.ckpt)
    feature = _resolve_feature(args, model.config.feature_dim)
    pos = load_lexicon(args.pos)
    neg = load_lexicon(args.neg)
    report = sentiment_divergence(model, vocab, feature, pos, neg,
                                  GenerationConfig(max_len=args.max_len))
    _emit(report.to_json())
    return 0


def _add_feature_args(sub):
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--feature-id", help="product id to look up in "
                       "the --features file")
    group.add_argument("--feature-file", help="JSON array of feature values")
    sub.add_argument("--features", help="binary feature file for "
                     "--feature-id lookup")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewgen",
        description="Train and run the rating-guided review generator.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    prep = commands.add_parser(
        "prepare-data", help="tokenize reviews, build the vocabulary, and "
        "bundle features into a training directory")
    prep.add_argument("--reviews", required=True, help="reviews JSONL file")
    prep.add_argument("--features", required=True, help="binary feature file")
    prep.add_argument("--out", required=True, help="output directory")
    prep.add_argument("--min-count", type=int, default=5,
                      help="minimum token frequency for the vocabulary")
    prep.add_argument("--max-len", type=int, default=100,
                      help="drop reviews longer than this many tokens")
    prep.set_defaults(func=cmd_prepare_data)

    tr = commands.add_parser("train", help="fit a model on a prepared "
                             "dataset directory")
    tr.add_argument("--data", required=True, help="prepare-data output dir")
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.add_argument("--epochs", type=int, default=100)
    tr.add_argument("--batch-size", type=int, default=1)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--optimizer", choices=("sgd", "adam"), default="adam")
    tr.add_argument("--grad-clip", type=float, default=5.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--feat-dim", type=int, default=None,
                    help="expected feature dim (checked against the data)")
    tr.add_argument("--hidden-dim", type=int, default=64)
    tr.add_argument("--embed-dim", type=int, default=16)
    tr.add_argument("--embeddings", default=None,
                    help="optional pretrained embedding text file")
    tr.add_argument("--freeze-embeddings", action="store_true",
                    help="do not update embedding rows during training")
    tr.add_argument("--report", default=None,
                    help="optional JSONL training report path")
    tr.set_defaults(func=cmd_train)

    gc = commands.add_parser("gradcheck", help="compare analytic gradients "
                             "against finite differences")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--dims", default="6,4,4,4",
                    help="vocab,feat,hidden,embed sizes for the probe model")
    gc.set_defaults(func=cmd_gradcheck)

    gen = commands.add_parser("generate", help="decode one review from a "
                              "checkpoint")
    gen.add_argument("--ckpt", required=True)
    _add_feature_args(gen)
    gen.add_argument("--rating", type=int, required=True,
                     help="rating in 1..5 to condition on")
    gen.add_argument("--beam", type=int, default=1,
                     help="beam width; 1 means greedy")
    gen.add_argument("--max-len", type=int, default=100)
    gen.set_defaults(func=cmd_generate)

    ev = commands.add_parser("eval-sentiment", help="contrast rating-5 and "
                             "rating-1 generations with sentiment lexicons")
    ev.add_argument("--ckpt", required=True)
    _add_feature_args(ev)
    ev.add_argument("--pos", required=True, help="positive lexicon file")
    ev.add_argument("--neg", required=True, help="negative lexicon file")
    ev.add_argument("--max-len", type=int, default=100)
    ev.set_defaults(func=cmd_eval_sentiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ConfigError, ShapeError, CheckpointError,
            GenerationError, DivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
