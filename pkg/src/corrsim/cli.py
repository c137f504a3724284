"""Command-line interface.

Subcommands: train, eval, score, gradcheck, features. Exit codes: 0 on
success, 1 for usage problems, 2 for data or format errors, 3 for numeric
failures.
"""

from __future__ import annotations

import argparse
import sys

from .corpus import (EmbeddingTable, Vocabulary, load_embeddings_binary,
                     load_embeddings_text, load_word_frequencies,
                     parse_sts_tsv)
from .errors import (ConfigError, CorrsimError, DataError, FormatError,
                     NumericError, ShapeError)
from .features import FEATURE_NAMES, InformationContent, WordSimilarityProvider, extract
from .gradcheck import PASS_THRESHOLD, gradient_check
from .model import TrainConfig, load_bundle, save_bundle
from .numkit import SeededRng, derive_seed
from .objective import LossKind
from .trainer import EpochReport, evaluate, score_dataset, train

_EMB_SEED_KEY = 0xE4B


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corrsim",
                     description="Sentence-pair similarity scoring trained "
                                 "under correlation and distribution losses.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and emit epoch reports")
    p.add_argument("--train", required=True, help="labeled pair TSV")
    p.add_argument("--val", required=True, help="labeled validation pair TSV")
    p.add_argument("--emb", help="embedding file (required with --init wi)")
    p.add_argument("--emb-format", choices=("text", "bin"), default="text")
    p.add_argument("--freq", required=True, help="token<TAB>count file")
    p.add_argument("--sims", help="w1<TAB>w2<TAB>pathlen<TAB>lin file")
    p.add_argument("--loss", choices=[k.value for k in LossKind], default="pcc")
    p.add_argument("--dim", type=int, default=None,
                   help="embedding dimension (default 300, or the file's)")
    p.add_argument("--hidden", type=int, default=200)
    p.add_argument("--batch", type=int, default=125)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-halve-every", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--init", choices=("wi", "ri"), default="ri")
    p.add_argument("--untied-encoders", action="store_true",
                   help="use separate encoders for the two sentences")
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="Pearson correlation on labeled data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("score", help="scores for unlabeled data, one per line")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("gradcheck",
                       help="compare analytic gradients with finite differences")
    p.add_argument("--loss", choices=[k.value for k in LossKind], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("features", help="emit the surface-feature TSV")
    p.add_argument("--data", required=True)
    p.add_argument("--emb", required=True, help="text-format embedding file")
    p.add_argument("--freq", required=True)
    p.add_argument("--sims")
    p.set_defaults(func=_cmd_features)
    return parser


def _load_provider(path) -> WordSimilarityProvider:
    if path is None:
        return WordSimilarityProvider.empty()
    return WordSimilarityProvider.load_tsv(path)


def _cmd_train(args) -> int:
    train_pairs = parse_sts_tsv(args.train)
    val_pairs = parse_sts_tsv(args.val)
    vocab = Vocabulary.from_pairs(train_pairs)
    rng = SeededRng(derive_seed(args.seed, _EMB_SEED_KEY))
    if args.init == "wi":
        if not args.emb:
            raise ConfigError("--init wi requires --emb")
        loader = (load_embeddings_binary if args.emb_format == "bin"
                  else load_embeddings_text)
        emb = loader(args.emb, vocab, rng)
        if args.dim is not None and args.dim != emb.dim:
            raise ConfigError(
                f"--dim {args.dim} conflicts with embedding file dimension "
                f"{emb.dim}")
        dim = emb.dim
    else:
        dim = args.dim if args.dim is not None else 300
        emb = EmbeddingTable.random(vocab, dim, rng)
    config = TrainConfig(loss=LossKind(args.loss), batch_size=args.batch,
                         epochs=args.epochs, lr=args.lr,
                         lr_halve_every=args.lr_halve_every, dim=dim,
                         hidden=args.hidden, seed=args.seed, init=args.init,
                         untied=args.untied_encoders)
    ic = InformationContent(load_word_frequencies(args.freq))
    provider = _load_provider(args.sims)
    result = train(config, train_pairs, val_pairs, emb, ic, provider)
    save_bundle(result.best, args.out)
    save_bundle(result.final, str(args.out) + ".final")
    print(EpochReport.TSV_HEADER)
    for report in result.reports:
        print(report.tsv())
    return 0


def _cmd_eval(args) -> int:
    bundle = load_bundle(args.model)
    pairs = parse_sts_tsv(args.data)
    pcc, scores = evaluate(bundle, pairs)
    print(f"pcc\t{pcc:.6f}")
    for pair, score in zip(pairs, scores):
        print(f"{pair.id}\t{pair.gold}\t{score:.6f}")
    return 0


def _cmd_score(args) -> int:
    bundle = load_bundle(args.model)
    pairs = parse_sts_tsv(args.data)
    for score in score_dataset(bundle, pairs):
        print(f"{score:.6f}")
    return 0


def _cmd_gradcheck(args) -> int:
    report = gradient_check(LossKind(args.loss), seed=args.seed)
    print("group\tmax_rel_error")
    print(report.tsv())
    ok = report.passed()
    print(f"# {'PASS' if ok else 'FAIL'} max {report.max_error:.3e} "
          f"(threshold {PASS_THRESHOLD:g})")
    return 0 if ok else 3


def _cmd_features(args) -> int:
    pairs = parse_sts_tsv(args.data)
    vocab = Vocabulary.from_pairs(pairs)
    emb = load_embeddings_text(args.emb, vocab, SeededRng(derive_seed(0, _EMB_SEED_KEY)))
    ic = InformationContent(load_word_frequencies(args.freq))
    provider = _load_provider(args.sims)
    print("id\t" + "\t".join(FEATURE_NAMES))
    for pair in pairs:
        m = extract(pair, emb, ic, provider)
        print(pair.id + "\t" + "\t".join(f"{v:.6f}" for v in m))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"corrsim: {exc}", file=sys.stderr)
        return 1
    except (FormatError, DataError, ShapeError) as exc:
        print(f"corrsim: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"corrsim: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"corrsim: {exc}", file=sys.stderr)
        return 3
    except CorrsimError as exc:
        print(f"corrsim: {exc}", file=sys.stderr)
        return 3
