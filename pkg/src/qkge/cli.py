"""Command-line entry point: ``qkge {train,eval,score,resources}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import TrainConfig
from .data import load_dataset
from .errors import (
    CheckpointFormatError,
    ConfigError,
    DataError,
    QKGEError,
    TrainingError,
)
from .evaluate import evaluate, write_report
from .params import load_checkpoint
from .scoring import resource_estimate, score_single
from .train import train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("qkge")

# flag name -> TrainConfig field
TRAIN_FLAGS = {
    "qubits": "n_qubits",
    "layers": "entity_layers",
    "relation_layers": "relation_layers",
    "epochs": "epochs",
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "negatives": "negatives_per_positive",
    "seed": "seed",
    "batched": "batched_scoring",
    "gradient_mode": "gradient_mode",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    defaults = TrainConfig()
    parser = _Parser(prog="qkge", description="Variational quantum knowledge graph embedding.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("train", help="train embeddings", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset dir with train.txt/valid.txt[/test.txt]")
    p.add_argument("--out", required=True, help="output dir for checkpoints and the epoch log")
    p.add_argument("--config", help="JSON file of TrainConfig fields (flags override it)")
    p.add_argument("--qubits", type=int, default=defaults.n_qubits, help="qubits per entity state")
    p.add_argument("--layers", type=int, default=defaults.entity_layers, help="entity layers")
    p.add_argument("--relation-layers", type=int, default=defaults.relation_layers,
                   help="relation layers")
    p.add_argument("--epochs", type=int, default=defaults.epochs, help="passes over train")
    p.add_argument("--lr", type=float, default=defaults.learning_rate, help="Adam learning rate")
    p.add_argument("--batch-size", type=int, default=defaults.batch_size,
                   help="triples per step, positives plus negatives")
    p.add_argument("--negatives", type=int, default=defaults.negatives_per_positive,
                   help="negatives per positive")
    p.add_argument("--batched", type=_on_off, default="on" if defaults.batched_scoring else "off",
                   help="score each batch with one superposition circuit (on|off)")
    p.add_argument("--gradient-mode", default=defaults.gradient_mode,
                   choices=["exact", "parameter_shift_single", "finite_diff_debug"],
                   help="gradient method (non-exact modes need --batched off)")
    p.add_argument("--seed", type=int, default=defaults.seed, help="seed for all randomness")
    p.add_argument("--threads", type=int, default=1, help="evaluation threads")

    p = sub.add_parser("eval", help="filtered tail-prediction metrics", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset dir (all splits form the filter set)")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--split", default="test", choices=["valid", "test"], help="split to rank")
    p.add_argument("--ties", default="pessimistic", choices=["pessimistic", "optimistic"],
                   help="tie policy of the headline metrics")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--threads", type=int, default=1, help="ranking threads")

    p = sub.add_parser("score", help="score one triple by name", formatter_class=fmt)
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("head", help="head entity name")
    p.add_argument("relation", help="relation name")
    p.add_argument("tail", help="tail entity name")

    p = sub.add_parser("resources", help="batched vs sequential circuit cost", formatter_class=fmt)
    p.add_argument("--batch", type=int, default=defaults.batch_size, help="triples per circuit")
    p.add_argument("--qubits", type=int, default=defaults.n_qubits, help="data qubits")
    p.add_argument("--layers", type=int, default=defaults.entity_layers, help="entity layers")
    p.add_argument("--relation-layers", type=int, default=defaults.relation_layers,
                   help="relation layers")
    p.add_argument("--elements", type=int, help="triples per epoch (N)")
    p.add_argument("--epochs", type=int, default=defaults.epochs, help="epochs (m)")
    return parser


def _explicit_flags(argv) -> set:
    """Names of train flags the user actually typed."""
    seen = set()
    for tok in argv:
        if tok.startswith("--"):
            seen.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return seen


def resolve_config(args, argv) -> TrainConfig:
    """Built-in defaults < ``--config`` file < explicit flags."""
    values = TrainConfig().to_dict()
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError(f"{args.config} must hold a JSON object")
        TrainConfig.from_dict({**values, **file_values})
        values.update(file_values)
    explicit = _explicit_flags(argv)
    for flag, field_name in TRAIN_FLAGS.items():
        if flag in explicit or not args.config:
            values[field_name] = getattr(args, flag)
    return TrainConfig.from_dict(values).validate_config()


def cmd_train(args, argv) -> int:
    stage = "config"
    try:
        config = resolve_config(args, argv)
        stage = "load data"
        data_dir = Path(args.data)
        if not data_dir.is_dir():
            raise DataError(f"data directory not found: {data_dir}")
        dataset = load_dataset(data_dir, require=("train",))
        stage = "train"
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
        result = train(config, dataset.vocab, dataset.train, dataset.valid, out_dir=out,
                       eval_threads=args.threads)
    except QKGEError as exc:
        return _fail(stage, exc)
    last = result.log[-1] if result.log else None
    print(f"wrote {out / 'final.ckpt'}")
    if last is not None:
        print(f"epochs={len(result.log)} final_loss={last.mean_loss:.6f} "
              f"valid_mrr={'n/a' if last.valid_mrr is None else f'{last.valid_mrr:.4f}'}")
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    stage = "evaluate"
    try:
        report, ckpt = evaluate(args.split, args.ckpt, args.data, ties=args.ties,
                                threads=args.threads)
    except FileNotFoundError as exc:
        return _fail(stage, DataError(f"file not found: {exc.filename}"))
    except QKGEError as exc:
        return _fail(stage, exc)
    m = report.metrics.as_dict()
    print(f"split={args.split} ties={args.ties} n={m['n_evaluated']}")
    print(f"MRR     {m['mrr']:.6f}  ({m['mrr_percent']:.1f})")
    print(f"Hits@1  {m['hits1']:.6f}  ({m['hits1_percent']:.1f})")
    print(f"Hits@10 {m['hits10']:.6f}  ({m['hits10_percent']:.1f})")
    if args.out:
        write_report(args.out, report, ckpt.vocab, ckpt.config)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_score(args, argv) -> int:
    try:
        ckpt = load_checkpoint(args.ckpt)
        v = ckpt.vocab
        h, r, t = v.entity_id(args.head), v.relation_id(args.relation), v.entity_id(args.tail)
    except FileNotFoundError as exc:
        return _fail("load", DataError(f"file not found: {exc.filename}"))
    except QKGEError as exc:
        return _fail("lookup", exc)
    print(f"{score_single(h, r, t, ckpt.store):.12g}")
    return EXIT_OK


def cmd_resources(args, argv) -> int:
    try:
        est = resource_estimate(args.batch, args.qubits, args.layers, args.relation_layers,
                                n_elements=args.elements, epochs=args.epochs)
    except ConfigError as exc:
        return _fail("resources", exc)
    rows = [
        ("batch size (B)", est.batch_size, est.batch_size),
        ("data qubits", est.n_data_qubits, est.n_data_qubits),
        ("address qubits", est.n_address_qubits, 0),
        ("total qubits", est.qubits_total, est.n_data_qubits),
        ("gates per batch", est.gate_count, est.gate_count_sequential),
        ("executions per batch", est.executions_batched, est.executions_sequential),
    ]
    if est.n_elements is not None:
        rows.append(("executions per epoch", est.executions_per_epoch_batched,
                     est.executions_per_epoch_sequential))
        rows.append((f"executions over {est.epochs} epochs", est.executions_total_batched,
                     est.executions_total_sequential))
    print(f"{'':<30}{'batched':>12}{'sequential':>12}")
    for name, a, b in rows:
        print(f"{name:<30}{a:>12}{b:>12}")
    print(f"parameters touched per batch (max): {est.parameters_touched}")
    print(f"features per entity state (M = 2^n): {est.n_features}")
    return EXIT_OK


def _fail(stage, exc) -> int:
    print(f"error [{stage}]: {exc}", file=sys.stderr)
    if isinstance(exc, (ConfigError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, TrainingError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, CheckpointFormatError)):
        return EXIT_DATA
    return EXIT_NUMERIC


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "score": cmd_score, "resources": cmd_resources}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(message)s")
    return COMMANDS[args.command](args, argv)


if __name__ == "__main__":
    sys.exit(main())
