"""Command-line surface for the clone-detection pipeline.

Commands: pdg, dataset-gen, train, detect, attn, gradcheck, eval.
Exit codes: 0 success, 1 gradcheck tolerance failure, 2 usage or input
error. PDGSIM_SEED supplies the default seed when --seed is absent.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .datagen import (BUILT_IN_GROUPS, CorpusError, InsufficientSeeds,
                      NotApplicable, generate_dataset, load_corpus,
                      write_corpus)
from .dataflow import UnreachableExit, build_pdg
from .graphcore import EmptyGraph, FormatError, serialize_pdg, to_dot
from .gradcheck import TOLERANCE, gradcheck_suite
from .ir import IrFormatError, LowerError, lower_source, parse_ir_text
from .lexer import LexError
from .model import (GraphTensors, LengthMismatch, ModelConfig, ModelFileError,
                    attention_scores, deserialize_model, pair_score,
                    serialize_model)
from .model import _canon_json as canon_json
from .parser import ParseError
from .training import (EmptyDataset, SingleClass, TrainConfig, eval_scores,
                       evaluate, history_csv, prepare_pair, roc_csv,
                       roc_points, train)

_INPUT_ERRORS = (LexError, ParseError, LowerError, IrFormatError,
                 UnreachableExit, EmptyGraph, FormatError, ModelFileError,
                 CorpusError, InsufficientSeeds, NotApplicable, EmptyDataset,
                 SingleClass, LengthMismatch, ad.ShapeError, ad.MaskError,
                 ValueError, OSError)


# --- config resolution -------------------------------------------------------

def _env_seed() -> int | None:
    raw = os.environ.get("PDGSIM_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"PDGSIM_SEED must be an integer, got {raw!r}") \
            from None


def _resolve_seed(flag_value: int | None, fallback: int = 0) -> int:
    if flag_value is not None:
        return flag_value
    env = _env_seed()
    return env if env is not None else fallback


def _coerce(default: object, key: str, text: str) -> object:
    # dispatch on the default's type; bool first since bool < int
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key!r} expects a boolean, got {text!r}")
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {text!r}") \
            from None
    return text


def parse_config_file(path: str | Path) -> dict[str, object]:
    """key=value lines with `#` comments; keys must be TrainConfig or
    ModelConfig fields; unknown keys are errors."""
    defaults: dict[str, object] = {}
    for f in dataclasses.fields(TrainConfig):
        defaults[f.name] = getattr(TrainConfig(), f.name)
    for f in dataclasses.fields(ModelConfig):
        defaults[f.name] = getattr(ModelConfig(), f.name)
    out: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in defaults:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(defaults[key], key, text.strip())
    return out


def _resolve_train_config(args) -> tuple[TrainConfig, ModelConfig]:
    """Defaults, then the config file, then flags; flags win."""
    file_cfg = parse_config_file(args.config) if args.config else {}
    t_names = {f.name for f in dataclasses.fields(TrainConfig)}
    m_names = {f.name for f in dataclasses.fields(ModelConfig)}
    t_kwargs = {k: v for k, v in file_cfg.items() if k in t_names}
    m_kwargs = {k: v for k, v in file_cfg.items() if k in m_names}

    flag_map = {"variant": args.variant, "pool": args.pool,
                "heads_block1": args.heads1, "heads_block2": args.heads2,
                "no_lstm": args.no_lstm, "no_jk": args.no_jk}
    for key, value in flag_map.items():
        if value is not None:
            m_kwargs[key] = value
    if args.epochs is not None:
        t_kwargs["epochs"] = args.epochs
    t_kwargs["seed"] = _resolve_seed(args.seed,
                                     int(t_kwargs.get("seed", 0)))

    tcfg = TrainConfig(**t_kwargs)
    mcfg = ModelConfig(**m_kwargs)
    tcfg.validate()
    mcfg.validate()
    return tcfg, mcfg


def _log_config(pairs: dict[str, object]) -> None:
    for key in sorted(pairs):
        print(f"config: {key}={pairs[key]}", file=sys.stderr)


def _log_dataclasses(*objs, extra: dict[str, object]) -> None:
    merged = dict(extra)
    for obj in objs:
        for f in dataclasses.fields(obj):
            merged[f.name] = getattr(obj, f.name)
    _log_config(merged)


# --- commands ----------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_pdg(args) -> int:
    source = Path(args.file).read_text()
    if args.ir:
        ir = parse_ir_text(source)
    else:
        ir = lower_source(source, name=Path(args.file).stem)
    pdg = build_pdg(ir)
    _emit(serialize_pdg(pdg) + "\n", args.out)
    if args.dot:
        Path(args.dot).write_text(to_dot(pdg))
    return 0


def cmd_dataset_gen(args) -> int:
    seed = _resolve_seed(args.seed)
    _log_config({"out": args.out, "pairs": args.pairs, "seed": seed,
                 "seeds": args.seeds or "(built-in)"})
    if args.seeds:
        groups = _load_seed_groups(args.seeds)
    else:
        groups = BUILT_IN_GROUPS
    pairs = generate_dataset(groups, args.pairs, np.random.default_rng(seed))
    write_corpus(pairs, args.out, seed)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return 0


def _load_seed_groups(root: str | Path) -> dict[str, tuple[str, ...]]:
    """Each subdirectory is a functionality group; each *.src file in it
    is one seed variant. Every seed must lower cleanly."""
    base = Path(root)
    groups: dict[str, tuple[str, ...]] = {}
    for sub in sorted(p for p in base.iterdir() if p.is_dir()):
        sources = []
        for src in sorted(sub.glob("*.src")):
            text = src.read_text()
            try:
                lower_source(text)
            except (LexError, ParseError, LowerError) as exc:
                raise ValueError(f"{src}: {exc}") from None
            sources.append(text)
        if sources:
            groups[sub.name] = tuple(sources)
    if len(groups) < 2:
        raise InsufficientSeeds(
            f"{base}: need >= 2 group subdirectories with .src files")
    return groups


def _metrics_line(tag: str, report) -> str:
    auc = "n/a" if report.auc is None else f"{report.auc:.4f}"
    return (f"{tag} precision={report.precision:.4f}"
            f" recall={report.recall:.4f} f1={report.f1:.4f} auc={auc}"
            f" threshold={report.threshold:g}"
            f" tp={report.tp} fp={report.fp} tn={report.tn} fn={report.fn}")


def cmd_train(args) -> int:
    tcfg, mcfg = _resolve_train_config(args)
    _log_dataclasses(tcfg, mcfg, extra={"data": args.data, "out": args.out})
    pairs, split = load_corpus(args.data)
    dataset = [prepare_pair(p.source_a, p.source_b, p.label) for p in pairs]
    result = train(dataset, tcfg, mcfg, split=split)

    train_idx, val_idx, test_idx = result.split
    # mirror train(): an empty validation split falls back to the train set
    val_set = [dataset[i] for i in (val_idx if val_idx else train_idx)]
    val_scores = eval_scores(val_set, result.params, mcfg)
    val_report = evaluate(val_scores, [p.label for p in val_set],
                          result.threshold)
    print(f"trained epochs={result.epochs_run} threshold={result.threshold:g}")
    print(_metrics_line("val", val_report))
    if test_idx:
        test_set = [dataset[i] for i in test_idx]
        test_scores = eval_scores(test_set, result.params, mcfg)
        test_report = evaluate(test_scores, [p.label for p in test_set],
                               result.threshold)
        print(_metrics_line("test", test_report))
    else:
        print("test (empty split)")
    Path(args.out).write_text(
        serialize_model(result.params, mcfg, result.threshold) + "\n")
    if args.history:
        Path(args.history).write_text(history_csv(result.history))
    return 0


def _load_model(path: str | Path):
    return deserialize_model(Path(path).read_text())


def cmd_detect(args) -> int:
    cfg, threshold, params = _load_model(args.model)
    gt_a = GraphTensors(build_pdg(lower_source(Path(args.a).read_text())))
    gt_b = GraphTensors(build_pdg(lower_source(Path(args.b).read_text())))
    with ad.no_grad():
        score = float(pair_score(gt_a, gt_b, params, cfg).data[0, 0])
    verdict = "clone" if score >= threshold else "non-clone"
    print(f"score={score:.12g} threshold={threshold:g} verdict={verdict}")
    return 0


def cmd_attn(args) -> int:
    cfg, _, params = _load_model(args.model)
    pdg = build_pdg(lower_source(Path(args.file).read_text()))
    edges = attention_scores(pdg, params, cfg)
    _emit(canon_json({"edges": edges}) + "\n", args.out)
    return 0


def cmd_gradcheck(args) -> int:
    seed = _resolve_seed(args.seed)
    results = gradcheck_suite(seed)
    worst = 0.0
    for name, err in results:
        status = "ok" if err < TOLERANCE else "FAIL"
        print(f"{name} max_rel_err={err:.6e} {status}")
        worst = max(worst, err)
    print(f"gradcheck seed={seed} worst={worst:.6e} tolerance={TOLERANCE:g}")
    return 0 if worst < TOLERANCE else 1


def cmd_eval(args) -> int:
    cfg, threshold, params = _load_model(args.model)
    pairs, (train_idx, val_idx, test_idx) = load_corpus(args.data)
    subsets = {"train": train_idx, "val": val_idx, "test": test_idx,
               "all": list(range(len(pairs)))}
    idx = subsets[args.split]
    if not idx:
        raise EmptyDataset(f"split {args.split!r} is empty in {args.data}")
    subset = [prepare_pair(pairs[i].source_a, pairs[i].source_b,
                           pairs[i].label) for i in idx]
    scores = eval_scores(subset, params, cfg)
    labels = [p.label for p in subset]
    print(_metrics_line(args.split, evaluate(scores, labels, threshold)))
    if args.roc:
        Path(args.roc).write_text(roc_csv(roc_points(scores, labels)))
    return 0


# --- argument parsing --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdgsim",
        description="PDG-based semantic code clone detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pdg", help="export canonical PDG JSON for a source file")
    p.add_argument("file", help="source file (or IR text with --ir)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.add_argument("--dot", help="also write Graphviz DOT to this path")
    p.add_argument("--ir", action="store_true",
                   help="treat the input as IR debug text, not source")
    p.set_defaults(func=cmd_pdg)

    p = sub.add_parser("dataset-gen", help="generate a labeled pair corpus")
    p.add_argument("--out", required=True, help="corpus directory to create")
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds",
                   help="directory of group subdirectories with .src seeds"
                        " (defaults to the built-in groups)")
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("train", help="train a Siamese GAT clone detector")
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", default="model.json", help="model file to write")
    p.add_argument("--variant", choices=("eu", "ea"), default=None)
    p.add_argument("--no-lstm", action="store_true", default=None,
                   dest="no_lstm")
    p.add_argument("--no-jk", action="store_true", default=None, dest="no_jk")
    p.add_argument("--pool", choices=("soft", "gap"), default=None)
    p.add_argument("--heads1", type=int, default=None,
                   help="attention heads in block 1")
    p.add_argument("--heads2", type=int, default=None,
                   help="attention heads in block 2")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--history", help="write epoch,loss,val_f1 CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score a pair of source files")
    p.add_argument("--model", required=True)
    p.add_argument("a", metavar="a.src")
    p.add_argument("b", metavar="b.src")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("attn", help="export per-edge attention scores")
    p.add_argument("--model", required=True)
    p.add_argument("file", help="source file")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_attn)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of every layer")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("eval", help="evaluate a model file on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"),
                   default="test")
    p.add_argument("--roc", help="write threshold,tpr,fpr CSV here")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        kind = type(exc).__name__
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
