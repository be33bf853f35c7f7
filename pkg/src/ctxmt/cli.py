"""Command-line entry points.

Every command writes its artifacts deterministically: re-running with the
same inputs produces byte-identical files. Anything time-dependent (wall
clock, durations) goes into a ``<command>.meta.json`` sidecar instead.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path
from typing import Optional

from . import augment, contrastive, corpus, cxmi, stats, synthetic
from .bpe import Tokenizer, train_bpe
from .errors import (
    ConfigurationError,
    DataError,
    NumericalError,
    ToolkitError,
)
from .model import (
    ContextPolicy,
    ToyTransformerConfig,
    TrainConfig,
    decode_document,
    load_checkpoint,
    save_checkpoint,
    train,
)

_EXIT_CODES = (
    (ConfigurationError, 2),
    (DataError, 3),
    (NumericalError, 4),
)


def _write_json(path: Path, blob: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f, sort_keys=True, ensure_ascii=True)
        f.write("\n")


def _write_meta(out_dir: Path, command: str, outputs: list[str], t0: float) -> None:
    _write_json(
        out_dir / f"{command}.meta.json",
        {
            "command": command,
            "outputs": sorted(outputs),
            "elapsed_seconds": round(time.time() - t0, 3),
            "written_at_unix": int(time.time()),
        },
    )


def _load_json_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read JSON file {path}: {e}") from e


def _dataclass_from_section(cls, section: dict, what: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigurationError(
            f"unknown {what} option(s): {', '.join(sorted(unknown))}"
        )
    return cls(**section)


def _load_corpus_arg(args) -> corpus.ParallelCorpus:
    return corpus.load_corpus(args.corpus, args.format, getattr(args, "tgt", None))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(section: dict, pairs: list[tuple[str, object]]) -> dict:
    out = dict(section)
    for key, value in pairs:
        if value is not None:
            out[key] = value
    return out


def cmd_train(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    train_corpus = _load_corpus_arg(args)
    valid_corpus = (
        corpus.load_jsonl_corpus(args.valid) if args.valid is not None else None
    )

    cfg = _load_json_file(args.config) if args.config else {}
    for section in set(cfg) - {"model", "train", "augment"}:
        raise ConfigurationError(f"unknown config section {section!r}")

    if args.tokenizer:
        tok = Tokenizer.load(args.tokenizer)
    else:
        tok = train_bpe(train_corpus, args.vocab_size)

    model_section = _apply_overrides(
        cfg.get("model", {}), [("vocab_size", tok.vocab_size)]
    )
    train_section = _apply_overrides(cfg.get("train", {}), [("seed", args.seed)])
    aug_section = _apply_overrides(
        cfg.get("augment", {}),
        [
            ("coword_p", args.coword_p),
            ("k_min", args.k_min),
            ("k_max", args.k_max),
            ("context_side", args.context_side),
        ],
    )
    model_cfg = _dataclass_from_section(ToyTransformerConfig, model_section, "model")
    train_cfg = _dataclass_from_section(TrainConfig, train_section, "train")
    aug_cfg = _dataclass_from_section(augment.AugmentConfig, aug_section, "augment")

    scorer = train(
        train_corpus,
        tok,
        model_cfg,
        train_cfg,
        aug_cfg,
        valid_corpus=valid_corpus,
        log_path=out / "train_log.csv",
    )
    tok.save(out / "tokenizer.json")
    save_checkpoint(out / "checkpoint.json", scorer, tok)
    _write_meta(out, "train", ["tokenizer.json", "checkpoint.json", "train_log.csv"], t0)
    last_ppl = next(
        (r["valid_ppl"] for r in reversed(scorer.train_log) if r["valid_ppl"] != ""),
        None,
    )
    print(f"trained {len(scorer.train_log)} steps, best valid ppl {last_ppl}")
    print(f"checkpoint: {out / 'checkpoint.json'}")
    return 0


def _load_model_and_tok(args) -> tuple:
    tok = Tokenizer.load(args.tokenizer)
    model = load_checkpoint(args.checkpoint, tok)
    return model, tok


def cmd_cxmi(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    model, tok = _load_model_and_tok(args)
    data = _load_corpus_arg(args)
    report = cxmi.corpus_cxmi(
        model,
        data,
        tok,
        side=args.side,
        k=args.k,
        per_word=args.per_word,
        bootstrap=args.bootstrap,
    )
    report.save_json(out / "cxmi.json")
    report.save_per_sample_csv(out / "cxmi_per_sample.csv")
    outputs = ["cxmi.json", "cxmi_per_sample.csv"]
    _write_meta(out, "cxmi", outputs, t0)
    print(
        f"corpus CXMI ({report.side}, k={report.k}): {report.corpus_cxmi:.6f} nats "
        f"+- {report.std_error:.6f} over {report.n_samples} samples"
    )
    return 0


def cmd_sweep(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    model, tok = _load_model_and_tok(args)
    data = _load_corpus_arg(args)
    curve = cxmi.cxmi_sweep(model, data, tok, side=args.side, k_max=args.k_max)
    curve.save_json(out / "sweep.json")
    curve.save_csv(out / "sweep.csv")
    _write_meta(out, "sweep", ["sweep.json", "sweep.csv"], t0)
    for k, value, se in curve.points:
        print(f"k={k}: {value:.6f} +- {se:.6f}")
    return 0


def cmd_contrastive(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    model, tok = _load_model_and_tok(args)
    examples = contrastive.load_contrastive(args.set, args.set_format)
    result = contrastive.evaluate_contrastive(
        model, tok, examples, k=args.k, side=args.side
    )
    result.save_json(out / "contrastive.json")
    _write_meta(out, "contrastive", ["contrastive.json"], t0)
    print(
        f"accuracy with context: {result.accuracy_contextual:.4f} "
        f"({result.n_ties_contextual} ties)"
    )
    print(
        f"accuracy without context: {result.accuracy_agnostic:.4f} "
        f"({result.n_ties_agnostic} ties)"
    )
    return 0


def _per_example_values(path) -> dict[str, float]:
    blob = _load_json_file(path)
    schema = blob.get("schema")
    if schema == "cxmi-report-v1":
        return {ex_id: float(v) for ex_id, v in blob["per_sample"]}
    if schema == "contrastive-eval-v1":
        return {r["example_id"]: float(r["per_sample_cxmi"]) for r in blob["rows"]}
    raise DataError(f"{path}: no per-example values in schema {schema!r}")


def _per_example_indicators(path) -> dict[str, int]:
    blob = _load_json_file(path)
    if blob.get("schema") != "contrastive-eval-v1":
        raise DataError(
            f"{path}: indicators come from a contrastive evaluation file"
        )
    return {r["example_id"]: int(r["indicator"]) for r in blob["rows"]}


def cmd_correlate(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    values = _per_example_values(args.values)
    indicators = _per_example_indicators(args.indicators)
    missing = sorted(set(indicators) - set(values))
    if missing:
        shown = ", ".join(missing[:5])
        raise DataError(
            f"{len(missing)} example id(s) have indicators but no value: {shown}"
        )
    ids = sorted(indicators)
    result = stats.point_biserial(
        [values[i] for i in ids], [indicators[i] for i in ids]
    )
    _write_json(out / "correlation.json", result.to_json_dict())
    _write_meta(out, "correlate", ["correlation.json"], t0)
    print(
        f"r_pb={result.r_pb:.4f} t={result.t_stat:.4f} p={result.p_value:.3g} "
        f"(n={result.n}, {result.n_pos} positive)"
    )
    return 0


def cmd_translate(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    model, tok = _load_model_and_tok(args)
    docs = corpus.load_source_documents(args.src)
    policy = ContextPolicy(src_size=args.src_context, tgt_size=args.tgt_context)
    hyp_docs = [
        decode_document(model, doc, tok, policy, beam_size=args.beam)
        for doc in docs
    ]
    with open(out / "hypotheses.txt", "w", encoding="utf-8") as f:
        for i, doc in enumerate(hyp_docs):
            if i > 0:
                f.write("\n")
            for line in doc:
                f.write(line + "\n")
    outputs = ["hypotheses.txt"]

    if args.ref:
        ref_docs = corpus.load_source_documents(args.ref)
        if [len(d) for d in ref_docs] != [len(d) for d in hyp_docs]:
            raise DataError(
                "reference documents do not match the source document structure"
            )
        hyps = [s for d in hyp_docs for s in d]
        refs = [s for d in ref_docs for s in d]
        score = stats.bleu(hyps, refs)
        _write_json(
            out / "bleu.json",
            {"schema": "bleu-v1", "bleu": score, "n_sentences": len(hyps)},
        )
        outputs.append("bleu.json")
        print(f"BLEU: {score:.2f} over {len(hyps)} sentences")
    _write_meta(out, "translate", outputs, t0)
    print(f"hypotheses: {out / 'hypotheses.txt'}")
    return 0


def cmd_augment_preview(args) -> int:
    t0 = time.time()
    out = _out_dir(args)
    data = _load_corpus_arg(args)
    tok = Tokenizer.load(args.tokenizer)
    aug_cfg = augment.AugmentConfig(
        coword_p=args.coword_p,
        k_min=args.k_min,
        k_max=args.k_max,
        context_side=args.context_side,
        seed=args.seed,
    )
    lines = []
    stream = augment.build_training_stream(data, tok, aug_cfg)
    for idx, ex in enumerate(stream):
        if idx >= args.limit:
            break
        lines.append(f"example {idx}")
        for j, c in enumerate(ex.src_context):
            lines.append(f"  src ctx[{j}]: {tok.decode(list(c))}")
        lines.append(f"  src:        {tok.decode(list(ex.src))}")
        for j, c in enumerate(ex.tgt_context):
            lines.append(f"  tgt ctx[{j}]: {tok.decode(list(c))}")
        lines.append(f"  tgt:        {tok.decode(list(ex.tgt))}")
    text = "\n".join(lines) + "\n"
    with open(out / "preview.txt", "w", encoding="utf-8") as f:
        f.write(text)
    _write_meta(out, "augment-preview", ["preview.txt"], t0)
    print(text, end="")
    return 0


def cmd_make_demo(args) -> int:
    """Generate the bundled synthetic world: corpus splits plus a mirrored
    contrastive set, ready for the train/cxmi/contrastive walkthrough."""
    t0 = time.time()
    out = _out_dir(args)
    world = synthetic.TopicWorldConfig(
        n_docs=args.n_docs,
        sentences_per_doc=args.sentences_per_doc,
        hint_fraction=args.hint_fraction,
        seed=args.seed,
    )
    full = synthetic.make_topic_corpus(world)
    n_valid = max(1, len(full) // 10)
    corpus.write_jsonl_corpus(
        corpus.ParallelCorpus(full.documents[:-n_valid]), out / "train.jsonl"
    )
    corpus.write_jsonl_corpus(
        corpus.ParallelCorpus(full.documents[-n_valid:]), out / "valid.jsonl"
    )
    examples = synthetic.make_contrastive_set(args.n_contrastive_pairs, seed=world.seed)
    synthetic.write_contrastive_jsonl(examples, out / "contrastive.jsonl")
    _write_meta(
        out, "make-demo", ["train.jsonl", "valid.jsonl", "contrastive.jsonl"], t0
    )
    print(
        f"wrote {len(full) - n_valid} train docs, {n_valid} valid docs, "
        f"{len(examples)} contrastive examples to {out}"
    )
    return 0


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument(
        "--format",
        choices=("jsonl", "text"),
        default="jsonl",
        help="corpus format (text needs --tgt)",
    )
    p.add_argument("--tgt", default=None, help="target file for the text format")


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxmt",
        description="Measure and increase context usage in document-level "
        "machine translation models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a document-level translation model")
    _add_corpus_args(p)
    p.add_argument("--valid", default=None, help="validation corpus (jsonl)")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--tokenizer", default=None, help="reuse an existing tokenizer")
    p.add_argument("--vocab-size", type=int, default=512)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--coword-p", type=float, default=None)
    p.add_argument("--k-min", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--context-side", choices=augment.CONTEXT_SIDES, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cxmi", help="estimate corpus CXMI for one context size")
    _add_corpus_args(p)
    _add_model_args(p)
    p.add_argument("--side", choices=cxmi.SIDES, default="target")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--per-word", action="store_true")
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_cxmi)

    p = sub.add_parser("sweep", help="CXMI at every context size up to k-max")
    _add_corpus_args(p)
    _add_model_args(p)
    p.add_argument("--side", choices=cxmi.SIDES, default="target")
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("contrastive", help="contrastive ranking evaluation")
    _add_model_args(p)
    p.add_argument("--set", required=True, help="contrastive example file")
    p.add_argument(
        "--set-format",
        choices=("simple-json", "contrapro-json"),
        default="simple-json",
    )
    p.add_argument("--k", type=int, default=None, help="context sentences per side")
    p.add_argument(
        "--side", choices=contrastive.CONTEXT_SIDES, default="both",
        help="which stream's context to feed",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_contrastive)

    p = sub.add_parser(
        "correlate", help="point-biserial between CXMI and context usage"
    )
    p.add_argument("--values", required=True, help="per-example CXMI file")
    p.add_argument(
        "--indicators", required=True, help="contrastive evaluation file"
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("translate", help="decode documents with rolling context")
    _add_model_args(p)
    p.add_argument("--src", required=True, help="source documents (text format)")
    p.add_argument("--ref", default=None, help="references for BLEU (text format)")
    p.add_argument("--src-context", type=int, default=0)
    p.add_argument("--tgt-context", type=int, default=0)
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser(
        "augment-preview", help="show the augmented stream for a corpus"
    )
    _add_corpus_args(p)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--coword-p", type=float, default=0.0)
    p.add_argument("--k-min", type=int, default=0)
    p.add_argument("--k-max", type=int, default=4)
    p.add_argument("--context-side", choices=augment.CONTEXT_SIDES, default="target")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser("make-demo", help="generate the synthetic demo dataset")
    p.add_argument("--n-docs", type=int, default=200)
    p.add_argument("--sentences-per-doc", type=int, default=8)
    p.add_argument("--hint-fraction", type=float, default=0.6)
    p.add_argument("--n-contrastive-pairs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_make_demo)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as e:
        for err_type, code in _EXIT_CODES:
            if isinstance(e, err_type):
                print(f"error: {e}", file=sys.stderr)
                return code
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
