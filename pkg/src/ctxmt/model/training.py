"""Training loop, LR schedule, and checkpoint serialisation.

Checkpoints are JSON with base64-packed float32 tensors: slower to load
than a pickle but diffable, portable, and byte-identical across runs, which
the CLI determinism guarantees rely on.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from ..augment import AugmentConfig, build_training_stream, context_sizes_for_side
from ..bpe import Tokenizer
from ..corpus import ParallelCorpus, TranslationExample, assemble_example
from ..errors import ConfigurationError, DataError, NumericalError
from .transformer import (
    ContextTransformer,
    ToyTransformerConfig,
    TransformerScorer,
    _pad_batch,
    example_tensors,
)

CHECKPOINT_FORMAT = "ctxmt-checkpoint-v1"


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 5e-4
    warmup_steps: int = 4000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    label_smoothing: float = 0.1
    max_steps: int = 100_000
    patience: int = 10
    seed: int = 1
    batch_size: int = 32
    valid_interval: int = 500
    valid_fraction: float = 0.1

    def __post_init__(self):
        if self.peak_lr <= 0 or self.warmup_steps < 1:
            raise ConfigurationError("peak_lr must be > 0 and warmup_steps >= 1")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigurationError("label_smoothing must lie in [0, 1)")
        if self.max_steps < 1 or self.patience < 1 or self.batch_size < 1:
            raise ConfigurationError(
                "max_steps, patience and batch_size must be positive"
            )
        if self.valid_interval < 1:
            raise ConfigurationError("valid_interval must be positive")
        if not 0.0 < self.valid_fraction < 1.0:
            raise ConfigurationError("valid_fraction must lie in (0, 1)")


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to peak_lr, then inverse-square-root decay."""
    if step < 1:
        raise ConfigurationError(f"step must be >= 1, got {step}")
    return cfg.peak_lr * min(
        step / cfg.warmup_steps, math.sqrt(cfg.warmup_steps / step)
    )


def _batch_loss(
    module: ContextTransformer,
    examples: list[TranslationExample],
    label_smoothing: float,
) -> tuple[torch.Tensor, int]:
    """Mean label-smoothed NLL over scored positions of a batch."""
    encs, decs, labs, scored = [], [], [], []
    for ex in examples:
        e, d, l, n = example_tensors(ex, module.cfg.max_positions)
        encs.append(e)
        decs.append(d)
        labs.append(l)
        scored.append(n)
    device = next(module.parameters()).device
    src_ids, src_pad = _pad_batch(encs, device)
    dec_ids, dec_pad = _pad_batch(decs, device)
    width = dec_ids.shape[1]
    labels = torch.full((len(examples), width), -100, dtype=torch.long, device=device)
    for i, (lab, n) in enumerate(zip(labs, scored)):
        # only the current-sentence positions (plus <eos>) carry loss
        start = len(lab) - n
        labels[i, start : len(lab)] = torch.tensor(lab[start:], dtype=torch.long)
    logits = module(src_ids, dec_ids, src_pad, dec_pad)
    loss = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        labels.reshape(-1),
        ignore_index=-100,
        label_smoothing=label_smoothing,
    )
    return loss, int((labels != -100).sum())


def _validation_perplexity(
    module: ContextTransformer,
    examples: list[TranslationExample],
    batch_size: int,
) -> float:
    """exp of the mean plain NLL per scored token, no smoothing."""
    module.eval()
    total_nll = 0.0
    total_tokens = 0
    with torch.no_grad():
        for lo in range(0, len(examples), batch_size):
            chunk = examples[lo : lo + batch_size]
            loss, n_tokens = _batch_loss(module, chunk, label_smoothing=0.0)
            total_nll += float(loss) * n_tokens
            total_tokens += n_tokens
    module.train()
    return math.exp(total_nll / total_tokens)


def _validation_examples(
    corpus: ParallelCorpus, tok: Tokenizer, aug: AugmentConfig
) -> list[TranslationExample]:
    k_src, k_tgt = context_sizes_for_side(aug.k_max, aug.context_side)
    return [
        assemble_example(doc, i, k_src, k_tgt, tok)
        for doc in corpus
        for i in range(len(doc))
    ]


def train(
    corpus: ParallelCorpus,
    tok: Tokenizer,
    model_cfg: ToyTransformerConfig,
    train_cfg: TrainConfig,
    aug_cfg: AugmentConfig,
    valid_corpus: Optional[ParallelCorpus] = None,
    log_path=None,
) -> TransformerScorer:
    """Train a ContextTransformer on the augmented stream of a corpus.

    Without an explicit validation corpus the trailing valid_fraction of
    documents is held out. Validation scores fixed k = k_max context with no
    dropout; training stops early after `patience` evaluations without
    improvement and the best-scoring parameters are restored.
    """
    if model_cfg.vocab_size != tok.vocab_size:
        raise ConfigurationError(
            f"model vocab {model_cfg.vocab_size} != tokenizer vocab {tok.vocab_size}"
        )
    torch.set_num_threads(1)
    if valid_corpus is None:
        if len(corpus) < 2:
            raise ConfigurationError(
                "need at least 2 documents to hold out a validation split"
            )
        n_valid = max(1, round(train_cfg.valid_fraction * len(corpus)))
        n_valid = min(n_valid, len(corpus) - 1)
        train_corpus = ParallelCorpus(corpus.documents[:-n_valid])
        valid_corpus = ParallelCorpus(corpus.documents[-n_valid:])
    else:
        train_corpus = corpus
    if train_corpus.n_sentences == 0 or valid_corpus.n_sentences == 0:
        raise DataError("empty training or validation split")

    torch.manual_seed(train_cfg.seed)
    module = ContextTransformer(model_cfg)
    module.train()
    optim = torch.optim.Adam(
        module.parameters(),
        lr=train_cfg.peak_lr,
        betas=(train_cfg.adam_beta1, train_cfg.adam_beta2),
    )
    valid_examples = _validation_examples(valid_corpus, tok, aug_cfg)

    log_rows: list[dict] = []
    best_ppl = math.inf
    best_state = {k: v.detach().clone() for k, v in module.state_dict().items()}
    evals_since_best = 0
    step = 0
    epoch = 0
    stop = False

    while not stop and step < train_cfg.max_steps:
        stream_rng = np.random.default_rng([aug_cfg.seed, epoch])
        examples = list(build_training_stream(train_corpus, tok, aug_cfg, stream_rng))
        order = np.random.default_rng([train_cfg.seed, epoch]).permutation(
            len(examples)
        )
        for lo in range(0, len(order), train_cfg.batch_size):
            batch = [examples[j] for j in order[lo : lo + train_cfg.batch_size]]
            step += 1
            lr = lr_schedule(step, train_cfg)
            for group in optim.param_groups:
                group["lr"] = lr
            optim.zero_grad()
            loss, _ = _batch_loss(module, batch, train_cfg.label_smoothing)
            loss_val = float(loss.detach())
            if not math.isfinite(loss_val):
                raise NumericalError(
                    f"training loss became {loss_val} at step {step}"
                )
            loss.backward()
            optim.step()

            row = {"step": step, "loss": loss_val, "lr": lr, "valid_ppl": ""}
            if step % train_cfg.valid_interval == 0 or step == train_cfg.max_steps:
                ppl = _validation_perplexity(
                    module, valid_examples, train_cfg.batch_size
                )
                if not math.isfinite(ppl):
                    raise NumericalError(
                        f"validation perplexity became {ppl} at step {step}"
                    )
                row["valid_ppl"] = ppl
                if ppl < best_ppl:
                    best_ppl = ppl
                    best_state = {
                        k: v.detach().clone() for k, v in module.state_dict().items()
                    }
                    evals_since_best = 0
                else:
                    evals_since_best += 1
                if evals_since_best >= train_cfg.patience:
                    stop = True
            log_rows.append(row)
            if stop or step >= train_cfg.max_steps:
                break
        epoch += 1

    module.load_state_dict(best_state)
    module.eval()
    scorer = TransformerScorer(
        module,
        tokenizer_sha256=tok.sha256,
        trained_context={
            "k_min": aug_cfg.k_min,
            "k_max": aug_cfg.k_max,
            "side": aug_cfg.context_side,
            "coword_p": aug_cfg.coword_p,
        },
    )
    scorer.train_log = log_rows
    if log_path is not None:
        write_training_log(log_path, log_rows)
    return scorer


def write_training_log(path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("# schema: train-log-v1\n")
        f.write("step,loss,lr,valid_ppl\n")
        for r in rows:
            ppl = r["valid_ppl"]
            ppl_s = f"{ppl:.8g}" if ppl != "" else ""
            f.write(f"{r['step']},{r['loss']:.8g},{r['lr']:.8g},{ppl_s}\n")


def save_checkpoint(path, scorer: TransformerScorer, tok: Tokenizer) -> None:
    params = {}
    for name, tensor in sorted(scorer.module.state_dict().items()):
        arr = tensor.detach().cpu().numpy().astype("<f4")
        params[name] = {
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    blob = {
        "format": CHECKPOINT_FORMAT,
        "model_cfg": asdict(scorer.cfg),
        "tokenizer_sha256": tok.sha256,
        "trained_context": scorer.trained_context,
        "parameters": params,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(blob, f, sort_keys=True, ensure_ascii=True)
        f.write("\n")


def load_checkpoint(path, tok: Optional[Tokenizer] = None) -> TransformerScorer:
    try:
        with open(path, encoding="utf-8") as f:
            blob = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise DataError(
            f"{path} is not a {CHECKPOINT_FORMAT} checkpoint "
            f"(format={blob.get('format')!r})"
        )
    if tok is not None and blob["tokenizer_sha256"] != tok.sha256:
        raise DataError(
            "checkpoint was trained with a different tokenizer "
            f"(stored hash {blob['tokenizer_sha256'][:12]}..., "
            f"supplied hash {tok.sha256[:12]}...)"
        )
    cfg = ToyTransformerConfig(**blob["model_cfg"])
    module = ContextTransformer(cfg)
    state = {}
    for name, spec in blob["parameters"].items():
        raw = base64.b64decode(spec["data"])
        arr = np.frombuffer(raw, dtype="<f4").reshape(spec["shape"]).copy()
        state[name] = torch.from_numpy(arr)
    try:
        module.load_state_dict(state)
    except RuntimeError as e:
        raise DataError(f"checkpoint parameters do not fit the model: {e}") from e
    module.eval()
    return TransformerScorer(
        module,
        tokenizer_sha256=blob["tokenizer_sha256"],
        trained_context=blob.get("trained_context"),
    )
