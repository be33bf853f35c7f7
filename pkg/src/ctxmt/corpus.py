"""Document-aligned parallel corpora and the example layout fed to models.

A document is an ordered list of aligned sentence pairs. Training and
evaluation examples carry up to k preceding sentences per side as context;
context sentences are concatenated with ``<brk>`` between them and ``<sep>``
before the current sentence, on both the source and target streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bpe import BRK_ID, SEP_ID, Tokenizer
from .errors import DataError


@dataclass(frozen=True)
class ParallelDocument:
    doc_id: str
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.pairs:
            raise DataError(f"document {self.doc_id!r} has no sentence pairs")
        object.__setattr__(
            self, "pairs", tuple((str(s), str(t)) for s, t in self.pairs)
        )

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def source_sentences(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.pairs)

    @property
    def target_sentences(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.pairs)


@dataclass(frozen=True)
class ParallelCorpus:
    documents: tuple[ParallelDocument, ...]

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise DataError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def n_sentences(self) -> int:
        return sum(len(d) for d in self.documents)


def _open_text(path):
    try:
        return open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e


def load_jsonl_corpus(path) -> ParallelCorpus:
    """One document per line: {"doc_id": ..., "pairs": [[src, tgt], ...]}."""
    documents = []
    with _open_text(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                blob = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            try:
                doc_id = blob["doc_id"]
                pairs = blob["pairs"]
            except (KeyError, TypeError) as e:
                raise DataError(
                    f"{path}:{lineno}: expected keys 'doc_id' and 'pairs'"
                ) from e
            if not isinstance(pairs, list) or any(
                not isinstance(p, list) or len(p) != 2 for p in pairs
            ):
                raise DataError(
                    f"{path}:{lineno}: 'pairs' must be a list of [src, tgt] pairs"
                )
            documents.append(
                ParallelDocument(str(doc_id), tuple((p[0], p[1]) for p in pairs))
            )
    return ParallelCorpus(tuple(documents))


def load_text_corpus(src_path, tgt_path, doc_separator: str = "") -> ParallelCorpus:
    """Two aligned text files, one sentence per line, documents separated by
    blank lines (or ``doc_separator`` lines). Both files must contain the
    same document structure; misalignment is reported by document index."""

    def split_docs(path):
        docs, cur = [], []
        with _open_text(path) as f:
            for line in f:
                line = line.rstrip("\n")
                if line == doc_separator:
                    if cur:
                        docs.append(cur)
                        cur = []
                else:
                    cur.append(line)
        if cur:
            docs.append(cur)
        return docs

    src_docs = split_docs(src_path)
    tgt_docs = split_docs(tgt_path)
    if len(src_docs) != len(tgt_docs):
        raise DataError(
            f"document count mismatch: {len(src_docs)} in {src_path}, "
            f"{len(tgt_docs)} in {tgt_path}"
        )
    documents = []
    for idx, (src_sents, tgt_sents) in enumerate(zip(src_docs, tgt_docs)):
        doc_id = f"doc{idx:05d}"
        if len(src_sents) != len(tgt_sents):
            raise DataError(
                f"document {doc_id}: {len(src_sents)} source sentences vs "
                f"{len(tgt_sents)} target sentences"
            )
        documents.append(ParallelDocument(doc_id, tuple(zip(src_sents, tgt_sents))))
    return ParallelCorpus(tuple(documents))


def load_corpus(path, fmt: str = "jsonl", tgt_path=None) -> ParallelCorpus:
    if fmt == "jsonl":
        return load_jsonl_corpus(path)
    if fmt == "text":
        if tgt_path is None:
            raise DataError("text format needs both a source and a target file")
        return load_text_corpus(path, tgt_path)
    raise DataError(f"unknown corpus format {fmt!r}")


def write_jsonl_corpus(corpus: ParallelCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus.documents:
            f.write(
                json.dumps(
                    {"doc_id": doc.doc_id, "pairs": [list(p) for p in doc.pairs]},
                    sort_keys=True,
                    ensure_ascii=True,
                )
            )
            f.write("\n")


def load_source_documents(path, doc_separator: str = "") -> list[list[str]]:
    """Monolingual side of the text format: one sentence per line, documents
    separated by blank (or ``doc_separator``) lines."""
    docs: list[list[str]] = []
    cur: list[str] = []
    with _open_text(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if line == doc_separator:
                if cur:
                    docs.append(cur)
                    cur = []
            else:
                cur.append(line)
    if cur:
        docs.append(cur)
    if not docs:
        raise DataError(f"{path}: no documents found")
    return docs


@dataclass(frozen=True)
class TranslationExample:
    """One current sentence pair plus its (possibly empty) context windows.

    All fields hold token ids. Context tuples are ordered oldest first, so
    element -1 is the sentence immediately before the current one.
    """

    src: tuple[int, ...]
    tgt: tuple[int, ...]
    src_context: tuple[tuple[int, ...], ...] = field(default=())
    tgt_context: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "src", tuple(self.src))
        object.__setattr__(self, "tgt", tuple(self.tgt))
        object.__setattr__(
            self, "src_context", tuple(tuple(c) for c in self.src_context)
        )
        object.__setattr__(
            self, "tgt_context", tuple(tuple(c) for c in self.tgt_context)
        )

    @property
    def src_ctx_size(self) -> int:
        return len(self.src_context)

    @property
    def tgt_ctx_size(self) -> int:
        return len(self.tgt_context)

    def without_context(self) -> "TranslationExample":
        return TranslationExample(src=self.src, tgt=self.tgt)


def flatten_with_context(
    context: tuple[tuple[int, ...], ...], current: tuple[int, ...]
) -> list[int]:
    """c1 <brk> c2 ... <brk> ck <sep> current; just the sentence when k=0."""
    if not context:
        return list(current)
    out: list[int] = []
    for j, sent in enumerate(context):
        if j > 0:
            out.append(BRK_ID)
        out.extend(sent)
    out.append(SEP_ID)
    out.extend(current)
    return out


def assemble_example(
    doc: ParallelDocument,
    i: int,
    k_src: int,
    k_tgt: int,
    tok: Tokenizer,
) -> TranslationExample:
    """Build the example for sentence i of a document.

    Context windows take the k sentences preceding i (fewer near the start
    of the document, never sentence i itself or anything after it).
    """
    if not 0 <= i < len(doc):
        raise DataError(f"sentence index {i} out of range for {doc.doc_id!r}")
    if k_src < 0 or k_tgt < 0:
        raise DataError("context sizes must be non-negative")
    src, tgt = doc.pairs[i]
    lo_src = max(0, i - k_src)
    lo_tgt = max(0, i - k_tgt)
    return TranslationExample(
        src=tuple(tok.encode(src)),
        tgt=tuple(tok.encode(tgt)),
        src_context=tuple(tuple(tok.encode(s)) for s, _ in doc.pairs[lo_src:i]),
        tgt_context=tuple(tuple(tok.encode(t)) for _, t in doc.pairs[lo_tgt:i]),
    )
