"""Corpus ingestion: tokenization, entity matching, vocabularies, loaders.

Articles are truncated to their first paragraph, every token position
carries a lowercased word id, a capitalization flag, and an optional
entity id from maximal-interval lexicon matching. Word ids are assigned
deterministically (count descending, then lexicographic) so identical
inputs always produce identical encodings.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

OOV_ID = 0
OOV_WORD = "<oov>"
# Reserved separator pseudo-word; sorts after every real token because its
# corpus count is zero, and the tokenizer can never produce it.
SEP_WORD = "\x1f"

_TOKEN_RE = re.compile(r"[^\W_]+|\S", re.UNICODE)


class CorpusFormatError(ValueError):
    """Raised for malformed input files; message carries the line number."""


def tokenize(text: str) -> tuple[list[str], list[int]]:
    """Split text into lowercased tokens plus initial-capital flags.

    Tokens are maximal alphanumeric runs; every other non-space character
    stands alone. The caps flag records whether the original token started
    with an uppercase letter.
    """
    tokens: list[str] = []
    caps: list[int] = []
    for m in _TOKEN_RE.finditer(text):
        raw = m.group(0)
        tokens.append(raw.lower())
        caps.append(1 if raw[0].isupper() else 0)
    return tokens, caps


def first_paragraph(raw_article: str) -> str:
    """Text before the first blank line (the whole text if there is none)."""
    lines = raw_article.split("\n")
    kept: list[str] = []
    for line in lines:
        if kept and not line.strip():
            break
        if line.strip():
            kept.append(line)
    return "\n".join(kept)


@dataclass(frozen=True)
class Entity:
    id: int
    surface: tuple[str, ...]  # lowercased tokens
    display: str

    def __post_init__(self):
        if not self.surface:
            raise ValueError(f"entity {self.id} ({self.display!r}) has an empty surface")


class Lexicon:
    """Surface-form index over entities for maximal-interval matching.

    When several entities share a lowercased surface, the lowest id wins
    and the duplicates are recorded in ``ambiguous``.
    """

    def __init__(self, entities: list[Entity]):
        self.by_surface: dict[tuple[str, ...], int] = {}
        self.ambiguous: list[int] = []
        lengths: dict[str, set[int]] = {}
        for ent in entities:
            if ent.surface in self.by_surface:
                self.ambiguous.append(ent.id)
                continue
            self.by_surface[ent.surface] = ent.id
            lengths.setdefault(ent.surface[0], set()).add(len(ent.surface))
        # candidate span lengths per first token, longest first
        self.lengths_by_first = {w: sorted(ls, reverse=True) for w, ls in lengths.items()}

    def lookup(self, surface: tuple[str, ...]) -> int | None:
        return self.by_surface.get(surface)


def match_entities(tokens: list[str], lexicon: Lexicon) -> list[tuple[int, int, int]]:
    """Maximal, non-overlapping entity spans as (start, end, entity_id).

    Matching is case-insensitive (tokens are expected lowercased already);
    overlaps are resolved leftmost-longest: at each position the longest
    lexicon surface starting there wins and the scan resumes after it.
    """
    spans: list[tuple[int, int, int]] = []
    n = len(tokens)
    i = 0
    while i < n:
        lengths = lexicon.lengths_by_first.get(tokens[i])
        if lengths:
            for m in lengths:
                if i + m > n:
                    continue
                eid = lexicon.lookup(tuple(tokens[i : i + m]))
                if eid is not None:
                    spans.append((i, i + m, eid))
                    i += m
                    break
            else:
                i += 1
        else:
            i += 1
    return spans


@dataclass
class EncodedSequence:
    """Aligned word ids, capitalization flags and entity ids per position."""

    words: np.ndarray
    caps: np.ndarray
    entities: np.ndarray  # -1 where no entity covers the position

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.int64)
        self.caps = np.asarray(self.caps, dtype=np.int64)
        self.entities = np.asarray(self.entities, dtype=np.int64)
        if not (len(self.words) == len(self.caps) == len(self.entities)):
            raise ValueError(
                f"misaligned sequence: {len(self.words)} words, "
                f"{len(self.caps)} caps, {len(self.entities)} entities"
            )

    def __len__(self) -> int:
        return len(self.words)

    def entity_ids(self) -> list[int]:
        """Distinct entity ids present, ascending."""
        present = self.entities[self.entities >= 0]
        return sorted(set(present.tolist()))


@dataclass
class Article:
    id: int
    title: str
    title_entity: int | None
    tokens: EncodedSequence


@dataclass
class QAPair:
    question: EncodedSequence
    answers: tuple[int, ...]
    category: str | None = None
    text: str = ""

    def __post_init__(self):
        if not self.answers:
            raise ValueError("QA pair needs at least one answer")


class Vocabulary:
    """Word-id assignment plus the full/small entity answer sets.

    Id 0 is the out-of-vocabulary id; real words get 1..n ordered by count
    descending then lexicographic. A reserved separator pseudo-word with
    count zero always sorts last.
    """

    def __init__(self, counts: Counter, entity_counts: np.ndarray, min_count: int):
        if min_count < 1:
            raise ValueError(f"min_count must be >= 1, got {min_count}")
        self.counts = Counter(counts)
        self.min_count = min_count
        ordered = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        self.id_to_word = [OOV_WORD] + [w for w, _ in ordered] + [SEP_WORD]
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word) if i != OOV_ID}
        self.sep_id = len(self.id_to_word) - 1
        self.entity_counts = np.asarray(entity_counts, dtype=np.int64)
        self.entity_subset_full = np.arange(len(entity_counts), dtype=np.int64)
        self.entity_subset_small = np.flatnonzero(self.entity_counts >= min_count).astype(np.int64)

    @property
    def n_rows(self) -> int:
        """Number of embedding rows: OOV + words + separator."""
        return len(self.id_to_word)

    @property
    def n_words(self) -> int:
        return len(self.counts)

    def encode_words(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.word_to_id.get(t, OOV_ID) for t in tokens], dtype=np.int64)


@dataclass
class Corpus:
    """Immutable-after-construction container shared by both pipeline stages."""

    entities: list[Entity]
    lexicon: Lexicon
    articles: list[Article]
    qa: dict[str, list[QAPair]]
    vocab: Vocabulary
    dropped_pairs: dict[str, int] = field(default_factory=dict)
    # inverted indices, built once
    articles_by_entity: dict[int, list[int]] = field(default_factory=dict)
    articles_by_title: dict[int, list[int]] = field(default_factory=dict)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def entity_display(self, eid: int) -> str:
        return self.entities[eid].display

    def article_entity_set(self, article_id: int) -> set[int]:
        return set(self.articles[article_id].tokens.entity_ids())


def _encode(tokens: list[str], caps: list[int], vocab: Vocabulary, lexicon: Lexicon) -> EncodedSequence:
    ents = np.full(len(tokens), -1, dtype=np.int64)
    for start, end, eid in match_entities(tokens, lexicon):
        ents[start:end] = eid
    return EncodedSequence(vocab.encode_words(tokens), np.asarray(caps, dtype=np.int64), ents)


def build_corpus(
    entity_displays: list[str],
    raw_articles: list[tuple[str, str]],
    raw_qa: dict[str, list[tuple[str, list[str], str | None]]],
    min_count: int = 10,
) -> Corpus:
    """Assemble a fully encoded corpus from parsed raw pieces.

    ``raw_articles`` holds (title, body) with the body already reduced to
    whatever text should be encoded; ``raw_qa`` maps split name to
    (question text, answer strings, optional category). QA pairs whose
    answers cannot be resolved against the entity list are dropped and
    counted per split.
    """
    entities: list[Entity] = []
    for display in entity_displays:
        toks, _ = tokenize(display)
        if not toks:
            raise ValueError(f"entity {display!r} tokenizes to nothing")
        entities.append(Entity(len(entities), tuple(toks), display))
    lexicon = Lexicon(entities)
    if lexicon.ambiguous:
        logger.info("lexicon: %d duplicate surfaces folded onto lowest ids", len(lexicon.ambiguous))

    article_tokens = [tokenize(first_paragraph(body)) for _, body in raw_articles]
    qa_tokens = {split: [tokenize(q) for q, _, _ in pairs] for split, pairs in raw_qa.items()}

    counts: Counter = Counter()
    for toks, _ in article_tokens:
        counts.update(toks)
    for split_tokens in qa_tokens.values():
        for toks, _ in split_tokens:
            counts.update(toks)

    entity_counts = np.zeros(len(entities), dtype=np.int64)

    def count_spans(tokens: list[str]) -> None:
        for _, _, eid in match_entities(tokens, lexicon):
            entity_counts[eid] += 1

    for toks, _ in article_tokens:
        count_spans(toks)
    for split_tokens in qa_tokens.values():
        for toks, _ in split_tokens:
            count_spans(toks)

    vocab = Vocabulary(counts, entity_counts, min_count)

    articles: list[Article] = []
    for art_id, ((title, _), (toks, caps)) in enumerate(zip(raw_articles, article_tokens)):
        if not toks:
            raise ValueError(f"article {art_id} ({title!r}) has an empty first paragraph")
        title_toks, _ = tokenize(title)
        title_entity = lexicon.lookup(tuple(title_toks))
        articles.append(Article(art_id, title, title_entity, _encode(toks, caps, vocab, lexicon)))

    qa: dict[str, list[QAPair]] = {}
    dropped: dict[str, int] = {}
    for split, pairs in raw_qa.items():
        kept: list[QAPair] = []
        n_dropped = 0
        for (qtext, answer_strings, category), (toks, caps) in zip(pairs, qa_tokens[split]):
            answer_ids = []
            ok = True
            for ans in answer_strings:
                ans_toks, _ = tokenize(ans)
                eid = lexicon.lookup(tuple(ans_toks))
                if eid is None:
                    ok = False
                    break
                answer_ids.append(eid)
            if not ok or not answer_ids:
                n_dropped += 1
                logger.debug("dropping QA pair with unresolvable answer: %r", qtext)
                continue
            kept.append(
                QAPair(
                    question=_encode(toks, caps, vocab, lexicon),
                    answers=tuple(sorted(set(answer_ids))),
                    category=category,
                    text=qtext,
                )
            )
        qa[split] = kept
        dropped[split] = n_dropped
        if n_dropped:
            logger.info("split %s: dropped %d QA pairs with unknown answers", split, n_dropped)

    articles_by_entity: dict[int, list[int]] = {}
    articles_by_title: dict[int, list[int]] = {}
    for art in articles:
        for eid in art.tokens.entity_ids():
            articles_by_entity.setdefault(eid, []).append(art.id)
        if art.title_entity is not None:
            articles_by_title.setdefault(art.title_entity, []).append(art.id)

    return Corpus(
        entities=entities,
        lexicon=lexicon,
        articles=articles,
        qa=qa,
        vocab=vocab,
        dropped_pairs=dropped,
        articles_by_entity=articles_by_entity,
        articles_by_title=articles_by_title,
    )


def build_vocab(corpus: Corpus, min_count: int) -> Vocabulary:
    """Re-derive the vocabulary at a different frequency threshold.

    Pure in (corpus, min_count): word ids are recomputed from the stored
    counts with the same ordering rule, so repeated calls are identical.
    """
    return Vocabulary(corpus.vocab.counts, corpus.vocab.entity_counts, min_count)


# ---------------------------------------------------------------------------
# file formats


def _read_entity_file(path: Path) -> list[str]:
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            out.append(line)
    return out


def _read_articles_text(path: Path, max_articles: int | None) -> list[tuple[str, str]]:
    """Blank-line separated records; first line is the title, rest is body."""
    records: list[tuple[str, str]] = []
    block: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines() + [""]:
        if line.strip():
            block.append(line)
            continue
        if block:
            records.append((block[0].strip(), "\n".join(block[1:])))
            block = []
            if max_articles is not None and len(records) >= max_articles:
                break
    return records


def _read_articles_jsonl(path: Path, max_articles: int | None) -> list[tuple[str, str]]:
    records: list[tuple[str, str]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        if "title" not in obj or "text" not in obj:
            raise CorpusFormatError(f"{path}:{lineno}: record needs 'title' and 'text' keys")
        records.append((str(obj["title"]), str(obj["text"])))
        if max_articles is not None and len(records) >= max_articles:
            break
    return records


def _read_qa_file(path: Path, max_questions: int | None) -> list[tuple[str, list[str], str | None]]:
    """Tab-separated: question TAB answer1|answer2[ TAB category ]."""
    pairs: list[tuple[str, list[str], str | None]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) not in (2, 3):
            raise CorpusFormatError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(fields)}")
        question, answer_field = fields[0], fields[1]
        if not question.strip() or not answer_field.strip():
            raise CorpusFormatError(f"{path}:{lineno}: empty question or answer field")
        answers = [a.strip() for a in answer_field.split("|") if a.strip()]
        if not answers:
            raise CorpusFormatError(f"{path}:{lineno}: no answers")
        category = fields[2].strip() if len(fields) == 3 and fields[2].strip() else None
        pairs.append((question, answers, category))
        if max_questions is not None and len(pairs) >= max_questions:
            break
    return pairs


def load_corpus(
    entity_file: str | Path,
    article_file: str | Path,
    qa_files: dict[str, str | Path],
    min_count: int = 10,
    max_articles: int | None = None,
    max_questions: int | None = None,
) -> Corpus:
    """Load and encode a corpus from the standard on-disk formats.

    ``qa_files`` maps split names ('train', 'dev', 'test') to file paths.
    Article files ending in .jsonl use the {"id","title","text"} record
    form; anything else is parsed as blank-line separated text records.
    """
    entity_path = Path(entity_file)
    article_path = Path(article_file)
    displays = _read_entity_file(entity_path)
    if article_path.suffix == ".jsonl":
        raw_articles = _read_articles_jsonl(article_path, max_articles)
    else:
        raw_articles = _read_articles_text(article_path, max_articles)
    raw_qa = {split: _read_qa_file(Path(p), max_questions) for split, p in qa_files.items()}
    return build_corpus(displays, raw_articles, raw_qa, min_count=min_count)


def load_corpus_dir(path: str | Path, min_count: int | None = None, **caps) -> Corpus:
    """Load a corpus directory written by `synth` or `ingest`.

    Expects entities.txt, articles.txt or articles.jsonl, and qa_<split>.tsv
    files; meta.json may pin min_count.
    """
    root = Path(path)
    meta_path = root / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    if min_count is None:
        min_count = int(meta.get("min_count", 10))
    article_file = root / "articles.jsonl"
    if not article_file.exists():
        article_file = root / "articles.txt"
    qa_files = {}
    for qa_path in sorted(root.glob("qa_*.tsv")):
        qa_files[qa_path.stem[3:]] = qa_path
    if not qa_files:
        raise CorpusFormatError(f"{root}: no qa_<split>.tsv files found")
    return load_corpus(root / "entities.txt", article_file, qa_files, min_count=min_count, **caps)


def write_corpus_dir(
    path: str | Path,
    entity_displays: list[str],
    raw_articles: list[tuple[str, str]],
    raw_qa: dict[str, list[tuple[str, list[str], str | None]]],
    meta: dict | None = None,
) -> Path:
    """Write raw corpus files in the standard formats."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "entities.txt").write_text("\n".join(entity_displays) + "\n", encoding="utf-8")
    blocks = [f"{title}\n{body}" for title, body in raw_articles]
    (root / "articles.txt").write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    for split, pairs in raw_qa.items():
        lines = []
        for question, answers, category in pairs:
            fields = [question, "|".join(answers)]
            if category is not None:
                fields.append(category)
            lines.append("\t".join(fields))
        (root / f"qa_{split}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if meta is not None:
        (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return root
