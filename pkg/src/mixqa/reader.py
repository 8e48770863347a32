"""The comprehension model: a gated mixture of two answer distributions.

For a question/context pair the model produces
  * p_att  — attention mass summed over each context entity's positions,
  * p_vocab — a softmax over fixed entity vectors built from surface
    embeddings, usable even when the answer never occurs in the context,
and blends them with a sigmoid gate g: p(e) = (1-g) p_att(e) + g p_vocab(e).

Entity ids inside a pair are anonymized: remapped injectively onto a small
set of embedding columns, fresh per training pair, frozen per evaluation
pair. Vocabulary entities outside the current pair's map share one
reserved column.

Variants: 'v' vocabulary only, 'a' attention only, 'av' the mixture over
all entities, 'asv' the mixture with the vocabulary part restricted to
frequent entities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor, constant
from .corpus import Corpus, EncodedSequence, QAPair
from .layers import BiGru, uniform_init
from .optim import Adam
from .rngs import substream

logger = logging.getLogger(__name__)

VARIANTS = ("v", "a", "av", "asv")


@dataclass
class ReaderConfig:
    d_w: int = 100
    d_e: int = 100
    hidden: int = 128
    n_e: int = 600
    M: int = 10
    variant: str = "asv"
    vocab_choice: str = "auto"  # auto | full | small
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 3
    evals_per_epoch: int = 2
    seed: int = 1
    shuffle_articles: bool = True
    anonymize: bool = True
    loss_floor: float = 1e-12

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.vocab_choice not in ("auto", "full", "small"):
            raise ValueError(f"bad vocab_choice {self.vocab_choice!r}")

    def resolved_vocab_choice(self) -> str:
        if self.vocab_choice != "auto":
            return self.vocab_choice
        return "small" if self.variant == "asv" else "full"


class AnonymizationMap:
    """Injective per-pair map from entity ids to embedding columns."""

    def __init__(self, mapping: dict[int, int], reserved_col: int, identity: bool = False):
        self.mapping = mapping
        self.reserved_col = reserved_col
        self.is_identity = identity

    @classmethod
    def random(cls, entity_ids, n_e: int, rng: np.random.Generator) -> "AnonymizationMap":
        ids = sorted(set(int(e) for e in entity_ids))
        if len(ids) > n_e:
            raise ValueError(f"pair has {len(ids)} entities but only {n_e} anonymized columns")
        cols = rng.choice(n_e, size=len(ids), replace=False)
        return cls({e: int(c) for e, c in zip(ids, cols)}, reserved_col=n_e)

    @classmethod
    def identity(cls, n_entities: int) -> "AnonymizationMap":
        return cls({}, reserved_col=n_entities, identity=True)

    def column(self, eid: int) -> int:
        if self.is_identity and 0 <= eid < self.reserved_col:
            return eid
        return self.mapping.get(eid, self.reserved_col)

    def columns(self, ids) -> np.ndarray:
        if self.is_identity:
            return np.asarray(ids, dtype=np.intp)
        return np.array([self.mapping.get(int(e), self.reserved_col) for e in ids], dtype=np.intp)

    def covers(self, ids) -> bool:
        if self.is_identity:
            return True
        return all(int(e) in self.mapping for e in ids)


@dataclass
class ContextBundle:
    """Up to M articles joined by a separator that carries no entity id."""

    article_ids: list[int]
    seq: EncodedSequence | None  # None when no articles were retrieved

    def __len__(self) -> int:
        return len(self.article_ids)


def bundle_context(corpus: Corpus, article_ids: list[int]) -> ContextBundle:
    if not article_ids:
        return ContextBundle([], None)
    sep_id = corpus.vocab.sep_id
    words, caps, ents = [], [], []
    for k, aid in enumerate(article_ids):
        seq = corpus.articles[aid].tokens
        if k > 0:
            words.append(np.array([sep_id]))
            caps.append(np.zeros(1, dtype=np.int64))
            ents.append(np.full(1, -1, dtype=np.int64))
        words.append(seq.words)
        caps.append(seq.caps)
        ents.append(seq.entities)
    joined = EncodedSequence(np.concatenate(words), np.concatenate(caps), np.concatenate(ents))
    return ContextBundle(list(article_ids), joined)


@dataclass
class AnswerDistribution:
    """Mixture output with provenance for analysis dumps."""

    att_ids: np.ndarray
    p_att: np.ndarray
    vocab_ids: np.ndarray
    p_vocab: np.ndarray
    gate: float | None
    mixed_ids: np.ndarray
    mixed_p: np.ndarray
    att_empty: bool

    def top(self, k: int = 5) -> list[tuple[int, float]]:
        return [(int(e), float(p)) for e, p in zip(self.mixed_ids[:k], self.mixed_p[:k])]

    def top1(self) -> int:
        """Best entity id, ties broken toward the lowest id; -1 when empty."""
        return int(self.mixed_ids[0]) if self.mixed_ids.size else -1


class _EntityVectorMeta:
    """Frozen index arrays for building vocabulary entity vectors.

    Row e of the matrix is the sum of the word and caps embeddings of the
    entity's canonical surface tokens, concatenated with one entity
    embedding column.
    """

    def __init__(self, corpus: Corpus, subset_ids: np.ndarray):
        from .corpus import tokenize

        self.ids = np.asarray(subset_ids, dtype=np.int64)
        flat_words: list[int] = []
        flat_caps: list[int] = []
        lengths: list[int] = []
        for eid in self.ids:
            ent = corpus.entities[int(eid)]
            toks, caps = tokenize(ent.display)
            word_ids = corpus.vocab.encode_words([t.lower() for t in toks])
            flat_words.extend(int(w) for w in word_ids)
            flat_caps.extend(int(c) for c in caps)
            lengths.append(len(word_ids))
        self.flat_words = np.asarray(flat_words, dtype=np.intp)
        self.flat_caps = np.asarray(flat_caps, dtype=np.intp)
        self.lengths = np.asarray(lengths, dtype=np.intp)
        self.starts = np.concatenate([[0], np.cumsum(self.lengths)[:-1]]).astype(np.intp)
        # row index per entity id for fast answer lookup
        self.row_of = {int(e): i for i, e in enumerate(self.ids)}


def entity_vectors(W_w: Parameter, W_c: Parameter, W_e: Parameter, meta: _EntityVectorMeta, cols: np.ndarray) -> Tensor:
    """Stack V(e) rows: summed surface embeddings || entity column."""
    word_rows = W_w.values[meta.flat_words] + W_c.values[meta.flat_caps]
    word_part = np.add.reduceat(word_rows, meta.starts, axis=0)
    ent_part = W_e.values[cols]
    out_values = np.hstack([word_part, ent_part])
    d_w = W_w.values.shape[1]

    def push(g):
        g_words = np.repeat(g[:, :d_w], meta.lengths, axis=0)
        np.add.at(W_w.grad, meta.flat_words, g_words)
        np.add.at(W_c.grad, meta.flat_caps, g_words)
        np.add.at(W_e.grad, cols, g[:, d_w:])

    return Tensor(out_values, (W_w, W_c, W_e), push)


@dataclass
class ForwardResult:
    v: Tensor
    u: Tensor
    scores: Tensor | None  # per-position attention, None for empty context
    att_ids: np.ndarray
    p_att: Tensor | None
    vocab_meta: _EntityVectorMeta | None
    vocab_logits: Tensor | None
    p_vocab: Tensor | None
    gate: Tensor | None
    att_empty: bool


class ReaderModel:
    """All trainable state of the comprehension network."""

    def __init__(self, config: ReaderConfig, corpus: Corpus, rng: np.random.Generator | None = None):
        self.config = config
        self.corpus = corpus
        if rng is None:
            rng = substream(config.seed, "init")
        d_w, d_e, h = config.d_w, config.d_e, config.hidden
        n_rows = corpus.vocab.n_rows
        self.n_entity_cols = (config.n_e if config.anonymize else corpus.n_entities) + 1
        self.W_w = Parameter("W_w", uniform_init(rng, (n_rows, d_w), 0.05))
        self.W_c = Parameter("W_c", uniform_init(rng, (2, d_w), 0.05))
        self.W_e = Parameter("W_e", uniform_init(rng, (self.n_entity_cols, d_e), 0.05))
        self.q_bigru = BiGru(d_w + d_e, h, rng, name="q")
        self.c_bigru = BiGru(d_w + d_e, h, rng, name="c")
        self.proj = Parameter("proj", uniform_init(rng, (d_w + d_e, 2 * h), 1.0 / np.sqrt(2 * h)))
        if config.variant in ("av", "asv"):
            self.w_g = Parameter("w_g", np.zeros(2))
            self.b_g = Parameter("b_g", np.zeros(()))
        else:
            self.w_g = None
            self.b_g = None
        choice = config.resolved_vocab_choice()
        if config.variant == "a":
            self.vocab_meta = None
        else:
            subset = corpus.vocab.entity_subset_small if choice == "small" else corpus.vocab.entity_subset_full
            self.vocab_meta = _EntityVectorMeta(corpus, subset)

    def parameters(self) -> list[Parameter]:
        params = [self.W_w, self.W_c, self.W_e]
        params += self.q_bigru.parameters() + self.c_bigru.parameters()
        params += [self.proj]
        if self.w_g is not None:
            params += [self.w_g, self.b_g]
        return params

    def fresh_anon_map(self, q_seq: EncodedSequence, bundle: ContextBundle, rng: np.random.Generator) -> AnonymizationMap:
        if not self.config.anonymize:
            return AnonymizationMap.identity(self.corpus.n_entities)
        ids = set(q_seq.entity_ids())
        if bundle.seq is not None:
            ids.update(bundle.seq.entity_ids())
        return AnonymizationMap.random(ids, self.config.n_e, rng)

    # ---- forward pieces -------------------------------------------------

    def embed_sequence(self, seq: EncodedSequence, anon_map: AnonymizationMap) -> Tensor:
        """Per-position embeddings: word + caps embedding || entity column.

        Positions without an entity get an exactly-zero entity part.
        """
        present = seq.entities[seq.entities >= 0]
        if not anon_map.covers(present):
            raise ValueError("anonymization map does not cover the sequence's entities")
        word_part = ad.add(ad.gather_rows(self.W_w, seq.words), ad.gather_rows(self.W_c, seq.caps))
        mask = (seq.entities >= 0).astype(np.float64)
        cols = np.where(seq.entities >= 0, anon_map.columns(np.maximum(seq.entities, 0)), 0)
        ent_part = ad.gather_rows(self.W_e, cols, mask=mask)
        return ad.concat([word_part, ent_part], axis=1)

    def encode_question(self, seq: EncodedSequence, anon_map: AnonymizationMap) -> Tensor:
        if len(seq) == 0:
            raise ValueError("cannot encode an empty question")
        _, v = self.q_bigru(self.embed_sequence(seq, anon_map))
        return v

    def forward(self, q_seq: EncodedSequence, bundle: ContextBundle, anon_map: AnonymizationMap) -> ForwardResult:
        cfg = self.config
        v = self.encode_question(q_seq, anon_map)

        att_ids = np.array([], dtype=np.int64)
        scores = None
        p_att = None
        if bundle.seq is not None and len(bundle.seq) > 0:
            H_c, _ = self.c_bigru(self.embed_sequence(bundle.seq, anon_map))
            scores = ad.softmax(ad.matmul(H_c, v))
            u = ad.matmul(scores, H_c)
            ctx_entities = bundle.seq.entity_ids()
            if ctx_entities:
                att_ids = np.asarray(ctx_entities, dtype=np.int64)
                slot_of = {e: i for i, e in enumerate(ctx_entities)}
                slots = np.array([slot_of.get(int(e), -1) for e in bundle.seq.entities], dtype=np.intp)
                raw = ad.scatter_sum(scores, slots, len(ctx_entities))
                p_att = ad.mul(raw, ad.reciprocal(ad.sum_all(raw)))
        else:
            u = constant(np.zeros(2 * cfg.hidden))

        vocab_logits = None
        p_vocab = None
        if self.vocab_meta is not None:
            cols = anon_map.columns(self.vocab_meta.ids)
            V = entity_vectors(self.W_w, self.W_c, self.W_e, self.vocab_meta, cols)
            vocab_logits = ad.matmul(V, ad.matmul(self.proj, u))
            p_vocab = ad.softmax(vocab_logits)

        gate = None
        if self.w_g is not None:
            g0 = ad.stack_scalars([ad.dot(v, u), ad.max_reduce(vocab_logits)])
            gate = ad.sigmoid(ad.add(ad.dot(self.w_g, g0), self.b_g))

        return ForwardResult(
            v=v,
            u=u,
            scores=scores,
            att_ids=att_ids,
            p_att=p_att,
            vocab_meta=self.vocab_meta,
            vocab_logits=vocab_logits,
            p_vocab=p_vocab,
            gate=gate,
            att_empty=p_att is None,
        )

    # ---- outputs ---------------------------------------------------------

    def answer_mass(self, result: ForwardResult, answers) -> Tensor | None:
        """Sum of mixture probability over the answer set, as a graph node.

        Returns None when no gradient path exists (attention-only variant
        with an entity-free context).
        """
        att_mass = None
        if result.p_att is not None:
            att_rows = np.flatnonzero(np.isin(result.att_ids, list(answers)))
            att_mass = ad.gather_sum(result.p_att, att_rows)
        vocab_mass = None
        if result.p_vocab is not None:
            rows = [result.vocab_meta.row_of[a] for a in answers if a in result.vocab_meta.row_of]
            vocab_mass = ad.gather_sum(result.p_vocab, np.asarray(rows, dtype=np.intp))

        if self.config.variant == "a":
            return att_mass
        if self.config.variant == "v":
            return vocab_mass
        if att_mass is None:  # entity-free context: fall back to the vocabulary part
            return vocab_mass
        one_minus_g = ad.add(constant(1.0), ad.scale(result.gate, -1.0))
        return ad.add(ad.mul(one_minus_g, att_mass), ad.mul(result.gate, vocab_mass))

    def loss(self, result: ForwardResult, answers) -> Tensor | None:
        """Negative log of the summed answer probability, floored for safety."""
        mass = self.answer_mass(result, answers)
        if mass is None:
            return None
        return ad.scale(ad.log(mass, floor=self.config.loss_floor), -1.0)

    def distribution(self, result: ForwardResult) -> AnswerDistribution:
        """Concrete mixture over the candidate union, ranked for prediction."""
        cfg = self.config
        att_ids = result.att_ids
        p_att = result.p_att.values if result.p_att is not None else np.array([])
        vocab_ids = result.vocab_meta.ids if result.vocab_meta is not None else np.array([], dtype=np.int64)
        p_vocab = result.p_vocab.values if result.p_vocab is not None else np.array([])
        g = float(result.gate.values) if result.gate is not None else None

        if cfg.variant == "a":
            ids, probs = att_ids, p_att
        elif cfg.variant == "v" or result.att_empty:
            ids, probs = vocab_ids, p_vocab
        else:
            ids = np.concatenate([att_ids, vocab_ids])
            probs = np.concatenate([(1.0 - g) * p_att, g * p_vocab])
        if ids.size:
            uniq, inverse = np.unique(ids, return_inverse=True)
            mass = np.zeros(uniq.size)
            np.add.at(mass, inverse, probs)
            order = np.lexsort((uniq, -mass))
            mixed_ids, mixed_p = uniq[order], mass[order]
        else:
            mixed_ids, mixed_p = np.array([], dtype=np.int64), np.array([])
        return AnswerDistribution(
            att_ids=att_ids,
            p_att=p_att,
            vocab_ids=vocab_ids,
            p_vocab=p_vocab,
            gate=g,
            mixed_ids=mixed_ids,
            mixed_p=mixed_p,
            att_empty=result.att_empty,
        )

    def predict(self, q_seq: EncodedSequence, bundle: ContextBundle, anon_map: AnonymizationMap) -> AnswerDistribution:
        return self.distribution(self.forward(q_seq, bundle, anon_map))

    # ---- persistence -----------------------------------------------------

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.values.copy() for p in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.values[...] = snap[p.name]


@dataclass
class TrainStats:
    dev_history: list[tuple[int, float]] = field(default_factory=list)
    best_dev: float = 0.0
    best_at: int = 0
    skipped_empty: int = 0
    instances_seen: int = 0
    stopped_early: bool = False


def evaluate_hits(
    model: ReaderModel,
    corpus: Corpus,
    pairs: list[QAPair],
    retrieved: list[list[int]],
    seed: int,
) -> float:
    """hits@1 with per-pair frozen anonymization maps."""
    if not pairs:
        return 0.0
    hits = 0
    for idx, (pair, article_ids) in enumerate(zip(pairs, retrieved)):
        bundle = bundle_context(corpus, article_ids)
        anon = model.fresh_anon_map(pair.question, bundle, substream(seed, "eval", idx))
        dist = model.predict(pair.question, bundle, anon)
        if dist.top1() in pair.answers:
            hits += 1
    return hits / len(pairs)


def train_reader(
    corpus: Corpus,
    retriever,
    config: ReaderConfig,
    dev_split: str = "dev",
    log_every: int | None = None,
) -> tuple[ReaderModel, TrainStats]:
    """Train with shuffled articles, fresh anonymization maps, and early stopping.

    ``retriever`` maps an EncodedSequence to a ranked list of article ids;
    retrieval is resolved once per pair up front. Gradients accumulate over
    single instances and an Adam step fires every ``batch_size`` instances.
    Dev hits@1 is checked ``evals_per_epoch`` times per epoch; training
    stops after ``patience`` evaluations without improvement and the best
    parameters are restored.
    """
    model = ReaderModel(config, corpus)
    optimizer = Adam(model.parameters(), lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    stats = TrainStats()

    train_pairs = corpus.qa.get("train", [])
    dev_pairs = corpus.qa.get(dev_split, [])
    train_retrieved = [retriever(p.question) for p in train_pairs]
    dev_retrieved = [retriever(p.question) for p in dev_pairs]

    best = model.snapshot()
    evals_since_best = 0
    eval_stride = max(1, len(train_pairs) // max(1, config.evals_per_epoch))
    pending = 0
    inv_batch = 1.0 / config.batch_size

    def maybe_eval(step: int) -> bool:
        nonlocal best, evals_since_best
        if not dev_pairs:
            return False
        score = evaluate_hits(model, corpus, dev_pairs, dev_retrieved, config.seed)
        stats.dev_history.append((step, score))
        if log_every is not None:
            logger.info("dev hits@1 %.4f at instance %d", score, step)
        if score > stats.best_dev:
            stats.best_dev = score
            stats.best_at = step
            best = model.snapshot()
            evals_since_best = 0
        else:
            evals_since_best += 1
        return evals_since_best >= config.patience

    stop = False
    for epoch in range(config.max_epochs):
        order_rng = substream(config.seed, "order", epoch)
        shuffle_rng = substream(config.seed, "shuffle", epoch)
        anon_rng = substream(config.seed, "anon", epoch)
        order = order_rng.permutation(len(train_pairs))
        for pos, idx in enumerate(order):
            pair = train_pairs[idx]
            article_ids = list(train_retrieved[idx])
            if config.shuffle_articles and len(article_ids) > 1:
                shuffle_rng.shuffle(article_ids)
            if not article_ids and config.variant == "a":
                stats.skipped_empty += 1
                continue
            bundle = bundle_context(corpus, article_ids)
            anon = model.fresh_anon_map(pair.question, bundle, anon_rng)
            result = model.forward(pair.question, bundle, anon)
            loss = model.loss(result, pair.answers)
            if loss is None:
                stats.skipped_empty += 1
                continue
            ad.scale(loss, inv_batch).backward()
            pending += 1
            stats.instances_seen += 1
            if pending >= config.batch_size:
                optimizer.step()
                optimizer.zero_grad()
                pending = 0
            if (pos + 1) % eval_stride == 0:
                if maybe_eval(stats.instances_seen):
                    stop = True
                    break
        if stop:
            stats.stopped_early = True
            break
    if pending:
        optimizer.step()
        optimizer.zero_grad()
    if dev_pairs:
        model.restore(best)
    return model, stats
