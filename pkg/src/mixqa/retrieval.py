"""Candidate retrieval: entity matching, a title heuristic, and learned rankers.

Stage r0 collects every article sharing at least one entity with the
question (case-insensitive, via the corpus entity annotations) and picks M
at random. Stage r1 scores those candidates with a large title-match bonus
plus the matched-entity count. Stage R2 rescores the r0 pool with a
word-level attention model: both sequences run through BiGRUs, the
L2-normalized question vector is compared against every normalized article
state, and the per-position matches are raised to an even power and summed,
so a few strong token matches dominate many weak ones. Two inner-product
dual encoders serve as baselines.

Ranker training labels come from distant supervision: questions whose
answers are movies point at the answer articles; questions that mention a
movie point at that movie's article.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .corpus import Corpus, EncodedSequence, QAPair
from .layers import BiGru, uniform_init
from .optim import Adam
from .rngs import substream

logger = logging.getLogger(__name__)

# dominates any achievable matched-entity count, so title matches sort first
TITLE_BONUS = 10**6


@dataclass
class CandidateSet:
    question_entities: list[int]
    article_ids: list[int]  # ascending
    matched_counts: dict[int, int]  # article id -> distinct shared entities
    title_matches: set[int] = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.article_ids)


def candidates_r0(q_seq: EncodedSequence, corpus: Corpus) -> CandidateSet:
    """All articles sharing at least one entity with the question."""
    q_entities = q_seq.entity_ids()
    counts: dict[int, int] = {}
    titles: set[int] = set()
    for eid in q_entities:
        for aid in corpus.articles_by_entity.get(eid, ()):
            counts[aid] = counts.get(aid, 0) + 1
        for aid in corpus.articles_by_title.get(eid, ()):
            titles.add(aid)
    if not q_entities:
        logger.debug("question has no entities; empty candidate set")
    return CandidateSet(q_entities, sorted(counts), counts, titles)


def score_r1(cand: CandidateSet, article_id: int) -> float:
    """Title-match bonus plus number of matching entities."""
    bonus = TITLE_BONUS if article_id in cand.title_matches else 0
    return float(bonus + cand.matched_counts.get(article_id, 0))


def rank_r1(cand: CandidateSet) -> list[int]:
    return sorted(cand.article_ids, key=lambda aid: (-score_r1(cand, aid), aid))


def rank_r0(cand: CandidateSet, rng: np.random.Generator) -> list[int]:
    order = rng.permutation(len(cand.article_ids))
    return [cand.article_ids[i] for i in order]


# ---------------------------------------------------------------------------
# learned rankers


@dataclass
class RankerConfig:
    d_w: int = 100
    hidden: int = 128
    exponent: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    neg_ratio: int = 10
    max_steps: int = 2000
    eval_every: int = 250
    patience: int = 3
    seed: int = 1

    def __post_init__(self):
        if self.exponent < 1 or self.exponent % 2 != 0 and self.exponent != 1:
            raise ValueError(f"exponent must be 1 or a positive even integer, got {self.exponent}")


class RankerModel:
    """Word-level attention relevance scorer.

    Embeddings are word + capitalization only; entity ids are not used here
    so articles can be encoded without any per-pair remapping.
    """

    def __init__(self, config: RankerConfig, corpus: Corpus, rng: np.random.Generator | None = None):
        self.config = config
        self.corpus = corpus
        if rng is None:
            rng = substream(config.seed, "init")
        d_w, h = config.d_w, config.hidden
        self.W_w = Parameter("rk.W_w", uniform_init(rng, (corpus.vocab.n_rows, d_w), 0.05))
        self.W_c = Parameter("rk.W_c", uniform_init(rng, (2, d_w), 0.05))
        self.q_bigru = BiGru(d_w, h, rng, name="rk.q")
        self.a_bigru = BiGru(d_w, h, rng, name="rk.a")
        self.w = Parameter("rk.w", np.ones(()))
        self.b = Parameter("rk.b", np.zeros(()))
        self.w_out = Parameter("rk.w_out", np.ones(()))
        self.b_out = Parameter("rk.b_out", np.zeros(()))

    def parameters(self) -> list[Parameter]:
        return (
            [self.W_w, self.W_c]
            + self.q_bigru.parameters()
            + self.a_bigru.parameters()
            + [self.w, self.b, self.w_out, self.b_out]
        )

    def embed(self, seq: EncodedSequence) -> Tensor:
        return ad.add(ad.gather_rows(self.W_w, seq.words), ad.gather_rows(self.W_c, seq.caps))

    def question_vector(self, seq: EncodedSequence) -> Tensor:
        _, v = self.q_bigru(self.embed(seq))
        return v

    def article_states(self, seq: EncodedSequence) -> Tensor:
        H, _ = self.a_bigru(self.embed(seq))
        return H

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.values.copy() for p in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.values[...] = snap[p.name]


def wla_score(
    model: RankerModel,
    q_seq: EncodedSequence,
    art_seq: EncodedSequence,
    normalize: bool = True,
    exponent: int | None = None,
    v: Tensor | None = None,
) -> Tensor:
    """Sum over positions of the matched-and-powered query/token products.

    ``v`` lets callers reuse an already-encoded question across several
    articles within one graph.
    """
    d = model.config.exponent if exponent is None else exponent
    if v is None:
        v = model.question_vector(q_seq)
    H = model.article_states(art_seq)
    if normalize:
        v = ad.l2_normalize(v)
        H = ad.l2_normalize_rows(H)
    scaled = ad.add(ad.mul(v, model.w), model.b)
    terms = ad.matmul(H, scaled)
    return ad.sum_all(power_terms(terms, d))


def power_terms(terms: Tensor, d: int) -> Tensor:
    return terms if d == 1 else ad.power_int(terms, d)


def wla_logit(model: RankerModel, s: Tensor) -> Tensor:
    return ad.add(ad.mul(s, model.w_out), model.b_out)


def wla_prob(model: RankerModel, s: Tensor) -> Tensor:
    """Relevance probability via the learned scale and shift."""
    return ad.sigmoid(wla_logit(model, s))


class DualEncoder:
    """Inner-product baselines sharing the ranker's encoders.

    variant 'sum': the article vector is the plain sum of BiGRU states
    (equal to the attention scorer at exponent 1 with normalization off and
    unit scale). variant 'qfa': the article states are combined with
    softmax weights from a learned query-independent attention vector.
    """

    def __init__(self, base: RankerModel, variant: str, rng: np.random.Generator | None = None):
        if variant not in ("sum", "qfa"):
            raise ValueError(f"variant must be 'sum' or 'qfa', got {variant!r}")
        self.base = base
        self.variant = variant
        if rng is None:
            rng = substream(base.config.seed, "init", 1)
        h2 = 2 * base.config.hidden
        self.attn = Parameter("de.attn", uniform_init(rng, (h2,), 1.0 / np.sqrt(h2))) if variant == "qfa" else None
        self.w_out = Parameter("de.w_out", np.ones(()))
        self.b_out = Parameter("de.b_out", np.zeros(()))

    def parameters(self) -> list[Parameter]:
        extra = [self.attn] if self.attn is not None else []
        return self.base.parameters() + extra + [self.w_out, self.b_out]

    def article_vector(self, art_seq: EncodedSequence) -> Tensor:
        H = self.base.article_states(art_seq)
        if self.variant == "sum":
            return ad.colsum(H)
        weights = ad.softmax(ad.matmul(H, self.attn))
        return ad.matmul(weights, H)

    def score(self, q_seq: EncodedSequence, art_seq: EncodedSequence, v: Tensor | None = None) -> Tensor:
        if v is None:
            v = self.base.question_vector(q_seq)
        return ad.dot(v, self.article_vector(art_seq))


def dual_encoder_score(encoder: DualEncoder, q_seq: EncodedSequence, art_seq: EncodedSequence) -> Tensor:
    return encoder.score(q_seq, art_seq)


# ---------------------------------------------------------------------------
# fast (graph-free) scoring for evaluation and retrieval


def _np_question_vector(model: RankerModel, seq: EncodedSequence) -> np.ndarray:
    return model.question_vector(seq).values


def _np_article_states(model: RankerModel, seq: EncodedSequence) -> np.ndarray:
    return model.article_states(seq).values


def _np_normalize(x: np.ndarray, axis=None) -> np.ndarray:
    norm = np.linalg.norm(x, axis=axis, keepdims=axis is not None)
    if axis is None:
        return x if norm == 0 else x / norm
    safe = np.where(norm == 0, 1.0, norm)
    return x / safe


class ArticleStateCache:
    """Normalized article encodings under the current ranker weights."""

    def __init__(self, model: RankerModel):
        self.model = model
        self._states: dict[int, np.ndarray] = {}

    def states(self, article_id: int) -> np.ndarray:
        if article_id not in self._states:
            H = _np_article_states(self.model, self.model.corpus.articles[article_id].tokens)
            self._states[article_id] = _np_normalize(H, axis=1)
        return self._states[article_id]

    def invalidate(self) -> None:
        self._states.clear()


def score_articles(model: RankerModel, q_seq: EncodedSequence, article_ids: list[int], cache: ArticleStateCache) -> np.ndarray:
    """Relevance probabilities for one question over many articles."""
    v = _np_normalize(_np_question_vector(model, q_seq))
    scaled = float(model.w.values) * v + float(model.b.values)
    d = model.config.exponent
    out = np.empty(len(article_ids))
    for i, aid in enumerate(article_ids):
        s = float(((cache.states(aid) @ scaled) ** d).sum())
        z = float(model.w_out.values) * s + float(model.b_out.values)
        out[i] = 1.0 / (1.0 + np.exp(-z)) if z >= 0 else np.exp(z) / (1.0 + np.exp(z))
    return out


def rank_r2(model: RankerModel, q_seq: EncodedSequence, cand: CandidateSet, cache: ArticleStateCache) -> list[int]:
    if not cand.article_ids:
        return []
    probs = score_articles(model, q_seq, cand.article_ids, cache)
    order = np.lexsort((np.asarray(cand.article_ids), -probs))
    return [cand.article_ids[i] for i in order]


# ---------------------------------------------------------------------------
# distant supervision and training


def build_oracle(corpus: Corpus, split: str) -> list[frozenset[int]]:
    """Relevant-article labels per question, from distant supervision.

    Answers that are movies make their articles the labels; otherwise the
    movie mentioned in the question is the label. Questions yielding no
    labels get an empty set and are excluded from ranker training.
    """
    labels: list[frozenset[int]] = []
    for pair in corpus.qa[split]:
        answer_articles: set[int] = set()
        for ans in pair.answers:
            answer_articles.update(corpus.articles_by_title.get(ans, ()))
        if answer_articles:
            labels.append(frozenset(answer_articles))
            continue
        question_articles: set[int] = set()
        for eid in pair.question.entity_ids():
            question_articles.update(corpus.articles_by_title.get(eid, ()))
        labels.append(frozenset(question_articles))
    return labels


@dataclass
class RankerTrainStats:
    steps: int = 0
    dev_history: list[tuple[int, float]] = field(default_factory=list)
    best_dev: float = 0.0
    skipped_no_negatives: int = 0
    excluded_unlabeled: int = 0


def _dev_recall_at_1(model: RankerModel, pairs: list[QAPair], labels: list[frozenset[int]]) -> float:
    cache = ArticleStateCache(model)
    hits = 0
    total = 0
    for pair, lab in zip(pairs, labels):
        if not lab:
            continue
        cand = candidates_r0(pair.question, model.corpus)
        if not cand.article_ids:
            continue
        ranked = rank_r2(model, pair.question, cand, cache)
        total += 1
        if ranked[0] in lab:
            hits += 1
    return hits / total if total else 0.0


def train_ranker(corpus: Corpus, config: RankerConfig, model: RankerModel | None = None) -> tuple[RankerModel, RankerTrainStats]:
    """Binary cross entropy over distant-supervision labels, 1:neg_ratio.

    Each step takes one positive (question, article) pair plus negatives
    sampled from the question's candidate pool (padded corpus-wide when the
    pool is short), accumulates their loss, and applies one Adam update.
    Dev recall@1 is checked periodically for early stopping.
    """
    if model is None:
        model = RankerModel(config, corpus)
    optimizer = Adam(model.parameters(), lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    stats = RankerTrainStats()

    train_pairs = corpus.qa.get("train", [])
    train_labels = build_oracle(corpus, "train")
    dev_pairs = corpus.qa.get("dev", [])
    dev_labels = build_oracle(corpus, "dev") if dev_pairs else []

    positives: list[tuple[int, int]] = []
    for qi, (pair, labs) in enumerate(zip(train_pairs, train_labels)):
        if not labs:
            stats.excluded_unlabeled += 1
            continue
        for aid in sorted(labs):
            positives.append((qi, aid))
    if not positives:
        raise ValueError("no oracle-labeled training questions; cannot train ranker")

    cand_cache: dict[int, CandidateSet] = {}
    all_articles = np.arange(len(corpus.articles))
    neg_rng = substream(config.seed, "negatives")
    order_rng = substream(config.seed, "order")

    best = model.snapshot()
    evals_since_best = 0
    inv_group = 1.0 / (1 + config.neg_ratio)
    stop = False
    while not stop and stats.steps < config.max_steps:
        for pi in order_rng.permutation(len(positives)):
            qi, pos_aid = positives[pi]
            pair = train_pairs[qi]
            labs = train_labels[qi]
            if qi not in cand_cache:
                cand_cache[qi] = candidates_r0(pair.question, corpus)
            pool = [aid for aid in cand_cache[qi].article_ids if aid not in labs]
            if len(pool) < config.neg_ratio:
                pool_set = set(pool)
                extra = [int(a) for a in all_articles if a not in labs and a not in pool_set]
                need = min(config.neg_ratio - len(pool), len(extra))
                if need > 0:
                    pad = neg_rng.choice(len(extra), size=need, replace=False)
                    pool = pool + [extra[i] for i in pad]
            if not pool:
                stats.skipped_no_negatives += 1
                continue
            take = neg_rng.choice(len(pool), size=min(config.neg_ratio, len(pool)), replace=False)
            negatives = [pool[i] for i in take]

            v = model.question_vector(pair.question)
            loss = ad.bce_with_logit(wla_logit(model, wla_score(model, pair.question, corpus.articles[pos_aid].tokens, v=v)), 1.0)
            for neg_aid in negatives:
                s = wla_score(model, pair.question, corpus.articles[neg_aid].tokens, v=v)
                loss = ad.add(loss, ad.bce_with_logit(wla_logit(model, s), 0.0))
            ad.scale(loss, inv_group).backward()
            optimizer.step()
            optimizer.zero_grad()
            stats.steps += 1

            if dev_pairs and stats.steps % config.eval_every == 0:
                score = _dev_recall_at_1(model, dev_pairs, dev_labels)
                stats.dev_history.append((stats.steps, score))
                logger.info("ranker dev R@1 %.4f at step %d", score, stats.steps)
                if score > stats.best_dev:
                    stats.best_dev = score
                    best = model.snapshot()
                    evals_since_best = 0
                else:
                    evals_since_best += 1
                if evals_since_best >= config.patience:
                    stop = True
            if stop or stats.steps >= config.max_steps:
                stop = stop or stats.steps >= config.max_steps
                break
    if dev_pairs and stats.dev_history:
        model.restore(best)
    return model, stats


# ---------------------------------------------------------------------------
# unified retrieval front end


def _seq_key(seq: EncodedSequence) -> int:
    pos = np.arange(1, len(seq) + 1, dtype=np.int64)
    return int((seq.words * pos).sum() % (2**31 - 1))


def make_retriever(corpus: Corpus, kind: str, M: int, seed: int = 1, ranker: RankerModel | None = None):
    """Returns seq -> ranked article ids (length <= M).

    r0 picks at random among entity-matched candidates, r1 applies the
    title+count heuristic, r2 rescores the entity-matched pool with the
    trained ranker.
    """
    if kind not in ("r0", "r1", "r2"):
        raise ValueError(f"retriever kind must be r0, r1 or r2, got {kind!r}")
    if kind == "r2":
        if ranker is None:
            raise ValueError("r2 retrieval needs a trained ranker")
        cache = ArticleStateCache(ranker)

    def retrieve(seq: EncodedSequence) -> list[int]:
        cand = candidates_r0(seq, corpus)
        if not cand.article_ids:
            return []
        if kind == "r0":
            ranked = rank_r0(cand, substream(seed, "r0", _seq_key(seq)))
        elif kind == "r1":
            ranked = rank_r1(cand)
        else:
            ranked = rank_r2(ranker, seq, cand, cache)
        return ranked[:M]

    return retrieve


def retrieve(
    q_seq: EncodedSequence,
    corpus: Corpus,
    kind: str,
    M: int,
    seed: int = 1,
    ranker: RankerModel | None = None,
) -> list[int]:
    """One-shot retrieval; see make_retriever for the per-kind semantics."""
    return make_retriever(corpus, kind, M, seed=seed, ranker=ranker)(q_seq)
