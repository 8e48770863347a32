"""Candidate generation, heuristic ranking, the attention ranker, and oracles."""

import numpy as np
import pytest

from mixqa import autodiff as ad
from mixqa.autodiff import constant
from mixqa.corpus import build_corpus
from mixqa.reader import bundle_context
from mixqa.retrieval import (
    ArticleStateCache,
    DualEncoder,
    RankerConfig,
    RankerModel,
    TITLE_BONUS,
    build_oracle,
    candidates_r0,
    dual_encoder_score,
    make_retriever,
    rank_r1,
    score_articles,
    score_r1,
    train_ranker,
    wla_prob,
    wla_score,
)
from mixqa.rngs import substream
from mixqa.synth import SynthConfig, synth_corpus


@pytest.fixture(scope="module")
def corpus():
    # collisions on: titles like "love story" also appear as plain text
    return synth_corpus(config=SynthConfig(n_movies=30, seed=9, collision_rate=0.4, min_count=2))


def question_of(corpus, text_fragment, split="train"):
    for pair in corpus.qa[split]:
        if text_fragment in pair.text:
            return pair
    raise AssertionError(f"no question contains {text_fragment!r}")


class TestCandidatesR0:
    def test_title_article_is_candidate(self, corpus):
        for pair in corpus.qa["train"][:20]:
            q_titles = [e for e in pair.question.entity_ids() if corpus.articles_by_title.get(e)]
            cand = candidates_r0(pair.question, corpus)
            for eid in q_titles:
                for aid in corpus.articles_by_title[eid]:
                    assert aid in cand.article_ids

    def test_every_candidate_shares_an_entity(self, corpus):
        pair = corpus.qa["train"][0]
        cand = candidates_r0(pair.question, corpus)
        q_ents = set(cand.question_entities)
        for aid in cand.article_ids:
            assert corpus.article_entity_set(aid) & q_ents
            assert cand.matched_counts[aid] >= 1

    def test_colliding_title_pulls_in_spurious_articles(self, corpus):
        # some movie_to_x question about a colliding title must see >1 candidate
        sizes = []
        for pair in corpus.qa["train"]:
            if pair.category and pair.category.startswith("movie_to"):
                sizes.append(len(candidates_r0(pair.question, corpus)))
        assert max(sizes) > 1

    def test_question_without_entities_gives_empty_set(self, corpus):
        from mixqa.corpus import EncodedSequence

        seq = EncodedSequence(np.array([1, 2, 3]), np.zeros(3), np.full(3, -1))
        cand = candidates_r0(seq, corpus)
        assert cand.article_ids == []


class TestScoreR1:
    def test_title_match_dominates_any_count(self, corpus):
        pair = question_of(corpus, "who directed")
        cand = candidates_r0(pair.question, corpus)
        scored = sorted(cand.article_ids, key=lambda a: -score_r1(cand, a))
        if cand.title_matches:
            assert scored[0] in cand.title_matches
            for aid in cand.article_ids:
                if aid in cand.title_matches:
                    assert score_r1(cand, aid) >= TITLE_BONUS
                else:
                    assert score_r1(cand, aid) < TITLE_BONUS

    def test_non_title_articles_ranked_by_count_then_id(self, corpus):
        pair = corpus.qa["train"][0]
        cand = candidates_r0(pair.question, corpus)
        ranked = rank_r1(cand)
        keyed = [(-score_r1(cand, a), a) for a in ranked]
        assert keyed == sorted(keyed)

    def test_retriever_respects_m(self, corpus):
        retr1 = make_retriever(corpus, "r1", M=2, seed=1)
        retr_all = make_retriever(corpus, "r1", M=10**6, seed=1)
        pair = corpus.qa["train"][0]
        assert len(retr1(pair.question)) <= 2
        cand = candidates_r0(pair.question, corpus)
        # M >= N returns every candidate
        assert sorted(retr_all(pair.question)) == cand.article_ids

    def test_r0_is_seeded_random_subset(self, corpus):
        pair = corpus.qa["train"][0]
        retr = make_retriever(corpus, "r0", M=3, seed=5)
        first = retr(pair.question)
        again = retr(pair.question)
        assert first == again
        cand = candidates_r0(pair.question, corpus)
        assert set(first) <= set(cand.article_ids)


def small_ranker(corpus, exponent=4):
    return RankerModel(RankerConfig(d_w=8, hidden=5, exponent=exponent, seed=3), corpus)


class TestWlaScore:
    def test_zero_scale_gives_zero(self, corpus):
        model = small_ranker(corpus)
        model.w.values[...] = 0.0
        model.b.values[...] = 0.0
        pair = corpus.qa["train"][0]
        s = wla_score(model, pair.question, corpus.articles[0].tokens)
        assert float(s.values) == 0.0

    def test_orthogonal_positions_give_zero(self, corpus):
        model = small_ranker(corpus)
        # bypass encoders: orthogonal states against the scaled query direction
        v = constant(np.array([1.0, 0.0]))
        H = constant(np.array([[0.0, 1.0], [0.0, -2.0]]))
        scaled = ad.add(ad.mul(v, model.w), model.b)
        model.b.values[...] = 0.0
        terms = ad.matmul(H, ad.add(ad.mul(v, model.w), model.b))
        s = ad.sum_all(ad.power_int(terms, 4))
        assert float(s.values) == 0.0

    def test_three_position_toy_matches_hand_loop(self, corpus):
        model = small_ranker(corpus)
        pair = corpus.qa["train"][0]
        art = corpus.articles[1].tokens
        s = float(wla_score(model, pair.question, art).values)
        v = model.question_vector(pair.question).values
        H = model.article_states(art).values
        v = v / np.linalg.norm(v)
        H = H / np.linalg.norm(H, axis=1, keepdims=True)
        w, b = float(model.w.values), float(model.b.values)
        expected = 0.0
        for i in range(H.shape[0]):
            expected += float((w * v + b) @ H[i]) ** 4
        assert abs(s - expected) < 1e-10

    def test_invariant_under_token_permutation(self, corpus):
        # positional sum: permuting normalized article states leaves s unchanged
        model = small_ranker(corpus)
        pair = corpus.qa["train"][0]
        v = model.question_vector(pair.question).values
        v = v / np.linalg.norm(v)
        scaled = float(model.w.values) * v + float(model.b.values)
        H = model.article_states(corpus.articles[0].tokens).values
        H = H / np.linalg.norm(H, axis=1, keepdims=True)
        s = ((H @ scaled) ** 4).sum()
        rng = np.random.default_rng(0)
        for _ in range(5):
            perm = rng.permutation(H.shape[0])
            s_perm = ((H[perm] @ scaled) ** 4).sum()
            assert s_perm == pytest.approx(s, abs=1e-12)

    def test_even_exponent_nonnegative(self, corpus):
        model = small_ranker(corpus)
        for pair in corpus.qa["train"][:5]:
            for aid in (0, 1, 2):
                s = float(wla_score(model, pair.question, corpus.articles[aid].tokens).values)
                assert s >= 0.0

    def test_exponent_one_reduction_matches_dual_sum(self, corpus):
        model = small_ranker(corpus)
        model.w.values[...] = 1.0
        model.b.values[...] = 0.0
        dual = DualEncoder(model, "sum")
        pair = corpus.qa["train"][0]
        art = corpus.articles[2].tokens
        s_wla = float(wla_score(model, pair.question, art, normalize=False, exponent=1).values)
        s_sum = float(dual_encoder_score(dual, pair.question, art).values)
        assert abs(s_wla - s_sum) < 1e-12


class TestWlaProb:
    def test_zero_scale_gives_sigmoid_of_shift(self, corpus):
        model = small_ranker(corpus)
        model.w_out.values[...] = 0.0
        model.b_out.values[...] = 0.7
        o = wla_prob(model, constant(3.0))
        assert float(o.values) == pytest.approx(1 / (1 + np.exp(-0.7)))

    def test_unit_scale_zero_shift_at_zero_score(self, corpus):
        model = small_ranker(corpus)
        model.w_out.values[...] = 1.0
        model.b_out.values[...] = 0.0
        assert float(wla_prob(model, constant(0.0)).values) == 0.5

    def test_monotone_in_score_for_positive_scale(self, corpus):
        model = small_ranker(corpus)
        model.w_out.values[...] = 2.0
        lo = float(wla_prob(model, constant(1.0)).values)
        hi = float(wla_prob(model, constant(4.0)).values)
        assert hi > lo


class TestDualEncoder:
    def test_zero_article_states_give_zero_score(self, corpus):
        model = small_ranker(corpus)
        dual = DualEncoder(model, "sum")
        v = constant(np.ones(4))
        psi = constant(np.zeros(4))
        assert float(ad.dot(v, psi).values) == 0.0

    def test_sum_variant_matches_naive_dot_oracle(self, corpus):
        model = small_ranker(corpus)
        dual = DualEncoder(model, "sum")
        pair = corpus.qa["train"][1]
        art = corpus.articles[1].tokens
        got = float(dual.score(pair.question, art).values)
        v = model.question_vector(pair.question).values
        H = model.article_states(art).values
        assert abs(got - float(v @ H.sum(axis=0))) < 1e-10

    def test_qfa_weights_are_softmax_of_learned_vector(self, corpus):
        model = small_ranker(corpus)
        dual = DualEncoder(model, "qfa")
        pair = corpus.qa["train"][1]
        art = corpus.articles[1].tokens
        got = float(dual.score(pair.question, art).values)
        v = model.question_vector(pair.question).values
        H = model.article_states(art).values
        logits = H @ dual.attn.values
        w = np.exp(logits - logits.max())
        w /= w.sum()
        assert abs(got - float(v @ (w @ H))) < 1e-10

    def test_gradients_flow(self, corpus):
        from mixqa.optim import grad_check

        model = small_ranker(corpus)
        dual = DualEncoder(model, "qfa")
        pair = corpus.qa["train"][0]
        art = corpus.articles[0].tokens

        def loss_fn():
            return ad.bce_with_logit(ad.add(ad.mul(dual.score(pair.question, art), dual.w_out), dual.b_out), 1.0)

        report = grad_check(loss_fn, dual.parameters(), max_coords_per_block=25)
        assert max(report.values()) < 1e-4, report


class TestOracle:
    def test_movie_in_question_is_label_for_attribute_questions(self, corpus):
        labels = build_oracle(corpus, "train")
        for pair, labs in zip(corpus.qa["train"], labels):
            if pair.category == "movie_to_director":
                title_articles = set()
                for eid in pair.question.entity_ids():
                    title_articles.update(corpus.articles_by_title.get(eid, ()))
                assert labs == frozenset(title_articles)

    def test_answer_articles_are_labels_for_movie_answers(self, corpus):
        labels = build_oracle(corpus, "train")
        for pair, labs in zip(corpus.qa["train"], labels):
            if pair.category == "director_to_movie":
                expected = set()
                for ans in pair.answers:
                    expected.update(corpus.articles_by_title.get(ans, ()))
                assert labs == frozenset(expected)

    def test_unlabelable_questions_get_empty_set(self):
        corpus = build_corpus(
            ["Comedy", "Horror"],
            [("Some Film", "a comedy film and a horror film .")],
            {"train": [("is comedy better than horror ?", ["Comedy"], None)]},
            min_count=1,
        )
        labels = build_oracle(corpus, "train")
        assert labels == [frozenset()]

    def test_candidates_cover_labels_on_consistent_corpus(self, corpus):
        for split in ("train", "dev", "test"):
            labels = build_oracle(corpus, split)
            for pair, labs in zip(corpus.qa[split], labels):
                cand = set(candidates_r0(pair.question, corpus).article_ids)
                assert labs <= cand


class TestTrainRanker:
    def test_short_run_is_deterministic_and_improves(self, corpus):
        config = RankerConfig(d_w=8, hidden=6, seed=31, max_steps=60, eval_every=30, lr=3e-3)

        def run():
            model, stats = train_ranker(corpus, config)
            return model.snapshot(), stats

        snap1, stats1 = run()
        snap2, stats2 = run()
        assert stats1.dev_history == stats2.dev_history
        for name in snap1:
            np.testing.assert_array_equal(snap1[name], snap2[name])
        assert stats1.steps == 60

    def test_scoring_ranks_after_training_smoke(self, corpus):
        config = RankerConfig(d_w=8, hidden=6, seed=31, max_steps=40, eval_every=40, lr=3e-3)
        model, _ = train_ranker(corpus, config)
        pair = corpus.qa["dev"][0]
        cand = candidates_r0(pair.question, corpus)
        cache = ArticleStateCache(model)
        probs = score_articles(model, pair.question, cand.article_ids, cache)
        assert probs.shape == (len(cand.article_ids),)
        assert ((probs > 0) & (probs < 1)).all()


class TestRetrieve:
    def test_r2_orders_by_probability(self, corpus):
        config = RankerConfig(d_w=8, hidden=6, seed=31, max_steps=30, eval_every=30)
        model, _ = train_ranker(corpus, config)
        retr = make_retriever(corpus, "r2", M=5, seed=1, ranker=model)
        pair = corpus.qa["dev"][0]
        ranked = retr(pair.question)
        cache = ArticleStateCache(model)
        probs = score_articles(model, pair.question, ranked, cache)
        assert all(probs[i] >= probs[i + 1] - 1e-12 for i in range(len(probs) - 1))

    def test_unknown_kind_rejected(self, corpus):
        with pytest.raises(ValueError):
            make_retriever(corpus, "r9", M=5)

    def test_r2_requires_ranker(self, corpus):
        with pytest.raises(ValueError):
            make_retriever(corpus, "r2", M=5)

    def test_empty_candidates_give_empty_context(self, corpus):
        from mixqa.corpus import EncodedSequence

        retr = make_retriever(corpus, "r1", M=5, seed=1)
        seq = EncodedSequence(np.array([1, 2]), np.zeros(2), np.full(2, -1))
        assert retr(seq) == []
        assert bundle_context(corpus, retr(seq)).seq is None
