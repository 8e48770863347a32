"""Synthetic corpus generator: determinism, consistency, collision structure."""

import numpy as np
import pytest

from mixqa.corpus import match_entities
from mixqa.synth import (
    CHOICE_CATEGORIES,
    MOVIE_RELATIONS,
    SPAN_CATEGORIES,
    SynthConfig,
    generate_raw,
    synth_corpus,
)


class TestDeterminism:
    def test_identical_corpora_for_identical_seeds(self):
        a = generate_raw(SynthConfig(n_movies=50, seed=1, collision_rate=0.2, consistency=0.5))
        b = generate_raw(SynthConfig(n_movies=50, seed=1, collision_rate=0.2, consistency=0.5))
        assert a[0] == b[0]  # entities
        assert a[1] == b[1]  # articles
        assert a[2] == b[2]  # qa
        c = generate_raw(SynthConfig(n_movies=50, seed=2, collision_rate=0.2, consistency=0.5))
        assert c[1] != a[1]

    def test_encoded_corpus_round_trip_equality(self):
        c1 = synth_corpus(seed=3, n_movies=20, min_count=2)
        c2 = synth_corpus(seed=3, n_movies=20, min_count=2)
        assert c1.vocab.id_to_word == c2.vocab.id_to_word
        for a1, a2 in zip(c1.articles, c2.articles):
            np.testing.assert_array_equal(a1.tokens.words, a2.tokens.words)


class TestScale:
    def test_default_size_near_two_thousand_pairs(self):
        corpus = synth_corpus(seed=7, n_movies=200)
        total = sum(len(v) for v in corpus.qa.values())
        assert 1700 <= total <= 2300
        assert len(corpus.articles) == 200

    def test_no_dropped_answers(self):
        corpus = synth_corpus(seed=7, n_movies=40, min_count=2)
        assert all(n == 0 for n in corpus.dropped_pairs.values())

    def test_categories_present_on_all_pairs(self):
        corpus = synth_corpus(seed=7, n_movies=20, min_count=2)
        cats = {p.category for split in corpus.qa.values() for p in split}
        assert None not in cats
        assert CHOICE_CATEGORIES <= cats
        assert SPAN_CATEGORIES <= cats


def answers_absent_fraction(corpus):
    """Fraction of movie_to_x pairs whose answers all miss the title article."""
    absent = total = 0
    for split in corpus.qa.values():
        for pair in split:
            if not pair.category.startswith("movie_to"):
                continue
            title_articles = set()
            for eid in pair.question.entity_ids():
                title_articles.update(corpus.articles_by_title.get(eid, ()))
            if not title_articles:
                continue
            total += 1
            present = set()
            for aid in title_articles:
                present.update(corpus.article_entity_set(aid))
            if not (set(pair.answers) & present):
                absent += 1
    return absent / total


class TestConsistency:
    def test_full_consistency_every_answer_in_oracle_article(self):
        corpus = synth_corpus(seed=11, n_movies=50, consistency=1.0, min_count=2)
        assert answers_absent_fraction(corpus) == 0.0

    def test_half_consistency_omits_about_half(self):
        corpus = synth_corpus(seed=11, n_movies=120, consistency=0.5, min_count=2)
        frac = answers_absent_fraction(corpus)
        assert 0.40 <= frac <= 0.60

    def test_cue_words_survive_omission(self):
        corpus = synth_corpus(seed=11, n_movies=30, consistency=0.0, min_count=2)
        # language/genre sentences are gone, but the city/descriptor cues stay
        filmed = corpus.vocab.word_to_id.get("filmed")
        assert filmed is not None
        for art in corpus.articles:
            assert filmed in art.tokens.words


class TestCollisions:
    def test_colliding_titles_match_inside_other_articles(self):
        config = SynthConfig(n_movies=40, seed=13, collision_rate=0.5)
        displays, raw_articles, _, info = generate_raw(config)
        corpus = synth_corpus(config=config)
        collision_ids = {
            corpus.lexicon.lookup(tuple(t.lower().split())) for t in info["collision_titles"]
        }
        spurious = 0
        for art in corpus.articles:
            for eid in art.tokens.entity_ids():
                if eid in collision_ids and art.title_entity != eid:
                    spurious += 1
        assert spurious > 0

    def test_zero_collision_rate_keeps_title_mentions_unique(self):
        corpus = synth_corpus(seed=13, n_movies=40, collision_rate=0.0, min_count=2)
        for art in corpus.articles:
            for eid in art.tokens.entity_ids():
                owners = corpus.articles_by_title.get(eid, [])
                if owners:
                    assert owners == [art.id]


class TestValidation:
    def test_bad_consistency_rejected(self):
        with pytest.raises(ValueError):
            synth_corpus(seed=1, n_movies=5, consistency=1.5)

    def test_bad_n_movies_rejected(self):
        with pytest.raises(ValueError):
            synth_corpus(seed=1, n_movies=0)

    def test_title_pool_exhaustion_rejected(self):
        with pytest.raises(ValueError, match="pools"):
            synth_corpus(seed=1, n_movies=500)


class TestStructure:
    def test_all_relations_covered(self):
        corpus = synth_corpus(seed=17, n_movies=30, min_count=2)
        cats = {p.category for split in corpus.qa.values() for p in split}
        for rel in MOVIE_RELATIONS:
            assert f"movie_to_{rel}" in cats

    def test_article_states_facts_when_consistent(self):
        corpus = synth_corpus(seed=17, n_movies=20, consistency=1.0, min_count=2)
        for art in corpus.articles:
            ents = corpus.article_entity_set(art.id)
            assert art.title_entity in ents  # the title leads its own article

    def test_entity_spans_reconstruct_surfaces(self):
        corpus = synth_corpus(seed=17, n_movies=15, min_count=2)
        for art in corpus.articles[:5]:
            seq = art.tokens
            tokens = [corpus.vocab.id_to_word[w] for w in seq.words]
            for start, end, eid in match_entities(tokens, corpus.lexicon):
                assert tuple(tokens[start:end]) == corpus.entities[eid].surface
