"""
Retrieval: entity matching, heuristics, and the learned ranker
==============================================================

Movie titles made of ordinary words ("Love Story", "Night Train") drag
unrelated articles into the entity-matched candidate pool. The title
heuristic fixes most of it; the word-level attention ranker learns the
same discrimination without domain rules.
"""

from mixqa.metrics import recall_at_k, retrieval_report
from mixqa.retrieval import (
    RankerConfig,
    build_oracle,
    candidates_r0,
    make_retriever,
    rank_r1,
    train_ranker,
)
from mixqa.synth import SynthConfig, synth_corpus

# Half the titles collide with plain phrases planted in other articles.
corpus = synth_corpus(config=SynthConfig(n_movies=60, seed=21, collision_rate=0.5))

# Candidate pools blow up for colliding titles.
for pair in corpus.qa["dev"]:
    cand = candidates_r0(pair.question, corpus)
    if len(cand) > 3:
        print(f"{pair.text!r}: {len(cand)} candidates, title matches {sorted(cand.title_matches)}")
        print("   heuristic order:", rank_r1(cand)[:5])
        break

# Distant supervision: answer movies label x_to_movie questions, the
# question's movie labels movie_to_x questions.
oracle = build_oracle(corpus, "dev")
rankings_r0 = [make_retriever(corpus, "r0", M=100, seed=21)(p.question) for p in corpus.qa["dev"]]
rankings_r1 = [make_retriever(corpus, "r1", M=100, seed=21)(p.question) for p in corpus.qa["dev"]]
print("random pick   R@1:", round(recall_at_k(rankings_r0, oracle, 1), 3))
print("title+count   R@1:", round(recall_at_k(rankings_r1, oracle, 1), 3))

# A short training run of the learned scorer (full runs use ~2000 steps).
config = RankerConfig(seed=21, max_steps=400, eval_every=100, lr=3e-3)
ranker, stats = train_ranker(corpus, config)
print("learned ranker dev R@1 history:", stats.dev_history)

rankings_r2 = [make_retriever(corpus, "r2", M=100, seed=21, ranker=ranker)(p.question) for p in corpus.qa["dev"]]
print(retrieval_report(rankings_r2, oracle, ks=(1, 10)).to_text())
