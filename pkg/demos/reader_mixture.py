"""
The gated answer mixture
========================

The reader scores every context position against the question, sums
attention over each entity's positions (p_att), and separately scores a
fixed vocabulary of entity vectors (p_vocab). A sigmoid gate g blends the
two: p(e) = (1-g) p_att(e) + g p_vocab(e). When an answer is missing from
the retrieved text, only the vocabulary route can produce it.
"""

from mixqa.reader import ReaderConfig, bundle_context, train_reader
from mixqa.retrieval import make_retriever
from mixqa.rngs import substream
from mixqa.synth import SynthConfig, synth_corpus

# consistency 0.5: half the fact sentences are omitted from articles while
# answers keep the true value, so many answers are not in the text at all.
corpus = synth_corpus(config=SynthConfig(n_movies=60, seed=5, consistency=0.5))

config = ReaderConfig(
    d_w=48, d_e=48, hidden=48, n_e=600, variant="asv", seed=5, lr=3e-3, max_epochs=4
)
retriever = make_retriever(corpus, "r1", config.M, seed=5)
model, stats = train_reader(corpus, retriever, config)
print("dev hits@1 trajectory:", [(step, round(h, 3)) for step, h in stats.dev_history])

# Inspect a few test questions: where the answer came from and the gate.
shown = 0
for qid, pair in enumerate(corpus.qa["test"]):
    bundle = bundle_context(corpus, retriever(pair.question))
    anon = model.fresh_anon_map(pair.question, bundle, substream(5, "eval", qid))
    dist = model.predict(pair.question, bundle, anon)
    top = dist.top1()
    if top < 0:
        continue
    in_context = top in dist.att_ids
    print(
        f"{pair.text!r}\n"
        f"   -> {corpus.entity_display(top)} "
        f"(gold: {[corpus.entity_display(a) for a in pair.answers]}), "
        f"g={dist.gate:.2f}, answer {'IS' if in_context else 'NOT'} in context"
    )
    shown += 1
    if shown == 6:
        break
