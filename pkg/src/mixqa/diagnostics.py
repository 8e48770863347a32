"""Frozen toy problems for end-to-end gradient verification.

Both checks build a miniature corpus and model, freeze every source of
randomness (fixed anonymization map, fixed article order), and compare
analytic gradients of the full training losses against central finite
differences, block by block.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .optim import grad_check
from .reader import ReaderConfig, ReaderModel, bundle_context
from .retrieval import RankerConfig, RankerModel, wla_logit, wla_score
from .rngs import substream
from .synth import SynthConfig, synth_corpus


def _toy_corpus():
    return synth_corpus(config=SynthConfig(n_movies=6, seed=13, collision_rate=0.34, min_count=2))


def reader_gradcheck(tol: float = 1e-4, h: float = 1e-5, variant: str = "asv") -> dict[str, float]:
    """Max relative error per block for the full reader loss on a toy pair."""
    corpus = _toy_corpus()
    config = ReaderConfig(d_w=6, d_e=5, hidden=4, n_e=40, variant=variant, seed=3)
    model = ReaderModel(config, corpus)
    pair = corpus.qa["train"][0]
    # two-article context exercises the separator and article concatenation
    bundle = bundle_context(corpus, [0, 1])
    anon = model.fresh_anon_map(pair.question, bundle, substream(99, "anon"))
    # move the gate away from its neutral initialization so its gradient is alive
    if model.w_g is not None:
        model.w_g.values[...] = [0.3, -0.2]
        model.b_g.values[...] = 0.1

    def loss_fn():
        return model.loss(model.forward(pair.question, bundle, anon), pair.answers)

    return grad_check(loss_fn, model.parameters(), h=h, tol=tol)


def ranker_gradcheck(tol: float = 1e-4, h: float = 1e-5) -> dict[str, float]:
    """Max relative error per block for the ranker loss on one (q, d) pair."""
    corpus = _toy_corpus()
    config = RankerConfig(d_w=6, hidden=4, seed=5)
    model = RankerModel(config, corpus)
    pair = corpus.qa["train"][1]
    pos = corpus.articles[2].tokens
    neg = corpus.articles[3].tokens

    def loss_fn():
        loss = ad.bce_with_logit(wla_logit(model, wla_score(model, pair.question, pos)), 1.0)
        return ad.add(loss, ad.bce_with_logit(wla_logit(model, wla_score(model, pair.question, neg)), 0.0))

    return grad_check(loss_fn, model.parameters(), h=h, tol=tol)


def run_gradcheck(tol: float = 1e-4, h: float = 1e-5) -> tuple[bool, list[str]]:
    """Both checks; returns overall pass flag and printable per-block lines."""
    lines = []
    ok = True
    for label, report in (("reader", reader_gradcheck(tol, h)), ("ranker", ranker_gradcheck(tol, h))):
        for name, err in sorted(report.items()):
            passed = err < tol
            ok = ok and passed
            lines.append(f"{'PASS' if passed else 'FAIL'} {label}:{name} max_rel_err={err:.3e}")
    return ok, lines
