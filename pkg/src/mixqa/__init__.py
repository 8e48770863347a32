"""mixqa: two-stage question answering over entity-annotated articles.

Stage one retrieves candidate articles with entity matching, a title
heuristic, or a learned word-level attention ranker. Stage two answers the
question with a recurrent attention reader whose output mixes an attention
distribution over context entities with a softmax over a fixed entity
vocabulary, blended by a learned gate.
"""

__version__ = "0.1.0"

from .corpus import (
    Article,
    Corpus,
    EncodedSequence,
    Entity,
    Lexicon,
    QAPair,
    Vocabulary,
    build_vocab,
    first_paragraph,
    load_corpus,
    match_entities,
    tokenize,
)
from .synth import SynthConfig, synth_corpus

__all__ = [
    "Article",
    "Corpus",
    "EncodedSequence",
    "Entity",
    "Lexicon",
    "QAPair",
    "SynthConfig",
    "Vocabulary",
    "build_vocab",
    "first_paragraph",
    "load_corpus",
    "match_entities",
    "synth_corpus",
    "tokenize",
]
