"""
Corpus building blocks
======================

Tokenization with capitalization flags, maximal-interval entity matching,
first-paragraph truncation, and vocabulary construction.
"""

from mixqa import first_paragraph, match_entities, tokenize
from mixqa.corpus import Entity, Lexicon, build_corpus

# Tokens are lowercased; a parallel flag row remembers the original casing.
tokens, caps = tokenize("who directed the movie Blade Runner?")
print(list(zip(tokens, caps)))

# Entity mentions are maximal intervals over the token sequence; on overlap
# the leftmost-longest span wins, so "blade runner" beats "runner".
lexicon = Lexicon(
    [
        Entity(0, ("blade", "runner"), "Blade Runner"),
        Entity(1, ("runner",), "Runner"),
        Entity(2, ("ridley", "scott"), "Ridley Scott"),
    ]
)
print(match_entities(tokens, lexicon))

# Articles are truncated to their first paragraph before encoding.
raw = "Blade Runner is a 1982 film.\n\nThe rest of the page is ignored."
print(first_paragraph(raw))

# A corpus bundles entities, encoded articles and QA pairs. Word ids are
# assigned by frequency (ties broken alphabetically) and id 0 is reserved
# for out-of-vocabulary words.
corpus = build_corpus(
    ["Blade Runner", "Ridley Scott"],
    [("Blade Runner", "Blade Runner is directed by Ridley Scott .")],
    {"train": [("who directed the movie Blade Runner ?", ["Ridley Scott"], None)]},
    min_count=1,
)
article = corpus.articles[0]
print("title entity:", corpus.entity_display(article.title_entity))
print("words:", [corpus.vocab.id_to_word[w] for w in article.tokens.words])
print("entity ids per position:", article.tokens.entities.tolist())
print("entity counts:", corpus.vocab.entity_counts.tolist())
