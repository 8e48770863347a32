"""Deterministic desk-scale movie corpora for experiments and tests.

Each synthetic movie carries a director, writer, two actors, genre,
language and release year. Articles state these facts in separate
sentences so individual facts can be omitted: at consistency < 1 a
fact sentence disappears from the article with probability
(1 - consistency) while the QA answer keeps the true value, emulating
datasets where answers are not always written in the text.

Two attributes leave an indirect cue even when their explicit sentence is
omitted: the filming city pins the language and a descriptor adjective
pins the genre. A vocabulary-based answerer can exploit these; a purely
extractive one cannot.

Titles optionally collide with plain phrases embedded in other articles
("Love Story" as both a movie and ordinary words), which poisons
entity-match retrieval and is the stress case for the learned ranker.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, build_corpus, write_corpus_dir
from .rngs import substream

FIRST_NAMES = [
    "Mira", "Jonas", "Priya", "Viktor", "Elena", "Marcus", "Ingrid", "Tomas",
    "Yuki", "Andre", "Celia", "Rohan", "Greta", "Felix", "Nadia", "Oscar",
    "Leila", "Hugo", "Sana", "Pavel", "Dara", "Emil", "Freya", "Gideon",
    "Hana", "Ivo", "Juno", "Kira", "Lars", "Mona", "Nils", "Orla",
    "Petra", "Quinn", "Rosa", "Stefan", "Tara", "Ulric", "Vera", "Wim",
]
LAST_NAMES = [
    "Calder", "Novak", "Ferreira", "Lindqvist", "Okafor", "Petrov", "Santoro", "Becker",
    "Moreau", "Tanaka", "Kowalski", "Varga", "Iversen", "Castillo", "Drummond", "Egerton",
    "Falk", "Gruber", "Hale", "Ibanez", "Jansen", "Keller", "Larsen", "Madsen",
    "Nilsson", "Oduya", "Pavlov", "Quist", "Rask", "Sorensen", "Thorne", "Ulvaeus",
    "Visser", "Weber", "Xenakis", "Ystad", "Zetter", "Abano", "Brandt", "Csorba",
]
TITLE_ADJECTIVES = [
    "Silent", "Golden", "Broken", "Hidden", "Crimson", "Frozen", "Electric", "Savage",
    "Gentle", "Burning", "Distant", "Velvet", "Iron", "Hollow", "Radiant", "Wandering",
]
TITLE_NOUNS = [
    "River", "Empire", "Garden", "Promise", "Horizon", "Castle", "Whisper", "Voyage",
    "Shadow", "Harvest", "Lantern", "Canyon", "Compass", "Orchard", "Summit", "Mirror",
]
# phrase pool for colliding titles; the same words appear as plain text fillers
COLLISION_ADJECTIVES = ["love", "night", "last", "true", "lost", "first", "big", "dark", "long", "final"]
COLLISION_NOUNS = ["story", "city", "dance", "train", "light", "summer", "road", "dream", "song", "game"]

GENRES = ["Comedy", "Horror", "Thriller", "Romance", "Animation", "Crime"]
GENRE_CUES = {
    "Comedy": "hilarious",
    "Horror": "terrifying",
    "Thriller": "suspenseful",
    "Romance": "heartfelt",
    "Animation": "animated",
    "Crime": "gritty",
}
LANGUAGES = ["English", "French", "Hindi", "Japanese", "Italian", "Spanish"]
LANGUAGE_CUES = {
    "English": "London",
    "French": "Paris",
    "Hindi": "Mumbai",
    "Japanese": "Tokyo",
    "Italian": "Rome",
    "Spanish": "Madrid",
}
YEARS = [str(y) for y in range(1972, 2008, 3)]

MOVIE_RELATIONS = ["director", "writer", "actors", "genre", "language", "year"]

# Question templates per relation. All splits share these forms: facts are
# what gets split, so held-out questions bind familiar phrasings to unseen
# (movie, relation) combinations. Desk-scale corpora are too small to train
# paraphrase-level generalization from disjoint template vocabularies.
QUESTION_TEMPLATES: dict[str, list[str]] = {
    "movie_to_director": [
        "who directed the movie {title} ?",
        "which person directed {title} ?",
        "{title} was directed by whom ?",
    ],
    "movie_to_writer": [
        "who wrote the movie {title} ?",
        "which person wrote {title} ?",
        "tell me who wrote {title} ?",
    ],
    "movie_to_actors": [
        "who starred in the movie {title} ?",
        "which actors starred in {title} ?",
        "name who starred in {title} ?",
    ],
    "movie_to_genre": [
        "what genre is the movie {title} ?",
        "which genre does {title} belong to ?",
        "name the genre of {title} ?",
    ],
    "movie_to_language": [
        "what language is the movie {title} in ?",
        "which language does {title} use ?",
        "name the language of {title} ?",
    ],
    "movie_to_year": [
        "when was the movie {title} released ?",
        "which year was {title} released ?",
        "{title} was released in what year ?",
    ],
    "director_to_movie": [
        "what movies did {name} direct ?",
        "which films did {name} direct ?",
        "name the movies {name} did direct ?",
    ],
    "writer_to_movie": [
        "what movies did {name} write ?",
        "which films did {name} write ?",
        "name the movies {name} did write ?",
    ],
    "actor_to_movie": [
        "what movies did {name} appear in ?",
        "which films did {name} appear in ?",
        "name the movies {name} did appear in ?",
    ],
}

CHOICE_CATEGORIES = {"movie_to_genre", "movie_to_language"}
SPAN_CATEGORIES = {"movie_to_director", "movie_to_writer", "movie_to_actors"}


@dataclass
class SynthConfig:
    n_movies: int = 200
    seed: int = 1
    consistency: float = 1.0
    collision_rate: float = 0.0
    fillers_per_article: int = 2
    repeat_relations_per_movie: int = 2
    split_weights: tuple[float, float, float] = (0.70, 0.15, 0.15)
    min_count: int = 10
    templates: dict[str, list[str]] | None = None

    def pick_template(self, category: str, rng: np.random.Generator) -> str:
        table = self.templates if self.templates is not None else QUESTION_TEMPLATES
        forms = table[category]
        return forms[rng.integers(len(forms))]


@dataclass
class Movie:
    title: str
    director: str
    writer: str
    actors: tuple[str, str]
    genre: str
    language: str
    year: str
    omitted: set = field(default_factory=set)


def _person_pool(rng: np.random.Generator, n: int) -> list[str]:
    combos = [(f, l) for f in FIRST_NAMES for l in LAST_NAMES]
    idx = rng.choice(len(combos), size=n, replace=False)
    return [f"{combos[i][0]} {combos[i][1]}" for i in idx]


def _titles(rng: np.random.Generator, n: int, collision_rate: float) -> tuple[list[str], list[str]]:
    """Unique movie titles; a fraction come from the colliding phrase pool."""
    n_collide = int(round(n * collision_rate))
    plain_combos = [f"{a} {b}" for a in TITLE_ADJECTIVES for b in TITLE_NOUNS]
    collide_combos = [f"{a} {b}" for a in COLLISION_ADJECTIVES for b in COLLISION_NOUNS]
    if n - n_collide > len(plain_combos) or n_collide > len(collide_combos):
        raise ValueError(f"title pools too small for n_movies={n}, collision_rate={collision_rate}")
    plain = [plain_combos[i] for i in rng.choice(len(plain_combos), size=n - n_collide, replace=False)]
    collide = [collide_combos[i].title() for i in rng.choice(len(collide_combos), size=n_collide, replace=False)]
    titles = plain + collide
    rng.shuffle(titles)
    return titles, collide


def _article_body(movie: Movie, fillers: list[str]) -> str:
    sentences = [f"{movie.title} is a {GENRE_CUES[movie.genre]} film ."]
    if "director" not in movie.omitted:
        sentences.append(f"{movie.director} directed it .")
    if "writer" not in movie.omitted:
        sentences.append(f"{movie.writer} wrote the screenplay .")
    if "actors" not in movie.omitted:
        sentences.append(f"It stars {movie.actors[0]} and {movie.actors[1]} .")
    if "genre" not in movie.omitted:
        sentences.append(f"It is a {movie.genre.lower()} film .")
    if "year" not in movie.omitted:
        sentences.append(f"It was released in {movie.year} .")
    sentences.append(f"It was filmed in {LANGUAGE_CUES[movie.language]} .")
    if "language" not in movie.omitted:
        sentences.append(f"It is in {movie.language} .")
    for phrase in fillers:
        sentences.append(f"Fans call it a {phrase} .")
    return " ".join(sentences)


def generate_raw(config: SynthConfig) -> tuple[list[str], list[tuple[str, str]], dict, dict]:
    """Raw corpus pieces plus bookkeeping (movies, collision titles)."""
    if config.n_movies < 1:
        raise ValueError(f"n_movies must be >= 1, got {config.n_movies}")
    if not 0.0 <= config.consistency <= 1.0:
        raise ValueError(f"consistency must be in [0, 1], got {config.consistency}")
    rng = substream(config.seed, "synth")

    n = config.n_movies
    n_directors = max(4, n // 3)
    n_writers = max(4, n // 3)
    n_actors = max(8, (2 * n) // 3)
    people = _person_pool(rng, n_directors + n_writers + n_actors)
    directors = people[:n_directors]
    writers = people[n_directors : n_directors + n_writers]
    actors = people[n_directors + n_writers :]

    titles, collision_titles = _titles(rng, n, config.collision_rate)

    movies: list[Movie] = []
    for title in titles:
        pair = rng.choice(len(actors), size=2, replace=False)
        movie = Movie(
            title=title,
            director=directors[rng.integers(n_directors)],
            writer=writers[rng.integers(n_writers)],
            actors=(actors[pair[0]], actors[pair[1]]),
            genre=GENRES[rng.integers(len(GENRES))],
            language=LANGUAGES[rng.integers(len(LANGUAGES))],
            year=YEARS[rng.integers(len(YEARS))],
        )
        if config.consistency < 1.0:
            for rel in MOVIE_RELATIONS:
                if rng.random() >= config.consistency:
                    movie.omitted.add(rel)
        movies.append(movie)

    # entity list: titles, people, genres, languages, years
    entity_displays = (
        [m.title for m in movies]
        + sorted({p for m in movies for p in (m.director, m.writer, *m.actors)})
        + GENRES
        + LANGUAGES
        + YEARS
    )

    raw_articles: list[tuple[str, str]] = []
    collision_surfaces = [t.lower() for t in collision_titles]
    for movie in movies:
        fillers: list[str] = []
        if collision_surfaces and config.collision_rate > 0:
            for _ in range(config.fillers_per_article):
                phrase = collision_surfaces[rng.integers(len(collision_surfaces))]
                if phrase != movie.title.lower():
                    fillers.append(phrase)
        raw_articles.append((movie.title, _article_body(movie, fillers)))

    split_names = ["train", "dev", "test"]
    weights = np.asarray(config.split_weights, dtype=float)
    weights = weights / weights.sum()

    def answers_for(movie: Movie, rel: str) -> list[str]:
        if rel == "director":
            return [movie.director]
        if rel == "writer":
            return [movie.writer]
        if rel == "actors":
            return list(movie.actors)
        if rel == "genre":
            return [movie.genre]
        if rel == "language":
            return [movie.language]
        return [movie.year]

    raw_qa: dict[str, list[tuple[str, list[str], str | None]]] = {s: [] for s in split_names}
    for movie in movies:
        first_split: dict[str, str] = {}
        for rel in MOVIE_RELATIONS:
            split = split_names[rng.choice(3, p=weights)]
            first_split[rel] = split
            category = f"movie_to_{rel}"
            question = config.pick_template(category, rng).format(title=movie.title)
            raw_qa[split].append((question, answers_for(movie, rel), category))
        # re-ask a couple of facts in another split (with that split's template)
        repeat_rels = rng.choice(len(MOVIE_RELATIONS), size=config.repeat_relations_per_movie, replace=False)
        for ri in repeat_rels:
            rel = MOVIE_RELATIONS[ri]
            others = [s for s in split_names if s != first_split[rel]]
            split = others[rng.integers(len(others))]
            category = f"movie_to_{rel}"
            question = config.pick_template(category, rng).format(title=movie.title)
            raw_qa[split].append((question, answers_for(movie, rel), category))

    by_role: dict[str, dict[str, list[str]]] = {"director": {}, "writer": {}, "actor": {}}
    for movie in movies:
        by_role["director"].setdefault(movie.director, []).append(movie.title)
        by_role["writer"].setdefault(movie.writer, []).append(movie.title)
        for actor in movie.actors:
            by_role["actor"].setdefault(actor, []).append(movie.title)
    for role in ("director", "writer", "actor"):
        category = f"{role}_to_movie"
        for name in sorted(by_role[role]):
            split = split_names[rng.choice(3, p=weights)]
            question = config.pick_template(category, rng).format(name=name)
            raw_qa[split].append((question, by_role[role][name], category))

    info = {
        "movies": movies,
        "collision_titles": collision_titles,
    }
    return entity_displays, raw_articles, raw_qa, info


def synth_corpus(
    seed: int = 1,
    n_movies: int = 200,
    templates: dict[str, list[str]] | None = None,
    *,
    consistency: float = 1.0,
    collision_rate: float = 0.0,
    min_count: int = 10,
    config: SynthConfig | None = None,
) -> Corpus:
    """Generate a fully encoded synthetic corpus; identical for identical seeds."""
    if config is None:
        config = SynthConfig(
            n_movies=n_movies,
            seed=seed,
            consistency=consistency,
            collision_rate=collision_rate,
            min_count=min_count,
        )
    if templates is not None:
        merged = {cat: list(forms) for cat, forms in QUESTION_TEMPLATES.items()}
        merged.update({cat: list(forms) for cat, forms in templates.items()})
        config.templates = merged
    entity_displays, raw_articles, raw_qa, _ = generate_raw(config)
    return build_corpus(entity_displays, raw_articles, raw_qa, min_count=config.min_count)


def write_synth_dir(path, config: SynthConfig):
    """Materialize a synthetic corpus as a standard corpus directory."""
    entity_displays, raw_articles, raw_qa, info = generate_raw(config)
    meta = {
        "source": "synth",
        "seed": config.seed,
        "n_movies": config.n_movies,
        "consistency": config.consistency,
        "collision_rate": config.collision_rate,
        "min_count": config.min_count,
        "collision_titles": info["collision_titles"],
    }
    return write_corpus_dir(path, entity_displays, raw_articles, raw_qa, meta=meta)
