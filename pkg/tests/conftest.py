import json

import pytest

from termbench.benchgen import SOURCES, HypotheticalTerm, TermPair, Topic, ValidTerm, pair_id_for
from termbench.corpus import Corpus, ingest_dump

# Titles and definitions quoted from published samples, plus filler pages.
SAMPLE_PAGES = [
    ("Information cascade", "An information cascade occurs when people make the same decision in sequence after observing the actions of others."),
    ("Flux Information Sciences", "Flux Information Sciences is a research lab."),
    ("Flux", "Flux describes any effect that appears to pass or travel through a surface or substance."),
    ("Radiant flux", "Radiant flux is the radiant energy emitted, reflected, transmitted or received per unit time."),
    ("The Cascade", "The Cascade is a large staircase in Yerevan."),
    ("Flux (biology)", "In biology, flux is the movement of a substance between compartments."),
    (
        "Publicity",
        "In marketing, publicity is the public visibility or awareness for any product, service, person or "
        "organization. It may also refer to the movement of information from its source to the general public, "
        "often (but not always) via the media.",
    ),
    ("Mass communication", "Mass communication is the process of imparting information to large segments of the population."),
    ("Intimization", "Intimization is the public exposure of private life in the media."),
    ("Reputation", "Reputation is how others know and perceive you as an individual."),
    ("History of propaganda", "Propaganda has been used throughout history to influence opinion."),
    ("Streisand effect", "The Streisand effect is the way attempts to hide information draw attention to it."),
    ("Post-truth politics", "Post-truth politics is a political culture in which facts matter less than appeals to emotion."),
    ("Breaking news", "Breaking news is newly received information about an event that is currently occurring."),
    ("Headline", "The headline is the text at the top of a newspaper article."),
    ("Journalism", "Journalism is the production and distribution of reports on current events."),
    ("Broadcast journalism", "Broadcast journalism is the field of news reported by electronic methods."),
    ("Investigative journalism", "Investigative journalism is a form in which reporters deeply investigate a topic."),
    ("Jump, Jive an' Wail", "Jump, Jive an' Wail is a 1956 song written by Louis Prima."),
    ("Alley-oop (basketball)", "In basketball, an alley-oop is an offensive play in which a player throws the ball near the basket to a teammate."),
    ("Viral load", "Viral load is the quantity of virus in a given volume of fluid."),
    ("Viral video", "A viral video is a video that becomes popular through internet sharing."),
]


def write_dump(path, pages=SAMPLE_PAGES):
    with open(path, "w", encoding="utf-8") as fh:
        for i, (title, text) in enumerate(pages):
            fh.write(json.dumps({"page_id": str(100 + i), "title": title, "text": text}) + "\n")
    return path


@pytest.fixture
def sample_corpus(tmp_path):
    dump = write_dump(tmp_path / "dump.jsonl")
    ingest_dump(dump, tmp_path / "store")
    return Corpus(tmp_path / "store")


def make_topic(i):
    return Topic(f"Topic {i}", f"Explanation of topic {i}.", i)


def make_term(topic, position):
    phrase = f"Glimmer {topic.index} Quill {position} Drift"
    return HypotheticalTerm(phrase, f"An invented idea number {position}.", topic, position, True, 0)


def make_valid(topic, position, source, k):
    phrase = f"Beacon {topic.index} {position} {source} {k}"
    return ValidTerm(phrase, f"Definition of {phrase}.", source, k, f"{topic.index}-{position}-{source}-{k}")


def make_pairs(n_topics=20, n_terms=6, per_source=3):
    """Distinct term pairs for n_topics x n_terms made-up terms, no overlap."""
    pairs = []
    for t in range(1, n_topics + 1):
        topic = make_topic(t)
        for pos in range(1, n_terms + 1):
            term = make_term(topic, pos)
            for source in SOURCES:
                ranked = [make_valid(topic, pos, source, k) for k in range(1, 2 * per_source + 1)]
                for r in range(per_source):
                    valid, sub = ranked[r], ranked[r + per_source]
                    pairs.append(TermPair(pair_id_for(term, valid, source, r + 1), term, valid, sub, source, r + 1))
    return pairs


def topics_of(pairs):
    seen = {}
    for p in pairs:
        seen[p.hypothetical.topic.index] = p.hypothetical.topic
    return [seen[k] for k in sorted(seen)]


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS:
        terminalreporter.write_line(line)
