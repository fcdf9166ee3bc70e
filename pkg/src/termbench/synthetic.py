"""A deterministic offline chat backend that plays every role in the pipeline.

It recognizes each request by its system prompt and writes a plausible reply
without any network access: topic lists, made-up terms and explanations,
similar-title suggestions, composed questions, system-under-test answers and
evaluator-agent JSON. All choices come from a keyed hash of the request, so
two runs with the same inputs produce the same text.

It exists to drive ``--mock`` runs and end-to-end tests; nothing about its
output distribution is meant to resemble a real model's.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Iterable, Sequence

from termbench import prompts
from termbench.parsing import parse_numbered_items
from termbench.providers.base import ChatRequest
from termbench.textnorm import contains_term

TOPICS = (
    ("News and Current Events", "Coverage of what is happening around the world."),
    ("Entertainment and Celebrities", "Films, music, television and the people behind them."),
    ("Technology and Gadgets", "New devices, software and the companies that make them."),
    ("Health and Fitness", "Exercise, diet and general wellbeing."),
    ("Travel and Tourism", "Destinations, tips and stories from trips."),
    ("Food and Cooking", "Recipes, restaurants and food culture."),
    ("Fashion and Beauty", "Clothing trends, cosmetics and personal style."),
    ("Sports", "Matches, athletes and results across many sports."),
    ("Personal Finance", "Saving, investing and managing money."),
    ("Science and Space", "Discoveries, research and exploration."),
    ("Gaming", "Video games, consoles and the players who enjoy them."),
    ("Education and Learning", "Courses, study methods and schools."),
    ("Parenting and Family", "Raising children and family life."),
    ("Home and Garden", "Decoration, repairs and growing plants."),
    ("Politics", "Elections, policy and government."),
    ("Environment and Climate", "Weather, nature and sustainability."),
    ("Automotive", "Cars, driving and transport."),
    ("Art and Design", "Painting, illustration and visual culture."),
    ("Pets and Animals", "Caring for pets and stories about wildlife."),
    ("Social Media", "Platforms, influencers and online communities."),
)

_ADJECTIVES = (
    "silent", "hidden", "rapid", "shared", "distant", "gentle", "layered", "mirrored",
    "shifting", "quiet", "borrowed", "scattered", "rising", "folded", "hollow", "bright",
)
_NOUNS = (
    "echo", "harbor", "lantern", "signal", "orbit", "garden", "ledger", "canvas",
    "bridge", "current", "compass", "thread", "beacon", "mosaic", "ripple", "anchor",
    "meadow", "circuit", "prism", "vessel", "summit", "archive", "pulse", "horizon",
)
_FAKE_TITLES = ("Quantum Lattice Bloom", "Ember Cascade Protocol", "Velvet Sky Doctrine")

_TERM_LINE = re.compile(r"^(MADE-UP TERM|REAL TERM|MAIN TERM|SECONDARY TERM|TOPIC|TERM) => (.*)$", re.M)
_QA = re.compile(r"QUESTION => (.*?)\nANSWER => (.*?)\n\nINSTRUCTION =>", re.S)


def _h(*parts: object) -> int:
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def _fields(text: str) -> dict[str, str]:
    return {k: v.strip() for k, v in _TERM_LINE.findall(text)}


def _phrase(line: str) -> str:
    return line.split(":", 1)[0].strip()


class SyntheticChat:
    """Offline stand-in for both the generator model and the model under test.

    ``vocabulary`` is the list of real titles it may suggest. ``known_terms``
    lets the answering role find the two terms inside a question; without it
    answers simply restate the question.
    """

    def __init__(
        self,
        vocabulary: Sequence[str] = (),
        known_terms: Iterable[str] = (),
        model_id: str = "synthetic",
        seed: int = 0,
        malformed_every: int = 37,
        drop_term_every: int = 29,
    ) -> None:
        self.vocabulary = list(vocabulary)
        self.known_terms = sorted(set(known_terms), key=lambda t: (-len(t), t))
        self.model_id = model_id
        self.seed = seed
        self.malformed_every = malformed_every
        self.drop_term_every = drop_term_every

    def chat(self, req: ChatRequest) -> str:
        system = req.system_prompt
        first = req.user_turns[0]
        if system == prompts.ONLINE_EXPERT_SYSTEM:
            if first.startswith("What are the most popular"):
                return self._topics(first)
            if req.user_turns[-1] == prompts.EXPLANATIONS_USER:
                return self._explanations(req.assistant_turns[-1])
            return self._terms(first)
        if system.startswith("You are a linguistic expert.\nYou will be given a TOPIC and a MADE-UP TERM"):
            return self._suggestions(first)
        if system == prompts.HYPOTHETICAL_QUESTION_SYSTEM:
            return self._hypothetical_question(req)
        if system == prompts.VALID_QUESTION_SYSTEM:
            return self._valid_question(first)
        if system == prompts.ACCEPTANCE_SYSTEM:
            return self._acceptance(req)
        if system == prompts.MEANING_SYSTEM:
            return self._meaning(req)
        return self._answer(req.user_turns[-1])

    # generator roles

    def _topics(self, prompt: str) -> str:
        m = re.search(r"(\d+)", prompt)
        count = int(m.group(1)) if m else len(TOPICS)
        lines = [f"The most popular {count} topics on the internet are:"]
        for i in range(count):
            name, expl = TOPICS[i % len(TOPICS)]
            if i >= len(TOPICS):
                name = f"{name} {i // len(TOPICS) + 1}"
            lines.append(f"{i + 1}. {name}: {expl}")
        return "\n".join(lines)

    def _terms(self, prompt: str) -> str:
        m = re.search(r"list of (\d+)", prompt)
        count = int(m.group(1)) if m else 50
        topic = _phrase(prompt.rsplit("Topic:", 1)[-1])
        lines = []
        for i in range(1, count + 1):
            h = _h(self.seed, "term", topic, i)
            words = [
                _ADJECTIVES[h % len(_ADJECTIVES)],
                _NOUNS[(h >> 8) % len(_NOUNS)],
                _NOUNS[(h >> 16) % len(_NOUNS)],
                topic.split()[0].lower(),
            ]
            if i % 13 == 0:
                words[0] = "traditional"
            phrase = " ".join(w.capitalize() for w in words)
            if i % 11 == 0 and self.vocabulary:
                phrase = self.vocabulary[h % len(self.vocabulary)]
            lines.append(f"{i}. {phrase}")
        return "\n".join(lines)

    def _explanations(self, term_list: str) -> str:
        out = []
        for n, label, _ in parse_numbered_items(term_list):
            words = label.lower()
            out.append(f"{n}. {label}: A pattern in which {words} spreads through online communities.")
        return "\n".join(out)

    def _suggestions(self, prompt: str) -> str:
        term = _phrase(_fields(prompt).get("MADE-UP TERM", ""))
        tokens = set(term.lower().split())
        ranked = sorted(
            self.vocabulary,
            key=lambda t: (not tokens & set(t.lower().split()), _h(self.seed, "sugg", term, t)),
        )
        picks = ranked[:12]
        for j, fake in enumerate(_FAKE_TITLES):
            picks.insert(3 * j + 2, fake)
        return "Here are similar terms:\n" + json.dumps(picks)

    def _hypothetical_question(self, req: ChatRequest) -> str:
        f = _fields(req.user_turns[0])
        made_up = _phrase(f["MADE-UP TERM"])
        real = _phrase(f["REAL TERM"])
        topic = _phrase(f["TOPIC"]).lower()
        retry = len(req.user_turns) > 1
        if not retry and self.drop_term_every and _h(self.seed, "qdrop", made_up, real) % self.drop_term_every == 0:
            return f"How does {real} shape the conversation around {topic}?"
        return f"How does {real} relate to {made_up.lower()} in the context of {topic}?"

    def _valid_question(self, prompt: str) -> str:
        f = _fields(prompt)
        main = _phrase(f["MAIN TERM"])
        secondary = _phrase(f["SECONDARY TERM"])
        topic = _phrase(f["TOPIC"]).lower()
        return f"In {topic}, what role does {main} play when discussing {secondary}?"

    # answering role

    def _found_terms(self, question: str) -> list[str]:
        found: list[str] = []
        for t in self.known_terms:
            if len(found) == 2:
                break
            if any(contains_term(f, t) for f in found):
                continue
            if contains_term(question, t):
                found.append(t)
        return found

    def _answer(self, question: str) -> str:
        h = _h(self.seed, self.model_id, "answer", question)
        terms = self._found_terms(question)
        if len(terms) < 2:
            return f"That is a broad question. In short: {question.rstrip('?')} depends on the context."
        target = terms[(h >> 8) % 2]
        other = terms[1 - (h >> 8) % 2]
        mode = h % 20
        if mode < 11:
            return (
                f"{terms[0]} and {terms[1]} are closely connected. {terms[0]} often shapes how "
                f"{terms[1]} develops, and the two are usually discussed together."
            )
        if mode < 14:
            return (
                f"{other} is well documented. However, I am not familiar with the term \"{target}\" "
                "and cannot say more about it."
            )
        if mode < 17:
            return f"{other} is a real concept, but \"{target}\" does not appear to exist; it may be a made-up term."
        return "This touches on several broad ideas, and a good answer depends on the specific situation."

    # evaluator roles

    def _agent(self, req: ChatRequest, field: str, value_of) -> str:
        f = _fields(req.user_turns[0])
        term = _phrase(f.get("TERM", ""))
        m = _QA.search(req.user_turns[0])
        answer = m.group(2) if m else ""
        retry = len(req.user_turns) > 1
        if not retry and self.malformed_every and _h(self.seed, field, term, answer) % self.malformed_every == 0:
            return f"The answer talks about {term}, so I would say it is covered."
        value, reason = value_of(term, answer)
        body = json.dumps({"term": term, "reasoning": reason, field: value})
        return f"Let me think step by step.\n{body}\nThat is my assessment."

    def _acceptance(self, req: ChatRequest) -> str:
        def value(term: str, answer: str) -> tuple[str, str]:
            low = answer.lower()
            if f'not familiar with the term "{term.lower()}"' in low:
                return "UNKNOWN", "The answer says it has no information about the term."
            if f'"{term.lower()}" does not appear to exist' in low:
                return "UNREAL", "The answer claims the term does not exist."
            return "MENTIONED", "The answer mentions the term."

        return self._agent(req, "certainty", value)

    def _meaning(self, req: ChatRequest) -> str:
        def value(term: str, answer: str) -> tuple[str, str]:
            if _h(self.seed, "meaning", term, answer) % 8 == 0:
                return "FALSE", "The answer uses the term in a sense unrelated to its definition."
            return "TRUE", "The answer uses the term consistently with its definition."

        return self._agent(req, "verified", value)
