"""Rule-based intent extraction from text utterances.

Within the fixed task vocabulary, exact lexicon matching stands in for a
full tagging pipeline: it is deterministic and behaves identically on the
verb/noun/color phrases the tasks use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .detector import PALETTE_NAMES
from .scene import CLASS_VOCABULARY

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_VERBS = frozenset({"take", "grasp", "get", "pick", "give", "hand", "put", "place", "grab", "fetch"})
DEFAULT_AFFIRMATIONS = frozenset({"yes", "yeah", "yep", "sure", "ok", "okay"})
DEFAULT_QUIT_WORDS = frozenset({"stop", "quit", "goodbye"})


@dataclass(frozen=True)
class Lexicons:
    verbs: frozenset[str] = DEFAULT_VERBS
    nouns: frozenset[str] = frozenset(CLASS_VOCABULARY)
    colors: frozenset[str] = frozenset(name.lower() for name in PALETTE_NAMES)
    affirmations: frozenset[str] = DEFAULT_AFFIRMATIONS
    quit_words: frozenset[str] = DEFAULT_QUIT_WORDS


DEFAULT_LEXICONS = Lexicons()


class IntentKind(Enum):
    RETRIEVE = "retrieve"
    COLOR_REQUEST = "color_request"
    AFFIRM = "affirm"
    DENY = "deny"
    QUIT = "quit"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Intent:
    kind: IntentKind
    noun: str | None = None
    color: str | None = None
    tokens: tuple[str, ...] = field(default_factory=tuple)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation, dropping empty tokens."""
    return _TOKEN_RE.findall(text.lower())


def parse_intent(text: str, lex: Lexicons = DEFAULT_LEXICONS) -> Intent:
    """Map an utterance to exactly one intent.

    Precedence: leading affirmation, then "no", then quit words, then
    verb+noun retrieval (first matching noun wins; extra nouns are ignored),
    then the first color word. Everything else is Unknown.
    """
    tokens = tuple(tokenize(text))
    if tokens and tokens[0] in lex.affirmations:
        return Intent(IntentKind.AFFIRM, tokens=tokens)
    if "no" in tokens:
        return Intent(IntentKind.DENY, tokens=tokens)
    if any(t in lex.quit_words for t in tokens):
        return Intent(IntentKind.QUIT, tokens=tokens)
    if any(t in lex.verbs for t in tokens):
        for t in tokens:
            if t in lex.nouns:
                return Intent(IntentKind.RETRIEVE, noun=t, tokens=tokens)
    for t in tokens:
        if t in lex.colors:
            return Intent(IntentKind.COLOR_REQUEST, color=t, tokens=tokens)
    return Intent(IntentKind.UNKNOWN, tokens=tokens)
