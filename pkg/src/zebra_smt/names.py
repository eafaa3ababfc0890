"""Label normalization and fuzzy identifier resolution.

Solver models name things however the author of the script felt like
(``Kermit_Place``, ``H1_N``, ``House_1_Color``), so grading needs a
tolerant way to map identifiers back onto puzzle labels.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

ORDINAL_WORDS = {
    "first": 1,
    "second": 2,
    "third": 3,
    "fourth": 4,
    "fifth": 5,
    "sixth": 6,
    "seventh": 7,
    "eighth": 8,
    "ninth": 9,
    "tenth": 10,
}

_SEPARATORS = re.compile(r"[\s_\-]+")
_DIGITS = re.compile(r"\d+")
_INT_LITERAL = re.compile(r"^[+-]?\d+$")
_ORDINAL_SUFFIX = re.compile(r"^(\d+)(st|nd|rd|th)$")


def normalize(label: str) -> str:
    """Case-fold and drop whitespace, underscores, dashes and a leading ``#``."""
    text = str(label).strip().casefold()
    if text.startswith("#"):
        text = text[1:]
    return _SEPARATORS.sub("", text)


def as_int(label: str) -> int | None:
    text = normalize(label)
    if _INT_LITERAL.match(text):
        return int(text)
    return None


def ordinal_number(label: str) -> int | None:
    """``"Second"`` -> 2, ``"3rd"`` -> 3, ``"4"`` -> 4; None otherwise."""
    text = normalize(label)
    if text in ORDINAL_WORDS:
        return ORDINAL_WORDS[text]
    m = _ORDINAL_SUFFIX.match(text)
    if m:
        return int(m.group(1))
    return as_int(text)


def sanitize(label: str) -> str:
    """Turn a label into an SMT-LIB simple symbol fragment."""
    text = re.sub(r"[^0-9A-Za-z]", "_", str(label).strip())
    return text or "_"


def _digit_runs(text: str) -> list[str]:
    return [d.lstrip("0") or "0" for d in _DIGITS.findall(text)]


def _is_subsequence(short: str, long: str) -> bool:
    it = iter(long)
    return all(ch in it for ch in short)


def match_tier(token: str, candidate: str) -> int | None:
    """How well ``token`` names ``candidate``: 0 exact, 1 prefix, 2 abbreviation.

    Abbreviations must keep the first letter and every digit run, so ``H1``
    names ``House 1`` but not ``House 10``, and ``Anml`` names ``Animal``.
    """
    t, c = normalize(token), normalize(candidate)
    if not t or not c:
        return None
    if t == c:
        return 0
    if t[0] != c[0] or _digit_runs(t) != _digit_runs(c):
        return None
    if c.startswith(t):
        return 1
    if _is_subsequence(t, c):
        return 2
    return None


def resolve(token: str, candidates: Iterable[str]) -> tuple[str, int] | None:
    """Return the unique best-matching candidate and its tier, or None."""
    best: list[str] = []
    best_tier = None
    for cand in candidates:
        tier = match_tier(token, cand)
        if tier is None:
            continue
        if best_tier is None or tier < best_tier:
            best, best_tier = [cand], tier
        elif tier == best_tier:
            best.append(cand)
    if best_tier is None or len(best) != 1:
        return None
    return best[0], best_tier


def split_constant(
    name: str, entities: Sequence[str], categories: Sequence[str]
) -> tuple[str, str] | None:
    """Split ``<Entity>_<Category>`` (or the reverse) into puzzle labels.

    Every underscore is tried as the split point; the split whose two halves
    resolve with the lowest combined tier wins. Ties are treated as ambiguous.
    """
    parts = name.split("_")
    scored: dict[tuple[str, str], int] = {}
    for i in range(1, len(parts)):
        left, right = "_".join(parts[:i]), "_".join(parts[i:])
        for ent_tok, cat_tok in ((left, right), (right, left)):
            ent = resolve(ent_tok, entities)
            cat = resolve(cat_tok, categories)
            if ent and cat:
                key = (ent[0], cat[0])
                score = ent[1] + cat[1]
                if key not in scored or score < scored[key]:
                    scored[key] = score
    if not scored:
        return None
    low = min(scored.values())
    winners = [k for k, v in scored.items() if v == low]
    if len(winners) != 1:
        return None
    return winners[0]
