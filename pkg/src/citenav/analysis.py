"""Text analysis: tokenization, stopword removal, stemming.

One analyzer configuration is used for both indexing and query parsing;
an index stores the fingerprint of the config it was built with so a
mismatched query-side config is caught instead of silently degrading
recall.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources

from ._porter import porter_stem

# contiguous alphanumeric runs (unicode letters and digits, no underscore)
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_STOPWORDS: frozenset[str] | None = None


def stopwords() -> frozenset[str]:
    """English stopword set shipped with the package."""
    global _STOPWORDS
    if _STOPWORDS is None:
        text = resources.files("citenav").joinpath("data/stopwords.txt").read_text("utf-8")
        _STOPWORDS = frozenset(w for w in text.split() if w)
    return _STOPWORDS


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    remove_stopwords: bool = True
    stem: bool = True

    def fingerprint(self) -> str:
        payload = {
            "version": 1,
            "lowercase": self.lowercase,
            "remove_stopwords": self.remove_stopwords,
            "stem": self.stem,
            "stopwords": hashlib.sha256(
                "\n".join(sorted(stopwords())).encode("utf-8")
            ).hexdigest() if self.remove_stopwords else "",
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "remove_stopwords": self.remove_stopwords,
            "stem": self.stem,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyzerConfig":
        return cls(
            lowercase=bool(d.get("lowercase", True)),
            remove_stopwords=bool(d.get("remove_stopwords", True)),
            stem=bool(d.get("stem", True)),
        )


def analyze(text: str, config: AnalyzerConfig = AnalyzerConfig()) -> list[str]:
    """Turn text into a token list: split, lowercase, stop, stem."""
    tokens = _TOKEN_RE.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.remove_stopwords:
        stops = stopwords()
        tokens = [t for t in tokens if t not in stops]
    if config.stem:
        tokens = [porter_stem(t) for t in tokens]
    return tokens
