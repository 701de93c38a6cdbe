"""Caption data model, tokenization and JSON-lines ingestion.

Candidate files carry one image per line::

    {"image_id": "42", "captions": ["a dog runs", "a brown dog"]}

Reference files use the same shape with the key ``references``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "Caption",
    "CaptionSet",
    "ReferenceSet",
    "CorpusError",
    "tokenize",
    "load_caption_file",
    "load_reference_file",
    "write_caption_file",
]

_DROP = re.compile(r"[^a-z0-9'\s]")


class CorpusError(ValueError):
    """Raised for malformed caption or reference files."""


def tokenize(raw: str) -> list[str]:
    """Lowercase, drop everything outside ``[a-z0-9']`` and split on whitespace.

    >>> tokenize("A man riding a horse.")
    ['a', 'man', 'riding', 'a', 'horse']
    """
    return _DROP.sub("", raw.casefold()).split()


@dataclass(frozen=True)
class Caption:
    raw: str
    tokens: tuple[str, ...]

    @classmethod
    def from_raw(cls, raw: str) -> "Caption":
        return cls(raw, tuple(tokenize(raw)))

    def __len__(self) -> int:
        return len(self.tokens)


def _as_captions(items: Iterable[str | Caption]) -> tuple[Caption, ...]:
    if isinstance(items, str):
        raise TypeError("expected a list of captions, got a single string")
    return tuple(c if isinstance(c, Caption) else Caption.from_raw(c) for c in items)


@dataclass(frozen=True)
class CaptionSet:
    """The K sampled captions of one image."""

    image_id: str
    captions: tuple[Caption, ...]

    def __post_init__(self):
        if len(self.captions) < 1:
            raise CorpusError(f"caption set {self.image_id!r} is empty")

    @classmethod
    def of(cls, image_id: str, captions: Iterable[str | Caption]) -> "CaptionSet":
        return cls(str(image_id), _as_captions(captions))

    @property
    def k(self) -> int:
        return len(self.captions)


@dataclass(frozen=True)
class ReferenceSet:
    """Ground-truth captions of one image."""

    image_id: str
    references: tuple[Caption, ...]

    def __post_init__(self):
        if len(self.references) < 1:
            raise CorpusError(f"reference set {self.image_id!r} is empty")

    @classmethod
    def of(cls, image_id: str, references: Iterable[str | Caption]) -> "ReferenceSet":
        return cls(str(image_id), _as_captions(references))


def _read_jsonl(path, key: str) -> list[tuple[str, list[str]]]:
    records = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            if "image_id" not in obj:
                raise CorpusError(f"{path}:{lineno}: missing 'image_id'")
            if key not in obj:
                raise CorpusError(f"{path}:{lineno}: missing {key!r}")
            image_id, texts = obj["image_id"], obj[key]
            if not isinstance(image_id, str):
                raise CorpusError(f"{path}:{lineno}: 'image_id' must be a string")
            if (not isinstance(texts, list) or not texts
                    or not all(isinstance(t, str) for t in texts)):
                raise CorpusError(f"{path}:{lineno}: {key!r} must be a non-empty list of strings")
            if image_id in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate image_id {image_id!r} (first on line {seen[image_id]})")
            seen[image_id] = lineno
            records.append((image_id, texts))
    return records


def load_caption_file(path: str | Path) -> list[CaptionSet]:
    """Read a candidate JSONL file, preserving line order."""
    return [CaptionSet.of(i, texts) for i, texts in _read_jsonl(path, "captions")]


def load_reference_file(path: str | Path) -> list[ReferenceSet]:
    return [ReferenceSet.of(i, texts) for i, texts in _read_jsonl(path, "references")]


def write_caption_file(path: str | Path, sets: Sequence[CaptionSet | ReferenceSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sets:
            if isinstance(s, ReferenceSet):
                rec = {"image_id": s.image_id, "references": [c.raw for c in s.references]}
            else:
                rec = {"image_id": s.image_id, "captions": [c.raw for c in s.captions]}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
