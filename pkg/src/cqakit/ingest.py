"""Stream-parse StackExchange-style posts XML and join questions with their
accepted answers into QA pairs.

The dump format is a single ``<posts>`` document whose children are
self-closing ``<row .../>`` elements carrying everything in attributes
(Id, PostTypeId, Body, Title, Tags, ParentId, AcceptedAnswerId,
CreationDate, Score).
"""

import json
import xml.parsers.expat
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from html.parser import HTMLParser
from typing import IO, Iterable, Iterator

from .errors import DataFormatError, DumpParseError

_CHUNK_SIZE = 1 << 16

# XML-predefined entities; anything else passes through verbatim.
_XML_ENTITIES = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}

# Block boundaries emit newlines: pre on both sides (keeps code blocks
# separated from inline text), p/li after, br at the tag itself.
_NEWLINE_BEFORE = {"pre"}
_NEWLINE_AFTER = {"p", "pre", "li"}


class PostType(Enum):
    QUESTION = 1
    ANSWER = 2


@dataclass(frozen=True)
class RawPost:
    """One row of a posts dump, before the question/answer join."""

    id: int
    post_type: PostType
    body_html: str
    parent_id: int | None = None
    accepted_answer_id: int | None = None
    creation_date: datetime | None = None
    title: str | None = None
    tags: tuple[str, ...] = ()
    score: int = 0


@dataclass(frozen=True)
class QAPair:
    """Cleaned (question, description, answer) triple with metadata."""

    question_id: int
    question: str
    description: str
    answer: str
    tags: tuple[str, ...]
    creation_date: datetime

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "description": self.description,
            "answer": self.answer,
            "tags": list(self.tags),
            "creation_date": self.creation_date.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAPair":
        return cls(
            question_id=int(d["question_id"]),
            question=d["question"],
            description=d["description"],
            answer=d["answer"],
            tags=tuple(d["tags"]),
            creation_date=parse_timestamp(d["creation_date"]),
        )


@dataclass
class IngestDiagnostics:
    """Counters and row-level rejects accumulated during ingestion."""

    rows_read: int = 0
    rows_skipped: int = 0
    dangling_accepted: int = 0
    pairs_emitted: int = 0
    rejects: list[dict] = field(default_factory=list)

    def reject(self, row_number: int, reason: str) -> None:
        self.rows_skipped += 1
        self.rejects.append({"row": row_number, "reason": reason})

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_skipped": self.rows_skipped,
            "dangling_accepted": self.dangling_accepted,
            "pairs_emitted": self.pairs_emitted,
            "rejects": self.rejects,
        }


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def parse_tags(raw: str) -> tuple[str, ...]:
    """Decode the dump's ``<a><b>`` tag concatenation into a tuple."""
    trimmed = raw.strip()
    if trimmed.startswith("<") and trimmed.endswith(">"):
        trimmed = trimmed[1:-1]
    if not trimmed:
        return ()
    return tuple(part.lower() for part in trimmed.split("><") if part)


class _TextExtractor(HTMLParser):
    """Strips tags, keeps text (code included), decodes XML entities and
    numeric character references; unknown named entities pass through."""

    def __init__(self):
        super().__init__(convert_charrefs=False)
        self.parts: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "br":
            self.parts.append("\n")
        elif tag in _NEWLINE_BEFORE:
            self.parts.append("\n")

    def handle_startendtag(self, tag, attrs):
        if tag == "br":
            self.parts.append("\n")
        elif tag in _NEWLINE_BEFORE:
            self.parts.append("\n")
        if tag in _NEWLINE_AFTER:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in _NEWLINE_AFTER:
            self.parts.append("\n")

    def handle_data(self, data):
        self.parts.append(data)

    def handle_entityref(self, name):
        self.parts.append(_XML_ENTITIES.get(name, f"&{name};"))

    def handle_charref(self, name):
        try:
            code = int(name[1:], 16) if name.startswith(("x", "X")) else int(name)
            self.parts.append(chr(code))
        except (ValueError, OverflowError):
            self.parts.append(f"&#{name};")


def strip_html(body_html: str) -> str:
    """Remove tags, keep all text content (code blocks verbatim).

    Stripping is total: pathological markup degrades to best-effort text.
    """
    extractor = _TextExtractor()
    try:
        extractor.feed(body_html)
        extractor.close()
    except Exception:
        pass
    return "".join(extractor.parts)


def _row_to_post(attrs: dict, row_number: int, diagnostics: IngestDiagnostics) -> RawPost | None:
    type_id = attrs.get("PostTypeId")
    if type_id not in ("1", "2"):
        diagnostics.rows_skipped += 1
        return None
    if "Id" not in attrs:
        diagnostics.reject(row_number, "missing Id")
        return None
    if "Body" not in attrs:
        diagnostics.reject(row_number, "missing Body")
        return None
    try:
        post_id = int(attrs["Id"])
    except ValueError:
        diagnostics.reject(row_number, f"non-integer Id {attrs['Id']!r}")
        return None
    creation = None
    if "CreationDate" in attrs:
        try:
            creation = parse_timestamp(attrs["CreationDate"])
        except ValueError:
            diagnostics.reject(row_number, f"bad CreationDate {attrs['CreationDate']!r}")
            return None
    score = int(attrs.get("Score", "0"))
    if type_id == "1":
        accepted = attrs.get("AcceptedAnswerId")
        return RawPost(
            id=post_id,
            post_type=PostType.QUESTION,
            body_html=attrs["Body"],
            accepted_answer_id=int(accepted) if accepted is not None else None,
            creation_date=creation,
            title=attrs.get("Title"),
            tags=parse_tags(attrs.get("Tags", "")),
            score=score,
        )
    parent = attrs.get("ParentId")
    return RawPost(
        id=post_id,
        post_type=PostType.ANSWER,
        body_html=attrs["Body"],
        parent_id=int(parent) if parent is not None else None,
        creation_date=creation,
        score=score,
    )


def parse_posts(stream: IO[bytes], diagnostics: IngestDiagnostics | None = None) -> Iterator[RawPost]:
    """Lazily yield one RawPost per question/answer row of a posts XML stream.

    Single pass, bounded memory: rows are handed off as soon as their element
    closes; nothing is retained between rows. Rows with other PostTypeId
    values are skipped; rows missing Id or Body are recorded in
    ``diagnostics.rejects`` and parsing continues. Malformed XML raises
    DumpParseError naming the byte offset.
    """
    diag = diagnostics if diagnostics is not None else IngestDiagnostics()
    parser = xml.parsers.expat.ParserCreate()
    pending: list[RawPost] = []

    def on_start(name, attrs):
        if name != "row":
            return
        diag.rows_read += 1
        post = _row_to_post(attrs, diag.rows_read, diag)
        if post is not None:
            pending.append(post)

    parser.StartElementHandler = on_start
    parser.buffer_text = True

    while True:
        chunk = stream.read(_CHUNK_SIZE)
        try:
            parser.Parse(chunk, not chunk)
        except xml.parsers.expat.ExpatError as exc:
            raise DumpParseError(str(exc), parser.ErrorByteIndex) from exc
        if pending:
            yield from pending
            pending.clear()
        if not chunk:
            return


def assemble_qa_pairs(
    posts: Iterable[RawPost], diagnostics: IngestDiagnostics | None = None
) -> list[QAPair]:
    """Join each question having an accepted answer with that answer.

    Posts may arrive in any order, so both questions and an id-keyed answer
    map are buffered; memory is proportional to the input. Questions whose
    accepted answer is absent are counted as dangling references.
    """
    diag = diagnostics if diagnostics is not None else IngestDiagnostics()
    questions: list[RawPost] = []
    answers: dict[int, str] = {}
    for post in posts:
        if post.post_type is PostType.QUESTION:
            questions.append(post)
        else:
            answers[post.id] = post.body_html

    pairs: list[QAPair] = []
    for q in questions:
        if q.accepted_answer_id is None:
            continue
        answer_html = answers.get(q.accepted_answer_id)
        if answer_html is None:
            diag.dangling_accepted += 1
            continue
        if q.creation_date is None:
            diag.reject(q.id, "question without CreationDate")
            continue
        pairs.append(
            QAPair(
                question_id=q.id,
                question=q.title or "",
                description=strip_html(q.body_html),
                answer=strip_html(answer_html),
                tags=q.tags,
                creation_date=q.creation_date,
            )
        )
    diag.pairs_emitted += len(pairs)
    return pairs


def write_pairs_jsonl(pairs: Iterable[QAPair], fh: IO[str]) -> int:
    n = 0
    for pair in pairs:
        fh.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
        n += 1
    return n


def read_pairs_jsonl(fh: IO[str], path: str | None = None) -> list[QAPair]:
    pairs = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            pairs.append(QAPair.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DataFormatError(f"bad QA pair record: {exc}", path=path, line=lineno) from exc
    return pairs
