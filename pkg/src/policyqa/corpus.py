"""Rulebook ingestion: document bundles, table serialization, and chunking.

A rulebook arrives as a *document bundle*: a line-oriented UTF-8 file with a
header block (``doc_id:``, ``title:``), a ``BODY`` section of raw prose, and
zero or more ``TABLE`` sections.  Ingestion turns a bundle into retrievable
chunks: prose is sliced into overlapping windows, each table becomes a single
chunk holding its serialized cell lines.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BundleParseError,
    DimensionMismatch,
    InvalidChunkParams,
    ValidationError,
)

DEFAULT_MAX_CHARS = 2000
DEFAULT_OVERLAP_CHARS = 200

# Chunk boundaries snap backward to the nearest sentence end within this
# many chars of the size limit; past that we hard-cut.
SNAP_WINDOW = 200
SENTENCE_ENDS = (".", "\u3002", "?", "!", "\n")

TABLE_HEADER_PREFIX = "TABLE: "


@dataclass
class TableGrid:
    """A table as extracted from a rulebook: labeled rows x labeled columns."""

    table_name: str
    row_labels: list[str]
    column_labels: list[str]
    cells: list[list[str]]

    def validate(self) -> None:
        if not self.table_name:
            raise ValidationError("table_name must be non-empty")
        if len(self.cells) != len(self.row_labels):
            raise DimensionMismatch(
                f"table {self.table_name!r}: {len(self.cells)} cell rows for "
                f"{len(self.row_labels)} row labels"
            )
        for i, row in enumerate(self.cells):
            if len(row) != len(self.column_labels):
                raise DimensionMismatch(
                    f"table {self.table_name!r} row {i}: {len(row)} cells for "
                    f"{len(self.column_labels)} column labels"
                )


@dataclass
class TableCellRecord:
    """One non-empty cell with the labels that locate it."""

    table_name: str
    row: str
    column: str
    value: str


@dataclass
class SourceDocument:
    doc_id: str
    title: str
    body_text: str
    tables: list[TableGrid] = field(default_factory=list)

    def validate(self) -> None:
        if not self.doc_id:
            raise ValidationError("doc_id must be non-empty")
        if not self.body_text and not self.tables:
            raise ValidationError(
                f"document {self.doc_id!r}: body_text may be empty only when tables exist"
            )
        for grid in self.tables:
            grid.validate()


@dataclass
class Chunk:
    """A retrievable unit: a prose window or one whole serialized table."""

    chunk_id: str
    doc_id: str
    seq_no: int
    kind: str  # "prose" | "table"
    text: str
    char_span: tuple[int, int] | None = None  # offsets into body_text, prose only

    def to_json(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "seq_no": self.seq_no,
            "kind": self.kind,
            "text": self.text,
            "char_span": list(self.char_span) if self.char_span else None,
        }

    @classmethod
    def from_json(cls, row: dict) -> "Chunk":
        span = row.get("char_span")
        return cls(
            chunk_id=row["chunk_id"],
            doc_id=row["doc_id"],
            seq_no=row["seq_no"],
            kind=row["kind"],
            text=row["text"],
            char_span=tuple(span) if span else None,
        )


def _escape_field(text: str) -> str:
    # Keeps the rendered line format parseable when cell content contains
    # the delimiter or newlines; plain content passes through untouched.
    return text.replace("\\", "\\\\").replace("|", "\\|").replace("\n", "\\n")


def _unescape_field(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "n":
                out.append("\n")
            else:
                out.append(nxt)
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def serialize_table(grid: TableGrid) -> tuple[list[TableCellRecord], str]:
    """Flatten a table into cell records plus their canonical rendered text.

    The rendered form is a ``TABLE: <name>`` header followed by one line per
    non-empty cell in row-major order::

        <table_name> | row=<row> | column=<column> | value=<value>
    """
    grid.validate()
    records: list[TableCellRecord] = []
    lines = [f"{TABLE_HEADER_PREFIX}{grid.table_name}"]
    for r, row_label in enumerate(grid.row_labels):
        for c, col_label in enumerate(grid.column_labels):
            value = grid.cells[r][c]
            if not value:
                continue
            records.append(
                TableCellRecord(
                    table_name=grid.table_name, row=row_label, column=col_label, value=value
                )
            )
            lines.append(
                f"{_escape_field(grid.table_name)} | row={_escape_field(row_label)}"
                f" | column={_escape_field(col_label)} | value={_escape_field(value)}"
            )
    return records, "\n".join(lines)


_CELL_LINE_RE = re.compile(
    r"^(?P<table>.*?) \| row=(?P<row>.*?) \| column=(?P<column>.*?) \| value=(?P<value>.*)$"
)


def parse_rendered_table(rendered: str) -> list[TableCellRecord]:
    """Recover cell records from text produced by :func:`serialize_table`."""
    records = []
    for line in rendered.splitlines():
        if line.startswith(TABLE_HEADER_PREFIX) or not line.strip():
            continue
        m = _CELL_LINE_RE.match(line)
        if m is None:
            raise ValidationError(f"unparseable table line: {line!r}")
        records.append(
            TableCellRecord(
                table_name=_unescape_field(m.group("table")),
                row=_unescape_field(m.group("row")),
                column=_unescape_field(m.group("column")),
                value=_unescape_field(m.group("value")),
            )
        )
    return records


def _snap_end(body: str, start: int, end: int) -> int:
    """Pull a tentative cut point back to the nearest sentence end."""
    lo = max(start + 1, end - SNAP_WINDOW)
    for pos in range(end - 1, lo - 1, -1):
        if body[pos] in SENTENCE_ENDS:
            return pos + 1
    return end


def chunk_document(
    doc: SourceDocument,
    max_chars: int = DEFAULT_MAX_CHARS,
    overlap_chars: int = DEFAULT_OVERLAP_CHARS,
) -> list[Chunk]:
    """Slice a document into prose chunks plus one chunk per table.

    Prose chunks are verbatim slices of ``body_text``; consecutive chunks
    overlap by up to ``overlap_chars`` so stripping the overlaps (using the
    recorded char spans) reassembles the body byte-for-byte.  Tables are
    never split, so a single table chunk may exceed ``max_chars``.
    """
    if overlap_chars < 0 or max_chars <= overlap_chars:
        raise InvalidChunkParams(
            f"need max_chars > overlap_chars >= 0, got {max_chars}/{overlap_chars}"
        )
    doc.validate()

    chunks: list[Chunk] = []
    seq = 0
    body = doc.body_text
    start = 0
    while start < len(body):
        end = start + max_chars
        if end >= len(body):
            end = len(body)
        else:
            end = _snap_end(body, start, end)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{seq}",
                doc_id=doc.doc_id,
                seq_no=seq,
                kind="prose",
                text=body[start:end],
                char_span=(start, end),
            )
        )
        seq += 1
        if end >= len(body):
            break
        start = max(end - overlap_chars, start + 1)

    for grid in doc.tables:
        _, rendered = serialize_table(grid)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{seq}",
                doc_id=doc.doc_id,
                seq_no=seq,
                kind="table",
                text=rendered,
            )
        )
        seq += 1
    return chunks


# --- document bundle file format ---


def load_bundle(path: str | Path) -> SourceDocument:
    """Read and validate one document bundle file."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleParseError(f"cannot read bundle {path}: {exc}") from exc
    return parse_bundle(raw)


def parse_bundle(raw: str) -> SourceDocument:
    lines = raw.splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "BODY":
        line = lines[i]
        if line.strip():
            if ":" not in line:
                raise BundleParseError(f"bad header line: {line!r}")
            key, _, value = line.partition(":")
            header[key.strip()] = value.strip()
        i += 1
    if i >= len(lines):
        raise BundleParseError("missing BODY section")
    i += 1  # skip the BODY marker

    body_lines: list[str] = []
    while i < len(lines) and lines[i] != "TABLE":
        body_lines.append(lines[i])
        i += 1
    body_text = "\n".join(body_lines).strip("\n")

    tables: list[TableGrid] = []
    while i < len(lines):
        # positioned at a TABLE marker
        i += 1
        if i >= len(lines) or not lines[i].startswith("name:"):
            raise BundleParseError("TABLE section missing name: line")
        name = lines[i][len("name:"):].strip()
        i += 1
        if i >= len(lines) or not lines[i].startswith("columns:"):
            raise BundleParseError(f"table {name!r} missing columns: line")
        columns = lines[i][len("columns:"):].strip("\n").lstrip().split("\t")
        i += 1
        row_labels: list[str] = []
        cells: list[list[str]] = []
        while i < len(lines) and lines[i] != "TABLE":
            if lines[i].strip():
                parts = lines[i].split("\t")
                if len(parts) - 1 > len(columns):
                    raise BundleParseError(
                        f"table {name!r}: row has {len(parts) - 1} cells for "
                        f"{len(columns)} columns"
                    )
                row_labels.append(parts[0])
                row = parts[1:] + [""] * (len(columns) - (len(parts) - 1))
                cells.append(row)
            i += 1
        tables.append(
            TableGrid(table_name=name, row_labels=row_labels, column_labels=columns, cells=cells)
        )

    if not header.get("doc_id"):
        raise ValidationError("bundle is missing doc_id")
    doc = SourceDocument(
        doc_id=header["doc_id"],
        title=header.get("title", ""),
        body_text=body_text,
        tables=tables,
    )
    doc.validate()
    return doc


def save_bundle(doc: SourceDocument, path: str | Path) -> None:
    """Write a document back out in bundle format.

    The container is line-oriented; content that cannot survive the round
    trip (a body line that is exactly ``TABLE``, tabs or newlines inside
    table labels/cells) is rejected rather than silently mangled.
    """
    doc.validate()
    if any(line == "TABLE" for line in doc.body_text.splitlines()):
        raise ValidationError("body_text contains a bare TABLE line; not representable")
    out = [f"doc_id: {doc.doc_id}", f"title: {doc.title}", "BODY"]
    if doc.body_text:
        out.append(doc.body_text)
    for grid in doc.tables:
        for text in [grid.table_name, *grid.row_labels, *grid.column_labels] + [
            cell for row in grid.cells for cell in row
        ]:
            if "\t" in text or "\n" in text:
                raise ValidationError(
                    f"table {grid.table_name!r}: tabs/newlines in table content "
                    "are not representable in bundle format"
                )
        out.append("TABLE")
        out.append(f"name: {grid.table_name}")
        out.append("columns: " + "\t".join(grid.column_labels))
        for label, row in zip(grid.row_labels, grid.cells):
            out.append("\t".join([label, *row]))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# --- on-disk corpus ---


@dataclass
class DocumentMeta:
    doc_id: str
    title: str
    table_count: int
    chunk_count: int


class Corpus:
    """Chunked documents as stored in a corpus directory.

    Layout: ``documents.jsonl`` (one meta row per ingested document) and
    ``chunks.jsonl`` (one row per chunk, ingestion order).
    """

    def __init__(self) -> None:
        self.documents: list[DocumentMeta] = []
        self.chunks: list[Chunk] = []
        self._chunk_ids: set[str] = set()
        self._doc_ids: set[str] = set()

    def __len__(self) -> int:
        return len(self.chunks)

    def has_document(self, doc_id: str) -> bool:
        return doc_id in self._doc_ids

    def chunk_by_id(self, chunk_id: str) -> Chunk:
        for chunk in self.chunks:
            if chunk.chunk_id == chunk_id:
                return chunk
        raise KeyError(chunk_id)

    def add_document(self, doc: SourceDocument, chunks: list[Chunk]) -> None:
        if doc.doc_id in self._doc_ids:
            raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
        for chunk in chunks:
            if chunk.chunk_id in self._chunk_ids:
                raise ValidationError(f"duplicate chunk_id {chunk.chunk_id!r}")
        self.documents.append(
            DocumentMeta(
                doc_id=doc.doc_id,
                title=doc.title,
                table_count=len(doc.tables),
                chunk_count=len(chunks),
            )
        )
        self._doc_ids.add(doc.doc_id)
        for chunk in chunks:
            self.chunks.append(chunk)
            self._chunk_ids.add(chunk.chunk_id)

    def stats(self) -> dict:
        return {
            "documents": len(self.documents),
            "chunks": len(self.chunks),
            "tables": sum(d.table_count for d in self.documents),
        }

    def save(self, corpus_dir: str | Path) -> None:
        root = Path(corpus_dir)
        root.mkdir(parents=True, exist_ok=True)
        with open(root / "documents.jsonl", "w", encoding="utf-8") as fh:
            for meta in self.documents:
                fh.write(json.dumps(meta.__dict__, ensure_ascii=False) + "\n")
        with open(root / "chunks.jsonl", "w", encoding="utf-8") as fh:
            for chunk in self.chunks:
                fh.write(json.dumps(chunk.to_json(), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, corpus_dir: str | Path) -> "Corpus":
        root = Path(corpus_dir)
        corpus = cls()
        docs_path = root / "documents.jsonl"
        chunks_path = root / "chunks.jsonl"
        if docs_path.exists():
            with open(docs_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        corpus.documents.append(DocumentMeta(**json.loads(line)))
        if chunks_path.exists():
            with open(chunks_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        chunk = Chunk.from_json(json.loads(line))
                        corpus.chunks.append(chunk)
                        corpus._chunk_ids.add(chunk.chunk_id)
        corpus._doc_ids = {d.doc_id for d in corpus.documents}
        return corpus
