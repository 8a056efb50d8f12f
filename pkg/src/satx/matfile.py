"""Line-oriented text format for matrices.

Diff-friendly and language-neutral: a small header (kind, dimensions,
labels, optional note) followed by row-major entries, one row per line,
serialized with 17 significant digits so export/import round-trips are
bit-exact.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import MatrixFileError

MAGIC = "satx-matrix 1"
KINDS = ("encoding", "transcoding", "decoder_to_speaker")


@dataclass(frozen=True)
class MatrixFile:
    kind: str
    rows: int
    cols: int
    row_labels: tuple
    col_labels: tuple
    entries: tuple  # row-major floats
    note: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MatrixFileError(f"unknown matrix kind {self.kind!r}")
        if self.rows * self.cols != len(self.entries):
            raise MatrixFileError(
                f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} "
                f"entries, got {len(self.entries)}"
            )
        for labels, count, what in (
            (self.row_labels, self.rows, "row"),
            (self.col_labels, self.cols, "column"),
        ):
            if len(labels) != count:
                raise MatrixFileError(f"expected {count} {what} labels")
            if len(set(labels)) != len(labels):
                raise MatrixFileError(f"{what} labels must be unique")
            for label in labels:
                if not label or any(c.isspace() for c in label):
                    raise MatrixFileError(f"bad {what} label {label!r}")
        if "\n" in self.note:
            raise MatrixFileError("note must be a single line")

    def values(self) -> np.ndarray:
        return np.array(self.entries, dtype=float).reshape(self.rows, self.cols)


def matrix_file(values, kind: str = "transcoding", row_labels=None,
                col_labels=None, note: str = "") -> MatrixFile:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise MatrixFileError("matrix must be 2-D")
    rows, cols = values.shape
    row_labels = tuple(row_labels) if row_labels else tuple(
        f"r{i}" for i in range(rows)
    )
    col_labels = tuple(col_labels) if col_labels else tuple(
        f"c{i}" for i in range(cols)
    )
    return MatrixFile(
        kind=kind,
        rows=rows,
        cols=cols,
        row_labels=row_labels,
        col_labels=col_labels,
        entries=tuple(float(x) for x in values.ravel()),
        note=note,
    )


def format_matrix(m: MatrixFile) -> str:
    lines = [
        MAGIC,
        f"kind {m.kind}",
        f"rows {m.rows}",
        f"cols {m.cols}",
        "row_labels " + " ".join(m.row_labels),
        "col_labels " + " ".join(m.col_labels),
    ]
    if m.note:
        lines.append(f"note {m.note}")
    values = m.values()
    for r in range(m.rows):
        lines.append(" ".join(f"{x:.17g}" for x in values[r]))
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".satx-tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def export_matrix(m: MatrixFile, path) -> None:
    write_text_atomic(path, format_matrix(m))


def parse_matrix(text: str) -> MatrixFile:
    lines = [line.rstrip("\n") for line in text.splitlines()]
    if not lines or lines[0].strip() != MAGIC:
        raise MatrixFileError(f"missing header line {MAGIC!r}")
    header = {}
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        stripped = line.strip()
        if not stripped:
            continue
        key = stripped.split(None, 1)[0]
        if key in ("kind", "rows", "cols", "row_labels", "col_labels", "note"):
            if key in header:
                raise MatrixFileError(f"duplicate header key {key!r}")
            header[key] = stripped[len(key):].strip()
        else:
            body_start = i
            break
    for required in ("kind", "rows", "cols"):
        if required not in header:
            raise MatrixFileError(f"missing header key {required!r}")
    if body_start is None:
        raise MatrixFileError("no matrix entries found")
    try:
        rows = int(header["rows"])
        cols = int(header["cols"])
    except ValueError as exc:
        raise MatrixFileError("rows/cols must be integers") from exc
    if rows < 1 or cols < 1:
        raise MatrixFileError("rows and cols must be positive")
    entries = []
    for line in lines[body_start:]:
        stripped = line.strip()
        if not stripped:
            continue
        try:
            entries.extend(float(tok) for tok in stripped.split())
        except ValueError as exc:
            raise MatrixFileError(f"bad numeric entry in line {stripped!r}") from exc
    row_labels = tuple(header.get("row_labels", "").split()) or tuple(
        f"r{i}" for i in range(rows)
    )
    col_labels = tuple(header.get("col_labels", "").split()) or tuple(
        f"c{i}" for i in range(cols)
    )
    return MatrixFile(
        kind=header["kind"],
        rows=rows,
        cols=cols,
        row_labels=row_labels,
        col_labels=col_labels,
        entries=tuple(entries),
        note=header.get("note", ""),
    )


def import_matrix(path) -> MatrixFile:
    try:
        with open(path, "r") as handle:
            text = handle.read()
    except OSError as exc:
        raise MatrixFileError(f"cannot read matrix file {path}: {exc}") from exc
    return parse_matrix(text)
