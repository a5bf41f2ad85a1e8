"""
Text file formats for embeddings, cluster assignments and plot tables.

Embedding files are tab-separated with a versioned header line followed by a
column line::

    #hypgcd-embeddings	version=1	model=tangent	dim=2	curvature=none	count=2	levels=1
    id	v0	v1	label	level1	is_labeled	is_old
    p0	0.1	-0.3	0	0	1	1
    p1	0.2	0.5	1	1	0	0

``label`` is ``-1`` when unknown. Vector components are written with
``repr`` so a write-then-read round trip is exact. The reader streams rows
and reports malformed input with line and column.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from clustering.dataset import LabeledDataset, UNLABELED
from datagen.tree import SyntheticGCD, level_names
from utils.error_handling import ParseError, ValidationError

logger = logging.getLogger(__name__)

EMBEDDING_MAGIC = '#hypgcd-embeddings'
ASSIGNMENT_MAGIC = '#hypgcd-assignments'
FORMAT_VERSION = 1
POINT_MODELS = ('tangent', 'lorentz', 'poincare', 'klein')
HEADER_KEYS = ('version', 'model', 'dim', 'curvature', 'count', 'levels')


@dataclass(frozen=True)
class EmbeddingHeader:
    """
    Header of an embedding file.

    Attributes:
        model (str): Coordinates of the vectors (``tangent`` for Euclidean inputs)
        dim (int): Components per row
        count (int): Number of rows
        curvature (Optional[float]): κ for hyperbolic models
        levels (int): Number of level-label columns (coarse to fine)
        version (int): Format version
    """

    model: str
    dim: int
    count: int
    curvature: Optional[float] = None
    levels: int = 0
    version: int = FORMAT_VERSION

    def columns(self) -> List[str]:
        return (['id'] + [f"v{i}" for i in range(self.dim)] + ['label']
                + level_names(self.levels) + ['is_labeled', 'is_old'])

    def format(self) -> str:
        curvature = 'none' if self.curvature is None else repr(float(self.curvature))
        fields = [EMBEDDING_MAGIC, f"version={self.version}", f"model={self.model}",
                  f"dim={self.dim}", f"curvature={curvature}", f"count={self.count}",
                  f"levels={self.levels}"]
        return '\t'.join(fields)


@dataclass
class EmbeddingRow:
    id: str
    vector: np.ndarray
    label: int
    level_labels: Tuple[int, ...]
    is_labeled: bool
    is_old: bool


@dataclass
class EmbeddingData:
    """
    In-memory contents of an embedding file.

    Attributes:
        header (EmbeddingHeader): Header
        ids (List[str]): Row ids
        points (np.ndarray): Vectors, shape (count, dim)
        labels (np.ndarray): Class per row, ``-1`` when unknown
        level_labels (np.ndarray): Shape (levels, count)
        is_labeled (np.ndarray): Labeled-subset flags
        is_old (np.ndarray): Seen-class flags
    """

    header: EmbeddingHeader
    ids: List[str]
    points: np.ndarray
    labels: np.ndarray
    level_labels: np.ndarray
    is_labeled: np.ndarray
    is_old: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if self.points.shape != (n, self.header.dim):
            raise ValidationError(f"points must have shape ({n}, {self.header.dim}), got {self.points.shape}")
        if self.level_labels.shape != (self.header.levels, n):
            raise ValidationError("level_labels must have one row per level and one column per point")
        if self.header.count != n:
            raise ValidationError(f"Header count {self.header.count} does not match {n} rows")

    @property
    def old_classes(self) -> frozenset:
        return frozenset(int(c) for c in np.unique(self.labels[self.is_old & (self.labels >= 0)]))

    @property
    def class_count(self) -> int:
        return int(np.unique(self.labels[self.labels >= 0]).shape[0])

    def to_dataset(self, points: Optional[np.ndarray] = None) -> LabeledDataset:
        """The rows as a LabeledDataset, optionally over converted coordinates."""
        return LabeledDataset(self.points if points is None else points, self.labels,
                              self.is_labeled, self.old_classes)

    def with_points(self, points: np.ndarray, model: str,
                    curvature: Optional[float] = None) -> 'EmbeddingData':
        """Same rows and labels over new coordinates."""
        points = np.asarray(points, dtype=np.float64)
        header = EmbeddingHeader(model, points.shape[1], self.header.count, curvature, self.header.levels)
        return EmbeddingData(header, list(self.ids), points, self.labels.copy(),
                             self.level_labels.copy(), self.is_labeled.copy(), self.is_old.copy())

    @classmethod
    def from_synthetic(cls, data: SyntheticGCD) -> 'EmbeddingData':
        n, dim = data.points.shape
        header = EmbeddingHeader('tangent', dim, n, None, data.level_labels.shape[0])
        return cls(header, [f"p{i}" for i in range(n)], np.array(data.points, dtype=np.float64),
                   np.array(data.labels, dtype=np.int64), np.array(data.level_labels, dtype=np.int64),
                   np.array(data.is_labeled, dtype=bool), np.array(data.old_mask, dtype=bool))


def _header_fields(line: str, magic: str, path: str) -> Dict[str, str]:
    fields = line.rstrip('\n').split('\t')
    if fields[0] != magic:
        raise ParseError(f"Expected header starting with {magic!r}", 1, 1, path)
    values = {}
    for col, item in enumerate(fields[1:], start=2):
        key, sep, value = item.partition('=')
        if not sep or not key:
            raise ParseError(f"Header field {item!r} is not key=value", 1, col, path)
        values[key] = value
    if 'version' not in values:
        raise ParseError("Header has no version field", 1, None, path)
    if values['version'] != str(FORMAT_VERSION):
        raise ParseError(f"Unsupported format version {values['version']!r}", 1, None, path)
    return values


def _header_int(values: Dict[str, str], key: str, path: str, minimum: int = 0) -> int:
    if key not in values:
        raise ParseError(f"Header has no {key} field", 1, None, path)
    try:
        value = int(values[key])
    except ValueError:
        raise ParseError(f"Header field {key} must be an integer, got {values[key]!r}", 1, None, path)
    if value < minimum:
        raise ParseError(f"Header field {key} must be >= {minimum}, got {value}", 1, None, path)
    return value


def _parse_header(line: str, path: str) -> EmbeddingHeader:
    values = _header_fields(line, EMBEDDING_MAGIC, path)
    missing = [key for key in HEADER_KEYS if key not in values]
    if missing:
        raise ParseError(f"Header is missing {missing}", 1, None, path)
    model = values['model']
    if model not in POINT_MODELS:
        raise ParseError(f"Unknown model {model!r}; expected one of {POINT_MODELS}", 1, None, path)
    curvature = None
    if values['curvature'] != 'none':
        try:
            curvature = float(values['curvature'])
        except ValueError:
            raise ParseError(f"Curvature must be a number or none, got {values['curvature']!r}", 1, None, path)
        if not (np.isfinite(curvature) and curvature > 0.0):
            raise ParseError(f"Curvature must be positive, got {curvature}", 1, None, path)
    return EmbeddingHeader(model, _header_int(values, 'dim', path, 1), _header_int(values, 'count', path),
                           curvature, _header_int(values, 'levels', path))


def _int_field(value: str, line: int, col: int, path: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"Expected an integer, got {value!r}", line, col, path)


def _flag_field(value: str, line: int, col: int, path: str) -> bool:
    if value not in ('0', '1'):
        raise ParseError(f"Expected flag 0 or 1, got {value!r}", line, col, path)
    return value == '1'


def _parse_row(fields: List[str], header: EmbeddingHeader, line: int, path: str) -> EmbeddingRow:
    expected = len(header.columns())
    if len(fields) != expected:
        raise ParseError(f"Expected {expected} fields, got {len(fields)}", line,
                         min(len(fields), expected) + 1, path)
    vector = np.empty(header.dim)
    for i in range(header.dim):
        try:
            vector[i] = float(fields[1 + i])
        except ValueError:
            raise ParseError(f"Expected a number, got {fields[1 + i]!r}", line, 2 + i, path)
        if not np.isfinite(vector[i]):
            raise ParseError(f"Component is not finite: {fields[1 + i]!r}", line, 2 + i, path)
    col = 2 + header.dim
    label = _int_field(fields[col - 1], line, col, path)
    if label < UNLABELED:
        raise ParseError(f"Label must be >= -1, got {label}", line, col, path)
    levels = tuple(_int_field(fields[col + j], line, col + 1 + j, path) for j in range(header.levels))
    col += header.levels
    is_labeled = _flag_field(fields[col], line, col + 1, path)
    is_old = _flag_field(fields[col + 1], line, col + 2, path)
    if is_labeled and label < 0:
        raise ParseError("Labeled row has no label", line, 2 + header.dim, path)
    return EmbeddingRow(fields[0], vector, label, levels, is_labeled, is_old)


class EmbeddingReader:
    """
    Streaming reader over an embedding file.

    Example:
        >>> with EmbeddingReader('points.tsv') as reader:
        ...     for row in reader:
        ...         print(row.id, row.label)
    """

    def __init__(self, path: str):
        self.path = str(path)
        self._handle: Optional[TextIO] = None
        self.header: Optional[EmbeddingHeader] = None

    def __enter__(self) -> 'EmbeddingReader':
        self._handle = open(self.path, 'r', encoding='utf-8')
        try:
            self._read_header()
        except Exception:
            self._handle.close()
            raise
        return self

    def _read_header(self) -> None:
        first = self._handle.readline()
        if not first:
            raise ParseError("File is empty", 1, None, self.path)
        self.header = _parse_header(first, self.path)
        columns = self._handle.readline().rstrip('\n').split('\t')
        expected = self.header.columns()
        if columns != expected:
            col = next((i + 1 for i, (a, b) in enumerate(zip(columns, expected)) if a != b),
                       min(len(columns), len(expected)) + 1)
            wanted = expected[col - 1] if col <= len(expected) else 'end of line'
            raise ParseError(f"Column line does not match the header (expected {wanted!r})",
                             2, col, self.path)

    def __exit__(self, *exc) -> None:
        if self._handle is not None:
            self._handle.close()

    def __iter__(self) -> Iterator[EmbeddingRow]:
        seen = 0
        line_no = 2
        for line_no, line in enumerate(self._handle, start=3):
            text = line.rstrip('\n')
            if not text.strip():
                continue
            seen += 1
            if seen > self.header.count:
                raise ParseError(f"More rows than the declared count {self.header.count}", line_no, 1, self.path)
            yield _parse_row(text.split('\t'), self.header, line_no, self.path)
        if seen != self.header.count:
            raise ParseError(f"Declared {self.header.count} rows, found {seen}", line_no + 1, None, self.path)


def read_embeddings(path: str) -> EmbeddingData:
    """
    Read a whole embedding file.

    Raises:
        ParseError: With line and column of the first malformed field
    """
    with EmbeddingReader(path) as reader:
        rows = list(reader)
        header = reader.header
    n = len(rows)
    data = EmbeddingData(
        header=header,
        ids=[r.id for r in rows],
        points=np.array([r.vector for r in rows], dtype=np.float64).reshape(n, header.dim),
        labels=np.array([r.label for r in rows], dtype=np.int64),
        level_labels=np.array([r.level_labels for r in rows], dtype=np.int64).reshape(n, header.levels).T,
        is_labeled=np.array([r.is_labeled for r in rows], dtype=bool),
        is_old=np.array([r.is_old for r in rows], dtype=bool),
    )
    logger.info(f"Read {n} {header.model} rows of dimension {header.dim} from {path}")
    return data


def write_embeddings(path: str, data: EmbeddingData) -> None:
    """Write ``data`` in the embedding file format."""
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(data.header.format() + '\n')
        handle.write('\t'.join(data.header.columns()) + '\n')
        for i, row_id in enumerate(data.ids):
            fields = [row_id] + [repr(float(x)) for x in data.points[i]]
            fields.append(str(int(data.labels[i])))
            fields.extend(str(int(v)) for v in data.level_labels[:, i])
            fields.append('1' if data.is_labeled[i] else '0')
            fields.append('1' if data.is_old[i] else '0')
            handle.write('\t'.join(fields) + '\n')
    logger.info(f"Wrote {len(data.ids)} rows to {path}")


@dataclass
class AssignmentData:
    """Cluster id per row id, plus the header metadata of the run."""

    ids: List[str]
    clusters: np.ndarray
    meta: Dict[str, str] = field(default_factory=dict)


def write_assignments(path: str, ids: Sequence[str], clusters: np.ndarray, **meta) -> None:
    fields = [ASSIGNMENT_MAGIC, f"version={FORMAT_VERSION}", f"count={len(ids)}"]
    fields += [f"{key}={value}" for key, value in sorted(meta.items())]
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('\t'.join(fields) + '\n')
        handle.write('id\tcluster\n')
        for row_id, cluster in zip(ids, clusters):
            handle.write(f"{row_id}\t{int(cluster)}\n")


def read_assignments(path: str) -> AssignmentData:
    """
    Read an assignments file.

    Raises:
        ParseError: With line and column of the first malformed field
    """
    path = str(path)
    with open(path, 'r', encoding='utf-8') as handle:
        first = handle.readline()
        if not first:
            raise ParseError("File is empty", 1, None, path)
        meta = _header_fields(first, ASSIGNMENT_MAGIC, path)
        count = _header_int(meta, 'count', path)
        if handle.readline().rstrip('\n') != 'id\tcluster':
            raise ParseError("Expected column line 'id<TAB>cluster'", 2, 1, path)
        ids, clusters = [], []
        line_no = 2
        for line_no, line in enumerate(handle, start=3):
            text = line.rstrip('\n')
            if not text.strip():
                continue
            fields = text.split('\t')
            if len(fields) != 2:
                raise ParseError(f"Expected 2 fields, got {len(fields)}", line_no, min(len(fields), 2) + 1, path)
            cluster = _int_field(fields[1], line_no, 2, path)
            if cluster < 0:
                raise ParseError(f"Cluster id must be non-negative, got {cluster}", line_no, 2, path)
            ids.append(fields[0])
            clusters.append(cluster)
    if len(ids) != count:
        raise ParseError(f"Declared {count} rows, found {len(ids)}", line_no + 1, None, path)
    return AssignmentData(ids, np.array(clusters, dtype=np.int64), meta)


def write_table(path: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Flat tab-separated table for plotting; NaN is written as ``nan``."""
    def cell(value) -> str:
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        return str(value)

    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('\t'.join(columns) + '\n')
        for row in rows:
            handle.write('\t'.join(cell(v) for v in row) + '\n')
