"""Embeddings, identities and angle-based scoring.

Embeddings are plain 1-D ``float64`` numpy arrays. A :class:`Dataset` keeps its
records column-wise (one array per field plus an ``(N, d)`` embedding matrix)
so that scoring code can work on whole blocks at once.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateSample,
    EmptyInput,
    InconsistentDimension,
    MissingEnrollment,
    MissingSubject,
    ParseError,
    ZeroVector,
)

ZERO_NORM = 1e-12
ROLES = ("enroll", "probe")
KINDS = ("bonafide", "morph")
FIXED_COLUMNS = ("subject_id", "sample_id", "role", "kind", "pair_subject")


def as_embedding(v) -> np.ndarray:
    """Validate ``v`` as an embedding and return it as a float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"embedding must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionMismatch("embedding needs at least 2 components")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding has non-finite components")
    return arr


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm."""
    arr = as_embedding(v)
    norm = float(np.linalg.norm(arr))
    if norm < ZERO_NORM:
        raise ZeroVector("cannot normalize a zero vector")
    return arr / norm


def normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    if np.any(norms < ZERO_NORM):
        raise ZeroVector("cannot normalize a zero vector")
    return m / norms


def angle(u, v) -> float:
    """Dissimilarity score: the angle between ``u`` and ``v`` in radians."""
    u = as_embedding(u)
    v = as_embedding(v)
    if u.shape != v.shape:
        raise DimensionMismatch(f"dimension {u.shape[0]} vs {v.shape[0]}")
    return float(angles_between(u[None, :], v[None, :])[0, 0])


# arccos loses ~1e-8 rad next to 0 and pi; beyond this |cos| the angle is
# taken from the chord lengths instead.
_STABLE_COS = 0.99


def angles_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of angles between the rows of ``a`` and the rows of ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    ua = normalize_rows(a)
    ub = normalize_rows(b)
    cos = ua @ ub.T
    np.clip(cos, -1.0, 1.0, out=cos)
    out = np.arccos(cos)
    i, j = np.nonzero(np.abs(cos) > _STABLE_COS)
    if i.size:
        diff = np.linalg.norm(ua[i] - ub[j], axis=1)
        summ = np.linalg.norm(ua[i] + ub[j], axis=1)
        out[i, j] = 2.0 * np.arctan2(diff, summ)
    return out


def average_embedding(samples: Sequence) -> np.ndarray:
    """Component-wise mean of ``samples``; deliberately not renormalized."""
    if len(samples) == 0:
        raise EmptyInput("average of an empty sequence")
    rows = [as_embedding(s) for s in samples]
    d = rows[0].shape[0]
    for r in rows:
        if r.shape[0] != d:
            raise DimensionMismatch(f"dimension {r.shape[0]} vs {d}")
    return np.mean(np.vstack(rows), axis=0)


@dataclass(frozen=True)
class SampleRecord:
    subject_id: str
    sample_id: str
    role: str
    kind: str
    embedding: np.ndarray
    pair_subject: Optional[str] = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if (self.kind == "morph") != bool(self.pair_subject):
            raise ValueError("pair_subject must be set exactly for morph records")
        if self.pair_subject == self.subject_id:
            raise ValueError("pair_subject must differ from subject_id")
        object.__setattr__(self, "embedding", as_embedding(self.embedding))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented collection of sample records of a common dimension."""

    dimension: int
    subject_ids: np.ndarray
    sample_ids: np.ndarray
    roles: np.ndarray
    kinds: np.ndarray
    pair_subjects: np.ndarray  # "" for bona fide rows
    embeddings: np.ndarray

    def __post_init__(self):
        emb = np.array(self.embeddings, dtype=np.float64, copy=True)
        n = len(self.subject_ids)
        if emb.ndim != 2 or emb.shape[0] != n:
            raise InconsistentDimension("embedding matrix does not match record count")
        if emb.shape[1] != self.dimension:
            raise InconsistentDimension(
                f"embeddings have {emb.shape[1]} components, dataset dimension is {self.dimension}"
            )
        if self.dimension < 2:
            raise InconsistentDimension("dimension must be at least 2")
        if not np.all(np.isfinite(emb)):
            raise ValueError("non-finite embedding component")
        cols = {}
        for name in ("subject_ids", "sample_ids", "roles", "kinds", "pair_subjects"):
            col = np.array([str(x) for x in getattr(self, name)], dtype=object)
            if col.shape[0] != n:
                raise ValueError(f"column {name} has {col.shape[0]} entries, expected {n}")
            cols[name] = _frozen(col)
        for r in cols["roles"]:
            if r not in ROLES:
                raise ValueError(f"unknown role {r!r}")
        for k, p, s in zip(cols["kinds"], cols["pair_subjects"], cols["subject_ids"]):
            if k not in KINDS:
                raise ValueError(f"unknown kind {k!r}")
            if (k == "morph") != (p != ""):
                raise ValueError("pair_subject must be set exactly for morph records")
            if p == s:
                raise ValueError("pair_subject must differ from subject_id")
        seen = set()
        for s, sid in zip(cols["subject_ids"], cols["sample_ids"]):
            key = (s, sid)
            if key in seen:
                raise DuplicateSample(f"duplicate sample {s}/{sid}")
            seen.add(key)
        if not np.any(cols["kinds"] == "bonafide"):
            raise EmptyInput("dataset has no bona fide subject")
        for name, col in cols.items():
            object.__setattr__(self, name, col)
        object.__setattr__(self, "embeddings", _frozen(emb))

    @classmethod
    def from_records(cls, records: Iterable[SampleRecord], dimension: Optional[int] = None) -> "Dataset":
        records = list(records)
        if not records:
            raise EmptyInput("dataset has no records")
        d = dimension if dimension is not None else records[0].embedding.shape[0]
        for r in records:
            if r.embedding.shape[0] != d:
                raise InconsistentDimension(
                    f"{r.subject_id}/{r.sample_id} has {r.embedding.shape[0]} components, expected {d}"
                )
        return cls(
            dimension=d,
            subject_ids=[r.subject_id for r in records],
            sample_ids=[r.sample_id for r in records],
            roles=[r.role for r in records],
            kinds=[r.kind for r in records],
            pair_subjects=[r.pair_subject or "" for r in records],
            embeddings=np.vstack([r.embedding for r in records]),
        )

    def __len__(self):
        return len(self.subject_ids)

    def records(self) -> Iterator[SampleRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> SampleRecord:
        return SampleRecord(
            subject_id=self.subject_ids[i],
            sample_id=self.sample_ids[i],
            role=self.roles[i],
            kind=self.kinds[i],
            pair_subject=self.pair_subjects[i] or None,
            embedding=self.embeddings[i],
        )

    def merge(self, other: "Dataset") -> "Dataset":
        if other.dimension != self.dimension:
            raise InconsistentDimension(f"dimension {other.dimension} vs {self.dimension}")
        return Dataset(
            dimension=self.dimension,
            subject_ids=np.concatenate([self.subject_ids, other.subject_ids]),
            sample_ids=np.concatenate([self.sample_ids, other.sample_ids]),
            roles=np.concatenate([self.roles, other.roles]),
            kinds=np.concatenate([self.kinds, other.kinds]),
            pair_subjects=np.concatenate([self.pair_subjects, other.pair_subjects]),
            embeddings=np.vstack([self.embeddings, other.embeddings]),
        )

    @cached_property
    def _bonafide_index(self) -> dict:
        index: dict = {}
        for i, (s, k) in enumerate(zip(self.subject_ids, self.kinds)):
            if k == "bonafide":
                index.setdefault(s, []).append(i)
        return {s: np.asarray(ix, dtype=np.int64) for s, ix in index.items()}

    @property
    def subjects(self) -> list:
        """Sorted ids of subjects with at least one bona fide sample."""
        return sorted(self._bonafide_index)

    def has_subject(self, subject: str) -> bool:
        return subject in self._bonafide_index

    def sample_indices(self, subject: str) -> np.ndarray:
        try:
            return self._bonafide_index[subject]
        except KeyError:
            raise MissingSubject(f"no bona fide samples for subject {subject!r}") from None

    def samples(self, subject: str) -> np.ndarray:
        return self.embeddings[self.sample_indices(subject)]

    def enrollment_index(self, subject: str) -> int:
        ix = self.sample_indices(subject)
        enrolled = ix[self.roles[ix] == "enroll"]
        if enrolled.size == 0:
            raise MissingEnrollment(f"subject {subject!r} has no enrollment sample")
        return int(enrolled[0])

    def enrollment(self, subject: str) -> np.ndarray:
        return self.embeddings[self.enrollment_index(subject)]

    def probe_indices(self, subject: str) -> np.ndarray:
        ix = self.sample_indices(subject)
        return ix[self.roles[ix] == "probe"]

    def probes(self, subject: str) -> np.ndarray:
        return self.embeddings[self.probe_indices(subject)]

    def morph_indices(self) -> np.ndarray:
        return np.flatnonzero(self.kinds == "morph")


# -- CSV ---------------------------------------------------------------------


def format_float(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(x))


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_to_csv(dataset: Dataset) -> str:
    lines = [",".join(FIXED_COLUMNS + tuple(f"e{j}" for j in range(dataset.dimension)))]
    for i in range(len(dataset)):
        fields = [
            dataset.subject_ids[i],
            dataset.sample_ids[i],
            dataset.roles[i],
            dataset.kinds[i],
            dataset.pair_subjects[i],
        ]
        for f in fields:
            if any(c in f for c in ',"\n\r'):
                raise ValueError(f"identifier {f!r} contains a CSV delimiter or quote")
        fields.extend(format_float(x) for x in dataset.embeddings[i])
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def save_dataset(dataset: Dataset, path) -> None:
    atomic_write_text(path, dataset_to_csv(dataset))


def load_dataset(path) -> Dataset:
    """Read an embeddings CSV; every error names the file and line."""
    path = os.fspath(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file (header row required)", path, 1) from None
        if tuple(header[:5]) != FIXED_COLUMNS:
            raise ParseError(f"header must start with {','.join(FIXED_COLUMNS)}", path, 1)
        comp = header[5:]
        d = len(comp)
        if d < 2 or comp != [f"e{j}" for j in range(d)]:
            raise ParseError("header needs embedding columns e0..e{d-1} with d >= 2", path, 1)
        ncol = 5 + d
        ids, samples, roles, kinds, pairs, rows = [], [], [], [], [], []
        seen = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise ParseError(f"expected {ncol} columns, found {len(row)}", path, lineno)
            subject, sample, role, kind, pair = row[:5]
            if not subject or not sample:
                raise ParseError("subject_id and sample_id must be non-empty", path, lineno)
            if role not in ROLES:
                raise ParseError(f"role must be one of {ROLES}, got {role!r}", path, lineno)
            if kind not in KINDS:
                raise ParseError(f"kind must be one of {KINDS}, got {kind!r}", path, lineno)
            if (kind == "morph") != (pair != ""):
                raise ParseError("pair_subject must be set exactly for morph rows", path, lineno)
            if pair == subject:
                raise ParseError("pair_subject equals subject_id", path, lineno)
            try:
                values = [float(x) for x in row[5:]]
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", path, lineno) from None
            if not all(math.isfinite(x) for x in values):
                raise ParseError("non-finite embedding component", path, lineno)
            key = (subject, sample)
            if key in seen:
                raise DuplicateSample(f"{path}:{lineno}: duplicate sample {subject}/{sample} (first on line {seen[key]})")
            seen[key] = lineno
            ids.append(subject)
            samples.append(sample)
            roles.append(role)
            kinds.append(kind)
            pairs.append(pair)
            rows.append(values)
    if not rows:
        raise ParseError("no data rows", path)
    try:
        return Dataset(
            dimension=d,
            subject_ids=ids,
            sample_ids=samples,
            roles=roles,
            kinds=kinds,
            pair_subjects=pairs,
            embeddings=np.asarray(rows, dtype=np.float64),
        )
    except EmptyInput as exc:
        raise ParseError(str(exc), path) from None
