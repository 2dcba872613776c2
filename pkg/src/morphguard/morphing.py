"""Worst-case morph embeddings, identity pairing and attack synthesis."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .embeddings import (
    Dataset,
    angle,
    angles_between,
    as_embedding,
    atomic_write_text,
    average_embedding,
    format_float,
    normalize,
)
from .errors import (
    AntipodalPair,
    DimensionMismatch,
    EmptyProbeSet,
    InvalidParameter,
    MissingSubject,
    ParseError,
    TooFewSubjects,
)
from .simulator import sample_vmf

ANTIPODAL_MARGIN = 1e-6
STRATEGIES = ("most_similar", "random_disjoint")
ENDPOINTS = ("enroll", "mean", "closest_probes")
WORST_CASE = "worst_case"


@dataclass(frozen=True)
class IdentityPair:
    subject_a: str
    subject_b: str
    selection_angle: float

    def __post_init__(self):
        if self.subject_a == self.subject_b:
            raise ValueError("a pair needs two distinct subjects")


@dataclass(frozen=True)
class AttackRecord:
    attack_id: str
    subject_a: str
    subject_b: str
    morph_embedding: np.ndarray
    kind: str = WORST_CASE

    def __post_init__(self):
        if self.subject_a == self.subject_b:
            raise ValueError("an attack needs two distinct contributors")
        object.__setattr__(self, "morph_embedding", as_embedding(self.morph_embedding))


def _check_pair(z1, z2):
    u1 = normalize(z1)
    u2 = normalize(z2)
    if u1.shape != u2.shape:
        raise DimensionMismatch(f"dimension {u1.shape[0]} vs {u2.shape[0]}")
    theta = angle(u1, u2)
    if theta >= math.pi - ANTIPODAL_MARGIN:
        raise AntipodalPair("midpoint of (nearly) antipodal embeddings is undefined")
    return u1, u2, theta


def worst_case_embedding(z1, z2) -> np.ndarray:
    """Unit embedding minimizing the larger of its angles to ``z1`` and ``z2``.

    On the sphere this is the angular bisector: the normalized sum of the two
    normalized inputs.
    """
    u1, u2, _ = _check_pair(z1, z2)
    return normalize(u1 + u2)


def slerp(z1, z2, alpha: float) -> np.ndarray:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameter("alpha must lie in [0, 1]")
    u1, u2, theta = _check_pair(z1, z2)
    if alpha == 0.5:
        return normalize(u1 + u2)
    if theta < 1e-12:
        return normalize((1 - alpha) * u1 + alpha * u2)
    sin_t = math.sin(theta)
    m = (math.sin((1 - alpha) * theta) / sin_t) * u1 + (math.sin(alpha * theta) / sin_t) * u2
    return normalize(m)


def _mean_vmf_angle(kappa: float, d: int, grid: np.ndarray, log_sin: np.ndarray) -> float:
    # density of the angle to the mean direction: exp(kappa cos t) sin(t)^(d-2)
    logf = kappa * np.cos(grid) + (d - 2) * log_sin
    logf -= logf.max()
    f = np.exp(logf)
    return float(trapezoid(grid * f, grid) / trapezoid(f, grid))


@lru_cache(maxsize=256)
def kappa_for_mean_angle(target: float, d: int) -> float:
    """Concentration whose vMF draws deviate from the mean by ``target`` on average."""
    grid = np.linspace(0.0, math.pi, 200_001)[1:-1]
    log_sin = np.log(np.sin(grid))
    uniform_mean = _mean_vmf_angle(0.0, d, grid, log_sin)
    if not 0.0 < target < uniform_mean:
        raise InvalidParameter(f"noise angle must lie in (0, {uniform_mean:.4f}) for d={d}")

    def gap(log_kappa):
        return _mean_vmf_angle(math.exp(log_kappa), d, grid, log_sin) - target

    lo, hi = math.log(1e-8), math.log(1e12)
    if gap(hi) > 0:
        raise InvalidParameter("noise angle too small to resolve")
    return math.exp(brentq(gap, lo, hi, xtol=1e-10))


def interpolated_morph(z1, z2, alpha: float, noise_angle: float, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Imperfect morph: spherical interpolation plus vMF jitter.

    With ``alpha=0.5`` and ``noise_angle=0`` this is the worst-case embedding.
    """
    if noise_angle < 0:
        raise InvalidParameter("noise_angle must be >= 0")
    m = slerp(z1, z2, alpha)
    if noise_angle == 0:
        return m
    if rng is None:
        raise InvalidParameter("an rng is required when noise_angle > 0")
    kappa = kappa_for_mean_angle(noise_angle, m.shape[0])
    return sample_vmf(m, kappa, rng)


# -- pairing -------------------------------------------------------------------


def subject_averages(dataset: Dataset, subjects: Optional[Sequence[str]] = None) -> np.ndarray:
    subjects = dataset.subjects if subjects is None else subjects
    return np.vstack([average_embedding(dataset.samples(s)) for s in subjects])


def select_pairs(dataset: Dataset, strategy: str = "most_similar", rng: Optional[np.random.Generator] = None) -> list[IdentityPair]:
    """Pick identity pairs to morph.

    ``most_similar`` pairs every subject with its nearest neighbour (by the
    angle between average embeddings) and keeps each unordered pair once;
    ``random_disjoint`` draws a seeded random matching.
    """
    if strategy not in STRATEGIES:
        raise InvalidParameter(f"strategy must be one of {STRATEGIES}")
    subjects = dataset.subjects
    if len(subjects) < 2:
        raise TooFewSubjects("pairing needs at least two bona fide subjects")
    avgs = subject_averages(dataset, subjects)
    theta = angles_between(avgs, avgs)

    if strategy == "most_similar":
        np.fill_diagonal(theta, np.inf)
        nearest = np.argmin(theta, axis=1)
        keys = sorted({(min(i, j), max(i, j)) for i, j in enumerate(nearest)})
    else:
        if rng is None:
            raise InvalidParameter("random_disjoint pairing needs an rng")
        perm = rng.permutation(len(subjects))
        keys = sorted(
            (min(perm[k], perm[k + 1]), max(perm[k], perm[k + 1]))
            for k in range(0, len(perm) - 1, 2)
        )
    return [IdentityPair(subjects[i], subjects[j], float(theta[i, j])) for i, j in keys]


def save_pairs(pairs: Sequence[IdentityPair], path) -> None:
    lines = ["subject_a,subject_b,selection_angle"]
    lines += [f"{p.subject_a},{p.subject_b},{format_float(p.selection_angle)}" for p in pairs]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_pairs(path) -> list[IdentityPair]:
    path = os.fspath(path)
    pairs, seen = [], set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["subject_a", "subject_b", "selection_angle"]:
            raise ParseError("header must be subject_a,subject_b,selection_angle", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 columns, found {len(row)}", path, lineno)
            a, b, value = row
            try:
                sel = float(value)
            except ValueError:
                raise ParseError(f"bad selection_angle {value!r}", path, lineno) from None
            if not a or not b or a == b:
                raise ParseError("pair needs two distinct non-empty subjects", path, lineno)
            key = frozenset((a, b))
            if key in seen:
                raise ParseError(f"duplicate pair {a},{b}", path, lineno)
            seen.add(key)
            pairs.append(IdentityPair(a, b, sel))
    return pairs


# -- attacks -------------------------------------------------------------------


def closest_probe_pair(dataset: Dataset, subject_a: str, subject_b: str) -> tuple[np.ndarray, np.ndarray]:
    """The probe of ``a`` and the probe of ``b`` with the smallest angle."""
    pa = dataset.probes(subject_a)
    pb = dataset.probes(subject_b)
    if pa.shape[0] == 0:
        raise EmptyProbeSet(f"subject {subject_a!r} has no probes")
    if pb.shape[0] == 0:
        raise EmptyProbeSet(f"subject {subject_b!r} has no probes")
    theta = angles_between(pa, pb)
    i, j = np.unravel_index(np.argmin(theta), theta.shape)
    return pa[i], pb[j]


def _endpoints(dataset: Dataset, pair: IdentityPair, endpoints: str):
    a, b = pair.subject_a, pair.subject_b
    for s in (a, b):
        dataset.sample_indices(s)  # raises MissingSubject
    if endpoints == "enroll":
        return dataset.enrollment(a), dataset.enrollment(b)
    if endpoints == "mean":
        return normalize(average_embedding(dataset.samples(a))), normalize(average_embedding(dataset.samples(b)))
    return closest_probe_pair(dataset, a, b)


def generate_wc_attacks(dataset: Dataset, pairs: Sequence[IdentityPair], endpoints: str = "enroll") -> list[AttackRecord]:
    """One worst-case attack per pair.

    ``endpoints`` picks the embeddings the morph sits between: each subject's
    enrollment sample (default), its normalized mean direction, or the closest
    pair of probes of the two subjects. The last choice makes the morph the
    exact minimizer of the per-attack score against those probes, so its MMPMR
    bounds that of every other morph of the pair.
    """
    if endpoints not in ENDPOINTS:
        raise InvalidParameter(f"endpoints must be one of {ENDPOINTS}")
    attacks = []
    for pair in pairs:
        z1, z2 = _endpoints(dataset, pair, endpoints)
        attacks.append(
            AttackRecord(
                attack_id=f"{WORST_CASE}:{pair.subject_a}+{pair.subject_b}",
                subject_a=pair.subject_a,
                subject_b=pair.subject_b,
                morph_embedding=worst_case_embedding(z1, z2),
                kind=WORST_CASE,
            )
        )
    return attacks


def interpolated_attacks(
    dataset: Dataset,
    pairs: Sequence[IdentityPair],
    alpha: float,
    noise_angle: float,
    rng: Optional[np.random.Generator] = None,
    kind: str = "interpolated",
    endpoints: str = "enroll",
) -> list[AttackRecord]:
    """Attacks built with :func:`interpolated_morph` over the given pairs."""
    attacks = []
    for pair in pairs:
        z1, z2 = _endpoints(dataset, pair, endpoints)
        attacks.append(
            AttackRecord(
                attack_id=f"{kind}:{pair.subject_a}+{pair.subject_b}",
                subject_a=pair.subject_a,
                subject_b=pair.subject_b,
                morph_embedding=interpolated_morph(z1, z2, alpha, noise_angle, rng),
                kind=kind,
            )
        )
    return attacks


def attack_kind(attack_id: str) -> str:
    """Morph kind encoded as the ``kind:`` prefix of an attack id."""
    head, sep, _ = attack_id.partition(":")
    return head if sep and head else "morph"


def attacks_to_rows(attacks: Sequence[AttackRecord]) -> list[list[str]]:
    rows = []
    for a in attacks:
        rows.append(
            [a.subject_a, a.attack_id, "enroll", "morph", a.subject_b]
            + [format_float(x) for x in a.morph_embedding]
        )
    return rows


def save_attacks(attacks: Sequence[AttackRecord], path, dimension: int) -> None:
    """Write attacks as morph rows of the embeddings CSV format."""
    header = ["subject_id", "sample_id", "role", "kind", "pair_subject"] + [f"e{j}" for j in range(dimension)]
    for a in attacks:
        if a.morph_embedding.shape[0] != dimension:
            raise DimensionMismatch(f"attack {a.attack_id} has dimension {a.morph_embedding.shape[0]}")
    lines = [",".join(header)] + [",".join(r) for r in attacks_to_rows(attacks)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_attacks(path) -> tuple[list[AttackRecord], int]:
    """Read morph rows from an embeddings CSV (bona fide rows are skipped)."""
    path = os.fspath(path)
    attacks = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:5] != ["subject_id", "sample_id", "role", "kind", "pair_subject"]:
            raise ParseError("not an embeddings CSV header", path, 1)
        d = len(header) - 5
        if d < 2:
            raise ParseError("header needs at least two embedding columns", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5 + d:
                raise ParseError(f"expected {5 + d} columns, found {len(row)}", path, lineno)
            subject, sample, _role, kind, pair = row[:5]
            if kind != "morph":
                continue
            if not pair or pair == subject:
                raise ParseError("morph row needs a distinct pair_subject", path, lineno)
            try:
                emb = np.array([float(x) for x in row[5:]])
            except ValueError as exc:
                raise ParseError(f"bad number: {exc}", path, lineno) from None
            if not np.all(np.isfinite(emb)):
                raise ParseError("non-finite embedding component", path, lineno)
            attack_id = sample if ":" in sample else f"ingested:{subject}+{pair}/{sample}"
            if attack_id in seen:
                raise ParseError(f"duplicate attack id {attack_id}", path, lineno)
            seen.add(attack_id)
            attacks.append(AttackRecord(attack_id, subject, pair, emb, attack_kind(attack_id)))
    return attacks, d


def dataset_attacks(dataset: Dataset) -> list[AttackRecord]:
    """Attack records for the morph rows stored inside ``dataset``."""
    attacks = []
    for i in dataset.morph_indices():
        subject, sample, pair = dataset.subject_ids[i], dataset.sample_ids[i], dataset.pair_subjects[i]
        attack_id = sample if ":" in sample else f"ingested:{subject}+{pair}/{sample}"
        attacks.append(AttackRecord(attack_id, subject, pair, dataset.embeddings[i], attack_kind(attack_id)))
    return attacks


def check_attack_subjects(dataset: Dataset, attacks: Sequence[AttackRecord]) -> None:
    for a in attacks:
        for s in (a.subject_a, a.subject_b):
            if not dataset.has_subject(s):
                raise MissingSubject(f"attack {a.attack_id} references unknown subject {s!r}")

