"""Score distributions, error rates, attack potential and threshold rules.

Scores are dissimilarities (angles in radians). A comparison is a match iff
``score <= t``; ties count as matches.

Rates:

* ``fmr``    non-mated comparisons accepted
* ``fnmr``   mated comparisons rejected (``bpcer`` is the same quantity,
  reported under its presentation-attack name)
* ``apcer``  morph-vs-probe comparisons accepted (per comparison)
* ``mmpmr``  attacks where at least one probe of *each* contributor matches
* ``map_rc`` attacks where at least ``r`` probes of each contributor match on
  at least ``c`` systems
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .embeddings import Dataset, angles_between, atomic_write_text, format_float
from .errors import (
    AttackIdMismatch,
    EmptyPopulation,
    EmptyProbeSet,
    InvalidParameter,
    InvalidRC,
    InvalidThresholdOrder,
    MalformedAttack,
    ParseError,
    ThresholdUnattainable,
)
from .morphing import WORST_CASE, AttackRecord, attack_kind, check_attack_subjects

MATED, NONMATED, MORPH = "mated", "nonmated", "morph"
COMPARISON_TYPES = (MATED, NONMATED, MORPH)
THREE_WAY_LABELS = (MATED, MORPH, NONMATED)
SCORES_HEADER = ["system_id", "comparison_type", "attack_id", "contributor_slot", "score"]
DEFAULT_SYSTEM = "default"
_PI = math.pi


@dataclass(frozen=True)
class ScoreRecord:
    comparison_type: str
    score: float
    attack_id: Optional[str] = None
    contributor_slot: Optional[int] = None
    system_id: str = DEFAULT_SYSTEM


class ScoreSet:
    """Column-oriented set of labelled comparison scores.

    ``slots`` is 0 for bona fide comparisons and 1/2 for the contributor whose
    probe a morph was compared against.
    """

    def __init__(self, system_ids, comparison_types, attack_ids, slots, scores):
        self.system_ids = np.asarray(system_ids, dtype=object)
        self.comparison_types = np.asarray(comparison_types, dtype=object)
        self.attack_ids = np.asarray(attack_ids, dtype=object)
        self.slots = np.asarray(slots, dtype=np.int64)
        self.scores = np.asarray(scores, dtype=np.float64)
        n = self.scores.shape[0]
        for name in ("system_ids", "comparison_types", "attack_ids", "slots"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column {name} does not match the number of scores")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0) or np.any(self.scores > _PI):
            raise ValueError("scores must be angles in [0, pi]")
        is_morph = self.comparison_types == MORPH
        if not np.all(np.isin(self.comparison_types, COMPARISON_TYPES)):
            raise ValueError("unknown comparison type")
        has_attack = self.attack_ids != ""
        if np.any(has_attack != is_morph) or np.any((self.slots != 0) != is_morph):
            raise ValueError("attack_id and contributor_slot must be set exactly for morph scores")
        if np.any(is_morph & ~np.isin(self.slots, (1, 2))):
            raise ValueError("contributor_slot must be 1 or 2")
        for col in (self.system_ids, self.comparison_types, self.attack_ids, self.slots, self.scores):
            col.setflags(write=False)
        self._attack_cache: dict = {}
        self._type_masks: dict = {}

    @classmethod
    def from_records(cls, records: Sequence[ScoreRecord]) -> "ScoreSet":
        return cls(
            [r.system_id for r in records],
            [r.comparison_type for r in records],
            [r.attack_id or "" for r in records],
            [r.contributor_slot or 0 for r in records],
            [r.score for r in records],
        )

    @classmethod
    def concat(cls, sets: Sequence["ScoreSet"]) -> "ScoreSet":
        return cls(
            np.concatenate([s.system_ids for s in sets]),
            np.concatenate([s.comparison_types for s in sets]),
            np.concatenate([s.attack_ids for s in sets]),
            np.concatenate([s.slots for s in sets]),
            np.concatenate([s.scores for s in sets]),
        )

    def __len__(self):
        return self.scores.shape[0]

    def records(self):
        for i in range(len(self)):
            morph = self.comparison_types[i] == MORPH
            yield ScoreRecord(
                self.comparison_types[i],
                float(self.scores[i]),
                self.attack_ids[i] if morph else None,
                int(self.slots[i]) if morph else None,
                self.system_ids[i],
            )

    def subset(self, mask) -> "ScoreSet":
        return ScoreSet(
            self.system_ids[mask],
            self.comparison_types[mask],
            self.attack_ids[mask],
            self.slots[mask],
            self.scores[mask],
        )

    @property
    def systems(self) -> list:
        return sorted(set(self.system_ids))

    def for_system(self, system_id: str) -> "ScoreSet":
        mask = self.system_ids == system_id
        if not mask.any():
            raise EmptyPopulation(f"no scores for system {system_id!r}")
        return self.subset(mask)

    def single_system(self) -> "ScoreSet":
        if len(set(self.system_ids)) > 1:
            raise InvalidParameter(
                f"score set holds systems {self.systems}; select one with for_system()"
            )
        return self

    def morph_kinds(self) -> list:
        ids = set(self.attack_ids[self.type_mask(MORPH)])
        return sorted({attack_kind(a) for a in ids})

    def values(self, comparison_type: str, kind_filter: Optional[str] = None) -> np.ndarray:
        mask = self.type_mask(comparison_type)
        if kind_filter is not None and comparison_type == MORPH:
            mask = mask & self._kind_mask(kind_filter)
        return self.scores[mask]

    def type_mask(self, comparison_type: str) -> np.ndarray:
        mask = self._type_masks.get(comparison_type)
        if mask is None:
            mask = self.comparison_types == comparison_type
            self._type_masks[comparison_type] = mask
        return mask

    def _kind_mask(self, kind: str) -> np.ndarray:
        out = np.zeros(len(self), dtype=bool)
        idx = np.flatnonzero(self.type_mask(MORPH))
        if idx.size:
            uniq, inv = np.unique(self.attack_ids[idx].astype(str), return_inverse=True)
            hit = np.array([attack_kind(u) == kind for u in uniq], dtype=bool)
            out[idx] = hit[inv]
        return out

    def attack_table(self, kind_filter: Optional[str] = None):
        """Per-attack grouping of morph scores.

        Returns ``(attack_ids, scores, bounds)`` where the scores of attack ``i``
        and slot ``s`` (1 or 2) are ``scores[bounds[2*i + s - 1]:bounds[2*i + s]]``.
        """
        key = kind_filter
        if key in self._attack_cache:
            return self._attack_cache[key]
        mask = self.type_mask(MORPH)
        if kind_filter is not None:
            mask = mask & self._kind_mask(kind_filter)
        ids = self.attack_ids[mask]
        slots = self.slots[mask]
        vals = self.scores[mask]
        uniq, code = np.unique(ids.astype(str), return_inverse=True)
        seg = code * 2 + (slots - 1)
        order = np.argsort(seg, kind="stable")
        counts = np.bincount(seg, minlength=2 * uniq.size)
        bounds = np.concatenate([[0], np.cumsum(counts)])
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            bad = uniq[empty[0] // 2]
            raise MalformedAttack(f"attack {bad!r} has no scores for contributor slot {empty[0] % 2 + 1}")
        table = (uniq.astype(object), vals[order], bounds)
        self._attack_cache[key] = table
        return table


# -- score computation ---------------------------------------------------------


@dataclass(frozen=True)
class ScoreOptions:
    system_id: str = DEFAULT_SYSTEM
    nonmated_cap: Optional[int] = None
    seed: int = 0


def _bona_fide_set(system_id, mated, nonmated) -> ScoreSet:
    n = mated.size + nonmated.size
    return ScoreSet(
        np.full(n, system_id, dtype=object),
        np.concatenate([np.full(mated.size, MATED, dtype=object), np.full(nonmated.size, NONMATED, dtype=object)]),
        np.full(n, "", dtype=object),
        np.zeros(n, dtype=np.int64),
        np.concatenate([mated, nonmated]),
    )


def mated_scores(dataset: Dataset) -> np.ndarray:
    """Angles of every unordered pair of bona fide samples of one subject."""
    parts = []
    for s in dataset.subjects:
        x = dataset.samples(s)
        if x.shape[0] < 2:
            continue
        iu = np.triu_indices(x.shape[0], k=1)
        parts.append(angles_between(x, x)[iu])
    return np.concatenate(parts) if parts else np.empty(0)


def nonmated_scores(dataset: Dataset, cap: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """Each subject's enrollment sample against every bona fide sample of
    every other subject, optionally subsampled to ``cap`` scores."""
    subjects = dataset.subjects
    enroll_idx = np.array([dataset.enrollment_index(s) for s in subjects], dtype=np.int64)
    bona = np.flatnonzero(dataset.kinds == "bonafide")
    owner = {s: k for k, s in enumerate(subjects)}
    bona_owner = np.array([owner[s] for s in dataset.subject_ids[bona]], dtype=np.int64)
    blocks = []
    step = max(1, 2_000_000 // max(1, bona.size))
    for lo in range(0, len(subjects), step):
        hi = min(lo + step, len(subjects))
        theta = angles_between(dataset.embeddings[enroll_idx[lo:hi]], dataset.embeddings[bona])
        keep = bona_owner[None, :] != np.arange(lo, hi)[:, None]
        blocks.append(theta[keep])
    out = np.concatenate(blocks) if blocks else np.empty(0)
    if cap is not None and out.size > cap:
        rng = np.random.default_rng(seed)
        out = out[np.sort(rng.choice(out.size, size=cap, replace=False))]
    return out


def morph_scores(dataset: Dataset, attacks: Sequence[AttackRecord], system_id: str = DEFAULT_SYSTEM) -> ScoreSet:
    """Each attack's morph against every probe of each contributor."""
    check_attack_subjects(dataset, attacks)
    vals, ids, slots = [], [], []
    seen = set()
    for a in attacks:
        if a.attack_id in seen:
            raise InvalidParameter(f"duplicate attack id {a.attack_id}")
        seen.add(a.attack_id)
        if a.morph_embedding.shape[0] != dataset.dimension:
            raise InvalidParameter(f"attack {a.attack_id} has the wrong dimension")
        for slot, subject in ((1, a.subject_a), (2, a.subject_b)):
            probes = dataset.probes(subject)
            if probes.shape[0] == 0:
                raise EmptyProbeSet(f"contributor {subject!r} of attack {a.attack_id} has no probes")
            theta = angles_between(a.morph_embedding[None, :], probes)[0]
            vals.append(theta)
            ids.append(np.full(theta.size, a.attack_id, dtype=object))
            slots.append(np.full(theta.size, slot, dtype=np.int64))
    n = sum(v.size for v in vals)
    return ScoreSet(
        np.full(n, system_id, dtype=object),
        np.full(n, MORPH, dtype=object),
        np.concatenate(ids) if ids else np.empty(0, dtype=object),
        np.concatenate(slots) if slots else np.empty(0, dtype=np.int64),
        np.concatenate(vals) if vals else np.empty(0),
    )


def compute_scores(dataset: Dataset, attacks: Sequence[AttackRecord] = (), options: ScoreOptions = ScoreOptions()) -> ScoreSet:
    """Mated, non-mated and morph angle scores for a dataset."""
    bona = _bona_fide_set(
        options.system_id,
        mated_scores(dataset),
        nonmated_scores(dataset, options.nonmated_cap, options.seed),
    )
    return ScoreSet.concat([bona, morph_scores(dataset, attacks, options.system_id)])


# -- rates -----------------------------------------------------------------------


def _population(values: np.ndarray, label: str) -> np.ndarray:
    if values.size == 0:
        raise EmptyPopulation(f"no {label} scores")
    return values


def _fraction_le(values: np.ndarray, t):
    """Fraction of ``values`` that are <= t (vectorized over ``t``)."""
    ordered = np.sort(values)
    return np.searchsorted(ordered, t, side="right") / ordered.size


def _fraction_gt(values: np.ndarray, t):
    ordered = np.sort(values)
    return (ordered.size - np.searchsorted(ordered, t, side="right")) / ordered.size


def fmr(scores: ScoreSet, t: float) -> float:
    nm = _population(scores.single_system().values(NONMATED), NONMATED)
    return float(np.count_nonzero(nm <= t) / nm.size)


def fnmr(scores: ScoreSet, t: float) -> float:
    m = _population(scores.single_system().values(MATED), MATED)
    return float(np.count_nonzero(m > t) / m.size)


def bpcer(scores: ScoreSet, t: float) -> float:
    return fnmr(scores, t)


def apcer(scores: ScoreSet, t: float, kind_filter: Optional[str] = None) -> float:
    mo = _population(scores.single_system().values(MORPH, kind_filter), MORPH)
    return float(np.count_nonzero(mo <= t) / mo.size)


def attack_thresholds(scores: ScoreSet, kind_filter: Optional[str] = None, r: int = 1) -> np.ndarray:
    """Smallest threshold at which each attack succeeds.

    With ``r = 1`` that is the larger of the two per-contributor minima; in
    general it is the larger of the two r-th smallest scores (``inf`` when a
    contributor has fewer than ``r`` probes).
    """
    _, vals, bounds = scores.attack_table(kind_filter)
    if r == 1:
        per_slot = kernels.segment_min(vals, bounds)
    else:
        per_slot = kernels.segment_kth_smallest(vals, bounds, r)
    return np.maximum(per_slot[0::2], per_slot[1::2])


def _attack_population(scores: ScoreSet, kind_filter: Optional[str]) -> np.ndarray:
    thr = attack_thresholds(scores.single_system(), kind_filter)
    if thr.size == 0:
        label = "morph attacks" if kind_filter is None else f"{kind_filter} attacks"
        raise EmptyPopulation(f"no {label}")
    return thr


def mmpmr(scores: ScoreSet, t: float, kind_filter: Optional[str] = None) -> float:
    thr = _attack_population(scores, kind_filter)
    return float(np.count_nonzero(thr <= t) / thr.size)


def wcmmpmr(scores: ScoreSet, t: float) -> float:
    return mmpmr(scores, t, WORST_CASE)


def map_rc(systems: Sequence[tuple[ScoreSet, float]], r: int, c: int, kind_filter: Optional[str] = None) -> float:
    """Morphing attack potential over several systems, each with its own threshold."""
    if not systems:
        raise InvalidRC("need at least one system")
    if r < 1 or c < 1 or c > len(systems):
        raise InvalidRC(f"need r >= 1 and 1 <= c <= {len(systems)}, got r={r}, c={c}")
    ids = None
    successes = None
    for scoreset, t in systems:
        scoreset = scoreset.single_system()
        attack_ids, _, _ = scoreset.attack_table(kind_filter)
        if ids is None:
            ids = attack_ids
            if ids.size == 0:
                raise EmptyPopulation("no morph attacks")
            successes = np.zeros(ids.size, dtype=np.int64)
        elif attack_ids.shape != ids.shape or np.any(attack_ids != ids):
            raise AttackIdMismatch("score sets cover different attacks")
        successes += attack_thresholds(scoreset, kind_filter, r) <= t
    return float(np.count_nonzero(successes >= c) / ids.size)


# -- thresholds ------------------------------------------------------------------


def candidate_thresholds(values: np.ndarray) -> np.ndarray:
    """Observed scores plus 0 and pi, sorted and unique."""
    return np.unique(np.concatenate([np.asarray(values, dtype=np.float64), [0.0, _PI]]))


def _largest_within(candidates: np.ndarray, rates: np.ndarray, x: float, label: str) -> float:
    if not 0.0 <= x <= 1.0:
        raise InvalidParameter("target rate must lie in [0, 1]")
    ok = np.flatnonzero(rates <= x)
    if ok.size == 0:
        raise ThresholdUnattainable(f"no threshold keeps {label} <= {x}")
    # rates are nondecreasing, so the admissible candidates form a prefix
    return float(candidates[ok[-1]])


def threshold_at_fmr(scores: ScoreSet, x: float) -> float:
    nm = _population(scores.single_system().values(NONMATED), NONMATED)
    cand = candidate_thresholds(nm)
    return _largest_within(cand, _fraction_le(nm, cand), x, "FMR")


def threshold_at_apcer(scores: ScoreSet, x: float, kind_filter: Optional[str] = None) -> float:
    mo = _population(scores.single_system().values(MORPH, kind_filter), MORPH)
    cand = candidate_thresholds(mo)
    return _largest_within(cand, _fraction_le(mo, cand), x, "APCER")


def threshold_at_mmpmr(scores: ScoreSet, x: float, kind_filter: Optional[str] = None) -> float:
    thr = _attack_population(scores, kind_filter)
    cand = candidate_thresholds(scores.values(MORPH, kind_filter))
    return _largest_within(cand, _fraction_le(thr, cand), x, "MMPMR")


def threshold_wc(wc_scores: ScoreSet, x: float) -> float:
    """Largest threshold whose worst-case MMPMR stays at or below ``x``."""
    return threshold_at_mmpmr(wc_scores, x, WORST_CASE)


def next_candidate(candidates: np.ndarray, t: float) -> Optional[float]:
    """The smallest candidate strictly above ``t`` (None at the top)."""
    i = np.searchsorted(candidates, t, side="right")
    return float(candidates[i]) if i < candidates.size else None


# -- three-way classifier --------------------------------------------------------


def three_way_classify(score: float, t_low: float, t_high: float) -> str:
    if not 0.0 <= t_low < t_high <= _PI:
        raise InvalidThresholdOrder(f"need 0 <= t_low < t_high <= pi, got {t_low}, {t_high}")
    if score <= t_low:
        return MATED
    if score <= t_high:
        return MORPH
    return NONMATED


def evaluate_three_way(scores: ScoreSet, t_low: float, t_high: float) -> np.ndarray:
    """3x3 confusion counts; rows are true labels, columns predictions,
    both ordered mated, morph, nonmated."""
    if not 0.0 <= t_low < t_high <= _PI:
        raise InvalidThresholdOrder(f"need 0 <= t_low < t_high <= pi, got {t_low}, {t_high}")
    scores = scores.single_system()
    pred = np.where(scores.scores <= t_low, 0, np.where(scores.scores <= t_high, 1, 2))
    out = np.zeros((3, 3), dtype=np.int64)
    for row, label in enumerate(THREE_WAY_LABELS):
        out[row] = np.bincount(pred[scores.comparison_types == label], minlength=3)
    return out


# -- sweeps and summaries ---------------------------------------------------------


@dataclass
class DetTable:
    thresholds: np.ndarray
    columns: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        names = list(self.columns)
        lines = [",".join(["t"] + names)]
        for i, t in enumerate(self.thresholds):
            lines.append(",".join([format_float(t)] + [format_float(self.columns[n][i]) for n in names]))
        return "\n".join(lines) + "\n"


def det_sweep(scores: ScoreSet) -> DetTable:
    """Every rate at every candidate threshold (all observed scores, 0 and pi)."""
    scores = scores.single_system()
    m = _population(scores.values(MATED), MATED)
    nm = _population(scores.values(NONMATED), NONMATED)
    cand = candidate_thresholds(scores.scores)
    cols = {
        "fmr": _fraction_le(nm, cand),
        "fnmr": _fraction_gt(m, cand),
    }
    cols["bpcer"] = cols["fnmr"].copy()
    mo = scores.values(MORPH)
    if mo.size:
        cols["apcer"] = _fraction_le(mo, cand)
        for kind in scores.morph_kinds():
            cols[f"mmpmr:{kind}"] = _fraction_le(attack_thresholds(scores, kind), cand)
        if WORST_CASE in scores.morph_kinds():
            cols["wcmmpmr"] = cols[f"mmpmr:{WORST_CASE}"].copy()
    return DetTable(cand, cols)


RULES = ("fmr", "apcer", "wcmmpmr")


def rule_name(rule: str, x: float) -> str:
    return f"{rule}@{x:g}"


def apply_rule(scores: ScoreSet, rule: str, x: float) -> float:
    if rule == "fmr":
        return threshold_at_fmr(scores, x)
    if rule == "apcer":
        return threshold_at_apcer(scores, x)
    if rule == "wcmmpmr":
        return threshold_wc(scores, x)
    raise InvalidParameter(f"unknown threshold rule {rule!r}; expected one of {RULES}")


@dataclass
class EvaluationSummary:
    thresholds: dict
    operating_rule: str
    system_id: str
    fmr: float
    fnmr: float
    apcer: Optional[float]
    bpcer: float
    mmpmr: dict
    wcmmpmr: Optional[float]
    map: list

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds,
            "operating_rule": self.operating_rule,
            "system_id": self.system_id,
            "fmr": self.fmr,
            "fnmr": self.fnmr,
            "apcer": self.apcer,
            "bpcer": self.bpcer,
            "mmpmr": self.mmpmr,
            "wcmmpmr": self.wcmmpmr,
            "map": self.map,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def summarize(
    scores: ScoreSet,
    rules: Sequence[tuple[str, float]] = (("fmr", 0.001),),
    operating: Optional[tuple[str, float]] = None,
    system_id: Optional[str] = None,
    map_r: Sequence[int] = (1, 2),
) -> EvaluationSummary:
    """Evaluate one system at its operating threshold.

    ``rules`` are all computed and reported; ``operating`` (default: the
    first rule) is the one the rates are evaluated at. MAP is computed over
    every system in ``scores``, each at its own threshold under the operating
    rule.
    """
    if not rules:
        raise InvalidParameter("at least one threshold rule is required")
    operating = operating or rules[0]
    systems = scores.systems
    if system_id is None:
        if len(systems) != 1:
            raise InvalidParameter(f"score set holds systems {systems}; choose one")
        system_id = systems[0]
    own = scores.for_system(system_id)
    thresholds = {rule_name(r, x): apply_rule(own, r, x) for r, x in rules}
    op_name = rule_name(*operating)
    if op_name not in thresholds:
        thresholds[op_name] = apply_rule(own, *operating)
    t = thresholds[op_name]

    kinds = own.morph_kinds()
    has_morph = bool(kinds)
    per_kind = {k: mmpmr(own, t, k) for k in kinds}
    map_values = []
    if has_morph:
        per_system = []
        for s in systems:
            ss = scores.for_system(s)
            per_system.append((ss, t if s == system_id else apply_rule(ss, *operating)))
        for r in map_r:
            for c in range(1, len(per_system) + 1):
                map_values.append({"r": r, "c": c, "value": map_rc(per_system, r, c)})
    return EvaluationSummary(
        thresholds=thresholds,
        operating_rule=op_name,
        system_id=system_id,
        fmr=fmr(own, t),
        fnmr=fnmr(own, t),
        apcer=apcer(own, t) if has_morph else None,
        bpcer=bpcer(own, t),
        mmpmr=per_kind,
        wcmmpmr=per_kind.get(WORST_CASE),
        map=map_values,
    )


# -- histograms ------------------------------------------------------------------


def histogram_labels(scores: ScoreSet) -> dict:
    """Score populations keyed by label: mated, nonmated and one per morph kind."""
    out = {}
    for label in (MATED, NONMATED):
        vals = scores.values(label)
        if vals.size:
            out[label] = vals
    for kind in scores.morph_kinds():
        out[f"morph:{kind}"] = scores.values(MORPH, kind)
    return out


def histograms(scores: ScoreSet, bins: int) -> tuple[np.ndarray, dict]:
    """Uniform bins over [0, pi]; returns ``(edges, {label: counts})``."""
    if bins < 1:
        raise InvalidParameter("bins must be >= 1")
    edges = np.linspace(0.0, _PI, bins + 1)
    counts = {
        label: kernels.uniform_histogram(vals, 0.0, _PI, bins)
        for label, vals in histogram_labels(scores).items()
    }
    return edges, counts


def histogram_csv(edges: np.ndarray, counts: dict) -> str:
    lines = ["label,bin_lo,bin_hi,count"]
    for label, c in counts.items():
        for i, n in enumerate(c):
            lines.append(f"{label},{format_float(edges[i])},{format_float(edges[i + 1])},{int(n)}")
    return "\n".join(lines) + "\n"


# -- scores CSV --------------------------------------------------------------------


def scores_to_csv(scores: ScoreSet) -> str:
    lines = [",".join(SCORES_HEADER)]
    for sid, ctype, aid, slot, sc in zip(
        scores.system_ids, scores.comparison_types, scores.attack_ids, scores.slots, scores.scores
    ):
        lines.append(f"{sid},{ctype},{aid},{slot if slot else ''},{format_float(sc)}")
    return "\n".join(lines) + "\n"


def save_scores(scores: ScoreSet, path) -> None:
    atomic_write_text(path, scores_to_csv(scores))


def load_scores(path) -> ScoreSet:
    path = os.fspath(path)
    sys_ids, types, ids, slots, vals = [], [], [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCORES_HEADER:
            raise ParseError(f"header must be {','.join(SCORES_HEADER)}", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 columns, found {len(row)}", path, lineno)
            sid, ctype, aid, slot, value = row
            if ctype not in COMPARISON_TYPES:
                raise ParseError(f"unknown comparison_type {ctype!r}", path, lineno)
            try:
                score = float(value)
            except ValueError:
                raise ParseError(f"bad score {value!r}", path, lineno) from None
            if not (math.isfinite(score) and 0.0 <= score <= _PI):
                raise ParseError(f"score {value} outside [0, pi]", path, lineno)
            if ctype == MORPH:
                if not aid or slot not in ("1", "2"):
                    raise ParseError("morph rows need attack_id and contributor_slot 1 or 2", path, lineno)
                slot_v = int(slot)
            else:
                if aid or slot:
                    raise ParseError("attack fields must be empty for bona fide rows", path, lineno)
                slot_v = 0
            sys_ids.append(sid or DEFAULT_SYSTEM)
            types.append(ctype)
            ids.append(aid)
            slots.append(slot_v)
            vals.append(score)
    return ScoreSet(sys_ids, types, ids, slots, vals)
