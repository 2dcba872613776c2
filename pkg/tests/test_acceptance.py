"""Acceptance criteria, one marked test (or test group) per criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section of the terminal summary for the PASS/FAIL lines.
"""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner
from scipy import integrate, stats

from morphguard.cli import main
from morphguard.embeddings import angle, angles_between, load_dataset, save_dataset
from morphguard.metrics import (
    ScoreRecord,
    ScoreSet,
    apcer,
    bpcer,
    candidate_thresholds,
    compute_scores,
    fmr,
    fnmr,
    map_rc,
    mmpmr,
    morph_scores,
    next_candidate,
    threshold_at_apcer,
    threshold_at_fmr,
    threshold_wc,
    wcmmpmr,
)
from morphguard.morphing import (
    ENDPOINTS,
    generate_wc_attacks,
    interpolated_attacks,
    select_pairs,
    worst_case_embedding,
)
from morphguard.simulator import SimulationParams, sample_kappa, sample_vmf, sample_uniform_direction, simulate_population
from oracles import map_oracle, mmpmr_oracle, random_scores, rate_le

acceptance = pytest.mark.acceptance
PI = math.pi
FIG3 = [(200.0, 60.0), (250.0, 50.0), (500.0, 25.0)]
SEED = 7


# -- 1: three-population reproduction ---------------------------------------------


@pytest.fixture(scope="module")
def fig3_runs():
    start = time.perf_counter()
    runs = []
    for mu, sigma in FIG3:
        ds = simulate_population(SimulationParams(128, 250, 25, mu, sigma, 1.0, SEED))
        pairs = select_pairs(ds, "random_disjoint", np.random.default_rng(SEED))
        scores = compute_scores(ds, generate_wc_attacks(ds, pairs))
        t = threshold_at_fmr(scores, 0.001)
        runs.append({"scores": scores, "t": t, "wc": wcmmpmr(scores, t)})
    return runs, time.perf_counter() - start


@acceptance("1a", "non-mated mean angle within 0.05 of pi/2 for all three populations")
def test_c1a_nonmated_centre(fig3_runs):
    runs, _ = fig3_runs
    for run in runs:
        assert abs(run["scores"].values("nonmated").mean() - PI / 2) < 0.05


@acceptance("1b", "mated mean angle strictly decreasing across the three populations")
def test_c1b_mated_decreasing(fig3_runs):
    runs, _ = fig3_runs
    means = [run["scores"].values("mated").mean() for run in runs]
    assert means[0] > means[1] > means[2]


@acceptance("1c", "wcMMPMR at threshold_at_fmr(0.001) strictly increasing across the populations")
def test_c1c_wcmmpmr_increasing(fig3_runs):
    runs, _ = fig3_runs
    values = [run["wc"] for run in runs]
    assert values[0] < values[1] < values[2], f"wcMMPMR per population: {values}"


def test_c1_comparison_level_acceptance_increases(fig3_runs):
    # per-comparison morph acceptance does not saturate the way the per-attack
    # rate does at this dimension, so the trend is visible here
    runs, _ = fig3_runs
    rates = [apcer(run["scores"], run["t"]) for run in runs]
    assert rates[0] < rates[1] < rates[2]


@acceptance("1t", "three-population run completes in under 60 s")
def test_c1_runtime(fig3_runs):
    _, elapsed = fig3_runs
    assert elapsed < 60


# -- 2: worst-case geometry -------------------------------------------------------------


@acceptance("2", "worst-case bisects every pair and random search never beats it (1e-9)")
@pytest.mark.parametrize("d", [8, 64, 512])
def test_c2_worst_case_geometry(d):
    rng = np.random.default_rng(1000 + d)
    n_pairs, n_cand = 1000, 10_000
    # candidates are wc + s*b for a shared bank of Gaussian directions b, with
    # per-pair random scales s (log-uniform over 1e-8..10, signed) and, for a
    # tenth of them, the bare direction b; angles follow from three dot products
    bank = rng.standard_normal((n_cand, d))
    bank_sq = np.einsum("ij,ij->i", bank, bank)
    bare = np.arange(n_cand) < n_cand // 10
    for _ in range(n_pairs):
        z1 = sample_uniform_direction(d, rng)
        z2 = sample_uniform_direction(d, rng)
        theta = angle(z1, z2)
        wc = worst_case_embedding(z1, z2)
        a1, a2 = angle(wc, z1), angle(wc, z2)
        assert abs(a1 - a2) < 1e-9
        assert abs(a1 - theta / 2) < 1e-9
        best = max(a1, a2)

        s = 10.0 ** rng.uniform(-8, 1, n_cand) * rng.choice([-1.0, 1.0], n_cand)
        b1, b2, bw = (bank @ np.column_stack([z1, z2, wc])).T
        dot1 = np.where(bare, b1, wc @ z1 + s * b1)
        dot2 = np.where(bare, b2, wc @ z2 + s * b2)
        norm = np.sqrt(np.where(bare, bank_sq, 1.0 + 2 * s * bw + s * s * bank_sq))
        worst = np.maximum(np.arccos(np.clip(dot1 / norm, -1, 1)), np.arccos(np.clip(dot2 / norm, -1, 1)))
        assert worst.min() >= best - 1e-9


# -- 3: metric oracles --------------------------------------------------------------------


def _twin_system(base, rng, name):
    jitter = np.clip(np.round(base.scores + rng.normal(0, 0.4, len(base)), 2), 0, PI)
    return ScoreSet(np.full(len(base), name, dtype=object), base.comparison_types, base.attack_ids, base.slots, jitter)


@acceptance("3", "rates, MMPMR and MAP equal an exhaustive-count oracle exactly on <= 20-record sets")
@pytest.mark.parametrize("seed", range(200))
def test_c3_oracle_equivalence(seed):
    rng = np.random.default_rng(seed)
    s = random_scores(rng, 20, kinds=("worst_case", "landmark"))
    assert len(s) <= 20
    recs = list(s.records())
    for t in np.concatenate([candidate_thresholds(s.scores), rng.uniform(0, PI, 5)]):
        assert fmr(s, t) == rate_le(recs, "nonmated", t)
        assert fnmr(s, t) == rate_le(recs, "mated", t, above=True)
        assert bpcer(s, t) == rate_le(recs, "mated", t, above=True)
        assert apcer(s, t) == rate_le(recs, "morph", t)
        assert mmpmr(s, t) == mmpmr_oracle(recs, t)
        for kind in s.morph_kinds():
            assert apcer(s, t, kind) == rate_le(recs, "morph", t, kind)
            assert mmpmr(s, t, kind) == mmpmr_oracle(recs, t, kind)
    systems = [(s, float(rng.uniform(0, PI))), (_twin_system(s, rng, "b"), float(rng.uniform(0, PI)))]
    for r in (1, 2):
        for c in (1, 2):
            assert map_rc(systems, r, c) == map_oracle(systems, r, c)


# -- 4: MAP(1,1) == MMPMR --------------------------------------------------------------------


def _random_attack_set(rng):
    recs = [ScoreRecord("mated", 0.1), ScoreRecord("nonmated", 1.5)]
    for a in range(int(rng.integers(1, 60))):
        for slot in (1, 2):
            for _ in range(int(rng.integers(1, 12))):
                score = float(rng.uniform(0, PI)) if rng.random() < 0.7 else float(rng.choice([0.3, 0.6, 0.9]))
                recs.append(ScoreRecord("morph", score, f"worst_case:{a}", slot))
    return ScoreSet.from_records(recs)


@acceptance("4", "map_rc(1, 1) equals mmpmr exactly on 100 randomized attack sets")
def test_c4_map_identity():
    rng = np.random.default_rng(44)
    for _ in range(100):
        s = _random_attack_set(rng)
        for t in np.concatenate([candidate_thresholds(s.values("morph")), rng.uniform(0, PI, 10)]):
            assert map_rc([(s, t)], 1, 1) == mmpmr(s, t)


# -- 5: threshold contracts ---------------------------------------------------------------------


def _synthetic_scores(rng):
    """Large randomized score set with many ties (scores rounded to 3 decimals)."""
    q = lambda x: np.clip(np.round(x, 3), 0.001, PI)
    mated = q(rng.normal(0.9, 0.2, 3000))
    nonmated = q(rng.normal(PI / 2, 0.1, 5000))
    recs = [ScoreRecord("mated", v) for v in mated] + [ScoreRecord("nonmated", v) for v in nonmated]
    for a in range(400):
        centre = rng.uniform(0.6, 1.4)
        for slot in (1, 2):
            for v in q(rng.normal(centre, 0.1, 6)):
                recs.append(ScoreRecord("morph", v, f"worst_case:{a}", slot))
    return ScoreSet.from_records(recs)


def _check_rule(rate, pool, threshold, x):
    t = threshold
    assert rate(t) <= x
    nxt = next_candidate(candidate_thresholds(pool), t)
    if nxt is not None:
        assert rate(nxt) > x


@pytest.fixture(scope="module")
def rule_sets():
    sets = [_synthetic_scores(np.random.default_rng(s)) for s in range(3)]
    ds = simulate_population(SimulationParams(128, 250, 25, 250.0, 50.0, 1.0, 11))
    pairs = select_pairs(ds, "random_disjoint", np.random.default_rng(11))
    sets.append(compute_scores(ds, generate_wc_attacks(ds, pairs, "closest_probes")))
    return sets


@acceptance("5", "threshold rules: rate(t) <= x < rate(next candidate); t_wc bounds every interpolated morph set")
@pytest.mark.parametrize("x", [0.001, 0.01, 0.05, 0.1])
def test_c5_threshold_rules(rule_sets, x):
    for s in rule_sets:
        _check_rule(lambda t: fmr(s, t), s.values("nonmated"), threshold_at_fmr(s, x), x)
        _check_rule(lambda t: apcer(s, t), s.values("morph"), threshold_at_apcer(s, x), x)
        _check_rule(lambda t: wcmmpmr(s, t), s.values("morph", "worst_case"), threshold_wc(s, x), x)


@pytest.fixture(scope="module")
def wc_population():
    ds = simulate_population(SimulationParams(128, 250, 25, 250.0, 50.0, 1.0, SEED))
    pairs = select_pairs(ds, "random_disjoint", np.random.default_rng(SEED))
    wc = compute_scores(ds, generate_wc_attacks(ds, pairs, "closest_probes"))
    return ds, pairs, threshold_wc(wc, 0.05)


@acceptance("5", "threshold rules: rate(t) <= x < rate(next candidate); t_wc bounds every interpolated morph set")
@pytest.mark.parametrize("endpoints", ENDPOINTS)
def test_c5_worst_case_guarantee(wc_population, endpoints):
    ds, pairs, t_wc = wc_population
    rng = np.random.default_rng(5)
    for alpha in (0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9):
        for noise in (0.0, 0.01, 0.05, 0.2):
            attacks = interpolated_attacks(ds, pairs, alpha, noise, rng, endpoints=endpoints)
            assert mmpmr(morph_scores(ds, attacks), t_wc) <= 0.05, (alpha, noise)


# -- 6: vMF sampler statistics ------------------------------------------------------------------


@acceptance("6", "vMF draws: mean direction within 0.01, deviation decreasing in kappa, truncated kappa mean within 1.0")
@pytest.mark.parametrize("d", [16, 128])
def test_c6_vmf_statistics(d):
    rng = np.random.default_rng(600 + d)
    mu = sample_uniform_direction(d, rng)
    deviations = []
    for kappa in (50.0, 200.0, 800.0):
        x = sample_vmf(mu, kappa, rng, size=100_000)
        assert angle(x.mean(axis=0), mu) < 0.01
        deviations.append(angles_between(x, mu[None, :]).mean())
    assert deviations[0] > deviations[1] > deviations[2]


def _truncated_mean(mu, sigma, floor):
    pdf = lambda k: stats.norm.pdf(k, mu, sigma)
    # finite window with the mode as a breakpoint so quad cannot miss the peak
    hi = mu + 40 * sigma
    peak = [min(max(mu, floor), hi)]
    mass = integrate.quad(pdf, floor, hi, points=peak)[0]
    return integrate.quad(lambda k: k * pdf(k), floor, hi, points=peak)[0] / mass


@acceptance("6", "vMF draws: mean direction within 0.01, deviation decreasing in kappa, truncated kappa mean within 1.0")
@pytest.mark.parametrize("mu, sigma", FIG3 + [(20.0, 40.0)])
def test_c6_truncated_kappa(mu, sigma):
    rng = np.random.default_rng(int(mu + sigma))
    draws = np.array([sample_kappa(mu, sigma, 1.0, rng) for _ in range(100_000)])
    assert draws.min() >= 1.0
    assert abs(draws.mean() - _truncated_mean(mu, sigma, 1.0)) < 1.0


# -- 7: determinism and round-trip -------------------------------------------------------------


@acceptance("7", "pipeline re-runs are byte-identical; dataset save/load round-trips within 1e-9")
def test_c7_pipeline_determinism(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        args = ["pipeline", "--d", "64", "--n", "80", "--samples", "10", "--kappa-mu", "200", "--kappa-sigma", "60",
                "--seed", "31", "--strategy", "most_similar", "--outdir", str(out)]
        assert CliRunner().invoke(main, args).exit_code == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert len(outputs[0]) == 7
    assert outputs[0] == outputs[1]


@acceptance("7", "pipeline re-runs are byte-identical; dataset save/load round-trips within 1e-9")
def test_c7_round_trip(tmp_path, fig3_middle):
    save_dataset(fig3_middle, tmp_path / "pop.csv")
    loaded = load_dataset(tmp_path / "pop.csv")
    assert list(loaded.subject_ids) == list(fig3_middle.subject_ids)
    assert list(loaded.sample_ids) == list(fig3_middle.sample_ids)
    assert np.max(np.abs(loaded.embeddings - fig3_middle.embeddings)) <= 1e-9
