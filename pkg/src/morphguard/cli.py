"""``morphguard`` command line.

Exit codes: 0 success, 1 I/O or input-file failure, 2 invalid flags.
All outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import functools
import json
import math
import os
import time

import click
import numpy as np

from . import embeddings as E
from . import metrics as X
from . import morphing as M
from . import simulator as S
from ._backend import backend_name
from .errors import InconsistentDimension, InvalidParameter, MorphGuardError

_existing = click.Path(exists=True, dir_okay=False)
_outfile = click.Path(dir_okay=False, writable=True)


def _guard(fn):
    """Map library errors onto the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InvalidParameter as exc:
            raise click.UsageError(str(exc)) from exc
        except (MorphGuardError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _write_json(path, payload) -> None:
    E.atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _rules(fmr, apcer, wcmmpmr):
    rules = [("fmr", x) for x in fmr] + [("apcer", x) for x in apcer] + [("wcmmpmr", x) for x in wcmmpmr]
    for _, x in rules:
        if not 0.0 <= x <= 1.0:
            raise InvalidParameter(f"target rate {x} outside [0, 1]")
    return rules


def _parse_rule(text: str):
    name, sep, value = text.partition("=")
    if not sep or name not in X.RULES:
        raise InvalidParameter(f"operating rule must look like fmr=0.001 (rules: {', '.join(X.RULES)})")
    try:
        x = float(value)
    except ValueError:
        raise InvalidParameter(f"bad rate in {text!r}") from None
    return name, x


def _select_system(scores: X.ScoreSet, system):
    if system is None:
        return scores.single_system()
    return scores.for_system(system)


def _grid_det(scores: X.ScoreSet, points: int) -> X.DetTable:
    full = X.det_sweep(scores)
    grid = np.linspace(0.0, math.pi, points + 1)
    # rates are step functions that are right-continuous in t
    idx = np.searchsorted(full.thresholds, grid, side="right") - 1
    return X.DetTable(grid, {k: v[idx] for k, v in full.columns.items()})


@click.group()
@click.version_option(package_name="artifact", message="%(version)s")
def main() -> None:
    """Quantify face-recognition vulnerability to morphing attacks."""


@main.command()
@click.option("--d", "dimension", type=int, default=128, show_default=True, help="Latent dimension.")
@click.option("--n", "n_identities", type=int, default=250, show_default=True, help="Number of identities.")
@click.option("--samples", type=int, default=25, show_default=True, help="Samples per identity.")
@click.option("--kappa-mu", type=float, default=250.0, show_default=True)
@click.option("--kappa-sigma", type=float, default=50.0, show_default=True)
@click.option("--kappa-floor", type=float, default=1.0, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--out", required=True, type=_outfile)
@_guard
def simulate(dimension, n_identities, samples, kappa_mu, kappa_sigma, kappa_floor, seed, out):
    """Simulate a vMF population and write the embeddings CSV."""
    params = S.SimulationParams(dimension, n_identities, samples, kappa_mu, kappa_sigma, kappa_floor, seed)
    dataset = S.simulate_population(params)
    E.save_dataset(dataset, out)
    click.echo(f"wrote {len(dataset)} samples of {n_identities} identities to {out}", err=True)


@main.command()
@click.option("--embeddings", required=True, type=_existing)
@click.option("--strategy", type=click.Choice(M.STRATEGIES), default="most_similar", show_default=True)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--out", required=True, type=_outfile)
@_guard
def pairs(embeddings, strategy, seed, out):
    """Select identity pairs to morph."""
    dataset = E.load_dataset(embeddings)
    chosen = M.select_pairs(dataset, strategy, np.random.default_rng(seed))
    M.save_pairs(chosen, out)
    click.echo(f"wrote {len(chosen)} pairs to {out}", err=True)


@main.command("wc-morphs")
@click.option("--embeddings", required=True, type=_existing)
@click.option("--pairs", "pairs_path", required=True, type=_existing)
@click.option("--endpoints", type=click.Choice(M.ENDPOINTS), default="enroll", show_default=True,
              help="Embeddings each worst-case morph lies between.")
@click.option("--out", required=True, type=_outfile)
@_guard
def wc_morphs(embeddings, pairs_path, endpoints, out):
    """Compute worst-case morph embeddings for a pair list."""
    dataset = E.load_dataset(embeddings)
    attacks = M.generate_wc_attacks(dataset, M.load_pairs(pairs_path), endpoints)
    M.save_attacks(attacks, out, dataset.dimension)
    click.echo(f"wrote {len(attacks)} worst-case morphs to {out}", err=True)


@main.command()
@click.option("--embeddings", required=True, type=_existing, help="Bona fide embeddings (may include morph rows).")
@click.option("--morphs", multiple=True, type=_existing, help="Extra embeddings CSVs holding morph rows.")
@click.option("--system-id", default=X.DEFAULT_SYSTEM, show_default=True)
@click.option("--nonmated-cap", type=click.IntRange(min=1), default=None, help="Subsample non-mated scores.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--out", required=True, type=_outfile)
@_guard
def score(embeddings, morphs, system_id, nonmated_cap, seed, out):
    """Compute mated, non-mated and morph scores."""
    dataset = E.load_dataset(embeddings)
    attacks = M.dataset_attacks(dataset)
    for path in morphs:
        extra, d = M.load_attacks(path)
        if d != dataset.dimension:
            raise InconsistentDimension(f"{path}: dimension {d} vs {dataset.dimension}")
        attacks.extend(extra)
    scores = X.compute_scores(dataset, attacks, X.ScoreOptions(system_id, nonmated_cap, seed))
    X.save_scores(scores, out)
    click.echo(f"wrote {len(scores)} scores to {out}", err=True)


@main.command()
@click.option("--scores", "scores_path", required=True, type=_existing)
@click.option("--system", default=None, help="System to use when the file holds several.")
@click.option("--fmr", multiple=True, type=float, help="Threshold at this FMR (repeatable).")
@click.option("--apcer", multiple=True, type=float, help="Threshold at this APCER (repeatable).")
@click.option("--wcmmpmr", multiple=True, type=float, help="Threshold at this worst-case MMPMR (repeatable).")
@click.option("--out", type=_outfile, default=None, help="JSON output (stdout if omitted).")
@_guard
def thresholds(scores_path, system, fmr, apcer, wcmmpmr, out):
    """Decision thresholds under the FMR, APCER and worst-case MMPMR rules."""
    rules = _rules(fmr, apcer, wcmmpmr)
    if not rules:
        raise InvalidParameter("give at least one of --fmr, --apcer, --wcmmpmr")
    scores = _select_system(X.load_scores(scores_path), system)
    payload = {
        "system_id": scores.systems[0],
        "thresholds": {X.rule_name(r, x): X.apply_rule(scores, r, x) for r, x in rules},
    }
    if out:
        _write_json(out, payload)
    else:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))


@main.command("metrics")
@click.option("--scores", "scores_path", required=True, type=_existing)
@click.option("--system", default=None)
@click.option("--fmr", multiple=True, type=float)
@click.option("--apcer", multiple=True, type=float)
@click.option("--wcmmpmr", multiple=True, type=float)
@click.option("--operating", default=None, help="Rule the rates are evaluated at, e.g. fmr=0.001.")
@click.option("--map-r", multiple=True, type=click.IntRange(min=1), default=(1, 2), show_default=True)
@click.option("--out", type=_outfile, default=None)
@_guard
def metrics_cmd(scores_path, system, fmr, apcer, wcmmpmr, operating, map_r, out):
    """Evaluation summary (JSON) at an operating threshold."""
    rules = _rules(fmr, apcer, wcmmpmr) or [("fmr", 0.001)]
    op = _parse_rule(operating) if operating else None
    summary = X.summarize(X.load_scores(scores_path), rules, op, system, map_r)
    if out:
        E.atomic_write_text(out, summary.to_json())
    else:
        click.echo(summary.to_json(), nl=False)


@main.command()
@click.option("--scores", "scores_path", required=True, type=_existing)
@click.option("--system", default=None)
@click.option("--bins", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--hist-out", required=True, type=_outfile, help="Histogram CSV: label,bin_lo,bin_hi,count.")
@click.option("--det-out", type=_outfile, default=None, help="DET sweep CSV.")
@click.option("--det-grid", type=click.IntRange(min=1), default=None,
              help="Evaluate the sweep on a uniform grid of this many intervals instead of every observed score.")
@_guard
def report(scores_path, system, bins, hist_out, det_out, det_grid):
    """Histogram and DET data for external plotting."""
    scores = _select_system(X.load_scores(scores_path), system)
    edges, counts = X.histograms(scores, bins)
    E.atomic_write_text(hist_out, X.histogram_csv(edges, counts))
    if det_out:
        table = _grid_det(scores, det_grid) if det_grid else X.det_sweep(scores)
        E.atomic_write_text(det_out, table.to_csv())


@main.command()
@click.option("--d", "dimension", type=int, default=128, show_default=True)
@click.option("--n", "n_identities", type=int, default=250, show_default=True)
@click.option("--samples", type=int, default=25, show_default=True)
@click.option("--kappa-mu", type=float, default=250.0, show_default=True)
@click.option("--kappa-sigma", type=float, default=50.0, show_default=True)
@click.option("--kappa-floor", type=float, default=1.0, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--strategy", type=click.Choice(M.STRATEGIES), default="random_disjoint", show_default=True)
@click.option("--endpoints", type=click.Choice(M.ENDPOINTS), default="enroll", show_default=True)
@click.option("--fmr", type=float, default=0.001, show_default=True)
@click.option("--wcmmpmr", type=float, default=0.05, show_default=True)
@click.option("--bins", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--det-grid", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--outdir", required=True, type=click.Path(file_okay=False))
@_guard
def pipeline(dimension, n_identities, samples, kappa_mu, kappa_sigma, kappa_floor, seed,
             strategy, endpoints, fmr, wcmmpmr, bins, det_grid, outdir):
    """simulate -> pairs -> wc-morphs -> score -> metrics -> report in one go."""
    t0 = time.perf_counter()
    os.makedirs(outdir, exist_ok=True)
    path = functools.partial(os.path.join, outdir)
    params = S.SimulationParams(dimension, n_identities, samples, kappa_mu, kappa_sigma, kappa_floor, seed)
    dataset = S.simulate_population(params)
    E.save_dataset(dataset, path("population.csv"))
    chosen = M.select_pairs(dataset, strategy, np.random.default_rng(seed))
    M.save_pairs(chosen, path("pairs.csv"))
    attacks = M.generate_wc_attacks(dataset, chosen, endpoints)
    M.save_attacks(attacks, path("wc_morphs.csv"), dimension)
    scores = X.compute_scores(dataset, attacks)
    X.save_scores(scores, path("scores.csv"))
    rules = _rules([fmr], [], [wcmmpmr])
    summary = X.summarize(scores, rules, rules[0])
    E.atomic_write_text(path("summary.json"), summary.to_json())
    edges, counts = X.histograms(scores, bins)
    E.atomic_write_text(path("histogram.csv"), X.histogram_csv(edges, counts))
    E.atomic_write_text(path("det.csv"), _grid_det(scores, det_grid).to_csv())
    click.echo(
        f"{outdir}: wcMMPMR={summary.wcmmpmr:.4f} at {summary.operating_rule} "
        f"(t={summary.thresholds[summary.operating_rule]:.4f}) "
        f"[{backend_name()} kernels, {time.perf_counter() - t0:.1f}s]",
        err=True,
    )


if __name__ == "__main__":  # pragma: no cover
    main()
