"""Synthetic face-recognition latent spaces.

Identity class centres are uniform on the unit hypersphere, samples scatter
around them following a von Mises-Fisher distribution, and each identity gets
its own concentration drawn from a truncated normal.

Every identity owns an independent random substream derived from
``(seed, identity index)``, so the generated population does not depend on
evaluation order or on how many worker threads are used.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._backend import max_threads
from .embeddings import ZERO_NORM, Dataset, as_embedding
from .errors import InvalidKappa, InvalidParameter


@dataclass(frozen=True)
class SimulationParams:
    dimension: int = 128
    n_identities: int = 250
    samples_per_identity: int = 25
    kappa_mu: float = 250.0
    kappa_sigma: float = 50.0
    kappa_floor: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 2:
            raise InvalidParameter("dimension must be >= 2")
        if self.n_identities < 2:
            raise InvalidParameter("n_identities must be >= 2")
        if self.samples_per_identity < 1:
            raise InvalidParameter("samples_per_identity must be >= 1")
        if not self.kappa_floor > 0:
            raise InvalidParameter("kappa_floor must be > 0")
        if not self.kappa_mu > self.kappa_floor:
            raise InvalidParameter("kappa_mu must exceed kappa_floor")
        if self.kappa_sigma < 0:
            raise InvalidParameter("kappa_sigma must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class IdentityCluster:
    subject_id: str
    mean_direction: np.ndarray
    kappa: float


def identity_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for identity ``index`` under ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_uniform_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    if d < 2:
        raise InvalidParameter("dimension must be >= 2")
    while True:
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm >= ZERO_NORM:
            return v / norm


def sample_kappa(mu: float, sigma: float, kappa_floor: float, rng: np.random.Generator) -> float:
    """One draw from N(mu, sigma) truncated below at ``kappa_floor``."""
    if not mu > kappa_floor:
        raise InvalidParameter("mu must exceed kappa_floor")
    if sigma == 0:
        return float(mu)
    while True:
        k = rng.normal(mu, sigma)
        if k >= kappa_floor:
            return float(k)


def sample_vmf_canonical(d: int, kappa: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` vMF draws around e1 (Wood's rejection scheme)."""
    if not kappa > 0:
        raise InvalidKappa(f"kappa must be > 0, got {kappa}")
    m = d - 1
    ws = np.empty(size)
    ss = np.empty(size)
    filled = 0
    batch = max(16, size)
    while filled < size:
        z = rng.beta(m / 2.0, m / 2.0, size=batch)
        u = rng.random(batch)
        w, s, ok = kernels.wood_proposals(z, u, kappa, m)
        take = np.flatnonzero(ok)[: size - filled]
        ws[filled : filled + take.size] = w[take]
        ss[filled : filled + take.size] = s[take]
        filled += take.size
    tangent = rng.standard_normal((size, m))
    norms = np.linalg.norm(tangent, axis=1, keepdims=True)
    while np.any(norms < ZERO_NORM):  # pragma: no cover - probability ~0
        bad = np.flatnonzero(norms[:, 0] < ZERO_NORM)
        tangent[bad] = rng.standard_normal((bad.size, m))
        norms = np.linalg.norm(tangent, axis=1, keepdims=True)
    out = np.empty((size, d))
    out[:, 0] = ws
    out[:, 1:] = tangent / norms * ss[:, None]
    return out


def sample_vmf(mean_direction, kappa: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from vMF(mean_direction, kappa).

    Returns one embedding, or an ``(size, d)`` array when ``size`` is given.
    """
    mu = as_embedding(mean_direction)
    if abs(np.linalg.norm(mu) - 1.0) > 1e-9:
        raise InvalidParameter("mean_direction must have unit norm")
    n = 1 if size is None else size
    x = sample_vmf_canonical(mu.shape[0], kappa, n, rng)
    x = kernels.householder_rotate(x, mu)
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x[0] if size is None else x


def _subject_width(n: int) -> int:
    return max(4, len(str(n - 1)))


def subject_id(index: int, n: int) -> str:
    return f"id{index:0{_subject_width(n)}d}"


def _simulate_identity(params: SimulationParams, index: int):
    rng = identity_rng(params.seed, index)
    centre = sample_uniform_direction(params.dimension, rng)
    kappa = sample_kappa(params.kappa_mu, params.kappa_sigma, params.kappa_floor, rng)
    samples = sample_vmf(centre, kappa, rng, size=params.samples_per_identity)
    cluster = IdentityCluster(subject_id(index, params.n_identities), centre, kappa)
    return cluster, samples


def simulate(params: SimulationParams) -> tuple[Dataset, list[IdentityCluster]]:
    """Generate the population and return it with the underlying clusters."""
    indices = range(params.n_identities)
    threads = min(max_threads(), params.n_identities)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda i: _simulate_identity(params, i), indices))
    else:
        results = [_simulate_identity(params, i) for i in indices]

    s = params.samples_per_identity
    width = max(2, len(str(s - 1)))
    subject_ids, sample_ids, roles = [], [], []
    for cluster, _ in results:
        for j in range(s):
            subject_ids.append(cluster.subject_id)
            sample_ids.append(f"s{j:0{width}d}")
            roles.append("enroll" if j == 0 else "probe")
    n_rows = len(subject_ids)
    dataset = Dataset(
        dimension=params.dimension,
        subject_ids=subject_ids,
        sample_ids=sample_ids,
        roles=roles,
        kinds=["bonafide"] * n_rows,
        pair_subjects=[""] * n_rows,
        embeddings=np.vstack([samples for _, samples in results]),
    )
    return dataset, [cluster for cluster, _ in results]


def simulate_population(params: SimulationParams) -> Dataset:
    return simulate(params)[0]
