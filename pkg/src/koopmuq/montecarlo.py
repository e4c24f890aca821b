"""Brute-force Monte Carlo check of the analytic variances.

Each replicate perturbs the observed snapshots with the measurement noise,
re-estimates ``K`` and records it. The elementwise variance is taken about
``K_obs`` with an ``N - 1`` denominator, which is the estimator the analytic
formulas are compared against.

Replicate ``k`` always draws from ``RngHandle(seed).child(k)`` and results are
reduced in replicate order, so serial and threaded runs agree bit for bit.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameter, ShapeError
from .estimators import Dictionary, estimate, lift, lift_noise
from .ingest import NoiseModel, SnapshotPair
from .muq import VarianceMatrix, check_dof
from .numkernel import RngHandle
from .spectral import SpectralUQ, empirical_moments, koopman_sym_spectrum

# stream id reserved for the N(K_obs, S) reference draws in the report
REFERENCE_STREAM = 0xC0FFEE


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings.

    ``perturb`` selects where the noise enters: ``"state"`` perturbs the raw
    snapshots and lifts afterwards, ``"feature"`` perturbs the lifted features
    directly with the lifted variances.
    """

    replicates: int = 1000
    seed: int = 0
    method: str = "DMD"
    dictionary: str = "identity"
    perturb: str = "state"
    parallel: bool = False
    workers: int = 0
    tol: float = 1e-12

    def __post_init__(self):
        if self.replicates < 2:
            raise InvalidParameter("replicates must be at least 2")
        if self.perturb not in ("state", "feature"):
            raise InvalidParameter(f"unknown perturbation mode {self.perturb!r}")

    def to_json(self):
        return asdict(self)


@dataclass
class MCResult:
    K_obs: np.ndarray = field(repr=False)
    ensemble: np.ndarray = field(repr=False)  # (N, p, p)
    R_hat: np.ndarray = field(repr=False)
    R_centered: np.ndarray = field(repr=False)
    spectra: np.ndarray = field(repr=False)  # (N, p), centered fluctuation magnitudes

    @property
    def p(self):
        return self.K_obs.shape[0]

    @property
    def replicates(self):
        return self.ensemble.shape[0]


def sample_dataset(rng: RngHandle, snap: SnapshotPair, noise: NoiseModel) -> SnapshotPair:
    """Independent Gaussian perturbation of every entry, variance per column."""
    if len(noise) != snap.n:
        raise ShapeError(f"noise has {len(noise)} variances, snapshots have {snap.n} columns")
    sd = np.sqrt(noise.variances)
    gen = rng.generator()
    X = snap.X + sd * gen.standard_normal(snap.X.shape)
    Y = snap.Y + sd * gen.standard_normal(snap.Y.shape)
    return SnapshotPair(X, Y)


def _feature_dim(cfg: MCConfig, n):
    if cfg.method.upper() == "DMD":
        return n
    return Dictionary(cfg.dictionary, n).feature_dim


def mc_ensemble(snap: SnapshotPair, noise: NoiseModel, cfg: MCConfig):
    """``(K_obs, stack of replicate estimates)``."""
    noise.check_length(snap.n)
    p = _feature_dim(cfg, snap.n)
    check_dof(snap.m, p)
    root = RngHandle(cfg.seed)

    if cfg.perturb == "feature" and cfg.method.upper() == "EDMD":
        d = Dictionary(cfg.dictionary, snap.n)
        base = SnapshotPair(lift(d, snap.X), lift(d, snap.Y))
        base_noise = lift_noise(d, noise)
        method, dictionary = "DMD", "identity"
    else:
        base, base_noise = snap, noise
        method, dictionary = cfg.method, cfg.dictionary

    K_obs = estimate(base, method, dictionary, cfg.tol).K

    def one(k):
        replica = sample_dataset(root.child(k), base, base_noise)
        return estimate(replica, method, dictionary, cfg.tol).K

    indices = range(cfg.replicates)
    if cfg.parallel:
        workers = cfg.workers or os.cpu_count() or 1
        with ThreadPoolExecutor(max_workers=workers) as pool:
            Ks = list(pool.map(one, indices))
    else:
        Ks = [one(k) for k in indices]
    return K_obs, np.stack(Ks)


def mc_variance(snap: SnapshotPair, noise: NoiseModel, cfg: MCConfig) -> MCResult:
    K_obs, ensemble = mc_ensemble(snap, noise, cfg)
    return summarize(K_obs, ensemble)


def summarize(K_obs, ensemble) -> MCResult:
    N = ensemble.shape[0]
    dev = ensemble - K_obs
    R_hat = np.sum(dev * dev, axis=0) / (N - 1)
    cen = ensemble - ensemble.mean(axis=0)
    R_centered = np.sum(cen * cen, axis=0) / (N - 1)
    # sum of squares about any point is at least the sum about the mean
    slack = 1e-12 * np.maximum(R_hat, np.finfo(float).tiny)
    if np.any(R_centered > R_hat + slack):
        raise ArithmeticError("variance about K_obs fell below the mean-centered variance")
    spectra = np.stack([koopman_sym_spectrum(d) for d in dev])
    return MCResult(K_obs, ensemble, R_hat, R_centered, spectra)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InvalidParameter("both samples must be non-empty")
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


@dataclass
class ComparisonReport:
    ratio: np.ndarray = field(repr=False)  # R_hat / S
    ks: np.ndarray = field(repr=False)
    R_hat: np.ndarray = field(repr=False)
    R_centered: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    moments_muq: np.ndarray = field(repr=False)
    moments_mc: np.ndarray = field(repr=False)
    replicates: int = 0

    @property
    def moment_deltas(self):
        return self.moments_muq - self.moments_mc

    @property
    def median_ratio(self):
        return float(np.median(self.ratio))

    def to_json(self):
        return {
            "p": int(self.S.shape[0]),
            "replicates": self.replicates,
            "median_ratio": self.median_ratio,
            "ratio": self.ratio.ravel().tolist(),
            "ks": self.ks.ravel().tolist(),
            "R_hat": self.R_hat.ravel().tolist(),
            "R_centered": self.R_centered.ravel().tolist(),
            "S": self.S.ravel().tolist(),
            "moments_muq": self.moments_muq.tolist(),
            "moments_mc": self.moments_mc.tolist(),
            "moment_deltas": self.moment_deltas.tolist(),
        }


def compare_report(mc: MCResult, analytic: VarianceMatrix, spectral: SpectralUQ | None = None,
                   seed=0, draws=None) -> ComparisonReport:
    """Compare the Monte Carlo ensemble with the analytic model.

    For each element, ``draws`` samples (default: as many as replicates) of
    ``N(K_obs_ij, S_ij)`` are compared with the ensemble by KS distance.
    Spectral moments of the MC side are raw moments of the eigenvalues of
    ``(K - K_obs)(K - K_obs)^T / p`` pooled over replicates.
    """
    if analytic.S.shape != mc.R_hat.shape:
        raise ShapeError(f"analytic S {analytic.S.shape} and MC {mc.R_hat.shape} differ")
    p = mc.p
    draws = draws or mc.replicates
    z = RngHandle(seed, REFERENCE_STREAM).generator().standard_normal((draws, p, p))
    reference = analytic.mean + np.sqrt(analytic.S) * z
    ks = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            ks[i, j] = ks_distance(reference[:, i, j], mc.ensemble[:, i, j])

    if spectral is not None:
        order = spectral.moments.size
        moments_muq = spectral.moments
        moments_mc = empirical_moments(mc.spectra**2, order)
    else:
        moments_muq = moments_mc = np.zeros(0)
    return ComparisonReport(
        ratio=mc.R_hat / analytic.S,
        ks=ks,
        R_hat=mc.R_hat,
        R_centered=mc.R_centered,
        S=analytic.S,
        moments_muq=moments_muq,
        moments_mc=moments_mc,
        replicates=mc.replicates,
    )


def histograms(mc: MCResult, bins=50):
    """Rows ``(i, j, bin_left, bin_right, count)`` of per-element ensemble histograms."""
    rows = []
    for i in range(mc.p):
        for j in range(mc.p):
            counts, edges = np.histogram(mc.ensemble[:, i, j], bins=bins)
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                rows.append((i, j, float(lo), float(hi), int(c)))
    return rows


def iid_benchmark(m, variances) -> tuple[SnapshotPair, NoiseModel]:
    """Zero observed snapshots with the given per-column noise.

    Perturbing this pair yields exactly the independent centered Gaussian
    matrices the analytic formulas assume.
    """
    v = np.asarray(variances, dtype=float)
    zeros = np.zeros((int(m), v.size))
    return SnapshotPair(zeros, zeros), NoiseModel(v, "manufacturer")
