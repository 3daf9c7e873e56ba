"""Spectral measures of ``X_i P X_i`` through the reduced-block projection method.

With ``X1 = R^T C R`` the operator ``X1 Gamma X1`` is similar to
``diag(Gamma_1, 0)`` where ``Gamma_1`` is the upper-left ``N1 x N1`` block
of ``R Gamma R^T``. Only that block is diagonalized. The X2 pairings use the
complementary ``N2 x N2`` block, and the Upsilon pairings swap in the curl
projection.

Measure weights carry the ``1/N1`` volume average, so the mass of a
diagonal measure ``mu_kk`` equals the site average of ``X1 e_k . e_k``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from . import _parallel
from .errors import ArgumentError, NumericalError
from .lattice import LatticeSpec
from .polycrystal import IndicatorMatrices, realize_indicators, sample_orientations
from .projection import ProjectionSet, build_projections

EIG_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-10
DEFAULT_BINS = 100


class Pairing(str, Enum):
    """Which indicator/projector composition a measure belongs to."""

    X1_GAMMA = "X1Gamma"
    X2_GAMMA = "X2Gamma"
    X1_UPSILON = "X1Upsilon"
    X2_UPSILON = "X2Upsilon"

    @property
    def indicator(self) -> int:
        return 1 if self.value.startswith("X1") else 2

    @property
    def projector(self) -> str:
        return "Gamma" if self.value.endswith("Gamma") else "Upsilon"


def _frame_rows(d: int, pairing: Pairing) -> list[int]:
    return [0] if pairing.indicator == 1 else list(range(1, d))


def reduced_block(ind: IndicatorMatrices, P: ProjectionSet, which) -> np.ndarray:
    """Principal block of ``R P R^T`` selected by the indicator of ``which``."""
    which = Pairing(which)
    P.check_spec(ind.spec)
    d, n1 = ind.spec.d, ind.spec.N1
    proj = P.Gamma if which.projector == "Gamma" else P.Upsilon
    rows = _frame_rows(d, which)
    R = ind.rotations
    out = np.zeros((len(rows) * n1, len(rows) * n1))
    for ia, a in enumerate(rows):
        for ib, b in enumerate(rows[ia:], start=ia):
            blk = np.zeros((n1, n1))
            for c in range(d):
                left = R[:, a, c][:, None]
                for e in range(d):
                    pce = proj[c * n1:(c + 1) * n1, e * n1:(e + 1) * n1]
                    blk += left * pce * R[:, b, e][None, :]
            out[ia * n1:(ia + 1) * n1, ib * n1:(ib + 1) * n1] = blk
            if ib != ia:
                out[ib * n1:(ib + 1) * n1, ia * n1:(ia + 1) * n1] = blk.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class BlockEig:
    which: Pairing | None
    lambdas: np.ndarray
    W1: np.ndarray

    @property
    def block_size(self) -> int:
        return self.lambdas.size


def eig_block(B, which=None) -> BlockEig:
    """Symmetric eigendecomposition with eigenvalues ascending, clamped to [0, 1].

    Raises
    ------
    NumericalError
        If ``B`` is not symmetric, LAPACK fails, or an eigenvalue lies more
        than ``1e-10`` outside [0, 1].
    """
    B = np.asarray(B, dtype=float)
    asym = float(np.max(np.abs(B - B.T))) if B.size else 0.0
    if asym > SYMMETRY_TOLERANCE:
        raise NumericalError(f"block is not symmetric (max asymmetry {asym:.3e})", asym=asym)
    try:
        lam, W = scipy.linalg.eigh(B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigh failed: {exc}", shape=B.shape) from exc
    lo, hi = float(lam.min(initial=0.0)), float(lam.max(initial=0.0))
    if lo < -EIG_TOLERANCE or hi > 1.0 + EIG_TOLERANCE:
        raise NumericalError(
            f"eigenvalues [{lo:.3e}, {hi:.3e}] leave [0, 1]", lo=lo, hi=hi
        )
    return BlockEig(None if which is None else Pairing(which), np.clip(lam, 0.0, 1.0), W)


def frame_vector(ind: IndicatorMatrices, which, j: int) -> np.ndarray:
    """Restriction of ``R e_j`` to the rows kept by ``which``'s indicator."""
    which = Pairing(which)
    d = ind.spec.d
    if int(j) != j or not 1 <= j <= d:
        raise ArgumentError(f"component index must lie in 1..{d}, got {j}")
    rows = _frame_rows(d, which)
    return ind.rotations[:, rows, j - 1].T.ravel()


@dataclass(frozen=True)
class SpectralMeasure:
    """Point masses ``weights`` at ``lambdas``; ``mu_jk`` of one pairing."""

    lambdas: np.ndarray
    weights: np.ndarray
    j: int
    k: int
    which: Pairing
    provenance: int | str = "ensemble"
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "weight"])
            for lam, wt in zip(self.lambdas, self.weights):
                w.writerow([repr(float(lam)), repr(float(wt))])

    def to_json(self) -> str:
        rec = {
            "schema": 1,
            "which": self.which.value,
            "j": self.j,
            "k": self.k,
            "provenance": self.provenance,
            "mass": self.mass,
            "metadata": self.metadata,
            "lambdas": self.lambdas.tolist(),
            "weights": self.weights.tolist(),
        }
        return json.dumps(rec)


def measure_atoms(eig: BlockEig, ind: IndicatorMatrices, j: int, k: int,
                  provenance=None) -> SpectralMeasure:
    """Weights ``(w_i . e_j^r)(w_i . e_k^r) / N1`` over the reduced eigenvectors."""
    if eig.which is None:
        raise ArgumentError("eig_block result carries no pairing; pass which=")
    ej = frame_vector(ind, eig.which, j)
    ek = ej if k == j else frame_vector(ind, eig.which, k)
    if ej.size != eig.block_size:
        raise ArgumentError(
            f"frame vector of length {ej.size} does not match block of size {eig.block_size}"
        )
    pj = eig.W1.T @ ej
    pk = pj if k == j else eig.W1.T @ ek
    weights = pj * pk / ind.spec.N1
    if provenance is None:
        orient = ind.orientation
        provenance = orient.sample_id if orient is not None else "realization"
    return SpectralMeasure(eig.lambdas, weights, int(j), int(k), eig.which, provenance)


def moments(measure: SpectralMeasure, n_max: int) -> np.ndarray:
    """``mu^n = sum_i lambda_i^n w_i`` for ``n = 0..n_max``."""
    if n_max < 0:
        raise ArgumentError(f"n_max must be >= 0, got {n_max}")
    powers = measure.lambdas[None, :] ** np.arange(n_max + 1)[:, None]
    return powers @ measure.weights


def bin_weights(lambdas, weights, bins: int) -> np.ndarray:
    """Sum weights over ``bins`` equal sub-intervals of [0, 1].

    Bins are half-open ``[l, r)`` except the last, which is closed.
    """
    if bins < 1:
        raise ArgumentError(f"bins must be >= 1, got {bins}")
    idx = np.minimum(np.floor(np.asarray(lambdas) * bins).astype(np.int64), bins - 1)
    idx = np.maximum(idx, 0)
    return np.bincount(idx, weights=np.asarray(weights), minlength=bins)


@dataclass(frozen=True)
class SpectralFunction:
    edges: np.ndarray
    values: np.ndarray
    sample_count: int
    mass: float
    j: int = 1
    k: int = 1
    which: Pairing = Pairing.X1_GAMMA
    quarantined: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def bins(self) -> int:
        return self.values.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "value"])
            for lo, hi, v in zip(self.edges[:-1], self.edges[1:], self.values):
                w.writerow([repr(float(lo)), repr(float(hi)), repr(float(v))])

    def to_json(self) -> str:
        rec = {
            "schema": 1,
            "which": self.which.value,
            "j": self.j,
            "k": self.k,
            "bins": self.bins,
            "samples": self.sample_count,
            "mass": self.mass,
            "quarantined": [q.__dict__ for q in self.quarantined],
            "metadata": self.metadata,
            "edges": self.edges.tolist(),
            "values": self.values.tolist(),
        }
        return json.dumps(rec, indent=1)


def realization_measure(P: ProjectionSet, spec: LatticeSpec, seed: int, sample_id: int,
                        j: int = 1, k: int = 1, which=Pairing.X1_GAMMA) -> SpectralMeasure:
    """Sample one realization and return its ``mu_jk``."""
    ind = realize_indicators(sample_orientations(spec, seed, sample_id))
    eig = eig_block(reduced_block(ind, P, which), which)
    return measure_atoms(eig, ind, j, k)


def _binned_sample(shared, sample_id):
    P, spec, seed, j, k, which, bins = shared
    m = realization_measure(P, spec, seed, sample_id, j, k, which)
    return bin_weights(m.lambdas, m.weights, bins), m.mass


def fold_ordered(arrays):
    """Sequential left fold; summation order fixed by position."""
    total = None
    for a in arrays:
        if total is None:
            total = np.array(a, dtype=np.result_type(a, float), copy=True)
        else:
            total = total + a
    return total


def ensemble_spectral_function(spec: LatticeSpec, samples: int, bins: int = DEFAULT_BINS,
                               seed: int = 0, j: int = 1, k: int = 1,
                               which=Pairing.X1_GAMMA, projections: ProjectionSet | None = None,
                               workers: int = 1) -> SpectralFunction:
    """Histogram of ``mu_jk`` averaged over ``samples`` realizations.

    The reduction runs in sample-id order regardless of ``workers``, so the
    result is bitwise reproducible for fixed ``seed``.
    """
    if samples < 1:
        raise ArgumentError(f"samples must be >= 1, got {samples}")
    which = Pairing(which)
    P = projections if projections is not None else build_projections(spec)
    P.check_spec(spec)
    shared = (P, spec, seed, j, k, which, bins)
    results = _parallel.map_samples(_binned_sample, range(samples), shared, workers)
    good = [r for r in results if not isinstance(r, _parallel.Quarantined)]
    bad = tuple(r for r in results if isinstance(r, _parallel.Quarantined))
    if not good:
        raise NumericalError("every sample was quarantined", quarantined=len(bad))
    n = len(good)
    values = fold_ordered(b for b, _ in good) / n
    mass = float(sum(m for _, m in good) / n)
    return SpectralFunction(
        edges=np.linspace(0.0, 1.0, bins + 1),
        values=values,
        sample_count=n,
        mass=mass,
        j=j,
        k=k,
        which=which,
        quarantined=bad,
        metadata={"lattice": spec.to_dict(), "seed": int(seed)},
    )
