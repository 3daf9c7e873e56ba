"""Orthogonal projections onto gradient fields, curl fields and constants.

Periodic difference operators are rank deficient, so the projections are
assembled from the strictly positive part of an SVD rather than from the
normal-equation formula ``A (A^T A)^{-1} A^T``. The latter is kept as
:func:`full_rank_projector` for cross-checks on full-rank restrictions.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ArgumentError, NumericalError, RankDeficientError, SpecMismatchError
from .lattice import DiscreteOperator, LatticeSpec, build_curl, build_gradient

logger = logging.getLogger(__name__)

DEFAULT_ZERO_TOLERANCE = 1e-8
CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SubspaceSVD:
    """Strictly positive part ``A = U1 diag(Sigma1) V1^T`` of an SVD."""

    U1: np.ndarray
    Sigma1: np.ndarray
    V1: np.ndarray
    zero_tolerance: float

    @property
    def rank(self) -> int:
        return self.Sigma1.size

    def reconstruct(self) -> np.ndarray:
        return (self.U1 * self.Sigma1) @ self.V1.T

    def pseudo_solve(self, v) -> np.ndarray:
        """Minimum-norm ``x`` with ``A x`` equal to the projection of ``v`` on R(A)."""
        return self.V1 @ ((self.U1.T @ v) / self.Sigma1)


def _dense(A) -> np.ndarray:
    if isinstance(A, DiscreteOperator):
        return A.toarray(float)
    if hasattr(A, "toarray"):
        return A.toarray().astype(float)
    return np.asarray(A, dtype=float)


def svd_split(A, zero_tolerance: float = DEFAULT_ZERO_TOLERANCE) -> SubspaceSVD:
    """SVD of ``A`` keeping singular values above ``zero_tolerance * max``."""
    dense = _dense(A)
    if dense.ndim != 2:
        raise ArgumentError(f"expected a matrix, got shape {dense.shape}")
    try:
        U, sv, Vt = np.linalg.svd(dense, full_matrices=False)
    except np.linalg.LinAlgError:
        # divide and conquer can fail on the highly degenerate periodic spectra
        logger.info("gesdd failed for shape %s; retrying with gesvd", dense.shape)
        try:
            U, sv, Vt = scipy.linalg.svd(dense, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"SVD did not converge: {exc}",
                shape=dense.shape,
                fro_norm=float(np.linalg.norm(dense)),
                finite=bool(np.isfinite(dense).all()),
            ) from exc
    if sv.size == 0 or sv[0] == 0.0:
        keep = np.zeros(sv.shape, dtype=bool)
    else:
        keep = sv > zero_tolerance * sv[0]
    return SubspaceSVD(
        U1=U[:, keep].copy(),
        Sigma1=sv[keep].copy(),
        V1=Vt[keep].T.copy(),
        zero_tolerance=zero_tolerance,
    )


def _symmetrize(P):
    return 0.5 * (P + P.T)


@dataclass(frozen=True)
class ProjectionSet:
    """``Gamma`` onto R(grad), ``Upsilon`` onto R(curl^T), ``Gamma0`` the rest."""

    spec: LatticeSpec
    Gamma: np.ndarray
    Upsilon: np.ndarray
    Gamma0: np.ndarray
    grad_svd: SubspaceSVD
    curl_svd: SubspaceSVD

    def check_spec(self, other: LatticeSpec):
        if (other.d, other.L) != (self.spec.d, self.spec.L):
            raise SpecMismatchError(
                f"projections built for d={self.spec.d}, L={self.spec.L}; "
                f"got d={other.d}, L={other.L}"
            )

    def ranks(self) -> dict:
        return {
            "Gamma": self.grad_svd.rank,
            "Upsilon": self.curl_svd.rank,
            "Gamma0": self.spec.N - self.grad_svd.rank - self.curl_svd.rank,
        }


def build_projections(
    spec: LatticeSpec, zero_tolerance: float = DEFAULT_ZERO_TOLERANCE
) -> ProjectionSet:
    grad_svd = svd_split(build_gradient(spec), zero_tolerance)
    curl_svd = svd_split(build_curl(spec).T, zero_tolerance)
    gamma = _symmetrize(grad_svd.U1 @ grad_svd.U1.T)
    upsilon = _symmetrize(curl_svd.U1 @ curl_svd.U1.T)
    gamma0 = _symmetrize(np.eye(spec.N) - gamma - upsilon)
    logger.debug(
        "projections d=%d L=%d: rank grad %d, rank curl %d",
        spec.d, spec.L, grad_svd.rank, curl_svd.rank,
    )
    return ProjectionSet(spec, gamma, upsilon, gamma0, grad_svd, curl_svd)


def full_rank_projector(A, zero_tolerance: float = DEFAULT_ZERO_TOLERANCE) -> np.ndarray:
    """``A (A^T A)^{-1} A^T`` for a matrix of full column rank.

    Raises
    ------
    RankDeficientError
        If ``A`` has a nontrivial kernel; ``null_dim`` gives its dimension.
    """
    dense = _dense(A)
    sv = np.linalg.svd(dense, compute_uv=False)
    n = dense.shape[1]
    rank = int(np.sum(sv > zero_tolerance * sv[0])) if sv.size and sv[0] > 0 else 0
    if rank < n:
        raise RankDeficientError(
            f"matrix of shape {dense.shape} has rank {rank}; kernel dimension {n - rank}",
            null_dim=n - rank,
        )
    gram = dense.T @ dense
    P = dense @ np.linalg.solve(gram, dense.T)
    return _symmetrize(P)


def save_projections(P: ProjectionSet, path) -> None:
    """Binary cache keyed by ``(d, L)``; crystallite size is irrelevant here."""
    np.savez(
        path,
        format_version=CACHE_FORMAT_VERSION,
        d=P.spec.d,
        L=P.spec.L,
        zero_tolerance=P.grad_svd.zero_tolerance,
        grad_U1=P.grad_svd.U1,
        grad_S1=P.grad_svd.Sigma1,
        grad_V1=P.grad_svd.V1,
        curl_U1=P.curl_svd.U1,
        curl_S1=P.curl_svd.Sigma1,
        curl_V1=P.curl_svd.V1,
    )


def load_projections(path, spec: LatticeSpec) -> ProjectionSet:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CACHE_FORMAT_VERSION:
            raise ArgumentError(f"cache format {version}, expected {CACHE_FORMAT_VERSION}")
        if (int(data["d"]), int(data["L"])) != (spec.d, spec.L):
            raise SpecMismatchError(
                f"cache holds d={int(data['d'])}, L={int(data['L'])}; "
                f"wanted d={spec.d}, L={spec.L}"
            )
        tol = float(data["zero_tolerance"])
        grad_svd = SubspaceSVD(data["grad_U1"], data["grad_S1"], data["grad_V1"], tol)
        curl_svd = SubspaceSVD(data["curl_U1"], data["curl_S1"], data["curl_V1"], tol)
    gamma = _symmetrize(grad_svd.U1 @ grad_svd.U1.T)
    upsilon = _symmetrize(curl_svd.U1 @ curl_svd.U1.T)
    gamma0 = _symmetrize(np.eye(spec.N) - gamma - upsilon)
    return ProjectionSet(spec, gamma, upsilon, gamma0, grad_svd, curl_svd)


def cached_projections(spec: LatticeSpec, cache_dir=None) -> ProjectionSet:
    """Build projections, reading and writing ``cache_dir`` when given."""
    if cache_dir is None:
        return build_projections(spec)
    cache_dir = Path(cache_dir)
    path = cache_dir / f"projections_d{spec.d}_L{spec.L}_v{CACHE_FORMAT_VERSION}.npz"
    if path.exists():
        return load_projections(path, spec)
    P = build_projections(spec)
    cache_dir.mkdir(parents=True, exist_ok=True)
    save_projections(P, path)
    return P
