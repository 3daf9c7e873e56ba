"""Periodic finite-difference vector calculus on d-dimensional lattices.

Vector fields use a component-major layout: entry ``(c - 1) * N1 + flat(x)``
holds component ``c`` at site ``x``, where ``flat`` is row-major over the
axes. Scalar fields have length ``N1 = L**d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, UnsupportedDimensionError

OPERATOR_KINDS = ("partial", "gradient", "divergence", "curl")


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice geometry and the crystallite tiling that sits on top of it.

    Parameters
    ----------
    d : int
        Spatial dimension. Operators accept 1, 2 or 3; curl and the
        polycrystal machinery need 2 or 3.
    L : int
        Sites per axis (at least 2, so that forward differences are nonzero).
    Lc : int
        Crystallite edge length in sites; must divide ``L``.
    """

    d: int
    L: int
    Lc: int = 1

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise UnsupportedDimensionError(f"d must be 1, 2 or 3, got {self.d}")
        if int(self.L) != self.L or self.L < 2:
            raise ArgumentError(f"L must be an integer >= 2, got {self.L}")
        if int(self.Lc) != self.Lc or self.Lc < 1:
            raise ArgumentError(f"Lc must be a positive integer, got {self.Lc}")
        if self.L % self.Lc:
            raise ArgumentError(f"Lc={self.Lc} does not divide L={self.L}")

    @property
    def N1(self) -> int:
        return self.L**self.d

    @property
    def N(self) -> int:
        return self.d * self.N1

    @property
    def N2(self) -> int:
        return self.N - self.N1

    @property
    def crystallites_per_axis(self) -> int:
        return self.L // self.Lc

    @property
    def n_crystallites(self) -> int:
        return self.crystallites_per_axis**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    def site_coords(self) -> np.ndarray:
        """``(N1, d)`` integer coordinates of every site in flat order."""
        grids = np.indices(self.shape).reshape(self.d, -1)
        return grids.T.copy()

    def crystallite_of_site(self) -> np.ndarray:
        """Flat crystallite index for every site (row-major over the tiling)."""
        coarse = self.site_coords() // self.Lc
        return np.ravel_multi_index(coarse.T, (self.crystallites_per_axis,) * self.d)

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "Lc": self.Lc}


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse integer matrix tagged with what it discretizes."""

    matrix: sp.csr_matrix
    kind: str
    axis: int | None = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ArgumentError(f"unknown operator kind {self.kind!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def T(self) -> sp.csr_matrix:
        return self.matrix.T.tocsr()

    def toarray(self, dtype=float) -> np.ndarray:
        return self.matrix.toarray().astype(dtype)

    def __matmul__(self, other):
        return self.matrix @ other


def build_partial(spec: LatticeSpec, axis: int) -> DiscreteOperator:
    """Forward difference along ``axis`` (1-based) with periodic wrap.

    The row for site ``x`` carries ``-1`` at ``x`` and ``+1`` at the site one
    step further along ``axis``.
    """
    if int(axis) != axis or not 1 <= axis <= spec.d:
        raise ArgumentError(f"axis must lie in 1..{spec.d}, got {axis}")
    n = spec.N1
    flat = np.arange(n).reshape(spec.shape)
    shifted = np.roll(flat, -1, axis=axis - 1).ravel()
    rows = np.concatenate([np.arange(n), np.arange(n)])
    cols = np.concatenate([np.arange(n), shifted])
    vals = np.concatenate([-np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.int64)
    return DiscreteOperator(mat, "partial", axis=axis)


def build_gradient(spec: LatticeSpec) -> DiscreteOperator:
    """Vertical stack ``[C_1; ...; C_d]`` of shape ``(N, N1)``."""
    parts = [build_partial(spec, a).matrix for a in range(1, spec.d + 1)]
    return DiscreteOperator(sp.vstack(parts, format="csr"), "gradient")


def build_divergence(spec: LatticeSpec) -> DiscreteOperator:
    """Discrete divergence ``-grad^T`` of shape ``(N1, N)``."""
    grad = build_gradient(spec)
    return DiscreteOperator((-grad.matrix.T).tocsr(), "divergence")


def build_curl(spec: LatticeSpec) -> DiscreteOperator:
    """Block curl: ``[-C2, C1]`` in 2D (``N1 x N``), the 3x3 cross block in 3D."""
    if spec.d not in (2, 3):
        raise UnsupportedDimensionError(f"curl is defined for d = 2 or 3, got {spec.d}")
    c = [build_partial(spec, a).matrix for a in range(1, spec.d + 1)]
    if spec.d == 2:
        mat = sp.hstack([-c[1], c[0]], format="csr")
    else:
        mat = sp.bmat(
            [
                [None, -c[2], c[1]],
                [c[2], None, -c[0]],
                [-c[1], c[0], None],
            ],
            format="csr",
        )
    return DiscreteOperator(mat.astype(np.int64), "curl")


def site_index(spec: LatticeSpec, coords, component: int) -> int:
    """Position of ``component`` (1-based) at site ``coords`` in an N-vector."""
    coords = tuple(int(c) for c in coords)
    if len(coords) != spec.d or any(not 0 <= c < spec.L for c in coords):
        raise ArgumentError(f"coords {coords} outside [0, {spec.L})^{spec.d}")
    if int(component) != component or not 1 <= component <= spec.d:
        raise ArgumentError(f"component must lie in 1..{spec.d}, got {component}")
    return (component - 1) * spec.N1 + int(np.ravel_multi_index(coords, spec.shape))


def site_from_index(spec: LatticeSpec, index: int) -> tuple[tuple[int, ...], int]:
    """Inverse of :func:`site_index`: ``(coords, component)``."""
    if not 0 <= index < spec.N:
        raise ArgumentError(f"index {index} outside [0, {spec.N})")
    component, flat = divmod(int(index), spec.N1)
    coords = tuple(int(c) for c in np.unravel_index(flat, spec.shape))
    return coords, component + 1


def constant_field(spec: LatticeSpec, direction, magnitude=1.0) -> np.ndarray:
    """Uniform vector field ``magnitude * direction``.

    ``direction`` is either a 1-based axis or a length-``d`` vector.
    """
    if np.isscalar(direction):
        if int(direction) != direction or not 1 <= direction <= spec.d:
            raise ArgumentError(f"axis must lie in 1..{spec.d}, got {direction}")
        vec = np.zeros(spec.d)
        vec[int(direction) - 1] = 1.0
    else:
        vec = np.asarray(direction)
        if vec.shape != (spec.d,):
            raise ArgumentError(f"direction must have shape ({spec.d},), got {vec.shape}")
    return np.repeat(magnitude * vec, spec.N1)


def volume_average(spec: LatticeSpec, v) -> np.ndarray:
    """Per-component site average of an N-vector."""
    v = np.asarray(v)
    if v.shape != (spec.N,):
        raise ArgumentError(f"expected a vector of length {spec.N}, got {v.shape}")
    return v.reshape(spec.d, spec.N1).mean(axis=1)
