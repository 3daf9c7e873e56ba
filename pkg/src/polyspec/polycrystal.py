"""Random crystallite orientations and the indicator projections they induce.

Each crystallite carries a rotation ``R``; its crystal axis (the direction
with conductivity ``sigma1``) is the first row of ``R``. Per site,
``X1 = R^T diag(e1) R`` and ``X2 = I - X1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, UnsupportedDimensionError
from .lattice import LatticeSpec

_TWO_PI = 2.0 * np.pi


def _axis_rotation(axis: int, theta: float) -> np.ndarray:
    """Rotation about coordinate ``axis`` (0=x, 1=y, 2=z), same sign pattern as 2D."""
    c, s = np.cos(theta), np.sin(theta)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    R = np.eye(3)
    R[i, i] = c
    R[i, j] = s
    R[j, i] = -s
    R[j, j] = c
    return R


def rotation_matrix(angles, order=None) -> np.ndarray:
    """Rotation built from orientation angles.

    In 2D ``angles`` is a single angle and ``R = [[c, s], [-s, c]]``. In 3D
    ``angles`` holds the x, y and z rotation angles and ``order`` the axis
    succession (a permutation of ``(0, 1, 2)``, applied first to last);
    the default is ``(0, 1, 2)``.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 1:
        c, s = np.cos(angles[0]), np.sin(angles[0])
        return np.array([[c, s], [-s, c]])
    if angles.size != 3:
        raise UnsupportedDimensionError(f"expected 1 (2D) or 3 (3D) angles, got {angles.size}")
    order = (0, 1, 2) if order is None else tuple(int(a) for a in order)
    if sorted(order) != [0, 1, 2]:
        raise ArgumentError(f"order must be a permutation of (0, 1, 2), got {order}")
    R = np.eye(3)
    for axis in order:
        R = _axis_rotation(axis, angles[axis]) @ R
    return R


def _wrap(theta):
    return (np.asarray(theta) + np.pi) % _TWO_PI - np.pi


@dataclass(frozen=True)
class OrientationField:
    """Per-crystallite orientation angles for one realization.

    ``angles`` has shape ``(n_crystallites, 1)`` in 2D and
    ``(n_crystallites, 3)`` in 3D; ``orders`` (3D only) stores each
    crystallite's axis succession.
    """

    spec: LatticeSpec
    angles: np.ndarray
    seed: int
    sample_id: int
    orders: np.ndarray | None = None

    def rotations(self) -> np.ndarray:
        """``(n_crystallites, d, d)`` rotation matrices."""
        if self.spec.d == 2:
            return np.stack([rotation_matrix(a[0]) for a in self.angles])
        return np.stack([rotation_matrix(a, o) for a, o in zip(self.angles, self.orders)])

    def to_json(self) -> str:
        n = self.spec.crystallites_per_axis
        grid_shape = (n,) * self.spec.d
        rec = {
            "schema": 1,
            "lattice": self.spec.to_dict(),
            "seed": int(self.seed),
            "sample_id": int(self.sample_id),
            "crystallite_grid": list(grid_shape),
            "angles": self.angles.reshape(grid_shape + (-1,)).tolist(),
        }
        if self.orders is not None:
            rec["orders"] = self.orders.reshape(grid_shape + (3,)).tolist()
        return json.dumps(rec, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "OrientationField":
        rec = json.loads(text)
        spec = LatticeSpec(**rec["lattice"])
        width = 1 if spec.d == 2 else 3
        angles = np.asarray(rec["angles"], dtype=float).reshape(-1, width)
        orders = rec.get("orders")
        if orders is not None:
            orders = np.asarray(orders, dtype=np.int64).reshape(-1, 3)
        return cls(spec, angles, rec["seed"], rec["sample_id"], orders)


def sample_rng(seed: int, sample_id: int) -> np.random.Generator:
    """Counter-based stream dedicated to one ``(seed, sample_id)`` pair."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(sample_id),))
    return np.random.Generator(np.random.Philox(ss))


def sample_orientations(spec: LatticeSpec, seed: int, sample_id: int) -> OrientationField:
    """Draw one isotropic checkerboard realization.

    2D angles are uniform on the circle. In 3D the three axis angles are
    independent and uniform, composed in a uniformly random axis order per
    crystallite; this is not the Haar measure on SO(3).
    """
    if spec.d not in (2, 3):
        raise UnsupportedDimensionError(f"polycrystals need d = 2 or 3, got {spec.d}")
    rng = sample_rng(seed, sample_id)
    n = spec.n_crystallites
    if spec.d == 2:
        angles = rng.uniform(-np.pi, np.pi, size=(n, 1))
        return OrientationField(spec, angles, seed, sample_id)
    angles = rng.uniform(-np.pi, np.pi, size=(n, 3))
    orders = np.argsort(rng.random((n, 3)), axis=1)
    return OrientationField(spec, angles, seed, sample_id, orders)


def uniform_orientations(spec: LatticeSpec, theta=0.0) -> OrientationField:
    """Single crystal: every crystallite shares the same angle(s)."""
    n = spec.n_crystallites
    if spec.d == 2:
        angles = np.full((n, 1), float(_wrap(theta)))
        return OrientationField(spec, angles, seed=-1, sample_id=-1)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (3,))
    angles = np.tile(_wrap(theta), (n, 1))
    orders = np.tile(np.arange(3), (n, 1))
    return OrientationField(spec, angles, seed=-1, sample_id=-1, orders=orders)


@dataclass(frozen=True)
class IndicatorMatrices:
    """Site-wise rotations and the projections ``X1``, ``X2`` they define.

    ``rotations[x]`` is the ``d x d`` rotation at flat site ``x``. All
    N-vector operations use the component-major layout.
    """

    spec: LatticeSpec
    rotations: np.ndarray
    orientation: OrientationField | None = field(default=None, repr=False)

    @property
    def axis(self) -> np.ndarray:
        """``(d, N1)``: crystal axis components (first row of each R)."""
        return self.rotations[:, 0, :].T

    def X1_blocks(self) -> np.ndarray:
        n = self.rotations[:, 0, :]
        return n[:, :, None] * n[:, None, :]

    def X2_blocks(self) -> np.ndarray:
        return np.eye(self.spec.d)[None] - self.X1_blocks()

    def _split(self, v):
        v = np.asarray(v)
        if v.shape != (self.spec.N,):
            raise ArgumentError(f"expected a vector of length {self.spec.N}, got {v.shape}")
        return v.reshape(self.spec.d, self.spec.N1)

    def apply_X1(self, v) -> np.ndarray:
        comps = self._split(v)
        n = self.axis
        return (n * np.sum(n * comps, axis=0)).ravel()

    def apply_X2(self, v) -> np.ndarray:
        return np.asarray(v) - self.apply_X1(v)

    def rotate(self, v) -> np.ndarray:
        """``R v`` with the site-wise rotations."""
        comps = self._split(v)
        return np.einsum("xab,bx->ax", self.rotations, comps).ravel()

    def rotate_back(self, v) -> np.ndarray:
        """``R^T v``."""
        comps = self._split(v)
        return np.einsum("xba,bx->ax", self.rotations, comps).ravel()

    def block_sparse(self, blocks) -> sp.csr_matrix:
        d, n1 = self.spec.d, self.spec.N1
        site = np.arange(n1)
        rows, cols, vals = [], [], []
        for a in range(d):
            for b in range(d):
                rows.append(a * n1 + site)
                cols.append(b * n1 + site)
                vals.append(blocks[:, a, b])
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.spec.N, self.spec.N),
        )

    def X1_matrix(self) -> sp.csr_matrix:
        return self.block_sparse(self.X1_blocks())

    def X2_matrix(self) -> sp.csr_matrix:
        return self.block_sparse(self.X2_blocks())

    def rotation_matrix(self) -> sp.csr_matrix:
        """The banded ``N x N`` matrix acting as ``R`` on N-vectors."""
        return self.block_sparse(self.rotations)


def realize_indicators(orientation: OrientationField) -> IndicatorMatrices:
    spec = orientation.spec
    per_crystal = orientation.rotations()
    rotations = per_crystal[spec.crystallite_of_site()]
    return IndicatorMatrices(spec, rotations, orientation)


@dataclass(frozen=True)
class ContrastParams:
    """Component conductivities and the contrast variables ``s``, ``t = 1 - s``.

    Equal conductivities are allowed and flagged as ``homogeneous``; ``s`` is
    then undefined and downstream code returns the exact uniform answer.
    """

    sigma1: complex
    sigma2: complex

    def __post_init__(self):
        object.__setattr__(self, "sigma1", complex(self.sigma1))
        object.__setattr__(self, "sigma2", complex(self.sigma2))
        if self.sigma2 == 0:
            raise ArgumentError("sigma2 must be nonzero")

    @property
    def homogeneous(self) -> bool:
        return self.sigma1 == self.sigma2

    @property
    def s(self) -> complex:
        if self.homogeneous:
            raise ArgumentError("s is undefined for sigma1 == sigma2")
        return 1.0 / (1.0 - self.sigma1 / self.sigma2)

    @property
    def t(self) -> complex:
        return 1.0 - self.s

    def to_dict(self) -> dict:
        rec = {
            "sigma1": [self.sigma1.real, self.sigma1.imag],
            "sigma2": [self.sigma2.real, self.sigma2.imag],
        }
        if not self.homogeneous:
            rec["s"] = [self.s.real, self.s.imag]
        return rec


def local_conductivity_apply(ind: IndicatorMatrices, cp: ContrastParams, v) -> np.ndarray:
    """``sigma v = sigma1 X1 v + sigma2 X2 v``."""
    x1v = ind.apply_X1(v)
    return cp.sigma1 * x1v + cp.sigma2 * (np.asarray(v) - x1v)


def local_resistivity_apply(ind: IndicatorMatrices, cp: ContrastParams, v) -> np.ndarray:
    """``rho v = X1 v / sigma1 + X2 v / sigma2``."""
    if cp.sigma1 == 0:
        raise ArgumentError("sigma1 must be nonzero for the resistivity")
    x1v = ind.apply_X1(v)
    return x1v / cp.sigma1 + (np.asarray(v) - x1v) / cp.sigma2


def conductivity_matrix(ind: IndicatorMatrices, cp: ContrastParams) -> sp.csr_matrix:
    """Sparse ``N x N`` local conductivity in the component-major layout."""
    blocks = cp.sigma1 * ind.X1_blocks() + cp.sigma2 * ind.X2_blocks()
    return ind.block_sparse(blocks)
