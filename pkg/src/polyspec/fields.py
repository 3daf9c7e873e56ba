"""Electric field and current density from eigenvector resolvent expansions.

``X1 E = s (sI - X1 Gamma X1)^{-1} X1 E0`` is evaluated in the reduced block
coordinates and mapped back with ``R^T``; the fluctuating part then follows
from ``E_f = Gamma X1 E / s``. The current-density side mirrors this with
``Upsilon`` and ``J_f = Upsilon X2 J / s`` (or ``Upsilon X1 J / t``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ArgumentError
from .lattice import LatticeSpec, constant_field, volume_average
from .polycrystal import ContrastParams, IndicatorMatrices
from .projection import ProjectionSet
from .spectral import BlockEig, Pairing, frame_vector
from .transport import check_admissible

FIELD_LABELS = ("E", "J", "E_f", "J_f", "E0", "J0", "X1E", "X2E", "X1J", "X2J")


@dataclass(frozen=True)
class FieldGrid:
    """A complex vector field on the lattice in component-major layout."""

    spec: LatticeSpec
    values: np.ndarray
    label: str

    def __post_init__(self):
        if self.label not in FIELD_LABELS:
            raise ArgumentError(f"unknown field label {self.label!r}")
        if np.shape(self.values) != (self.spec.N,):
            raise ArgumentError(
                f"field must have length {self.spec.N}, got {np.shape(self.values)}"
            )

    def components(self) -> np.ndarray:
        return self.values.reshape(self.spec.d, self.spec.N1)

    def average(self) -> np.ndarray:
        return volume_average(self.spec, self.values)

    def magnitude(self) -> np.ndarray:
        """Per-site Euclidean norm of the complex vector."""
        return np.sqrt(np.sum(np.abs(self.components()) ** 2, axis=0))

    def to_csv(self, path, log10_magnitude: bool = True) -> None:
        """One row per site: coordinates, component re/im, ``|v|`` (and log10)."""
        coords = self.spec.site_coords()
        comps = self.components()
        mag = self.magnitude()
        axes = "xyz"[: self.spec.d]
        header = list(axes)
        for a in axes:
            header += [f"{self.label}_{a}_re", f"{self.label}_{a}_im"]
        header.append("abs")
        if log10_magnitude:
            header.append("log10_abs")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for x in range(self.spec.N1):
                row = [int(c) for c in coords[x]]
                for a in range(self.spec.d):
                    row += [repr(float(comps[a, x].real)), repr(float(comps[a, x].imag))]
                row.append(repr(float(mag[x])))
                if log10_magnitude:
                    row.append(repr(float(np.log10(mag[x]))) if mag[x] > 0 else "-inf")
                w.writerow(row)

    def save(self, path) -> None:
        """Binary grid: shape header (d, L) plus the complex component array."""
        np.savez(
            path,
            format_version=1,
            d=self.spec.d,
            L=self.spec.L,
            Lc=self.spec.Lc,
            label=self.label,
            values=self.components().reshape((self.spec.d,) + self.spec.shape),
        )

    @classmethod
    def load(cls, path) -> "FieldGrid":
        with np.load(path) as data:
            spec = LatticeSpec(int(data["d"]), int(data["L"]), int(data["Lc"]))
            return cls(spec, data["values"].reshape(-1), str(data["label"]))


def _require(eig: BlockEig, allowed):
    if eig.which not in allowed:
        names = ", ".join(p.value for p in allowed)
        raise ArgumentError(f"expected an eigendecomposition of {names}, got {eig.which}")


def _embed(ind: IndicatorMatrices, which: Pairing, reduced) -> np.ndarray:
    """Map reduced-block coordinates back to an N-vector: ``R^T [y; 0]`` or ``R^T [0; y]``."""
    d, n1 = ind.spec.d, ind.spec.N1
    padded = np.zeros((d, n1), dtype=np.result_type(reduced, float))
    if which.indicator == 1:
        padded[0] = reduced
    else:
        padded[1:] = np.asarray(reduced).reshape(d - 1, n1)
    return ind.rotate_back(padded.ravel())


def _resolvent_apply(eig: BlockEig, ind: IndicatorMatrices, z: complex, direction,
                     magnitude) -> np.ndarray:
    """``z (zI - X P X)^{-1} X V0`` through the eigenpairs of the reduced block."""
    check_admissible(z, eig.lambdas)
    d = ind.spec.d
    if np.isscalar(direction):
        vec = np.zeros(d)
        vec[int(direction) - 1] = 1.0
    else:
        vec = np.asarray(direction)
    frame = sum(vec[j] * frame_vector(ind, eig.which, j + 1) for j in range(d) if vec[j] != 0)
    coeff = (eig.W1.T @ frame) / (z - eig.lambdas)
    return _embed(ind, eig.which, z * magnitude * (eig.W1 @ coeff))


def resolve_X1E(eig: BlockEig, ind: IndicatorMatrices, cp: ContrastParams, k=1,
                E0_mag=1.0) -> FieldGrid:
    """``X1 E`` for the applied field ``E0 = E0_mag * e_k``.

    ``k`` may be a 1-based axis or a length-d direction vector.
    """
    _require(eig, (Pairing.X1_GAMMA,))
    return FieldGrid(ind.spec, _resolvent_apply(eig, ind, cp.s, k, E0_mag), "X1E")


def resolve_X2E(eig: BlockEig, ind: IndicatorMatrices, cp: ContrastParams, k=1,
                E0_mag=1.0) -> FieldGrid:
    """``X2 E = t (tI - X2 Gamma X2)^{-1} X2 E0``; cross-check path."""
    _require(eig, (Pairing.X2_GAMMA,))
    return FieldGrid(ind.spec, _resolvent_apply(eig, ind, cp.t, k, E0_mag), "X2E")


def assemble_E_J(X1E: FieldGrid, ind: IndicatorMatrices, P: ProjectionSet,
                 cp: ContrastParams, k=1, E0_mag=1.0) -> tuple[FieldGrid, FieldGrid]:
    """Complete ``E = E0 + Gamma X1 E / s`` and ``J = sigma1 X1 E + sigma2 X2 E``."""
    P.check_spec(ind.spec)
    if X1E.label != "X1E":
        raise ArgumentError(f"expected an X1E field, got {X1E.label}")
    spec = ind.spec
    E0 = constant_field(spec, k, E0_mag)
    E = E0 + (P.Gamma @ X1E.values) / cp.s
    X2E = E - X1E.values
    J = cp.sigma1 * X1E.values + cp.sigma2 * X2E
    return FieldGrid(spec, E, "E"), FieldGrid(spec, J, "J")


def assemble_from_X2E(X2E: FieldGrid, ind: IndicatorMatrices, P: ProjectionSet,
                      cp: ContrastParams, k=1, E0_mag=1.0) -> tuple[FieldGrid, FieldGrid]:
    """Same fields built from ``X2 E``: ``E = E0 + Gamma X2 E / t``."""
    spec = ind.spec
    E0 = constant_field(spec, k, E0_mag)
    E = E0 + (P.Gamma @ X2E.values) / cp.t
    X1E = E - X2E.values
    J = cp.sigma1 * X1E + cp.sigma2 * X2E.values
    return FieldGrid(spec, E, "E"), FieldGrid(spec, J, "J")


class CurrentFields(NamedTuple):
    X1J: FieldGrid
    X2J: FieldGrid
    J: FieldGrid
    E: FieldGrid


def resolve_current(eig: BlockEig, ind: IndicatorMatrices, P: ProjectionSet,
                    cp: ContrastParams, k=1, J0_mag=1.0) -> CurrentFields:
    """Current density for mean current ``J0 = J0_mag * e_k`` from a Upsilon pairing.

    With ``X2Upsilon`` the resolvent runs at ``s`` and ``J = J0 + Upsilon X2 J / s``;
    with ``X1Upsilon`` it runs at ``t`` and ``J = J0 + Upsilon X1 J / t``.
    """
    _require(eig, (Pairing.X1_UPSILON, Pairing.X2_UPSILON))
    P.check_spec(ind.spec)
    if cp.sigma1 == 0:
        raise ArgumentError("sigma1 must be nonzero to recover E from J")
    spec = ind.spec
    J0 = constant_field(spec, k, J0_mag)
    if eig.which is Pairing.X2_UPSILON:
        z = cp.s
        X2J = _resolvent_apply(eig, ind, z, k, J0_mag)
        J = J0 + (P.Upsilon @ X2J) / z
        X1J = J - X2J
    else:
        z = cp.t
        X1J = _resolvent_apply(eig, ind, z, k, J0_mag)
        J = J0 + (P.Upsilon @ X1J) / z
        X2J = J - X1J
    E = X1J / cp.sigma1 + X2J / cp.sigma2
    return CurrentFields(
        FieldGrid(spec, X1J, "X1J"),
        FieldGrid(spec, X2J, "X2J"),
        FieldGrid(spec, J, "J"),
        FieldGrid(spec, E, "E"),
    )


class HelmholtzParts(NamedTuple):
    grad_part: np.ndarray
    curl_part: np.ndarray
    const_part: np.ndarray
    phi: np.ndarray
    psi: np.ndarray


def helmholtz_decompose(v, P: ProjectionSet) -> HelmholtzParts:
    """Split ``v`` into ``Gamma v = grad phi``, ``Upsilon v = curl^T psi`` and ``Gamma0 v``.

    The potentials are the minimum-norm solutions from the stored SVD factors.
    """
    values = v.values if isinstance(v, FieldGrid) else np.asarray(v)
    if values.shape != (P.spec.N,):
        raise ArgumentError(f"expected a vector of length {P.spec.N}, got {values.shape}")
    return HelmholtzParts(
        grad_part=P.Gamma @ values,
        curl_part=P.Upsilon @ values,
        const_part=P.Gamma0 @ values,
        phi=P.grad_svd.pseudo_solve(values),
        psi=P.curl_svd.pseudo_solve(values),
    )
