"""Direct finite-difference solve of the periodic conduction problem.

Solves ``grad^T sigma grad phi = -grad^T sigma E0`` for the potential with
the zero-mean gauge enforced by a bordered system

    [[A, 1], [1^T, 0]] [phi; c] = [b; 0]

so the constant kernel of ``A`` is removed without a pseudoinverse. The
system is complex symmetric, not Hermitian, and is factored with a general
sparse LU.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, SingularSystemError
from .fields import FieldGrid
from .lattice import LatticeSpec, build_gradient, constant_field, volume_average
from .polycrystal import ContrastParams, IndicatorMatrices, conductivity_matrix

RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class DirectSolution:
    phi: np.ndarray
    E: FieldGrid
    J: FieldGrid
    sigma_star_col: np.ndarray
    residual: float


def solve_direct(ind: IndicatorMatrices, cp: ContrastParams, k=1,
                 spec: LatticeSpec | None = None, E0_mag=1.0) -> DirectSolution:
    """Potential, fields and the ``k``-th column of ``sigma*`` for ``E0 = E0_mag e_k``.

    Raises
    ------
    SingularSystemError
        If the factorization fails or the residual exceeds ``1e-10`` relative,
        which signals a kernel larger than the constants.
    """
    spec = ind.spec if spec is None else spec
    if (spec.d, spec.L) != (ind.spec.d, ind.spec.L):
        raise ArgumentError("indicator matrices were built for a different lattice")
    if cp.sigma1 == 0:
        raise ArgumentError("sigma1 must be nonzero")
    if E0_mag == 0:
        raise ArgumentError("E0_mag must be nonzero")
    G = build_gradient(spec).matrix.astype(complex)
    S = conductivity_matrix(ind, cp).astype(complex)
    E0 = constant_field(spec, k, E0_mag)
    A = (G.T @ S @ G).tocsc()
    b = -(G.T @ (S @ E0))
    n1 = spec.N1
    ones = sp.csc_matrix(np.ones((n1, 1), dtype=complex))
    bordered = sp.bmat([[A, ones], [ones.T, None]], format="csc")
    rhs = np.concatenate([b, [0.0]])
    try:
        lu = spla.splu(bordered)
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(
            f"bordered conduction system is singular: {exc}",
            sigma1=cp.sigma1, sigma2=cp.sigma2, N1=n1,
        ) from exc
    phi = sol[:n1]
    E = E0 + G @ phi
    J = S @ E
    scale = np.linalg.norm(b)
    residual = float(np.linalg.norm(G.T @ J) / scale) if scale > 0 else float(np.linalg.norm(G.T @ J))
    if not np.all(np.isfinite(sol)) or residual > RESIDUAL_TOLERANCE:
        raise SingularSystemError(
            f"direct solve residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:g}",
            residual=residual, multiplier=complex(sol[n1]),
        )
    col = volume_average(spec, J) / E0_mag
    return DirectSolution(phi, FieldGrid(spec, E, "E"), FieldGrid(spec, J, "J"), col, residual)
