"""Stieltjes transforms of spectral measures and the effective tensors they give.

The four pairings map to tensors as

* ``X1Gamma``:   sigma*_jk = sigma2 (delta_jk - F_jk(s))
* ``X2Gamma``:   sigma*_jk = sigma1 (delta_jk - G_jk(t))
* ``X2Upsilon``: rho*_jk   = (delta_jk - E_jk(s)) / sigma1
* ``X1Upsilon``: rho*_jk   = (delta_jk - H_jk(t)) / sigma2

with ``s = 1 / (1 - sigma1/sigma2)`` and ``t = 1 - s``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, PoleProximityError
from .polycrystal import ContrastParams
from .spectral import Pairing, SpectralMeasure

POLE_MARGIN = 1e-12

_CONDUCTIVITY_PAIRINGS = (Pairing.X1_GAMMA, Pairing.X2_GAMMA)
_RESISTIVITY_PAIRINGS = (Pairing.X2_UPSILON, Pairing.X1_UPSILON)


def check_admissible(z: complex, lambdas=None) -> None:
    """Reject evaluation points within ``POLE_MARGIN`` of the interval [0, 1]."""
    z = complex(z)
    nearest_real = min(max(z.real, 0.0), 1.0)
    if abs(z - nearest_real) > POLE_MARGIN:
        return
    if lambdas is not None and np.size(lambdas):
        lam = np.asarray(lambdas)
        nearest = float(lam[np.argmin(np.abs(lam - z.real))])
    else:
        nearest = nearest_real
    raise PoleProximityError(
        f"evaluation point {z} lies on the spectral interval; nearest atom {nearest}",
        z=z,
        nearest=nearest,
    )


def stieltjes_eval(measure: SpectralMeasure, z: complex) -> complex:
    """``sum_i w_i / (z - lambda_i)``."""
    check_admissible(z, measure.lambdas)
    return complex(np.sum(measure.weights / (complex(z) - measure.lambdas)))


@dataclass(frozen=True)
class EffectiveTensor:
    tensor: np.ndarray
    kind: str
    contrast: ContrastParams
    provenance: int | str = "realization"
    stieltjes: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def d(self) -> int:
        return self.tensor.shape[0]

    def to_record(self) -> dict:
        rec = {
            "kind": self.kind,
            "contrast": self.contrast.to_dict(),
            "provenance": self.provenance,
            "real": self.tensor.real.tolist(),
            "imag": self.tensor.imag.tolist(),
        }
        rec.update(self.metadata)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=1)


def _gather(measures, pairings):
    """Index measures by ``(j, k)``, filling ``(k, j)`` from its mirror."""
    if isinstance(measures, dict):
        items = list(measures.values())
    else:
        items = list(measures)
    if not items:
        raise ArgumentError("no measures given")
    which = items[0].which
    if which not in pairings:
        raise ArgumentError(f"pairing {which.value} cannot produce this tensor")
    if any(m.which != which for m in items):
        raise ArgumentError("measures mix different pairings")
    table = {(m.j, m.k): m for m in items}
    d = max(max(j, k) for j, k in table)
    out = {}
    for j in range(1, d + 1):
        for k in range(1, d + 1):
            m = table.get((j, k)) or table.get((k, j))
            if m is None:
                raise ArgumentError(f"missing measure for (j, k) = ({j}, {k})")
            out[j, k] = m
    return which, d, out


def _assemble(table, d, z):
    F = np.empty((d, d), dtype=complex)
    for (j, k), m in table.items():
        F[j - 1, k - 1] = stieltjes_eval(m, z)
    return F


def _provenance(table):
    provs = {m.provenance for m in table.values()}
    return provs.pop() if len(provs) == 1 else "mixed"


def effective_conductivity(measures, cp: ContrastParams, d: int | None = None) -> EffectiveTensor:
    """Effective conductivity from ``X1Gamma`` (via s) or ``X2Gamma`` (via t) measures."""
    if cp.homogeneous:
        if d is None:
            _, d, _ = _gather(measures, _CONDUCTIVITY_PAIRINGS)
        return EffectiveTensor(cp.sigma2 * np.eye(d, dtype=complex), "conductivity", cp,
                               "homogeneous", np.zeros((d, d), dtype=complex))
    which, d, table = _gather(measures, _CONDUCTIVITY_PAIRINGS)
    if which is Pairing.X1_GAMMA:
        F = _assemble(table, d, cp.s)
        sigma = cp.sigma2 * (np.eye(d) - F)
    else:
        F = _assemble(table, d, cp.t)
        sigma = cp.sigma1 * (np.eye(d) - F)
    return EffectiveTensor(sigma, "conductivity", cp, _provenance(table), F,
                           {"pairing": which.value})


def effective_resistivity(measures, cp: ContrastParams, d: int | None = None) -> EffectiveTensor:
    """Effective resistivity from ``X2Upsilon`` (via s) or ``X1Upsilon`` (via t) measures."""
    if cp.sigma1 == 0:
        raise ArgumentError("sigma1 must be nonzero for the resistivity")
    if cp.homogeneous:
        if d is None:
            _, d, _ = _gather(measures, _RESISTIVITY_PAIRINGS)
        return EffectiveTensor(np.eye(d, dtype=complex) / cp.sigma2, "resistivity", cp,
                               "homogeneous", np.zeros((d, d), dtype=complex))
    which, d, table = _gather(measures, _RESISTIVITY_PAIRINGS)
    if which is Pairing.X2_UPSILON:
        F = _assemble(table, d, cp.s)
        rho = (np.eye(d) - F) / cp.sigma1
    else:
        F = _assemble(table, d, cp.t)
        rho = (np.eye(d) - F) / cp.sigma2
    return EffectiveTensor(rho, "resistivity", cp, _provenance(table), F,
                           {"pairing": which.value})


def ensemble_tensor(tensors) -> EffectiveTensor:
    """Arithmetic mean of per-realization tensors, folded in the given order."""
    tensors = list(tensors)
    if not tensors:
        raise ArgumentError("no tensors to average")
    total = tensors[0].tensor.copy()
    for t in tensors[1:]:
        total = total + t.tensor
    first = tensors[0]
    return EffectiveTensor(total / len(tensors), first.kind, first.contrast, "ensemble",
                           metadata={"samples": len(tensors)})
