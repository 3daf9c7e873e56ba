"""Experiment pipeline: ensemble spectra, effective tensors, fields and oracle checks.

Every artifact is written by the parent process after an ordered reduction,
so file contents depend only on the configuration and never on ``workers``.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import _parallel, __version__
from ..errors import NumericalError
from ..fields import FieldGrid, assemble_E_J, resolve_X1E
from ..lattice import constant_field
from ..oracle import solve_direct
from ..polycrystal import realize_indicators, sample_orientations
from ..projection import ProjectionSet, build_projections
from ..spectral import (
    Pairing,
    SpectralFunction,
    bin_weights,
    eig_block,
    fold_ordered,
    measure_atoms,
    reduced_block,
)
from ..transport import effective_conductivity, effective_resistivity
from .config import ExperimentConfig

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    status: int
    out_dir: Path
    artifacts: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _measures(eig, ind, d):
    return {(j, k): measure_atoms(eig, ind, j, k) for j in range(1, d + 1) for k in range(j, d + 1)}


def _sample_tensors(P, ind, cp, d, need_rho):
    """Per-realization ``sigma*`` (and ``rho*``) plus the X1Gamma eigendecomposition."""
    if cp.homogeneous:
        sigma = cp.sigma2 * np.eye(d, dtype=complex)
        return None, sigma, (np.eye(d, dtype=complex) / cp.sigma2 if need_rho else None)
    eig = eig_block(reduced_block(ind, P, Pairing.X1_GAMMA), Pairing.X1_GAMMA)
    sigma = effective_conductivity(_measures(eig, ind, d), cp).tensor
    rho = None
    if need_rho:
        eu = eig_block(reduced_block(ind, P, Pairing.X2_UPSILON), Pairing.X2_UPSILON)
        rho = effective_resistivity(_measures(eu, ind, d), cp).tensor
    return eig, sigma, rho


def _ensemble_sample(shared, sample_id):
    P, cfg = shared
    spec, cp = cfg.lattice, cfg.contrast
    ind = realize_indicators(sample_orientations(spec, cfg.seed, sample_id))
    need_rho = "effective_tensor" in cfg.outputs
    eig, sigma, rho = _sample_tensors(P, ind, cp, spec.d, need_rho)
    which = cfg.which
    if eig is None or which is not Pairing.X1_GAMMA:
        eig = eig_block(reduced_block(ind, P, which), which)
    m = measure_atoms(eig, ind, *cfg.measure)
    return bin_weights(m.lambdas, m.weights, cfg.bins), m.mass, sigma, rho


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _complex_record(a) -> dict:
    a = np.asarray(a)
    return {"real": a.real.tolist(), "imag": a.imag.tolist()}


def sample_seeds(cfg: ExperimentConfig) -> list[dict]:
    """Stream identity of every realization: Philox keyed by ``(seed, sample_id)``."""
    return [
        {"sample_id": i, "entropy": int(cfg.seed), "spawn_key": [i], "bit_generator": "Philox"}
        for i in range(cfg.samples)
    ]


def _ensemble(cfg, P):
    results = _parallel.map_samples(_ensemble_sample, range(cfg.samples), (P, cfg), cfg.workers)
    good = [(i, r) for i, r in enumerate(results) if not isinstance(r, _parallel.Quarantined)]
    bad = [r for r in results if isinstance(r, _parallel.Quarantined)]
    if not good:
        raise NumericalError("every sample was quarantined", quarantined=len(bad))
    return good, bad


def _fields_sample0(cfg, P, out: Path) -> dict:
    spec, cp = cfg.lattice, cfg.contrast
    orient = sample_orientations(spec, cfg.seed, 0)
    ind = realize_indicators(orient)
    k = cfg.e0_axis
    if cp.homogeneous:
        E0 = constant_field(spec, k)
        E, J = FieldGrid(spec, E0, "E"), FieldGrid(spec, cp.sigma2 * E0, "J")
    else:
        eig = eig_block(reduced_block(ind, P, Pairing.X1_GAMMA), Pairing.X1_GAMMA)
        E, J = assemble_E_J(resolve_X1E(eig, ind, cp, k), ind, P, cp, k)
    paths = {
        "fields_J_csv": out / "fields_J.csv",
        "fields_E_csv": out / "fields_E.csv",
        "fields_J_npz": out / "fields_J.npz",
        "fields_E_npz": out / "fields_E.npz",
        "orientation_json": out / "orientation_sample0.json",
    }
    J.to_csv(paths["fields_J_csv"])
    E.to_csv(paths["fields_E_csv"])
    J.save(paths["fields_J_npz"])
    E.save(paths["fields_E_npz"])
    paths["orientation_json"].write_text(orient.to_json())
    return paths


def _measure_atoms_sample0(cfg, P, out: Path) -> dict:
    spec = cfg.lattice
    ind = realize_indicators(sample_orientations(spec, cfg.seed, 0))
    eig = eig_block(reduced_block(ind, P, cfg.which), cfg.which)
    m = measure_atoms(eig, ind, *cfg.measure)
    paths = {"measure_atoms_csv": out / "measure_atoms.csv", "measure_atoms_json": out / "measure_atoms.json"}
    m.to_csv(paths["measure_atoms_csv"])
    paths["measure_atoms_json"].write_text(m.to_json())
    return paths


def run(cfg: ExperimentConfig, projections: ProjectionSet | None = None) -> RunResult:
    """Execute ``cfg`` and write its artifacts to ``cfg.out``.

    Returns status 0 on success and 3 when some samples were quarantined.
    Re-running the same configuration rewrites byte-identical files.
    """
    spec, cp = cfg.lattice, cfg.contrast
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    P = projections if projections is not None else build_projections(spec)
    P.check_spec(spec)
    artifacts: dict = {}
    summary: dict = {}
    bad: list = []

    if {"spectral_function", "effective_tensor"} & set(cfg.outputs):
        good, bad = _ensemble(cfg, P)
        n = len(good)
        if "spectral_function" in cfg.outputs:
            values = fold_ordered(r[0] for _, r in good) / n
            mass = float(sum(r[1] for _, r in good) / n)
            sf = SpectralFunction(
                np.linspace(0.0, 1.0, cfg.bins + 1), values, n, mass, *cfg.measure, cfg.which,
                tuple(bad), {"lattice": spec.to_dict(), "seed": cfg.seed, "config_hash": cfg.content_hash()},
            )
            artifacts["spectral_function_csv"] = out / "spectral_function.csv"
            artifacts["spectral_function_json"] = out / "spectral_function.json"
            sf.to_csv(artifacts["spectral_function_csv"])
            artifacts["spectral_function_json"].write_text(sf.to_json())
            summary["mean_mass"] = mass
        if "effective_tensor" in cfg.outputs:
            sigma = fold_ordered(r[2] for _, r in good) / n
            rho = fold_ordered(r[3] for _, r in good) / n
            rec = {
                "schema": 1,
                "config_hash": cfg.content_hash(),
                "samples": n,
                "contrast": cp.to_dict(),
                "sigma_star": _complex_record(sigma),
                "rho_star": _complex_record(rho),
                "sqrt_sigma1_sigma2": _complex_record(np.sqrt(cp.sigma1 * cp.sigma2)),
            }
            artifacts["effective_tensor_json"] = out / "effective_tensor.json"
            artifacts["effective_tensor_json"].write_text(json.dumps(rec, indent=1))
            artifacts["effective_samples_csv"] = out / "effective_samples.csv"
            d = spec.d
            header = ["sample_id"] + [
                f"sigma_{j + 1}{k + 1}_{part}" for j in range(d) for k in range(d) for part in ("re", "im")
            ]
            rows = []
            for i, r in good:
                row = [i]
                for v in r[2].ravel():
                    row += [repr(float(v.real)), repr(float(v.imag))]
                rows.append(row)
            _write_csv(artifacts["effective_samples_csv"], header, rows)
            summary["sigma_star"] = sigma
            summary["rho_star"] = rho

    if "measure_atoms" in cfg.outputs:
        artifacts.update(_measure_atoms_sample0(cfg, P, out))
    if "fields" in cfg.outputs:
        artifacts.update(_fields_sample0(cfg, P, out))
    if "oracle_compare" in cfg.outputs:
        report = compare_against_oracle(cfg, P)
        artifacts["oracle_compare_json"] = out / "oracle_compare.json"
        artifacts["oracle_compare_json"].write_text(json.dumps(report, indent=1))
        summary["oracle"] = {k: report[k] for k in ("sigma_star", "E", "J")}

    manifest = {
        "schema": 1,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.content_hash(),
        "lattice": spec.to_dict(),
        "contrast": cp.to_dict(),
        "sample_seeds": sample_seeds(cfg),
        "quarantine": {
            "count": len(bad),
            "samples": [{"sample_id": q.sample_id, "reason": q.reason} for q in bad],
        },
        "artifacts": sorted(p.name for p in artifacts.values()),
    }
    # neither the worker count nor the output location affects any result
    manifest["config"].pop("workers")
    manifest["config"].pop("out")
    artifacts["manifest_json"] = out / "manifest.json"
    artifacts["manifest_json"].write_text(json.dumps(manifest, indent=1))
    status = 3 if bad else 0
    if bad:
        logger.warning("%d of %d samples quarantined", len(bad), cfg.samples)
    return RunResult(status, out, artifacts, summary)


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = np.max(np.abs(b))
    diff = np.max(np.abs(a - b))
    return float(diff / scale) if scale > 0 else float(diff)


def _compare_sample(shared, sample_id):
    P, cfg = shared
    spec, cp = cfg.lattice, cfg.contrast
    d, k = spec.d, cfg.e0_axis
    ind = realize_indicators(sample_orientations(spec, cfg.seed, sample_id))
    eig, sigma, _ = _sample_tensors(P, ind, cp, d, need_rho=False)
    direct = [solve_direct(ind, cp, c) for c in range(1, d + 1)]
    sigma_direct = np.column_stack([sol.sigma_star_col for sol in direct])
    if eig is None:
        E0 = constant_field(spec, k)
        E, J = E0, cp.sigma2 * E0
    else:
        Eg, Jg = assemble_E_J(resolve_X1E(eig, ind, cp, k), ind, P, cp, k)
        E, J = Eg.values, Jg.values
    ref = direct[k - 1]
    return {
        "sample_id": int(sample_id),
        "sigma_star": _rel(sigma, sigma_direct),
        "sigma11": _rel(sigma[0, 0], sigma_direct[0, 0]),
        "E": _rel(E, ref.E.values),
        "J": _rel(J, ref.J.values),
        "residual": ref.residual,
    }


def compare_against_oracle(cfg: ExperimentConfig, projections: ProjectionSet | None = None) -> dict:
    """Spectral path versus direct solve on every sample of ``cfg``.

    Relative errors use the max-norm of the difference over the max-norm of
    the direct result, for the full ``sigma*`` tensor and the ``E``, ``J``
    fields driven along ``e0_axis``.
    """
    spec = cfg.lattice
    P = projections if projections is not None else build_projections(spec)
    rows = _parallel.map_samples(_compare_sample, range(cfg.samples), (P, cfg), cfg.workers)
    rows_ok = [r for r in rows if not isinstance(r, _parallel.Quarantined)]
    report = {
        "schema": 1,
        "config_hash": cfg.content_hash(),
        "samples": len(rows_ok),
        "quarantined": [q.sample_id for q in rows if isinstance(q, _parallel.Quarantined)],
        "per_sample": rows_ok,
    }
    for key in ("sigma_star", "sigma11", "E", "J"):
        vals = np.array([r[key] for r in rows_ok]) if rows_ok else np.array([np.nan])
        report[key] = {"max": float(vals.max()), "mean": float(vals.mean())}
    return report
