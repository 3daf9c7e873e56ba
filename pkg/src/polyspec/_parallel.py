"""Ordered per-sample map with optional worker processes.

Each sample runs with BLAS pinned to one thread, so a sample's floating
point result does not depend on how many workers share the machine.
Results come back in sample-id order; quarantined samples are returned as
:class:`Quarantined` markers instead of aborting the ensemble.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import NumericalError

logger = logging.getLogger(__name__)

_SHARED = None


@dataclass(frozen=True)
class Quarantined:
    sample_id: int
    reason: str


def _install(shared):
    global _SHARED
    _SHARED = shared


def _guarded(func, shared, sample_id):
    try:
        with threadpool_limits(limits=1):
            return func(shared, sample_id)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.warning("sample %d quarantined: %s", sample_id, exc)
        return Quarantined(int(sample_id), f"{type(exc).__name__}: {exc}")


def _call(args):
    func, sample_id = args
    return _guarded(func, _SHARED, sample_id)


def map_samples(func, sample_ids, shared, workers: int = 1) -> list:
    """``[func(shared, i) for i in sample_ids]``, possibly across processes.

    ``func`` must be a module-level function so that it pickles.
    """
    sample_ids = [int(i) for i in sample_ids]
    if workers <= 1 or len(sample_ids) <= 1:
        return [_guarded(func, shared, i) for i in sample_ids]
    chunk = max(1, len(sample_ids) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_install, initargs=(shared,)) as ex:
        return list(ex.map(_call, [(func, i) for i in sample_ids], chunksize=chunk))
