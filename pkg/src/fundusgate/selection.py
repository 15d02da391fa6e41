"""Backward elimination of subimages with a leave-one-out Naive Bayes wrapper."""

from __future__ import annotations

import logging

import numpy as np

from .bayes import _LOG_2PI, VARIANCE_FLOOR, TrainingError, TrainingSet
from .features import FeatureKind, FeatureSpec

log = logging.getLogger(__name__)


def _loo_tile_loglik(data: TrainingSet, spec: FeatureSpec, n_tiles: int):
    """Leave-one-out log-prior (n, 2) and per-tile log-likelihood (n, 2, n_tiles).

    Row i is scored against class statistics fitted without row i, using the
    same estimators as :func:`fundusgate.bayes.train`. Because the model is
    naive, the score of any tile subset is the log-prior plus a sum over
    tiles, so the whole elimination runs off this one table.
    """
    X = data.X
    y = data.y
    n, d = X.shape
    cont = np.array([k is FeatureKind.CONTINUOUS for k in data.kinds])
    log_prior = np.empty((n, 2))
    feat = np.zeros((n, 2, d))
    for i in range(n):
        keep = np.ones(n, dtype=bool)
        keep[i] = False
        for c in range(2):
            rows = X[keep & (y == c)]
            nc = rows.shape[0]
            if nc == 0:
                log_prior[i, c] = -np.inf
                continue
            log_prior[i, c] = np.log(nc / (n - 1))
            xc = rows[:, cont]
            mean = xc.mean(axis=0)
            var = np.maximum(((xc - mean) ** 2).mean(axis=0), VARIANCE_FLOOR)
            feat[i, c, cont] = -0.5 * (_LOG_2PI + np.log(var)) - (X[i, cont] - mean) ** 2 / (2 * var)
            p = ((rows[:, ~cont] >= 0.5).sum(axis=0) + 1.0) / (nc + 2.0)
            feat[i, c, ~cont] = np.where(X[i, ~cont] >= 0.5, np.log(p), np.log1p(-p))
    tiles = feat.reshape(n, 2, n_tiles, spec.per_tile).sum(axis=3)
    return log_prior, tiles


def backward_elimination(data: TrainingSet, spec: FeatureSpec, keep: int) -> tuple[int, ...]:
    """Greedily drop whole subimages until ``keep`` remain.

    Each round removes the tile whose removal gives the best leave-one-out
    training accuracy; ties remove the lowest tile index. Returns the
    surviving tile indices in ascending order.
    """
    d = data.X.shape[1]
    if d % spec.per_tile:
        raise ValueError(f"{d} features do not split into tiles of {spec.per_tile}")
    n_tiles = d // spec.per_tile
    if not 1 <= keep <= n_tiles:
        raise ValueError(f"keep must be in [1, {n_tiles}], got {keep}")
    counts = np.bincount(data.y, minlength=2)
    if (counts == 0).any():
        raise TrainingError("backward elimination needs both classes in the training set")

    y = data.y
    log_prior, tiles = _loo_tile_loglik(data, spec, n_tiles)
    remaining = np.arange(n_tiles)
    while len(remaining) > keep:
        total = log_prior + tiles[:, :, remaining].sum(axis=2)
        trial = total[:, :, None] - tiles[:, :, remaining]
        # ties in the class score go to class 0 (abnormal), as in predict()
        pred = np.where(trial[:, 0, :] >= trial[:, 1, :], 0, 1)
        correct = (pred == y[:, None]).sum(axis=0)
        drop = int(np.argmax(correct))  # first maximum = lowest tile index
        log.debug("dropping tile %d (loo correct %d/%d)", remaining[drop], correct[drop], len(y))
        remaining = np.delete(remaining, drop)
    return tuple(int(t) for t in remaining)
