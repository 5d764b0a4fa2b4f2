"""Accuracy metrics for outputs, input gradients and the predator-prey interaction terms."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .problems.lotka_volterra import PARAMS as LV_PARAMS


def rmse(pred, truth) -> float:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def relative_l2(pred, truth) -> float:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    denom = np.sum(t * t)
    if denom == 0:
        raise ValueError("relative L2 is undefined for an all-zero truth")
    return float(np.sqrt(np.sum((t - p) ** 2) / denom))


def rmse_partial(jacobian, oracle) -> np.ndarray:
    """Per-(input, output) RMSE between predicted and true input gradients.

    Both arguments have shape ``(n, d_o, d)``; the result has shape
    ``(d, d_o)`` with rows in input-dimension order.
    """
    if oracle is None:
        raise ValueError("oracle gradients are required")
    J = np.asarray(jacobian, dtype=np.float64)
    G = np.asarray(oracle, dtype=np.float64)
    if J.shape != G.shape:
        raise ValueError(f"shape mismatch {J.shape} vs {G.shape}")
    return np.sqrt(np.mean((J - G) ** 2, axis=0)).T


def uptake_rmse(pred_states, pred_time_grad, true_uptake, params=LV_PARAMS) -> Tuple[float, float]:
    """RMSE of reconstructed interaction terms ``-beta x y`` and ``delta x y``.

    The predicted terms subtract the known linear parts from the predicted
    time derivatives: ``x_t - alpha x`` and ``y_t + gamma y``, using the
    model's own population estimates.
    """
    a, _, g, _ = params
    S = np.asarray(pred_states, dtype=np.float64).reshape(-1, 2)
    D = np.asarray(pred_time_grad, dtype=np.float64).reshape(-1, 2)
    T = np.asarray(true_uptake, dtype=np.float64).reshape(-1, 2)
    prey = D[:, 0] - a * S[:, 0]
    pred = D[:, 1] + g * S[:, 1]
    return rmse(prey, T[:, 0]), rmse(pred, T[:, 1])


def gradient_total_variation(grad) -> float:
    """Sum of absolute increments of a gradient sampled on an ordered 1-D grid."""
    g = np.asarray(grad, dtype=np.float64).ravel()
    return float(np.sum(np.abs(np.diff(g))))


def oscillation_count(values, rel_tol: float = 1e-6) -> int:
    """Sign changes of the second difference of ``values`` on an ordered grid.

    Second differences smaller than ``rel_tol`` times the largest one, or
    within rounding noise of the values themselves, count as zero, so a
    straight line gives 0.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    d2 = np.diff(v, n=2)
    if d2.size == 0:
        return 0
    floor = max(rel_tol * np.max(np.abs(d2)), 64 * np.finfo(np.float64).eps * np.max(np.abs(v)))
    signs = np.sign(np.where(np.abs(d2) > floor, d2, 0.0))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


METRIC_COLUMNS = ("experiment", "method", "seed", "rmse_u", "relative_l2", "rmse_partial", "uptake_prey", "uptake_predator")


@dataclass
class MetricReport:
    rmse_u: float
    rmse_partial: Optional[np.ndarray] = None
    relative_l2: Optional[float] = None
    uptake_rmse: Optional[Tuple[float, float]] = None

    def row(self, experiment: str, method: str, seed) -> list:
        part = "" if self.rmse_partial is None else ";".join(repr(float(v)) for v in np.ravel(self.rmse_partial))
        up = ("", "") if self.uptake_rmse is None else tuple(repr(float(v)) for v in self.uptake_rmse)
        rel = "" if self.relative_l2 is None else repr(float(self.relative_l2))
        return [experiment, method, str(seed), repr(float(self.rmse_u)), rel, part, *up]


def evaluate(model, X_test, Y_test, G_test=None, lv_uptake=None) -> MetricReport:
    """Score a fitted estimator exposing ``predict`` and ``predict_gradient``."""
    Y_test = np.asarray(Y_test, dtype=np.float64).reshape(len(X_test), -1)
    P = np.asarray(model.predict(X_test)).reshape(Y_test.shape)
    rel = relative_l2(P, Y_test) if np.any(Y_test) else None
    part = up = None
    if G_test is not None or lv_uptake is not None:
        J = model.predict_gradient(X_test)
        if G_test is not None:
            part = rmse_partial(J, G_test)
        if lv_uptake is not None:
            up = uptake_rmse(P, J[:, :, 0], lv_uptake)
    return MetricReport(rmse(P, Y_test), part, rel, up)


def write_metrics_csv(path, rows: Sequence[list], append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not append or fh.tell() == 0:
            w.writerow(METRIC_COLUMNS)
        w.writerows(rows)
