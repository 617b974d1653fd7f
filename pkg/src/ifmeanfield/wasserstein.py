"""Wasserstein-1 distances: exact circle formula and exact discrete OT on D x T."""

from __future__ import annotations

import os

import numpy as np

from .errors import BudgetError, ContractError
from .torus import PERIOD, torus_dist

JOINT_ATOM_BUDGET = 4000


def _circle_parts(m):
    """Return ``("atoms", v, w)`` or ``("grid", values)`` for a measure on T."""
    if hasattr(m, "circle_repr"):
        return m.circle_repr()
    if isinstance(m, tuple) and len(m) == 2:
        v, w = (np.asarray(a, dtype=float) for a in m)
        return ("atoms", np.mod(v, PERIOD), w)
    raise TypeError(f"cannot interpret {type(m).__name__} as a measure on the torus")


def _cdf_ends(part, bp):
    """CDF at the left and right end of each segment [bp_j, bp_{j+1}]."""
    if part[0] == "atoms":
        _, v, w = part
        order = np.argsort(v, kind="stable")
        vs, cw = v[order], np.concatenate([[0.0], np.cumsum(w[order])])
        left = cw[np.searchsorted(vs, bp[:-1], side="right")]
        return left, left
    values = part[1]
    k = len(values)
    edges = np.linspace(0.0, PERIOD, k + 1)
    cum = np.concatenate([[0.0], np.cumsum(values * (PERIOD / k))])
    return np.interp(bp[:-1], edges, cum), np.interp(bp[1:], edges, cum)


def _mass(part):
    if part[0] == "atoms":
        return float(np.sum(part[2]))
    return float(np.sum(part[1]) * PERIOD / len(part[1]))


def _breakpoints(part):
    if part[0] == "atoms":
        return part[1]
    return np.linspace(0.0, PERIOD, len(part[1]) + 1)


def _segment_cost(lo, hi, length, s):
    flat = hi - lo <= 1e-15
    span = np.where(flat, 1.0, hi - lo)
    mean = 0.5 * (lo + hi)
    inside = (s > lo) & (s < hi)
    c_in = length / span * ((s - lo) ** 2 + (hi - s) ** 2) / 2.0
    c_out = length * np.abs(mean - s)
    return np.where(flat, length * np.abs(lo - s), np.where(inside, c_in, c_out))


def _weighted_median(lo, hi, length):
    """Median of the mixture of uniform laws on [lo, hi] with masses ``length``."""
    flat = hi - lo <= 1e-15
    total = float(length.sum())
    half = 0.5 * total
    pos = np.concatenate([lo[~flat], hi[~flat], lo[flat]])
    d = length[~flat] / (hi[~flat] - lo[~flat])
    dslope = np.concatenate([d, -d, np.zeros(int(flat.sum()))])
    jump = np.concatenate([np.zeros(2 * int((~flat).sum())), length[flat]])
    order = np.lexsort((-dslope, pos))
    pos, dslope, jump = pos[order], dslope[order], jump[order]
    slope = np.cumsum(dslope)
    gaps = np.diff(pos)
    after = np.cumsum(jump) + np.concatenate([[0.0], np.cumsum(slope[:-1] * gaps)])
    k = int(np.searchsorted(after, half, side="left"))
    k = min(k, len(pos) - 1)
    before = after[k] - jump[k]
    if k > 0 and before > half and slope[k - 1] > 0:
        return pos[k - 1] + (half - after[k - 1]) / slope[k - 1]
    return pos[k]


def wasserstein1_v(mu, nu) -> float:
    """Exact W1 between two probability measures on the torus.

    Inputs are atom measures or uniform-grid densities. Uses
    ``W1 = min_s int_0^2 |F - G - s| dv`` with the minimizer a median of
    ``F - G`` under Lebesgue measure.
    """
    a, b = _circle_parts(mu), _circle_parts(nu)
    for p in (a, b):
        if abs(_mass(p) - 1.0) > 1e-8:
            raise ContractError("wasserstein1_v needs probability measures")
    bp = np.unique(np.concatenate([[0.0, PERIOD], _breakpoints(a), _breakpoints(b)]))
    length = np.diff(bp)
    fa0, fa1 = _cdf_ends(a, bp)
    fb0, fb1 = _cdf_ends(b, bp)
    h0, h1 = fa0 - fb0, fa1 - fb1
    lo, hi = np.minimum(h0, h1), np.maximum(h0, h1)
    keep = length > 0
    lo, hi, length = lo[keep], hi[keep], length[keep]
    s = _weighted_median(lo, hi, length)
    return float(np.sum(_segment_cost(lo, hi, length, s)))


def joint_cost_matrix(xa, va, xb, vb) -> np.ndarray:
    """Ground cost ``|x - y| + d_T(v, w)`` (l1 product of Euclidean and torus metrics)."""
    dx = np.sqrt(((xa[:, None, :] - xb[None, :, :]) ** 2).sum(axis=-1))
    return dx + torus_dist(va[:, None], vb[None, :])


def _ot():
    for backend in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{backend}", "1")
    import ot

    return ot


def wasserstein1_joint(mu, nu) -> float:
    """Exact discrete W1 on D x T via network simplex (POT ``emd``)."""
    if len(mu.weights) + len(nu.weights) > JOINT_ATOM_BUDGET:
        raise BudgetError(
            f"joint W1 limited to {JOINT_ATOM_BUDGET} atoms in total; use wasserstein1_v for marginals"
        )
    for m in (mu, nu):
        if abs(m.weights.sum() - 1.0) > 1e-8:
            raise ContractError("wasserstein1_joint needs probability measures")
    cost = joint_cost_matrix(mu.positions, mu.v, nu.positions, nu.v)
    a = mu.weights / mu.weights.sum()
    b = nu.weights / nu.weights.sum()
    plan = _ot().emd(a, b, cost, numItermax=10_000_000)
    return float(np.sum(plan * cost))
