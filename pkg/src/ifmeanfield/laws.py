"""Initial laws: neuron positions in a box domain D and initial voltage densities.

Samplers consume uniform variates so that each particle's draw depends only on
its own random stream (see :mod:`ifmeanfield.streams`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigError

N_POSITION_UNIFORMS = 4
N_VOLTAGE_UNIFORMS = 1

POSITION_KINDS = ("uniform_box", "clipped_gaussian", "two_cluster", "atoms")
VOLTAGE_KINDS = ("uniform", "truncated_gaussian", "piecewise_constant")


def _vec3(x, name):
    a = np.asarray(x, dtype=float)
    if a.shape != (3,):
        raise ConfigError(f"{name} must have 3 components")
    return tuple(float(c) for c in a)


@dataclass(frozen=True)
class PositionLaw:
    """Law of neuron positions.

    ``kind`` is one of ``uniform_box`` (``lo``, ``hi``), ``clipped_gaussian``
    (``mean``, ``std``), ``two_cluster`` (``centers``, ``std``, ``weight`` of the
    first cluster) or ``atoms`` (``atoms``, optional ``weights``; with
    ``assign="enumerate"`` particle ``i`` sits on atom ``i mod A`` instead of
    an i.i.d. draw). Gaussian laws are clipped into the domain box.
    """

    kind: str = "uniform_box"
    domain_lo: tuple = (0.0, 0.0, 0.0)
    domain_hi: tuple = (1.0, 1.0, 1.0)
    lo: tuple | None = None
    hi: tuple | None = None
    mean: tuple | None = None
    std: float = 0.1
    centers: tuple | None = None
    weight: float = 0.5
    atoms: tuple | None = None
    weights: tuple | None = None
    assign: str = "iid"

    def __post_init__(self):
        if self.kind not in POSITION_KINDS:
            raise ConfigError(f"unknown position law {self.kind!r}")
        dlo, dhi = np.array(self.domain_lo, float), np.array(self.domain_hi, float)
        if dlo.shape != (3,) or dhi.shape != (3,) or np.any(dhi <= dlo):
            raise ConfigError("domain box must satisfy lo < hi componentwise")

        def inside(p):
            p = np.atleast_2d(np.asarray(p, float))
            return bool(np.all(p >= dlo) and np.all(p <= dhi))

        if self.kind == "uniform_box":
            lo = np.array(self.lo if self.lo is not None else self.domain_lo, float)
            hi = np.array(self.hi if self.hi is not None else self.domain_hi, float)
            if np.any(hi <= lo) or not inside(lo) or not inside(hi):
                raise ConfigError("uniform box must lie inside the domain")
        elif self.kind == "clipped_gaussian":
            if self.mean is None or not inside(self.mean) or self.std <= 0:
                raise ConfigError("clipped gaussian needs a mean inside the domain and std > 0")
        elif self.kind == "two_cluster":
            c = np.asarray(self.centers, float) if self.centers is not None else None
            if c is None or c.shape != (2, 3) or not inside(c) or self.std <= 0:
                raise ConfigError("two_cluster needs two centers inside the domain and std > 0")
            if not (0.0 <= self.weight <= 1.0):
                raise ConfigError("cluster weight must lie in [0, 1]")
        else:
            a = np.asarray(self.atoms, float) if self.atoms is not None else None
            if a is None or a.ndim != 2 or a.shape[1] != 3 or len(a) == 0:
                raise ConfigError("atom list must be a nonempty (A, 3) array")
            if not inside(a):
                raise ConfigError("position atoms must lie inside the domain")
            if self.weights is not None:
                w = np.asarray(self.weights, float)
                if w.shape != (len(a),) or np.any(w < 0) or w.sum() <= 0:
                    raise ConfigError("atom weights must be nonnegative, one per atom")
            if self.assign not in ("iid", "enumerate"):
                raise ConfigError("assign must be 'iid' or 'enumerate'")

    @property
    def atoms_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @property
    def atom_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.atoms), 1.0 / len(self.atoms))
        w = np.asarray(self.weights, dtype=float)
        return w / w.sum()

    def _clip(self, p):
        return np.clip(p, np.array(self.domain_lo), np.array(self.domain_hi))

    def sample(self, u: np.ndarray, ids: np.ndarray | None = None) -> np.ndarray:
        """Map uniforms of shape (n, 4) to positions of shape (n, 3)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform_box":
            lo = np.array(self.lo if self.lo is not None else self.domain_lo)
            hi = np.array(self.hi if self.hi is not None else self.domain_hi)
            return lo + (hi - lo) * u[:, :3]
        if self.kind == "clipped_gaussian":
            return self._clip(np.array(self.mean) + self.std * ndtri(u[:, :3]))
        if self.kind == "two_cluster":
            c = np.asarray(self.centers, dtype=float)
            which = (u[:, 3] >= self.weight).astype(int)
            return self._clip(c[which] + self.std * ndtri(u[:, :3]))
        atoms = self.atoms_array
        if self.assign == "enumerate":
            if ids is None:
                ids = np.arange(len(u))
            return atoms[np.asarray(ids) % len(atoms)]
        cdf = np.cumsum(self.atom_weights)
        idx = np.minimum(np.searchsorted(cdf, u[:, 3], side="right"), len(atoms) - 1)
        return atoms[idx]


@dataclass(frozen=True)
class VoltageDensity:
    """Initial voltage density on [0, 2).

    ``uniform``; ``truncated_gaussian`` (``center``, ``std`` truncated to
    ``[lo, hi]``); ``piecewise_constant`` (``edges`` from 0 to 2 and cell
    ``values``, renormalized to unit mass).
    """

    kind: str = "uniform"
    center: float = 0.5
    std: float = 0.1
    lo: float = 0.0
    hi: float = 2.0
    edges: tuple | None = None
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in VOLTAGE_KINDS:
            raise ConfigError(f"unknown voltage density {self.kind!r}")
        if self.kind == "truncated_gaussian":
            if self.std <= 0 or not (0.0 <= self.lo < self.hi <= 2.0):
                raise ConfigError("truncated gaussian needs std > 0 and 0 <= lo < hi <= 2")
        if self.kind == "piecewise_constant":
            if self.edges is None or self.values is None:
                raise ConfigError("piecewise density needs edges and values")
            e = np.asarray(self.edges, float)
            v = np.asarray(self.values, float)
            if len(e) != len(v) + 1 or e[0] != 0.0 or e[-1] != 2.0 or np.any(np.diff(e) <= 0):
                raise ConfigError("edges must increase from 0 to 2, one more than values")
            if np.any(v < 0) or np.dot(v, np.diff(e)) <= 0:
                raise ConfigError("density values must be nonnegative with positive mass")

    def _pc(self):
        e = np.asarray(self.edges, float)
        v = np.asarray(self.values, float)
        return e, v / np.dot(v, np.diff(e))

    def cdf(self, v):
        v = np.clip(np.asarray(v, dtype=float), 0.0, 2.0)
        if self.kind == "uniform":
            return v / 2.0
        if self.kind == "truncated_gaussian":
            a, b = ndtr((self.lo - self.center) / self.std), ndtr((self.hi - self.center) / self.std)
            z = ndtr((np.clip(v, self.lo, self.hi) - self.center) / self.std)
            return (z - a) / (b - a)
        e, dens = self._pc()
        cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(e))])
        return np.interp(v, e, cum)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "uniform":
            return np.full_like(v, 0.5)
        if self.kind == "truncated_gaussian":
            a, b = ndtr((self.lo - self.center) / self.std), ndtr((self.hi - self.center) / self.std)
            z = (v - self.center) / self.std
            p = np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * self.std * (b - a))
            return np.where((v >= self.lo) & (v <= self.hi), p, 0.0)
        e, dens = self._pc()
        idx = np.clip(np.searchsorted(e, v, side="right") - 1, 0, len(dens) - 1)
        return dens[idx]

    def cell_averages(self, k: int) -> np.ndarray:
        edges = np.linspace(0.0, 2.0, k + 1)
        return np.diff(self.cdf(edges)) / (2.0 / k)

    def sample(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return 2.0 * u
        if self.kind == "truncated_gaussian":
            a, b = ndtr((self.lo - self.center) / self.std), ndtr((self.hi - self.center) / self.std)
            x = self.center + self.std * ndtri(a + u * (b - a))
            return np.clip(x, self.lo, np.nextafter(self.hi, 0.0) if self.hi == 2.0 else self.hi)
        e, dens = self._pc()
        cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(e))])
        cum /= cum[-1]
        mass = np.diff(cum)
        i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(mass) - 1)
        # zero-density cells can only be hit at u = 1; fall back to the last charged cell
        i = np.maximum.accumulate(np.where(mass > 0, np.arange(len(mass)), -1))[i]
        x = e[i] + (u - cum[i]) / mass[i] * (e[i + 1] - e[i])
        return np.minimum(x, np.nextafter(2.0, 0.0))


@dataclass(frozen=True)
class InitialLaws:
    nu: PositionLaw = field(default_factory=PositionLaw)
    rho0: VoltageDensity = field(default_factory=VoltageDensity)
