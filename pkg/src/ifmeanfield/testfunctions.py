"""Test functions phi(x, v) = a(x) * e(v) with analytic v-derivatives."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .torus import signed_rep


@dataclass(frozen=True)
class TestFunction:
    """Product test function.

    ``kind`` selects the v-part: ``cos``/``sin`` (mode ``k``, i.e.
    ``cos(pi k v)``), ``bump`` (C^2 bump ``(1 - (d/r)^2)^3`` of torus distance
    ``d`` to ``center``, radius ``width``) or ``const``. ``spatial`` maps an
    (n, 3) position array to n weights; ``None`` means 1.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str = "cos"
    k: int = 1
    center: float = 0.5
    width: float = 0.25
    spatial: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("cos", "sin", "bump", "const"):
            raise ConfigError(f"unknown test function kind {self.kind!r}")
        if self.kind == "bump" and not (0 < self.width <= 1):
            raise ConfigError("bump width must lie in (0, 1]")

    @classmethod
    def fourier_modes(cls, kmax: int) -> list[TestFunction]:
        modes = []
        for k in range(1, kmax + 1):
            modes += [cls("cos", k), cls("sin", k)]
        return modes

    def label(self) -> str:
        if self.kind in ("cos", "sin"):
            return f"{self.kind}{self.k}"
        return self.kind

    def a(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.spatial is None:
            return np.ones(len(x))
        return np.asarray(self.spatial(x), dtype=float)

    def e(self, v):
        v = np.asarray(v, dtype=float)
        w = np.pi * self.k * v
        if self.kind == "cos":
            return np.cos(w)
        if self.kind == "sin":
            return np.sin(w)
        if self.kind == "const":
            return np.ones_like(v)
        d = signed_rep(v - self.center) / self.width
        return np.where(np.abs(d) < 1, (1 - d * d) ** 3, 0.0)

    def de(self, v):
        v = np.asarray(v, dtype=float)
        c = np.pi * self.k
        if self.kind == "cos":
            return -c * np.sin(c * v)
        if self.kind == "sin":
            return c * np.cos(c * v)
        if self.kind == "const":
            return np.zeros_like(v)
        d = signed_rep(v - self.center) / self.width
        return np.where(np.abs(d) < 1, -6 * d * (1 - d * d) ** 2 / self.width, 0.0)

    def dde(self, v):
        v = np.asarray(v, dtype=float)
        c = np.pi * self.k
        if self.kind == "cos":
            return -c * c * np.cos(c * v)
        if self.kind == "sin":
            return -c * c * np.sin(c * v)
        if self.kind == "const":
            return np.zeros_like(v)
        d = signed_rep(v - self.center) / self.width
        val = (-6 * (1 - d * d) ** 2 + 24 * d * d * (1 - d * d)) / self.width**2
        return np.where(np.abs(d) < 1, val, 0.0)

    def __call__(self, x, v):
        return self.a(x) * self.e(v)
