"""Quadrature over time-ordered simplices for matrix-valued integrands.

Two schemes:

* ``simpson-uniform``: iterated composite Simpson on a uniform grid over
  [0, t].  Inner integrals with an upper limit at grid node m use cumulative
  fourth-order weights (Simpson where the interval count is even, a 3/8-rule
  tail where it is odd, short polynomial rules near the origin), so the
  nested scheme stays globally O(h^4).  Kernel and operator values are only
  ever needed at the grid nodes.

* ``gauss-legendre-nested``: the simplex t >= t1 >= ... >= tk >= 0 is mapped
  to the unit cube (t1 = t w, t2 = t1 v, ...) and integrated with a tensor
  Gauss-Legendre rule.  For the trigonometric-polynomial integrands produced
  by discrete-mode baths this converges to machine precision at modest node
  counts.

Integrand callables receive one scalar outer time plus flat arrays for the
inner times and must return a stacked array of matrices, shape (B, D, D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["QuadratureSpec"]

_SCHEMES = ("simpson-uniform", "gauss-legendre-nested")


@dataclass(frozen=True)
class QuadratureSpec:
    """Scheme selector plus density and accuracy targets.

    ``nodes_per_unit_time`` controls grid density (intervals per unit time
    for Simpson, Gauss points per unit time for the nested rule);
    ``tolerance`` is the target for self-reported refinement error used by
    equivalence checks downstream.
    """

    scheme: str = "gauss-legendre-nested"
    nodes_per_unit_time: int = 16
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {_SCHEMES}")
        if self.nodes_per_unit_time < 4:
            raise ValueError(
                f"nodes_per_unit_time must be >= 4, got {self.nodes_per_unit_time}"
            )
        if not (0 < self.tolerance < 1):
            raise ValueError(f"tolerance must be in (0, 1), got {self.tolerance}")

    def intervals(self, t: float) -> int:
        """Number of uniform grid intervals used on [0, t]."""
        return max(4, int(math.ceil(abs(t) * self.nodes_per_unit_time)))

    def gauss_points(self, t: float) -> int:
        """Tensor Gauss-Legendre points per dimension on [0, t]."""
        return min(96, max(8, int(math.ceil(abs(t) * self.nodes_per_unit_time))))

    def coarsened(self) -> "QuadratureSpec":
        """Same scheme at roughly half the density (for error estimates)."""
        return QuadratureSpec(self.scheme, max(4, self.nodes_per_unit_time // 2), self.tolerance)


@lru_cache(maxsize=64)
def cumulative_weights(n: int, h: float) -> np.ndarray:
    """Weight matrix W with (W @ f)[m] ~ int_0^{m h} f for grid values f.

    Row m holds the quadrature weights over nodes 0..n for the integral up to
    node m.  All rows are fourth-order accurate except on grids too short to
    support a cubic (n < 3), which fall back to the best available rule.
    """
    w = np.zeros((n + 1, n + 1))
    if n >= 1:
        if n >= 3:
            # cubic through nodes 0..3 integrated over the first interval
            w[1, :4] = np.array([9.0, 19.0, -5.0, 1.0]) * (h / 24.0)
        elif n == 2:
            w[1, :3] = np.array([5.0, 8.0, -1.0]) * (h / 12.0)
        else:
            w[1, :2] = np.array([0.5, 0.5]) * h
    for m in range(2, n + 1):
        if m % 2 == 0:
            w[m, : m + 1] = _simpson_row(m, h)
        else:
            # Simpson on [0, m-3], 3/8 rule on the last three intervals
            if m >= 5:
                w[m, : m - 2] += _simpson_row(m - 3, h)
            w[m, m - 3 : m + 1] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


def _simpson_row(m: int, h: float) -> np.ndarray:
    row = np.ones(m + 1)
    row[1:-1:2] = 4.0
    row[2:-1:2] = 2.0
    return row * (h / 3.0)


@lru_cache(maxsize=32)
def _gauss01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return (x + 1.0) / 2.0, w / 2.0


def integrate_interval(f, t: float, quad: QuadratureSpec) -> np.ndarray:
    """int_0^t f(t1) dt1 for a matrix-valued f(t1_array) -> (B, D, D)."""
    if t == 0.0:
        return _probe_zero(f, np.zeros(1))
    if quad.scheme == "simpson-uniform":
        n = quad.intervals(t)
        ts = np.linspace(0.0, t, n + 1)
        weights = cumulative_weights(n, t / n)[n]
        return np.einsum("b,bij->ij", weights, f(ts))
    x, w = _gauss01(quad.gauss_points(t))
    return np.einsum("b,bij->ij", t * w, f(t * x))


def _support_ends(cw: np.ndarray) -> np.ndarray:
    """Largest node index with nonzero weight, per cumulative row.

    The short start rule for node 1 reaches ahead to nodes 2..3; the nested
    engines must include those nodes in the inner batches.  (Integrands are
    globally smooth, so evaluating slightly outside the simplex is fine.)
    """
    nz = cw != 0.0
    ends = np.zeros(cw.shape[0], dtype=int)
    for m in range(cw.shape[0]):
        idx = np.nonzero(nz[m])[0]
        ends[m] = idx[-1] if idx.size else 0
    return ends


def integrate_simplex2(f, t: float, quad: QuadratureSpec) -> np.ndarray:
    """int_0^t dt1 int_0^t1 dt2 f(t1, t2) with f(t1, t2_array) -> (B, D, D)."""
    if t == 0.0:
        return _probe_zero(f, 0.0, np.zeros(1))
    if quad.scheme == "simpson-uniform":
        n = quad.intervals(t)
        ts = np.linspace(0.0, t, n + 1)
        cw = cumulative_weights(n, t / n)
        ends = _support_ends(cw)
        acc = None
        for i in range(n + 1):
            wi = cw[n, i]
            s = ends[i]
            inner = np.einsum("b,bij->ij", cw[i, : s + 1], f(ts[i], ts[: s + 1]))
            acc = wi * inner if acc is None else acc + wi * inner
        return acc
    x, w = _gauss01(quad.gauss_points(t))
    acc = None
    for a in range(len(x)):
        t1 = t * x[a]
        inner = np.einsum("b,bij->ij", t1 * w, f(t1, t1 * x))
        term = (t * w[a]) * inner
        acc = term if acc is None else acc + term
    return acc


def integrate_simplex3(f, t: float, quad: QuadratureSpec) -> np.ndarray:
    """Triple simplex integral int_0^t dt1 int_0^t1 dt2 int_0^t2 dt3 f.

    ``f(t1, t2_array, t3_array)`` is evaluated with flattened inner-node
    batches (one call per outer node) and must broadcast elementwise over the
    two arrays.
    """
    if t == 0.0:
        return _probe_zero(f, 0.0, np.zeros(1), np.zeros(1))
    if quad.scheme == "simpson-uniform":
        n = quad.intervals(t)
        ts = np.linspace(0.0, t, n + 1)
        cw = cumulative_weights(n, t / n)
        ends = _support_ends(cw)
        acc = None
        for i in range(n + 1):
            wi = cw[n, i]
            si = ends[i]
            sizes = ends[: si + 1] + 1
            jj = np.repeat(np.arange(si + 1), sizes)
            kk = np.concatenate([np.arange(sz) for sz in sizes])
            wflat = cw[i, jj] * cw[jj, kk]
            inner = np.einsum("b,bij->ij", wflat, f(ts[i], ts[jj], ts[kk]))
            acc = wi * inner if acc is None else acc + wi * inner
        return acc
    npts = quad.gauss_points(t)
    x, w = _gauss01(npts)
    # cube map: t1 = t x_a, t2 = t1 x_b, t3 = t2 x_c; Jacobian t * t1 * t2
    t2_of_b = np.repeat(x, npts)  # index b, flattened over (b, c)
    x_c = np.tile(x, npts)
    w_bc = np.repeat(w, npts) * np.tile(w, npts)
    acc = None
    for a in range(npts):
        t1 = t * x[a]
        t2 = t1 * t2_of_b
        t3 = t2 * x_c
        wflat = (t * w[a]) * (t1 * w_bc) * t2
        inner = np.einsum("b,bij->ij", wflat, f(t1, t2, t3))
        acc = inner if acc is None else acc + inner
    return acc


def _probe_zero(f, *args) -> np.ndarray:
    """Zero result with the integrand's matrix shape."""
    sample = f(*args)
    return np.zeros(sample.shape[-2:], dtype=complex)
