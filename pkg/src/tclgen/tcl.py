"""Time-local generators from the influence-functional kernel formulas.

Second order:

    K2(t) = int_0^t dt1 { (i/2) D(t-t1) Xc(t) Xa(t1)
                          - (1/2) D1(t-t1) Xc(t) Xc(t1) }

with Xc(s) = [X(s), .] and Xa(s) = {X(s), .}.  Fourth order is the triple
simplex integral (prefactor 1/4, domain t >= t1 >= t2 >= t3 >= 0) of a fixed
table of kernel-product times superoperator-string summands; the table is
data (:data:`K4_TERM_TABLE`), not hand-expanded code, and can be dumped for
audit through the CLI.

:func:`K4_cumulant_ordered` computes the same object along two other routes
built on the moment machinery -- the fully time-ordered cumulant sum and the
partially unordered two-term form whose product part factorizes -- and raises
:class:`EquivalenceError` if they disagree beyond quadrature accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .algebra import (
    SuperOp,
    SystemModel,
    anticommutator_super_batch,
    commutator_super_batch,
    heisenberg_X_batch,
)
from .bath import BathSpec, kernel_D, kernel_D1
from .cumulant import K_n_cumulant, _moment_matrix_batch
from .quadrature import (
    QuadratureSpec,
    integrate_interval,
    integrate_simplex2,
    integrate_simplex3,
)

__all__ = [
    "EquivalenceError",
    "K4_TERM_TABLE",
    "K4Term",
    "Generator",
    "K2_influence",
    "K4_influence",
    "K4_cumulant_ordered",
    "build_generator",
    "format_k4_table",
]


class EquivalenceError(RuntimeError):
    """The independent generator routes disagree beyond quadrature accuracy."""


class K4Term(NamedTuple):
    """One summand of the fourth-order kernel display.

    ``coeff`` multiplies ``kernel_a(first lag) * kernel_b(second lag)``;
    ``pattern`` selects the lag pairs: ``"t-2,1-3"`` means
    (t - t2, t1 - t3) and ``"t-3,1-2"`` means (t - t3, t1 - t2).  ``ops``
    gives the superoperator string left to right as (kind, slot) with kind
    ``"c"`` (commutator) or ``"a"`` (anticommutator) and slot 0..3 for
    (t, t1, t2, t3).
    """

    coeff: complex
    kernel_a: str
    kernel_b: str
    pattern: str
    ops: tuple[tuple[str, int], ...]


# Sixteen kernel-product summands (the four bracketed pair-sums expanded in
# place).  Global prefactor 1/4 is applied at assembly time.
K4_TERM_TABLE: tuple[K4Term, ...] = (
    # chronological strings Xc(t) Xc(t1) X.(t2) X.(t3)
    K4Term(+1, "D1", "D1", "t-2,1-3", (("c", 0), ("c", 1), ("c", 2), ("c", 3))),
    K4Term(+1, "D1", "D1", "t-3,1-2", (("c", 0), ("c", 1), ("c", 2), ("c", 3))),
    K4Term(-1, "D", "D", "t-2,1-3", (("c", 0), ("c", 1), ("a", 2), ("a", 3))),
    K4Term(-1, "D", "D", "t-3,1-2", (("c", 0), ("c", 1), ("a", 2), ("a", 3))),
    K4Term(-1j, "D1", "D", "t-2,1-3", (("c", 0), ("c", 1), ("c", 2), ("a", 3))),
    K4Term(-1j, "D", "D1", "t-3,1-2", (("c", 0), ("c", 1), ("c", 2), ("a", 3))),
    K4Term(-1j, "D", "D1", "t-2,1-3", (("c", 0), ("c", 1), ("a", 2), ("c", 3))),
    K4Term(-1j, "D1", "D", "t-3,1-2", (("c", 0), ("c", 1), ("a", 2), ("c", 3))),
    # interleaved strings Xc(t) X.(t2) Xc(t1) X.(t3)
    K4Term(+1, "D", "D", "t-2,1-3", (("c", 0), ("a", 2), ("c", 1), ("a", 3))),
    K4Term(-1, "D1", "D1", "t-2,1-3", (("c", 0), ("c", 2), ("c", 1), ("c", 3))),
    K4Term(+1j, "D", "D1", "t-2,1-3", (("c", 0), ("a", 2), ("c", 1), ("c", 3))),
    K4Term(+1j, "D1", "D", "t-2,1-3", (("c", 0), ("c", 2), ("c", 1), ("a", 3))),
    # interleaved strings Xc(t) X.(t3) Xc(t1) X.(t2)
    K4Term(+1, "D", "D", "t-3,1-2", (("c", 0), ("a", 3), ("c", 1), ("a", 2))),
    K4Term(-1, "D1", "D1", "t-3,1-2", (("c", 0), ("c", 3), ("c", 1), ("c", 2))),
    K4Term(+1j, "D", "D1", "t-3,1-2", (("c", 0), ("a", 3), ("c", 1), ("c", 2))),
    K4Term(+1j, "D1", "D", "t-3,1-2", (("c", 0), ("c", 3), ("c", 1), ("a", 2))),
)


def format_k4_table() -> str:
    """Human-readable dump of the fourth-order term table."""
    lines = ["# coeff   kernels            lags            operator string"]
    slot_names = ("t", "t1", "t2", "t3")
    for term in K4_TERM_TABLE:
        if term.pattern == "t-2,1-3":
            lags = f"{term.kernel_a}(t-t2) {term.kernel_b}(t1-t3)"
        else:
            lags = f"{term.kernel_a}(t-t3) {term.kernel_b}(t1-t2)"
        ops = " ".join(f"X{k}({slot_names[s]})" for k, s in term.ops)
        c = term.coeff
        coeff = f"{c.real:+g}" if c.imag == 0 else f"{c.imag:+g}i"
        lines.append(f"{coeff:>7}   {term.kernel_a:>2}*{term.kernel_b:<2}          {lags:<22} {ops}")
    lines.append("# global prefactor 1/4, integrated over t >= t1 >= t2 >= t3 >= 0")
    return "\n".join(lines)


def K2_influence(
    model: SystemModel, bath: BathSpec, t: float, quad: QuadratureSpec
) -> SuperOp:
    """Second-order generator from the dissipation/noise kernel formula."""
    xc_t = commutator_super_batch(heisenberg_X_batch(model, np.array([t])))[0]

    def f(t1: np.ndarray) -> np.ndarray:
        xs = heisenberg_X_batch(model, t1)
        xc = commutator_super_batch(xs)
        xa = anticommutator_super_batch(xs)
        d = kernel_D(bath, t - t1)
        d1 = kernel_D1(bath, t - t1)
        return (0.5j * d)[:, None, None] * (xc_t @ xa) - (0.5 * d1)[
            :, None, None
        ] * (xc_t @ xc)

    return SuperOp(model.dim, integrate_interval(f, t, quad))


def _k4_integrand(model: SystemModel, bath: BathSpec, t: float):
    """Batched evaluator of the term-table integrand (without the 1/4)."""
    kernels = {"D": lambda tau: kernel_D(bath, tau), "D1": lambda tau: kernel_D1(bath, tau)}

    def f(t1: float, t2: np.ndarray, t3: np.ndarray) -> np.ndarray:
        batch = t2.shape[0]
        x01 = heisenberg_X_batch(model, np.array([t, t1]))
        fixed = {
            ("c", 0): commutator_super_batch(x01[:1])[0],
            ("c", 1): commutator_super_batch(x01[1:])[0],
            ("a", 1): anticommutator_super_batch(x01[1:])[0],
        }
        x2 = heisenberg_X_batch(model, t2)
        x3 = heisenberg_X_batch(model, t3)
        batched = {
            ("c", 2): commutator_super_batch(x2),
            ("a", 2): anticommutator_super_batch(x2),
            ("c", 3): commutator_super_batch(x3),
            ("a", 3): anticommutator_super_batch(x3),
        }
        lags = {
            "t-2,1-3": (t - t2, t1 - t3),
            "t-3,1-2": (t - t3, t1 - t2),
        }
        acc = np.zeros((batch, model.dim**2, model.dim**2), dtype=complex)
        for term in K4_TERM_TABLE:
            la, lb = lags[term.pattern]
            scal = term.coeff * kernels[term.kernel_a](la) * kernels[term.kernel_b](lb)
            prod = None
            for op in term.ops:
                factor = fixed[op] if op[1] < 2 else batched[op]
                prod = factor if prod is None else prod @ factor
            acc += scal[:, None, None] * prod
        return acc

    return f


def K4_influence(
    model: SystemModel, bath: BathSpec, t: float, quad: QuadratureSpec
) -> SuperOp:
    """Fourth-order generator by direct evaluation of the kernel table."""
    mat = integrate_simplex3(_k4_integrand(model, bath, t), t, quad)
    return SuperOp(model.dim, 0.25 * mat)


def _k4_ordered_pieces(
    model: SystemModel, bath: BathSpec, t: float, quad: QuadratureSpec
) -> tuple[np.ndarray, np.ndarray]:
    """(fully ordered cumulant sum, partially unordered two-term form)."""
    ordered = K_n_cumulant(model, bath, t, 4, quad).matrix

    def m4(t1, t2, t3):
        return _moment_matrix_batch(model, bath, [t, t1, t2, t3], t2.shape[0])

    four_point = integrate_simplex3(m4, t, quad)
    # product term: the t1 and t2 integrals both run over [0, t], so it
    # factorizes into <two-point at (t, .)> composed after the double simplex
    first = integrate_interval(
        lambda t1: _moment_matrix_batch(model, bath, [t, t1], t1.shape[0]), t, quad
    )
    second = integrate_simplex2(
        lambda t1, t2: _moment_matrix_batch(model, bath, [t1, t2], t2.shape[0]), t, quad
    )
    unordered = four_point - first @ second
    return ordered, unordered


def K4_cumulant_ordered(
    model: SystemModel, bath: BathSpec, t: float, quad: QuadratureSpec
) -> SuperOp:
    """Fourth-order generator from ordered cumulants, with a built-in check.

    Evaluates both the fully time-ordered cumulant assembly and the partially
    unordered form on the same quadrature settings; if they disagree by more
    than 10x the larger of the quadrature tolerance and the self-estimated
    refinement error, raises :class:`EquivalenceError`.  Returns the fully
    ordered value.
    """
    if t == 0.0:
        return SuperOp(model.dim, np.zeros((model.dim**2, model.dim**2), complex))
    ordered, unordered = _k4_ordered_pieces(model, bath, t, quad)
    scale = max(np.linalg.norm(ordered), np.linalg.norm(unordered), 1e-300)
    rel = np.linalg.norm(ordered - unordered) / scale
    coarse_ordered, coarse_unordered = _k4_ordered_pieces(
        model, bath, t, quad.coarsened()
    )
    est = max(
        np.linalg.norm(ordered - coarse_ordered),
        np.linalg.norm(unordered - coarse_unordered),
    ) / scale
    threshold = 10.0 * max(quad.tolerance, est)
    if rel > threshold:
        raise EquivalenceError(
            f"ordered and unordered fourth-order routes disagree: relative "
            f"difference {rel:.3e} exceeds {threshold:.3e} at t = {t}"
        )
    return SuperOp(model.dim, ordered)


@dataclass
class Generator:
    """Evaluable time-local generator K(t) = alpha^2 K2(t) [+ alpha^4 K4(t)].

    ``evaluator(t)`` returns the fully scaled SuperOp.  ``grid`` records the
    cache nodes; ``interp`` the interpolation rule between them.
    """

    order: int
    alpha: float
    dim: int
    evaluator: Callable[[float], SuperOp] = field(repr=False)
    grid: np.ndarray | None = None
    interp: str = "linear"

    def __call__(self, t: float) -> SuperOp:
        return self.evaluator(t)


def build_generator(
    model: SystemModel,
    bath: BathSpec,
    order: int,
    quad: QuadratureSpec,
    t_max: float,
    n_cache: int | None = None,
    interp: str = "linear",
) -> Generator:
    """Precompute the generator on a time grid and wrap an evaluator.

    ``interp`` is one of ``"linear"`` (default), ``"cubic"`` (spline through
    the cached matrices, useful when the stepper error budget is tighter than
    linear interpolation allows) or ``"direct"`` (no grid: every evaluation
    runs the quadrature, memoized per time).  Grid nodes always return the
    directly computed values.
    """
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order}")
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if interp not in ("linear", "cubic", "direct"):
        raise ValueError(f"unknown interpolation {interp!r}")

    def compute(t: float) -> np.ndarray:
        mat = model.alpha**2 * K2_influence(model, bath, t, quad).matrix
        if order == 4:
            mat = mat + model.alpha**4 * K4_influence(model, bath, t, quad).matrix
        return mat

    if interp == "direct":
        memo: dict[float, np.ndarray] = {}

        def evaluator(t: float) -> SuperOp:
            if t not in memo:
                memo[t] = compute(t)
            return SuperOp(model.dim, memo[t])

        return Generator(order, model.alpha, model.dim, evaluator, None, interp)

    n_nodes = n_cache if n_cache is not None else max(
        33, int(np.ceil(t_max * quad.nodes_per_unit_time)) + 1
    )
    grid = np.linspace(0.0, t_max, n_nodes)
    values = np.stack([compute(t) for t in grid])
    if interp == "cubic":
        spline = CubicSpline(grid, values, axis=0)

        def evaluator(t: float) -> SuperOp:
            return SuperOp(model.dim, np.asarray(spline(t)))

    else:

        def evaluator(t: float) -> SuperOp:
            idx = np.searchsorted(grid, t)
            if idx < len(grid) and grid[idx] == t:
                return SuperOp(model.dim, values[idx].copy())
            if t < grid[0] or t > grid[-1]:
                raise ValueError(f"time {t} outside cached range [0, {grid[-1]}]")
            lo = idx - 1
            theta = (t - grid[lo]) / (grid[idx] - grid[lo])
            return SuperOp(model.dim, (1 - theta) * values[lo] + theta * values[idx])

    return Generator(order, model.alpha, model.dim, evaluator, grid, interp)
