"""Ordered cumulants of the interaction Liouvillian and their assembly.

The interaction-picture Liouvillian is L(s) rho = i [X(s) B(s), rho].  The
time-local generator at order n is a signed sum of products of moment
superoperators

    <L(s_1) ... L(s_k)> rho = i^k tr_B [X B, [X B, ... [X B, rho x rho_B]]],

integrated over the ordered simplex t >= t_1 >= ... >= t_{n-1} >= 0.  The
terms follow the ordered-cumulant rules: partition the n factors into q
contiguous substrings (sign (-1)^(q-1)); the first substring starts with the
pinned time t; the remaining times are distributed over the substrings in all
ways that keep each substring chronologically ordered.

Moments are evaluated by expanding every L into left and right
multiplications and weighting each of the 2^k placements by the thermal
expectation of its bath-operator string, which Wick's theorem reduces to a
sum over perfect pairings of two-point correlations (operator order taken
from the string).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .algebra import SuperOp, SystemModel, heisenberg_X_batch
from .bath import BathSpec, bath_correlation
from .quadrature import QuadratureSpec, integrate_interval, integrate_simplex3

__all__ = [
    "CumulantTerm",
    "enumerate_ordered_cumulant_terms",
    "drop_odd_terms",
    "moment_superop",
    "K_n_cumulant",
]


@dataclass(frozen=True)
class CumulantTerm:
    """One signed product of moments in the order-n expansion.

    ``substrings`` lists, per factor, the time-slot indices it carries: slot 0
    is the pinned time t, slots 1..n-1 are the integration variables in
    decreasing time order.  Each tuple is strictly increasing and the first
    one starts with 0.  Factors compose left to right (the rightmost acts on
    the state first).
    """

    n: int
    substrings: tuple[tuple[int, ...], ...]

    @property
    def partition(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.substrings)

    @property
    def sign(self) -> int:
        return -1 if (len(self.substrings) - 1) % 2 else 1

    def is_even(self) -> bool:
        return all(len(s) % 2 == 0 for s in self.substrings)

    def format_line(self) -> str:
        parts = "".join(
            "(" + ",".join("t" if i == 0 else f"t{i}" for i in sub) + ")"
            for sub in self.substrings
        )
        sign = "+" if self.sign > 0 else "-"
        return f"{sign} {'+'.join(str(p) for p in self.partition):<8} {parts}"


def enumerate_ordered_cumulant_terms(n: int) -> list[CumulantTerm]:
    """All order-n terms, duplicate free, in a deterministic order."""
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    terms: list[CumulantTerm] = []
    for comp in _compositions(n):
        for assignment in _distribute(tuple(range(1, n)), comp):
            terms.append(CumulantTerm(n, assignment))
    return terms


def drop_odd_terms(terms: list[CumulantTerm]) -> list[CumulantTerm]:
    """Keep only terms whose substrings all have even length.

    For the Gaussian reservoir used here every odd bath moment vanishes, so
    any factor of odd length is zero.
    """
    return [t for t in terms if t.is_even()]


def _compositions(n: int):
    """Ordered compositions of n (all part sizes >= 1)."""
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in _compositions(n - first):
            yield (first,) + rest


def _distribute(slots: tuple[int, ...], comp: tuple[int, ...]):
    """Assign slots to substrings of sizes comp, sorted within each.

    The first substring implicitly holds slot 0, so it draws comp[0]-1 slots.
    """
    sizes = (comp[0] - 1,) + comp[1:]

    def rec(remaining: tuple[int, ...], idx: int):
        if idx == len(sizes):
            yield ()
            return
        for chosen in combinations(remaining, sizes[idx]):
            rest = tuple(s for s in remaining if s not in chosen)
            for tail in rec(rest, idx + 1):
                yield (chosen,) + tail

    for groups in rec(slots, 0):
        yield ((0,) + groups[0],) + groups[1:]


# --- moment superoperators ---------------------------------------------------


@lru_cache(maxsize=8)
def _placements(k: int) -> tuple:
    """Left/right expansions of a k-fold nested commutator.

    Each entry is (left_indices, right_indices, string_order, parity_sign):
    ``left`` ascending (outermost factor leftmost), ``right`` ascending; the
    bath expectation string carries the right block in descending index order
    followed by the left block ascending, which ``string_order`` records.
    """
    out = []
    for bits in range(2**k):
        left = tuple(i for i in range(k) if not (bits >> i) & 1)
        right = tuple(i for i in range(k) if (bits >> i) & 1)
        string_order = tuple(reversed(right)) + left
        out.append((left, right, string_order, -1 if len(right) % 2 else 1))
    return tuple(out)


@lru_cache(maxsize=8)
def _pairings(k: int) -> tuple:
    """Perfect pairings of string positions 0..k-1 (k even)."""

    def rec(positions: tuple[int, ...]):
        if not positions:
            yield ()
            return
        first, rest = positions[0], positions[1:]
        for j, partner in enumerate(rest):
            remaining = rest[:j] + rest[j + 1 :]
            for tail in rec(remaining):
                yield ((first, partner),) + tail

    return tuple(rec(tuple(range(k))))


def _moment_matrix_batch(
    model: SystemModel, bath: BathSpec, times: list, batch: int
) -> np.ndarray:
    """Batched matrix of <L(times[0]) ... L(times[k-1])>, shape (B, d^2, d^2).

    Each entry of ``times`` is a scalar or a length-``batch`` array; scalars
    broadcast.  Times must be arranged non-increasing slotwise by the caller.
    """
    k = len(times)
    d = model.dim
    tarrs = [np.broadcast_to(np.asarray(s, dtype=float), (batch,)) for s in times]
    xs = [heisenberg_X_batch(model, ta) for ta in tarrs]
    eye = np.broadcast_to(np.eye(d, dtype=complex), (batch, d, d))
    prefactor = 1j**k
    acc = np.zeros((batch, d * d, d * d), dtype=complex)
    for left, right, order, parity in _placements(k):
        lmat = eye
        for i in left:
            lmat = lmat @ xs[i]
        rmat = eye
        for j in reversed(right):  # descending index: earliest-applied innermost
            rmat = rmat @ xs[j]
        weight = np.zeros(batch, dtype=complex)
        for pairing in _pairings(k):
            w = np.ones(batch, dtype=complex)
            for p, q in pairing:
                tau = tarrs[order[p]] - tarrs[order[q]]
                w = w * bath_correlation(bath, tau)
            weight += w
        scal = prefactor * parity * weight
        rt = np.transpose(rmat, (0, 2, 1))
        acc += scal[:, None, None] * np.einsum("bij,bkl->bikjl", rt, lmat).reshape(
            batch, d * d, d * d
        )
    return acc


def moment_superop(model: SystemModel, bath: BathSpec, times) -> SuperOp:
    """Moment superoperator <L(s1) ... L(s_2m)> for non-increasing times."""
    ts = [float(s) for s in times]
    if len(ts) == 0 or len(ts) % 2:
        raise ValueError(f"need an even, positive number of times, got {len(ts)}")
    if any(a < b for a, b in zip(ts, ts[1:])):
        raise ValueError(f"times must be non-increasing, got {ts}")
    mat = _moment_matrix_batch(model, bath, ts, 1)[0]
    return SuperOp(model.dim, mat)


def _term_integrand(model, bath, term: CumulantTerm, t: float):
    """Batched integrand for one order-4 term on the simplex (t1, t2, t3)."""

    def f(t1: float, t2: np.ndarray, t3: np.ndarray) -> np.ndarray:
        batch = t2.shape[0]
        slot_times = {0: t, 1: t1, 2: t2, 3: t3}
        prod = None
        for sub in term.substrings:
            # factors depending only on the scalar slots are batch independent
            nb = batch if any(i >= 2 for i in sub) else 1
            fac = _moment_matrix_batch(model, bath, [slot_times[i] for i in sub], nb)
            prod = fac if prod is None else prod @ fac
        if prod.shape[0] != batch:
            prod = np.broadcast_to(prod, (batch,) + prod.shape[1:])
        return float(term.sign) * prod

    return f


def K_n_cumulant(
    model: SystemModel, bath: BathSpec, t: float, n: int, quad: QuadratureSpec
) -> SuperOp:
    """Order-n generator assembled from the even ordered-cumulant terms.

    Supported orders: 2 and 4.  Order 2 is the single two-point moment
    integrated over t1; order 4 sums the fully time-ordered four-point moment
    and the three signed two-point products over the triple simplex.
    """
    if n == 2:
        mat = integrate_interval(
            lambda t1: _moment_matrix_batch(model, bath, [t, t1], t1.shape[0]),
            t,
            quad,
        )
        return SuperOp(model.dim, mat)
    if n == 4:
        terms = drop_odd_terms(enumerate_ordered_cumulant_terms(4))
        acc = None
        for term in terms:
            part = integrate_simplex3(_term_integrand(model, bath, term, t), t, quad)
            acc = part if acc is None else acc + part
        return SuperOp(model.dim, acc)
    raise ValueError(f"only orders 2 and 4 are implemented, got {n}")
