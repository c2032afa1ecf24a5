"""Superoperator algebra on a finite-dimensional system Hilbert space.

Density matrices are vectorized by column stacking, ``vec(rho) =
rho.reshape(-1, order='F')``, so the map ``rho -> A rho B`` has the matrix
representation ``kron(B.T, A)``.  A superoperator is stored densely as a
``d^2 x d^2`` complex matrix.

Interaction-picture system operators are generated from the cached
eigendecomposition of H_S: X(t) = exp(+i H_S t) X exp(-i H_S t).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SystemModel",
    "SuperOp",
    "vec",
    "unvec",
    "left_mult",
    "right_mult",
    "commutator_super",
    "anticommutator_super",
    "heisenberg_X",
    "superop_apply",
    "superop_compose",
    "superop_axpy",
    "identity_superop",
    "zero_superop",
]

_HERM_TOL = 1e-12


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a d x d matrix into a d^2 vector."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


@dataclass(frozen=True)
class SuperOp:
    """Dense linear map on vectorized density matrices."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim**2, self.dim**2):
            raise ValueError(
                f"superoperator matrix must be {self.dim**2} x {self.dim**2}, "
                f"got {m.shape}"
            )
        object.__setattr__(self, "matrix", m)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def norm_fro(self) -> float:
        return float(np.linalg.norm(self.matrix))


def superop_apply(s: SuperOp, rho: np.ndarray) -> np.ndarray:
    """Apply a superoperator to a density matrix."""
    return s.apply(rho)


def superop_compose(s1: SuperOp, s2: SuperOp) -> SuperOp:
    """Composition s1 after s2 (s2 acts on the state first)."""
    if s1.dim != s2.dim:
        raise ValueError("dimension mismatch in composition")
    return SuperOp(s1.dim, s1.matrix @ s2.matrix)


def superop_axpy(c: complex, s1: SuperOp, s2: SuperOp) -> SuperOp:
    """c * s1 + s2."""
    if s1.dim != s2.dim:
        raise ValueError("dimension mismatch in axpy")
    return SuperOp(s1.dim, c * s1.matrix + s2.matrix)


def identity_superop(dim: int) -> SuperOp:
    return SuperOp(dim, np.eye(dim**2, dtype=complex))


def zero_superop(dim: int) -> SuperOp:
    return SuperOp(dim, np.zeros((dim**2, dim**2), dtype=complex))


def left_mult(a: np.ndarray) -> np.ndarray:
    """Matrix of rho -> a rho in the column-stacking convention."""
    a = np.asarray(a, dtype=complex)
    return np.kron(np.eye(a.shape[0]), a)


def right_mult(a: np.ndarray) -> np.ndarray:
    """Matrix of rho -> rho a."""
    a = np.asarray(a, dtype=complex)
    return np.kron(a.T, np.eye(a.shape[0]))


def commutator_super(a: np.ndarray) -> SuperOp:
    """Superoperator rho -> [a, rho]."""
    a = np.asarray(a, dtype=complex)
    return SuperOp(a.shape[0], left_mult(a) - right_mult(a))


def anticommutator_super(a: np.ndarray) -> SuperOp:
    """Superoperator rho -> {a, rho}."""
    a = np.asarray(a, dtype=complex)
    return SuperOp(a.shape[0], left_mult(a) + right_mult(a))


@dataclass(frozen=True)
class SystemModel:
    """System Hamiltonian, coupling operator and coupling strength.

    ``h_sys`` and ``coupling`` must be Hermitian d x d matrices (checked to
    1e-12); ``alpha`` is the dimensionless coupling constant multiplying the
    interaction.
    """

    dim: int
    h_sys: np.ndarray
    coupling: np.ndarray
    alpha: float

    def __post_init__(self):
        h = np.asarray(self.h_sys, dtype=complex)
        x = np.asarray(self.coupling, dtype=complex)
        if self.dim < 2:
            raise ValueError(f"system dimension must be >= 2, got {self.dim}")
        for name, m in (("h_sys", h), ("coupling", x)):
            if m.shape != (self.dim, self.dim):
                raise ValueError(f"{name} must be {self.dim} x {self.dim}, got {m.shape}")
            if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
                raise ValueError(f"{name} is not Hermitian within {_HERM_TOL}")
        if not np.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")
        object.__setattr__(self, "h_sys", h)
        object.__setattr__(self, "coupling", x)
        object.__setattr__(self, "alpha", float(self.alpha))

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        w, v = np.linalg.eigh(self.h_sys)
        return w, v

    @cached_property
    def _coupling_eigbasis(self) -> np.ndarray:
        w, v = self._eig
        return v.conj().T @ self.coupling @ v

    @cached_property
    def _bohr_matrix(self) -> np.ndarray:
        # antisymmetric matrix of eigenvalue differences w_a - w_b
        w, _ = self._eig
        return w[:, None] - w[None, :]


def heisenberg_X(model: SystemModel, t: float) -> np.ndarray:
    """Interaction-picture coupling X(t) = e^{+i H_S t} X e^{-i H_S t}."""
    if t == 0.0:
        return model.coupling.copy()
    _, v = model._eig
    phases = np.exp(1j * t * model._bohr_matrix)
    return v @ (model._coupling_eigbasis * phases) @ v.conj().T


def heisenberg_X_batch(model: SystemModel, ts: np.ndarray) -> np.ndarray:
    """X(t) for an array of times; returns shape (len(ts), d, d)."""
    ts = np.asarray(ts, dtype=float)
    _, v = model._eig
    phases = np.exp(1j * np.multiply.outer(ts, model._bohr_matrix))
    return np.einsum("ab,tbc,dc->tad", v, model._coupling_eigbasis * phases, v.conj())


def _kron_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched Kronecker product over the leading axis."""
    ba, bb = a.shape[0], b.shape[0]
    if ba != bb:
        raise ValueError("batch size mismatch")
    p, q = a.shape[1], a.shape[2]
    r, s = b.shape[1], b.shape[2]
    out = np.einsum("tij,tkl->tikjl", a, b)
    return out.reshape(ba, p * r, q * s)


def commutator_super_batch(xs: np.ndarray) -> np.ndarray:
    """Batched matrices of rho -> [x, rho] for a stack of operators."""
    d = xs.shape[-1]
    eye = np.broadcast_to(np.eye(d, dtype=complex), xs.shape)
    return _kron_batch(eye, xs) - _kron_batch(np.transpose(xs, (0, 2, 1)), eye)


def anticommutator_super_batch(xs: np.ndarray) -> np.ndarray:
    """Batched matrices of rho -> {x, rho}."""
    d = xs.shape[-1]
    eye = np.broadcast_to(np.eye(d, dtype=complex), xs.shape)
    return _kron_batch(eye, xs) + _kron_batch(np.transpose(xs, (0, 2, 1)), eye)
