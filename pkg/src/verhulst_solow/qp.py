"""Quasi-polynomial (QP) systems and their Lotka-Volterra (LV) embedding.

A QP system on ``n`` variables with ``m`` quasi-monomials reads::

    dx_i/dt = x_i * (c_i + sum_j A_ij * U_j),    U_j = prod_k x_k ** B_jk

and the monomials themselves obey the quadratic LV system::

    dU_i/dt = U_i * (l_i + sum_j M_ij * U_j),    l = B c,  M = B A.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 64


class StructureError(ValueError):
    """Matrix shapes or ranks are inconsistent with the requested operation."""


class DomainError(ValueError):
    """A state lies outside the positive orthant."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_positive(x: np.ndarray, what: str = "x") -> None:
    bad = np.flatnonzero(~(x > 0))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"{what}[{i}] = {x[i]!r} is not strictly positive")


@dataclass(frozen=True)
class QPSystem:
    c: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        c, A, B = _frozen(self.c), _frozen(self.A), _frozen(self.B)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if c.ndim != 1 or A.ndim != 2 or B.ndim != 2:
            raise StructureError("c must be a vector, A and B matrices")
        n, m = c.size, A.shape[1]
        if A.shape != (n, m) or B.shape != (m, n):
            raise StructureError(
                f"expected A {n}x{m} and B {m}x{n}, got A {A.shape} and B {B.shape}"
            )
        if n > MAX_DIM or m > MAX_DIM:
            raise StructureError(f"dimension exceeds soft limit {MAX_DIM}")
        for name, arr in (("c", c), ("A", A), ("B", B)):
            if not np.all(np.isfinite(arr)):
                raise StructureError(f"{name} has non-finite entries")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class LVSystem:
    l: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        l, M = _frozen(self.l), _frozen(self.M)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "M", M)
        if l.ndim != 1 or M.shape != (l.size, l.size):
            raise StructureError(f"M must be {l.size}x{l.size}, got {M.shape}")
        if not (np.all(np.isfinite(l)) and np.all(np.isfinite(M))):
            raise StructureError("l or M has non-finite entries")

    @property
    def m(self) -> int:
        return self.l.size

    def as_qp(self) -> QPSystem:
        """The same system viewed as a QP system with identity exponents."""
        return QPSystem(self.l, self.M, np.eye(self.m))

    def log_rhs(self, y: np.ndarray) -> np.ndarray:
        """d(ln U)/dt as a function of ln U."""
        return self.l + self.M @ np.exp(y)


def qp_to_lv(sys: QPSystem) -> LVSystem:
    return LVSystem(sys.B @ sys.c, sys.B @ sys.A)


def eval_monomials(sys: QPSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise StructureError(f"state has shape {x.shape}, expected ({sys.n},)")
    _check_positive(x)
    return np.exp(sys.B @ np.log(x))


def qp_rhs(sys: QPSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    U = eval_monomials(sys, x)
    return x * (sys.c + sys.A @ U)


def qp_log_rhs(sys: QPSystem, y) -> np.ndarray:
    """d(ln x)/dt as a function of ln x; never forms x itself, so it stays
    finite for states that grow without bound while the monomials stay bounded."""
    y = np.asarray(y, dtype=float)
    return sys.c + sys.A @ np.exp(sys.B @ y)


def lv_rhs(sys: LVSystem, u, require_positive: bool = True) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.m,):
        raise StructureError(f"state has shape {u.shape}, expected ({sys.m},)")
    # zero components are allowed: each coordinate face is invariant
    if require_positive:
        neg = np.flatnonzero(u < 0)
        if neg.size:
            raise DomainError(f"u[{int(neg[0])}] = {u[neg[0]]!r} is negative")
    return u * (sys.l + sys.M @ u)


def invert_embedding(sys: QPSystem, u) -> np.ndarray:
    """Solve ``eval_monomials(sys, x) = u`` for x via ``x = exp(B^-1 ln u)``."""
    if sys.m != sys.n:
        raise StructureError(f"embedding is not square ({sys.m} monomials, {sys.n} variables)")
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.m,):
        raise StructureError(f"u has shape {u.shape}, expected ({sys.m},)")
    _check_positive(u, "u")
    if abs(np.linalg.det(sys.B)) < 1e-14 or np.linalg.cond(sys.B) > 1e14:
        raise StructureError("exponent matrix B is singular")
    return np.exp(np.linalg.solve(sys.B, np.log(u)))
