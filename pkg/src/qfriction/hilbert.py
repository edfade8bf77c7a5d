"""Finite-dimensional Hilbert spaces and the dense-operator toolkit.

A composite space is an ordered tensor product of factors of three kinds:
truncated boson modes, discrete internal levels, and uniform momentum
grids. Composite indices are row-major with the *last* factor varying
fastest, which is exactly the ordering produced by ``numpy.kron`` applied
left to right. All operators are dense complex128 matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "BosonMode",
    "InternalLevels",
    "MomentumGrid",
    "HilbertSpace",
    "make_space",
    "Operator",
    "DensityMatrix",
    "embed",
    "destroy",
    "ModeOperators",
    "mode_operators",
    "GridOperators",
    "grid_operators",
    "matrix_exponential",
    "expectation",
    "commutator",
    "frob_norm",
    "max_abs",
    "herm_defect",
    "random_density_matrix",
]

# Validation tolerances for density matrices.
HERM_TOL = 1e-9
TRACE_TOL = 1e-9
EIG_TOL = -1e-8


@dataclass(frozen=True)
class BosonMode:
    """Harmonic mode truncated to ``levels`` Fock states (0 .. levels-1)."""

    levels: int

    @property
    def dim(self) -> int:
        return self.levels


@dataclass(frozen=True)
class InternalLevels:
    """Discrete internal degree of freedom with ``levels`` states."""

    levels: int

    @property
    def dim(self) -> int:
        return self.levels


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform momentum grid p_j = p_min + j*dp, j = 0 .. points-1."""

    points: int
    p_min: float
    dp: float

    @property
    def dim(self) -> int:
        return self.points

    @property
    def momenta(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.points)


Factor = BosonMode | InternalLevels | MomentumGrid


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of factors; index of the last factor is fastest."""

    factors: tuple

    @property
    def dim(self) -> int:
        return math.prod(f.dim for f in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(f.dim for f in self.factors)

    def __eq__(self, other):
        return isinstance(other, HilbertSpace) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)


def make_space(*factors) -> HilbertSpace:
    """Validate factors and assemble a :class:`HilbertSpace`.

    Boson modes and momentum grids need dimension >= 2; a set of internal
    levels may be a single state. Momentum grids need a positive spacing.
    """
    if not factors:
        raise ValueError("a Hilbert space needs at least one factor")
    for k, f in enumerate(factors):
        if isinstance(f, (BosonMode, MomentumGrid)):
            if f.dim < 2:
                raise ValueError(f"factor {k}: dimension must be >= 2, got {f.dim}")
        elif isinstance(f, InternalLevels):
            if f.dim < 1:
                raise ValueError(f"factor {k}: needs at least one level")
        else:
            raise TypeError(f"factor {k}: unknown factor type {type(f).__name__}")
        if isinstance(f, MomentumGrid) and not f.dp > 0:
            raise ValueError(f"factor {k}: grid spacing must be positive, got {f.dp}")
    return HilbertSpace(tuple(factors))


def _as_matrix(m, dim):
    a = np.asarray(m, dtype=np.complex128)
    if a.shape != (dim, dim):
        raise ValueError(f"matrix shape {a.shape} does not match space dimension {dim}")
    return a


@dataclass(frozen=True)
class Operator:
    """Dense operator on a :class:`HilbertSpace`.

    The stored matrix is a locked copy; arithmetic returns new operators.
    """

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = _as_matrix(self.matrix, self.space.dim).copy()
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def _check(self, other):
        if self.space != other.space:
            raise ValueError("operators live on different spaces")

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other):
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


class DensityMatrix(Operator):
    """Operator validated as a physical state.

    Hermiticity defect below ``HERM_TOL`` (max entry), trace within
    ``TRACE_TOL`` of one, and smallest eigenvalue above ``EIG_TOL``.
    """

    def __post_init__(self):
        super().__post_init__()
        m = self.matrix
        d = herm_defect(m)
        if d > HERM_TOL:
            raise ValueError(f"state is not Hermitian (defect {d:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"state trace {tr!r} is not 1 within {TRACE_TOL}")
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
        if lo < EIG_TOL:
            raise ValueError(f"state has eigenvalue {lo:.3e} below {EIG_TOL}")

    @classmethod
    def from_ket(cls, space: HilbertSpace, ket) -> "DensityMatrix":
        v = np.asarray(ket, dtype=np.complex128).reshape(-1)
        if v.shape[0] != space.dim:
            raise ValueError("ket length does not match space dimension")
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        v = v / n
        return cls(space, np.outer(v, v.conj()))


def embed(space: HilbertSpace, factor_index: int, local) -> Operator:
    """Lift a single-factor matrix to the composite space.

    Equivalent to I ⊗ ... ⊗ local ⊗ ... ⊗ I with identities on every other
    factor, respecting the last-factor-fastest index convention.
    """
    if not 0 <= factor_index < len(space.factors):
        raise ValueError(f"factor index {factor_index} out of range")
    d = space.factors[factor_index].dim
    a = _as_matrix(local, d)
    before = math.prod(f.dim for f in space.factors[:factor_index])
    after = math.prod(f.dim for f in space.factors[factor_index + 1:])
    m = np.kron(np.kron(np.eye(before), a), np.eye(after))
    return Operator(space, m)


def destroy(n: int) -> np.ndarray:
    """Truncated lowering matrix: a|k> = sqrt(k)|k-1>."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(np.complex128)


@dataclass(frozen=True)
class ModeOperators:
    a: Operator
    adag: Operator
    x: Operator
    p: Operator
    n: Operator


def mode_operators(space: HilbertSpace, factor_index: int, beta: float,
                   hbar: float = 1.0) -> ModeOperators:
    """Ladder and quadrature operators for one boson-mode factor.

    The mode scale ``beta`` fixes the quadratures through
    x = hbar*sqrt(beta/2)(a + a†) and p = -i (a - a†)/sqrt(2 beta), so
    [x, p] = i*hbar on the interior of the truncated ladder.
    """
    f = space.factors[factor_index]
    if not isinstance(f, BosonMode):
        raise TypeError(f"factor {factor_index} is not a boson mode")
    if beta <= 0:
        raise ValueError("mode scale beta must be positive")
    a_loc = destroy(f.levels)
    a = embed(space, factor_index, a_loc)
    adag = a.dag()
    x = (hbar * math.sqrt(beta / 2.0)) * (a + adag)
    p = (-1j / math.sqrt(2.0 * beta)) * (a - adag)
    return ModeOperators(a=a, adag=adag, x=x, p=p, n=adag @ a)


@dataclass(frozen=True)
class GridOperators:
    """Momentum operator and cyclic shifts for one momentum-grid factor."""

    space: HilbertSpace
    factor_index: int
    grid: MomentumGrid
    p: Operator

    def shift(self, steps: int) -> Operator:
        """Cyclic permutation mapping grid index j to j + steps.

        Exactly unitary for any integer number of steps; the momentum
        carried by one step is ``grid.dp``.
        """
        n = self.grid.points
        s = int(steps) % n
        perm = np.zeros((n, n), dtype=np.complex128)
        perm[(np.arange(n) + s) % n, np.arange(n)] = 1.0
        return embed(self.space, self.factor_index, perm)


def grid_operators(space: HilbertSpace, factor_index: int) -> GridOperators:
    f = space.factors[factor_index]
    if not isinstance(f, MomentumGrid):
        raise TypeError(f"factor {factor_index} is not a momentum grid")
    p = embed(space, factor_index, np.diag(f.momenta.astype(np.complex128)))
    return GridOperators(space=space, factor_index=factor_index, grid=f, p=p)


def _is_hermitian(m, tol):
    return herm_defect(m) <= tol * max(1.0, max_abs(m))


def matrix_exponential(x):
    """exp(X) for a dense matrix or :class:`Operator`.

    Hermitian and anti-Hermitian arguments go through an eigendecomposition,
    which keeps exponentials of observables positive and exponentials of
    generators unitary to machine precision. Everything else falls back to
    scaling-and-squaring.
    """
    if isinstance(x, Operator):
        return Operator(x.space, matrix_exponential(x.matrix))
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix_exponential needs a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix_exponential got non-finite entries")
    tol = 1e-13
    if _is_hermitian(m, tol):
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        return (v * np.exp(w)) @ v.conj().T
    if _is_hermitian(1j * m, tol):
        h = 0.5j * (m - m.conj().T)  # m = -i h with h Hermitian
        w, v = np.linalg.eigh(h)
        return (v * np.exp(-1j * w)) @ v.conj().T
    return sla.expm(m)


def expectation(op, state) -> complex:
    """<O> for a ket vector or a density matrix (Tr[O rho])."""
    o = op.matrix if isinstance(op, Operator) else np.asarray(op)
    if isinstance(state, Operator):
        r = state.matrix
    else:
        r = np.asarray(state)
    if r.ndim == 1:
        return complex(np.vdot(r, o @ r))
    # Tr[O r] without forming the product matrix.
    return complex(np.sum(o * r.T))


def commutator(a, b):
    am = a.matrix if isinstance(a, Operator) else a
    bm = b.matrix if isinstance(b, Operator) else b
    return am @ bm - bm @ am


def frob_norm(m) -> float:
    m = m.matrix if isinstance(m, Operator) else m
    return float(np.linalg.norm(m))


def max_abs(m) -> float:
    m = m.matrix if isinstance(m, Operator) else m
    return float(np.abs(m).max()) if m.size else 0.0


def herm_defect(m) -> float:
    m = m.matrix if isinstance(m, Operator) else m
    return max_abs(m - m.conj().T)


def random_density_matrix(space: HilbertSpace, rng, support=None) -> DensityMatrix:
    """Random full-rank state: GUE draw shifted to positive and normalized.

    ``support`` optionally restricts the state to the given list of basis
    indices (everything outside stays exactly zero), which is how interior
    states with unpopulated boundary levels are produced.
    """
    dim = space.dim
    if support is None:
        idx = np.arange(dim)
    else:
        idx = np.asarray(support, dtype=int)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= dim:
            raise ValueError("support indices out of range")
    k = idx.size
    g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    h = 0.5 * (g + g.conj().T)
    lo = np.linalg.eigvalsh(h).min()
    h = h + (abs(lo) + 0.1 * math.sqrt(k)) * np.eye(k)
    h = h / np.trace(h).real
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[np.ix_(idx, idx)] = h
    return DensityMatrix(space, m)
