"""The symmetric subspace of N qudits in occupation-number coordinates.

A basis vector of Sym^N(C^d) is labelled by an occupation vector ``n`` with
``sum(n) == N``; it is the normalized uniform superposition of all product
basis strings containing level ``k`` exactly ``n[k]`` times. Basis vectors
are ordered lexicographically decreasing, so for ``d = 2, N = 2`` the order
is ``(2, 0), (1, 1), (0, 2)``.

Multi-copy states live in these ``C(N + d - 1, N)``-dimensional coordinates.
The full ``d**N`` representation is only built on request, behind a size
guard, and serves as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np

from cloning_lab.qudit import (
    EIG_TOL,
    STATE_TOL,
    DimensionError,
    NotAStateError,
    as_pure_state,
    check_dimension,
)

MAX_FULL_DIM = 4096


class SizeGuardError(ValueError):
    """Raised when a dense full-space object would exceed the desk-scale limit."""


class FrameRankError(ValueError):
    """Raised when a frame cannot reproduce a target operator to tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def sym_dimension(d: int, n: int) -> int:
    """Dimension ``C(n + d - 1, n)`` of the symmetric subspace."""
    check_dimension(d)
    if n < 0:
        raise ValueError(f"copy number must be >= 0, got {n}")
    return comb(n + d - 1, n)


def multinomial(counts) -> int:
    return factorial(sum(counts)) // prod(factorial(c) for c in counts)


def _occupations(d: int, n: int) -> list[tuple[int, ...]]:
    if d == 1:
        return [(n,)]
    out = []
    for first in range(n, -1, -1):
        out.extend((first,) + rest for rest in _occupations(d - 1, n - first))
    return out


def guard_full_dim(d: int, n: int) -> int:
    full = d**n
    if full > MAX_FULL_DIM:
        raise SizeGuardError(f"d**N = {d}**{n} = {full} exceeds the dense limit {MAX_FULL_DIM}")
    return full


@dataclass(frozen=True)
class SymmetricBasis:
    """Canonical occupation-number basis of Sym^N(C^d)."""

    d: int
    n: int
    occupations: tuple = field(init=False, repr=False)

    def __post_init__(self):
        check_dimension(self.d)
        if self.n < 0:
            raise ValueError(f"copy number must be >= 0, got {self.n}")
        object.__setattr__(self, "occupations", tuple(_occupations(self.d, self.n)))

    def __len__(self) -> int:
        return len(self.occupations)

    @property
    def dim(self) -> int:
        return len(self.occupations)

    def index(self, occupation) -> int:
        return _index_map(self.d, self.n)[tuple(occupation)]

    def isometry(self) -> np.ndarray:
        """Dense ``(d**N, D)`` matrix whose columns are the basis vectors in the product basis."""
        return _isometry(self.d, self.n).copy()


@lru_cache(maxsize=None)
def _index_map(d: int, n: int) -> dict:
    return {occ: i for i, occ in enumerate(_occupations(d, n))}


@lru_cache(maxsize=64)
def _isometry(d: int, n: int) -> np.ndarray:
    full = guard_full_dim(d, n)
    occs = _occupations(d, n)
    index = _index_map(d, n)
    digits = np.array(np.unravel_index(np.arange(full), (d,) * n)).T if n else np.zeros((1, 0), int)
    v = np.zeros((full, len(occs)))
    for row, string in enumerate(digits):
        occ = tuple(np.bincount(string, minlength=d)) if n else (0,) * d
        v[row, index[occ]] = 1.0
    v /= np.sqrt(v.sum(axis=0))
    v.setflags(write=False)
    return v


@lru_cache(maxsize=None)
def _hop_table(d: int, n: int):
    """Matrix elements of ``a_j^dag a_i`` between symmetric basis states.

    Returns arrays ``(i, j, src, dst, amp)`` with
    ``<dst| a_j^dag a_i |src> = amp``.
    """
    occs = _occupations(d, n)
    index = _index_map(d, n)
    rows = []
    for src, occ in enumerate(occs):
        for i in range(d):
            if occ[i] == 0:
                continue
            for j in range(d):
                if i == j:
                    rows.append((i, i, src, src, float(occ[i])))
                    continue
                new = list(occ)
                new[i] -= 1
                new[j] += 1
                rows.append((i, j, src, index[tuple(new)], np.sqrt(occ[i] * (occ[j] + 1.0))))
    if not rows:
        return tuple(np.zeros(0, int) for _ in range(4)) + (np.zeros(0),)
    cols = list(zip(*rows))
    return tuple(np.array(c, dtype=int) for c in cols[:4]) + (np.array(cols[4]),)


@dataclass(frozen=True)
class SymmetricState:
    """Density operator supported on the symmetric subspace, in occupation coordinates.

    Validated on construction: Hermitian, unit trace, eigenvalues >= -1e-10.
    Operators with support outside the symmetric subspace cannot be expressed
    in these coordinates at all.
    """

    basis: SymmetricBasis
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dim = self.basis.dim
        if m.shape != (dim, dim):
            raise DimensionError(f"matrix shape {m.shape} does not match symmetric dimension {dim}")
        if np.abs(m - m.conj().T).max() > STATE_TOL:
            raise NotAStateError("symmetric state is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise NotAStateError(f"symmetric state has trace {tr!r}")
        lo = np.linalg.eigvalsh(m).min()
        if lo < -EIG_TOL:
            raise NotAStateError(f"symmetric state has negative eigenvalue {lo!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def n(self) -> int:
        return self.basis.n

    @classmethod
    def from_vector(cls, vec, d: int, n: int) -> "SymmetricState":
        vec = np.asarray(vec, dtype=complex)
        return cls(SymmetricBasis(d, n), np.outer(vec, vec.conj()))

    @classmethod
    def product(cls, psi, n: int) -> "SymmetricState":
        psi = as_pure_state(psi)
        return cls.from_vector(embed_product_state(psi, n), psi.size, n)

    @classmethod
    def maximally_mixed(cls, d: int, n: int) -> "SymmetricState":
        dim = sym_dimension(d, n)
        return cls(SymmetricBasis(d, n), np.eye(dim) / dim)

    def to_full(self) -> np.ndarray:
        """Dense ``d**N x d**N`` operator in the product basis (size-guarded)."""
        v = _isometry(self.d, self.n)
        return v @ self.matrix @ v.T


def embed_product_states(psis, n: int) -> np.ndarray:
    """Symmetric coordinates of ``psi**(x)n`` for each row of ``psis``.

    The coordinate for occupation ``occ`` is
    ``sqrt(multinomial(n; occ)) * prod_k psi_k**occ_k``.
    """
    psis = np.atleast_2d(np.asarray(psis, dtype=complex))
    d = psis.shape[1]
    occs = np.array(_occupations(d, n))
    coef = np.sqrt([multinomial(o) for o in occs])
    # (m, 1, d) ** (D, d) -> (m, D, d)
    powers = psis[:, None, :] ** occs[None, :, :]
    return coef * np.prod(powers, axis=2)


def embed_product_state(psi, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"copy number must be >= 1, got {n}")
    psi = as_pure_state(psi)
    return embed_product_states(psi, n)[0]


def tensor_power(psi, n: int) -> np.ndarray:
    """Full product-basis vector of ``psi**(x)n`` (size-guarded)."""
    psi = np.asarray(psi, dtype=complex)
    guard_full_dim(psi.size, n)
    out = np.ones(1, dtype=complex)
    for _ in range(n):
        out = np.kron(out, psi)
    return out


def symmetrizer(d: int, n: int) -> np.ndarray:
    """Projector onto Sym^N(C^d) in the full ``d**N`` product basis.

    Equal to the average of the ``N!`` subsystem permutations; built here as
    ``V V^T`` from the occupation-basis isometry.
    """
    check_dimension(d)
    if n < 1:
        raise ValueError(f"copy number must be >= 1, got {n}")
    v = _isometry(d, n)
    return v @ v.T


def reduce_single_particle(state: SymmetricState) -> np.ndarray:
    """One-particle reduced density operator of a symmetric state.

    Uses ``rho_1[i, j] = Tr(rho a_j^dag a_i) / N`` with bosonic hopping
    operators in occupation coordinates, so no ``d**N`` object is formed.
    """
    return reduce_operator(state.matrix, state.d, state.n)


def reduce_operator(matrix, d: int, n: int) -> np.ndarray:
    """Single-particle reduction of any operator in symmetric coordinates (linear)."""
    if n < 1:
        raise ValueError("cannot reduce a zero-copy state")
    matrix = np.asarray(matrix, dtype=complex)
    i, j, src, dst, amp = _hop_table(d, n)
    out = np.zeros((d, d), dtype=complex)
    np.add.at(out, (i, j), amp * matrix[src, dst])
    return out / n


def partial_trace_full(rho_full, d: int, n: int, keep: int = 0) -> np.ndarray:
    """Reduce a full ``d**N`` operator to subsystem ``keep`` by tracing out the rest."""
    t = np.asarray(rho_full).reshape((d,) * (2 * n))
    row = list(range(n))
    col = [n + k if k == keep else k for k in range(n)]
    return np.einsum(t, row + col, [keep, n + keep])


@dataclass(frozen=True)
class PseudoMixture:
    """Real, possibly negative, weights on product states ``|psi_i><psi_i|**(x)n``."""

    alphas: np.ndarray
    states: np.ndarray
    n: int
    residual: float = 0.0

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.alphas.sum())

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.alphas).sum())

    def operator(self) -> np.ndarray:
        """Rebuild ``sum_i alpha_i |psi_i^n><psi_i^n|`` in symmetric coordinates."""
        e = embed_product_states(self.states, self.n)
        return (e.T * self.alphas) @ e.conj()

    def single_particle(self) -> np.ndarray:
        return np.einsum("m,ma,mb->ab", self.alphas, self.states, self.states.conj())


def pseudo_mixture_decompose(state: SymmetricState, frame, tol: float = 1e-8) -> PseudoMixture:
    """Write a symmetric state as a real combination of product projectors.

    Solves the least-squares system ``sum_i alpha_i vec(P_i) = vec(rho)`` over
    the frame, with an extra row enforcing ``sum_i alpha_i = 1``. Raises
    :class:`FrameRankError` if the Frobenius residual exceeds ``tol``; the
    frame is never padded silently.
    """
    frame = np.atleast_2d(np.asarray(frame, dtype=complex))
    if frame.shape[1] != state.d:
        raise DimensionError(f"frame of dimension {frame.shape[1]} for state of dimension {state.d}")
    e = embed_product_states(frame, state.n)
    cols = np.einsum("ma,mb->mab", e, e.conj()).reshape(len(frame), -1)
    target = state.matrix.ravel()
    a = np.vstack([cols.real.T, cols.imag.T, np.ones((1, len(frame)))])
    b = np.concatenate([target.real, target.imag, [1.0]])
    alphas, *_ = np.linalg.lstsq(a, b, rcond=None)
    pm = PseudoMixture(alphas=alphas, states=frame, n=state.n)
    residual = float(np.linalg.norm(pm.operator() - state.matrix))
    pm = PseudoMixture(alphas=alphas, states=frame, n=state.n, residual=residual)
    if residual > tol or abs(pm.total_weight - 1.0) > tol:
        raise FrameRankError(
            f"frame of {len(frame)} states leaves residual {residual:.3e} "
            f"(needs >= {state.basis.dim ** 2} generic states)",
            residual,
        )
    return pm


def apply_pseudo_mixture_channel(pm: PseudoMixture, eta: float) -> np.ndarray:
    """Push each term through ``psi -> eta |psi><psi| + (1 - eta) I/d`` and sum."""
    d = pm.d
    return eta * pm.single_particle() + (1.0 - eta) * pm.total_weight * np.eye(d) / d
