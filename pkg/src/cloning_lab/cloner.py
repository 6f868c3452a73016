"""Optimal universal N -> M cloning of qudits.

The channel is the symmetric-projection map

    T(rho) = D_sym(d, N) / D_sym(d, M) * S_M (rho (x) 1^(M - N)) S_M,

evaluated directly in occupation coordinates. :func:`clone_full` evaluates
the same map with dense ``d**M`` matrices and is kept as an oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from cloning_lab.qudit import check_dimension, eta_from_fidelity
from cloning_lab.symmetric import (
    MAX_FULL_DIM,
    SizeGuardError,
    SymmetricBasis,
    SymmetricState,
    _isometry,
    _occupations,
    guard_full_dim,
    multinomial,
    sym_dimension,
    symmetrizer,
)


@dataclass(frozen=True)
class ClonerSpec:
    d: int
    n: int
    m: int

    def __post_init__(self):
        check_dimension(self.d)
        if not 1 <= self.n <= self.m:
            raise ValueError(f"need 1 <= N <= M, got N={self.n}, M={self.m}")


def cloner_fidelity(spec: ClonerSpec) -> float:
    """Single-copy fidelity ``(M - N + N(M + d)) / (M(N + d))`` of the optimal cloner."""
    d, n, m = spec.d, spec.n, spec.m
    return (m - n + n * (m + d)) / (m * (n + d))


def cloner_fidelity_asymptotic(d: int, n: int) -> float:
    """Limit of :func:`cloner_fidelity` as ``M -> infinity``: ``(N + 1)/(N + d)``."""
    check_dimension(d)
    if n < 1:
        raise ValueError(f"need N >= 1, got {n}")
    return (n + 1) / (n + d)


def cloner_shrinking_factor(spec: ClonerSpec) -> float:
    """Bloch-vector contraction of the optimal cloner, ``N(M + d) / (M(N + d))``."""
    return eta_from_fidelity(cloner_fidelity(spec), spec.d)


def cloner_shrinking_factor_asymptotic(d: int, n: int) -> float:
    check_dimension(d)
    return n / (n + d)


@lru_cache(maxsize=64)
def _transfer_maps(d: int, n: int, m: int) -> np.ndarray:
    """Stack of ``G_k`` with ``<mo| S_M (|no> (x) |k>) = G_k[mo, no]``.

    ``k`` runs over occupations of the ``M - N`` extra copies and
    ``G_k[mo, no] = sqrt(mult(no) mult(k) / mult(mo))`` when ``mo = no + k``.
    """
    out_basis = SymmetricBasis(d, m)
    in_occ = _occupations(d, n)
    extra = _occupations(d, m - n)
    g = np.zeros((len(extra), out_basis.dim, len(in_occ)))
    for ki, k in enumerate(extra):
        mk = multinomial(k)
        for ni, no in enumerate(in_occ):
            mo = tuple(a + b for a, b in zip(no, k))
            g[ki, out_basis.index(mo), ni] = np.sqrt(multinomial(no) * mk / multinomial(mo))
    g.setflags(write=False)
    return g


def clone(state: SymmetricState, m: int, max_dim: int = MAX_FULL_DIM) -> SymmetricState:
    """Apply the optimal universal ``N -> M`` cloner to a symmetric ``N``-copy state.

    ``max_dim`` bounds the output symmetric dimension. Mixed symmetric inputs
    are accepted; the output is renormalized to unit trace.
    """
    spec = ClonerSpec(state.d, state.n, m)
    d, n = spec.d, spec.n
    if m == n:
        return state
    dim_out = sym_dimension(d, m)
    if dim_out > max_dim:
        raise SizeGuardError(f"symmetric dimension {dim_out} for M={m} exceeds limit {max_dim}")
    g = _transfer_maps(d, n, m)
    out = np.einsum("kab,bc,kdc->ad", g, state.matrix, g)
    out *= sym_dimension(d, n) / dim_out
    out /= np.trace(out).real
    out = 0.5 * (out + out.conj().T)
    return SymmetricState(SymmetricBasis(d, m), out)


def clone_full(state: SymmetricState, m: int) -> np.ndarray:
    """Dense ``d**M`` evaluation of the cloner (oracle path, size-guarded)."""
    spec = ClonerSpec(state.d, state.n, m)
    d, n = spec.d, spec.n
    guard_full_dim(d, m)
    rho_in = state.to_full()
    rho = np.kron(rho_in, np.eye(d ** (m - n)))
    s = symmetrizer(d, m)
    out = s @ rho @ s * (sym_dimension(d, n) / sym_dimension(d, m))
    return out / np.trace(out).real


def full_to_symmetric(rho_full, d: int, n: int) -> np.ndarray:
    """Compress a full operator supported on Sym^N into occupation coordinates."""
    v = _isometry(d, n)
    return v.T @ rho_full @ v
