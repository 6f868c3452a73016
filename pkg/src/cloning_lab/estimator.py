"""Finite covariant POVMs for estimating a pure qudit state from N copies.

Every POVM here has rank-one elements ``E_mu = c_mu |psi_mu^N><psi_mu^N|``
on the symmetric subspace, where ``psi_mu`` is the candidate announced on
outcome ``mu``. Completeness on Sym^N fixes ``sum_mu c_mu = D_sym(d, N)``
and therefore the Haar-averaged fidelity. Input-independent fidelity needs
the normalized weights to also resolve the identity on Sym^(N+1)
(a weighted (N+1)-design); :func:`moment_residual` measures that.

Two constructions are provided:

* :func:`build_covariant_povm` solves for nonnegative weights over an
  arbitrary frame.
* :func:`design_povm` uses an exact cubature frame (Gauss-Jacobi nodes for
  the populations times a uniform phase grid) whose weights are known in
  closed form.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import nnls
from scipy.special import roots_jacobi

from cloning_lab.qudit import (
    DimensionError,
    _rng,
    as_pure_state,
    build_generator_basis,
    check_dimension,
    haar_random_states,
    overlap_moment,
)
from cloning_lab.symmetric import SymmetricState, embed_product_states, sym_dimension

COMPLETENESS_TOL = 1e-8
MC_CHUNK = 4096


class PovmInfeasibleError(ValueError):
    """No nonnegative weights over the frame resolve the identity to tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Povm:
    """Rank-one POVM on Sym^N(C^d).

    Attributes:
        d: single-system dimension.
        n: number of copies measured.
        candidates: ``(m, d)`` array; row ``mu`` is the announced estimate.
        weights: ``(m,)`` array of ``c_mu``.
    """

    d: int
    n: int
    candidates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        cands = np.atleast_2d(np.asarray(self.candidates, dtype=complex))
        w = np.asarray(self.weights, dtype=float).ravel()
        if cands.shape[1] != self.d:
            raise DimensionError(f"candidates of dimension {cands.shape[1]} for d={self.d}")
        if len(w) != len(cands):
            raise ValueError(f"{len(w)} weights for {len(cands)} candidates")
        cands.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    def embedded(self, copies: int | None = None) -> np.ndarray:
        return embed_product_states(self.candidates, self.n if copies is None else copies)

    def elements(self) -> np.ndarray:
        """``(m, D, D)`` stack of POVM elements in symmetric coordinates."""
        e = self.embedded()
        return self.weights[:, None, None] * np.einsum("ma,mb->mab", e, e.conj())

    def completeness_operator(self) -> np.ndarray:
        e = self.embedded()
        return (e.T * self.weights) @ e.conj()


@dataclass(frozen=True)
class PovmReport:
    min_weight: float
    completeness_residual: float
    weight_sum: float
    expected_weight_sum: int
    moment_residual: float
    tol: float = COMPLETENESS_TOL

    @property
    def passed(self) -> bool:
        return self.min_weight >= 0.0 and self.completeness_residual <= self.tol

    @property
    def universal(self) -> bool:
        """True when the frame also resolves the (N+1)-copy identity."""
        return self.passed and self.moment_residual <= self.tol


@dataclass(frozen=True)
class FidelityEstimate:
    mean: float
    stderr: float
    samples: int  # 0 for exact evaluation


@dataclass(frozen=True)
class ShrinkReport:
    eta_mean: float
    eta_spread: float
    probes: int
    etas: tuple
    eta_stderr: float = 0.0


# -- frames -----------------------------------------------------------------


def qubit_from_bloch(vec) -> np.ndarray:
    x, y, z = np.asarray(vec, dtype=float) / np.linalg.norm(vec)
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def pauli_frame() -> np.ndarray:
    """The six eigenstates of sigma_x, sigma_y, sigma_z (order +x, -x, +y, -y, +z, -z)."""
    axes = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    return np.array([qubit_from_bloch(a) for a in axes])


def tetrahedral_frame() -> np.ndarray:
    """Four qubit states whose Bloch vectors form a regular tetrahedron."""
    axes = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    return np.array([qubit_from_bloch(a) for a in axes])


def haar_frame(d: int, n: int, rng=None, size: int | None = None) -> np.ndarray:
    """Haar-random frame, by default ``4 D_sym(d, n)**2`` states."""
    if size is None:
        size = 4 * sym_dimension(d, n) ** 2
    return haar_random_states(d, size, rng)


def cubature_design(d: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Weighted complex projective design of the given degree.

    Populations ``p = |psi_k|**2`` follow stick-breaking ``p_k = x_k prod_{j<k}(1 - x_j)``
    with each ``x_k`` on a Gauss-Jacobi rule for the Beta(1, d-k-1) density;
    relative phases run over the ``(degree + 1)``-th roots of unity. Every
    moment ``sum_mu w_mu |psi_mu><psi_mu|**(x)t`` with ``t <= degree`` then
    equals its Haar value exactly.

    Returns:
        ``(states, weights)`` with weights summing to 1.
    """
    d = check_dimension(d)
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    npts = degree // 2 + 1
    nodes, node_w = [], []
    for k in range(d - 1):
        # density (1 - x)**(d - k - 2) on [0, 1]
        x, w = roots_jacobi(npts, d - k - 2, 0)
        nodes.append((x + 1.0) / 2.0)
        node_w.append(w / w.sum())
    roots = np.exp(2j * np.pi * np.arange(degree + 1) / (degree + 1))
    phase_sets = np.array(list(itertools.product(range(degree + 1), repeat=d - 1)))
    phases = np.hstack([np.ones((len(phase_sets), 1)), roots[phase_sets]])

    states, weights = [], []
    for idx in itertools.product(range(npts), repeat=d - 1):
        pops = np.empty(d)
        rest = 1.0
        w = 1.0
        for k, i in enumerate(idx):
            pops[k] = rest * nodes[k][i]
            rest *= 1.0 - nodes[k][i]
            w *= node_w[k][i]
        pops[-1] = rest
        amps = np.sqrt(np.clip(pops, 0.0, None))
        states.append(phases * amps)
        weights.append(np.full(len(phases), w / len(phases)))
    return np.vstack(states), np.concatenate(weights)


# -- construction and validation -------------------------------------------


def _completeness_system(d: int, n: int, frame: np.ndarray):
    e = embed_product_states(frame, n)
    cols = np.einsum("ma,mb->mab", e, e.conj()).reshape(len(frame), -1)
    dim = e.shape[1]
    a = np.vstack([cols.real.T, cols.imag.T])
    b = np.concatenate([np.eye(dim).ravel(), np.zeros(dim * dim)])
    return a, b


def build_covariant_povm(d: int, n: int, frame, tol: float = COMPLETENESS_TOL, order: int | None = None) -> Povm:
    """Solve for nonnegative weights making the frame a POVM on Sym^N(C^d).

    The minimum-norm solution of the completeness equations is used when it
    is nonnegative (it respects any symmetry of the frame); otherwise
    nonnegative least squares picks a feasible vertex.

    With ``order = t > N`` the weights are solved to resolve the identity on
    Sym^t instead and rescaled to N copies; ``order = N + 1`` yields an
    input-independent estimator. The frame must then hold at least
    ``D_sym(d, t)**2`` states.

    Raises:
        PovmInfeasibleError: completeness residual above ``tol``; carries the
            achieved residual so the caller can enlarge the frame.
    """
    d = check_dimension(d)
    frame = np.atleast_2d(np.asarray(frame, dtype=complex))
    if frame.shape[1] != d:
        raise DimensionError(f"frame of dimension {frame.shape[1]} for d={d}")
    order = n if order is None else order
    if order < n:
        raise ValueError(f"order {order} is below the copy number {n}")
    dim = sym_dimension(d, order)
    if len(frame) < dim**2:
        raise ValueError(f"frame has {len(frame)} states; at least {dim ** 2} are needed for order {order}")
    a, b = _completeness_system(d, order, frame)
    weights, *_ = np.linalg.lstsq(a, b, rcond=None)
    if weights.min() < -1e-12 or np.linalg.norm(a @ weights - b) > tol:
        weights, _ = nnls(a, b, maxiter=50 * a.shape[1])
    weights = np.clip(weights, 0.0, None)
    residual = float(np.linalg.norm(a @ weights - b))
    if residual > tol:
        raise PovmInfeasibleError(
            f"no nonnegative weights over {len(frame)} frame states; residual {residual:.3e}", residual
        )
    keep = weights > 0.0
    weights = weights[keep] * (sym_dimension(d, n) / dim)
    return Povm(d=d, n=n, candidates=frame[keep], weights=weights)


def design_povm(d: int, n: int, degree: int | None = None) -> Povm:
    """POVM on N copies from :func:`cubature_design`, degree ``N + 1`` by default.

    Degree ``N + 1`` makes the estimation fidelity independent of the input.
    """
    degree = n + 1 if degree is None else degree
    if degree < n:
        raise ValueError(f"degree {degree} cannot resolve the identity on {n} copies")
    states, w = cubature_design(d, degree)
    return Povm(d=d, n=n, candidates=states, weights=sym_dimension(d, n) * w)


def moment_residual(povm: Povm, order: int | None = None) -> float:
    """Frobenius distance of ``D_t sum_mu (c_mu / sum c) P_mu^t`` from the identity on Sym^t."""
    order = povm.n + 1 if order is None else order
    e = embed_product_states(povm.candidates, order)
    w = povm.weights / povm.weights.sum()
    dim = e.shape[1]
    m = dim * (e.T * w) @ e.conj()
    return float(np.linalg.norm(m - np.eye(dim)))


def validate_povm(povm: Povm, tol: float = COMPLETENESS_TOL) -> PovmReport:
    """Report PSD margin, completeness residual and weight sum. Never raises on failure."""
    dim = sym_dimension(povm.d, povm.n)
    residual = float(np.linalg.norm(povm.completeness_operator() - np.eye(dim)))
    return PovmReport(
        min_weight=float(povm.weights.min()),
        completeness_residual=residual,
        weight_sum=float(povm.weights.sum()),
        expected_weight_sum=dim,
        moment_residual=moment_residual(povm),
        tol=tol,
    )


# -- measurement ------------------------------------------------------------


def _overlaps2(povm: Povm, psis) -> np.ndarray:
    """``|<psi_mu|psi>|**2`` with shape ``(len(psis), m)``."""
    psis = np.atleast_2d(np.asarray(psis, dtype=complex))
    return np.abs(psis.conj() @ povm.candidates.T) ** 2


def outcome_distribution(povm: Povm, psi) -> np.ndarray:
    """``p_mu = c_mu |<psi_mu|psi>|**(2N)`` for N copies of ``psi``."""
    psi = as_pure_state(psi)
    if psi.size != povm.d:
        raise DimensionError(f"state of dimension {psi.size} for POVM on d={povm.d}")
    return povm.weights * _overlaps2(povm, psi)[0] ** povm.n


def state_outcome_distribution(povm: Povm, state: SymmetricState) -> np.ndarray:
    """``p_mu = Tr(E_mu rho)`` for a general symmetric N-copy state."""
    if (state.d, state.n) != (povm.d, povm.n):
        raise DimensionError(f"state on (d={state.d}, N={state.n}) for POVM on (d={povm.d}, N={povm.n})")
    e = povm.embedded()
    return povm.weights * np.einsum("ma,ab,mb->m", e.conj(), state.matrix, e).real


def sample_outcomes(povm: Povm, psi, size: int, rng=None) -> np.ndarray:
    """Outcome indices drawn by inverting the cumulative distribution in frame order."""
    p = outcome_distribution(povm, psi)
    cdf = np.cumsum(p)
    u = _rng(rng).random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(p) - 1)


def sample_outcome(povm: Povm, psi, rng=None) -> tuple[np.ndarray, float]:
    """Draw one outcome; returns the announced candidate and its weight."""
    mu = int(sample_outcomes(povm, psi, 1, rng)[0])
    return povm.candidates[mu], float(povm.weights[mu])


def estimation_fidelity_exact(povm: Povm, psi) -> float:
    """``sum_mu p_mu(psi) |<psi|psi_mu>|**2`` without sampling."""
    psi = as_pure_state(psi)
    return float(np.sum(povm.weights * _overlaps2(povm, psi)[0] ** (povm.n + 1)))


def _fidelity_batch(povm: Povm, psis: np.ndarray) -> np.ndarray:
    return (_overlaps2(povm, psis) ** (povm.n + 1)) @ povm.weights


def _merge(a, b):
    """Chan et al. pairwise merge of (count, mean, M2) accumulators."""
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, sa + sb + delta**2 * na * nb / n


def average_fidelity(
    povm: Povm, mode: str = "exact", samples: int = 100_000, rng=None, workers: int = 1
) -> FidelityEstimate:
    """Haar-averaged estimation fidelity.

    ``mode="exact"`` integrates termwise, ``sum_mu c_mu / C(N + d, N + 1)``.
    ``mode="monte-carlo"`` averages :func:`estimation_fidelity_exact` over
    ``samples`` Haar inputs in fixed-size chunks, each with its own child
    seed, so the result does not depend on ``workers``.
    """
    if mode == "exact":
        return FidelityEstimate(float(povm.weights.sum() * overlap_moment(povm.d, povm.n + 1)), 0.0, 0)
    if mode != "monte-carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 2:
        raise ValueError("Monte Carlo needs at least 2 samples")
    seed = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    sizes = [MC_CHUNK] * (samples // MC_CHUNK) + ([samples % MC_CHUNK] if samples % MC_CHUNK else [])
    children = seed.spawn(len(sizes))

    def job(args):
        size, child = args
        f = _fidelity_batch(povm, haar_random_states(povm.d, size, np.random.default_rng(child)))
        return size, f.mean(), ((f - f.mean()) ** 2).sum()

    jobs = list(zip(sizes, children))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, jobs))
    else:
        parts = [job(j) for j in jobs]
    acc = parts[0]
    for part in parts[1:]:
        acc = _merge(acc, part)
    n, mean, m2 = acc
    return FidelityEstimate(float(mean), float(np.sqrt(m2 / (n - 1) / n)), n)


# -- measure-and-prepare channel --------------------------------------------


def measure_prepare(povm: Povm, state, preparations=None) -> np.ndarray:
    """Single-system output of measuring ``state`` and preparing the candidate.

    ``state`` is a pure single-system vector (measured on N copies) or a
    :class:`SymmetricState` on N copies. ``preparations`` optionally replaces
    each candidate projector with an arbitrary ``(m, d, d)`` stack.
    """
    if isinstance(state, SymmetricState):
        p = state_outcome_distribution(povm, state)
    else:
        p = outcome_distribution(povm, state)
    if preparations is None:
        c = povm.candidates
        return np.einsum("m,ma,mb->ab", p, c, c.conj())
    return np.einsum("m,mab->ab", p, np.asarray(preparations, dtype=complex))


def _fit_eta(lam_out: np.ndarray, lam_in: np.ndarray) -> float:
    return float(lam_out @ lam_in / (lam_in @ lam_in))


def measure_prepare_channel_eta(
    povm: Povm,
    probes,
    mode: str = "exact",
    shots: int = 100_000,
    rng=None,
    preparations=None,
) -> ShrinkReport:
    """Fit the shrinking factor of the measure-and-prepare channel.

    For each probe the output Bloch vector is projected onto the input Bloch
    vector. ``mode="sampled"`` replaces the exact output with the average of
    ``shots`` prepared candidates and reports the pooled standard error.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=complex))
    if len(probes) < 5:
        raise ValueError(f"need at least 5 probes, got {len(probes)}")
    basis = build_generator_basis(povm.d)
    gens = basis.generators
    cand_bloch = np.einsum("ma,iab,mb->mi", povm.candidates.conj(), gens, povm.candidates).real
    prep_bloch = None
    if preparations is not None:
        prep_bloch = np.einsum("mab,iba->mi", np.asarray(preparations, dtype=complex), gens).real
    gen = _rng(rng)
    etas, variances = [], []
    for psi in probes:
        psi = as_pure_state(psi)
        lam_in = np.einsum("a,iab,b->i", psi.conj(), gens, psi).real
        if lam_in @ lam_in < 1e-24:
            raise ValueError("probe has zero Bloch vector")
        table = cand_bloch if prep_bloch is None else prep_bloch
        if mode == "exact":
            lam_out = outcome_distribution(povm, psi) @ table
            etas.append(_fit_eta(lam_out, lam_in))
        elif mode == "sampled":
            mus = sample_outcomes(povm, psi, shots, gen)
            per_shot = table[mus] @ lam_in / (lam_in @ lam_in)
            etas.append(float(per_shot.mean()))
            variances.append(per_shot.var(ddof=1) / shots)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    etas = np.array(etas)
    stderr = float(np.sqrt(np.sum(variances)) / len(etas)) if variances else 0.0
    return ShrinkReport(
        eta_mean=float(etas.mean()),
        eta_spread=float(etas.max() - etas.min()),
        probes=len(etas),
        etas=tuple(etas.tolist()),
        eta_stderr=stderr,
    )


def estimation_shrinking_factor(d: int, n: int) -> float:
    """Closed-form shrinking factor ``N / (N + d)`` of optimal estimation."""
    check_dimension(d)
    return n / (n + d)


def optimal_estimation_fidelity(d: int, n: int) -> float:
    """``(N + 1) / (N + d)``; equal to ``D_sym(d, N) / C(N + d, N + 1)``."""
    return comb(n + d - 1, n) / comb(n + d, n + 1)
