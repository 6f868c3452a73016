"""Single-qudit linear algebra: states, generator bases, Bloch vectors, fidelity.

States are plain numpy arrays. A pure state is a unit complex vector of
length ``d``; a density operator is a ``d x d`` Hermitian, unit-trace,
positive semidefinite matrix. The helpers :func:`as_pure_state` and
:func:`as_density` validate and coerce.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

STATE_TOL = 1e-12
EIG_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when operands do not share a Hilbert-space dimension."""


class NotAStateError(ValueError):
    """Raised when an array does not represent a valid quantum state."""


def check_dimension(d: int) -> int:
    if int(d) != d or d < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


def as_pure_state(psi, tol: float = STATE_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size < 2:
        raise NotAStateError(f"pure state must be a vector of length >= 2, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise NotAStateError(f"pure state has norm {norm!r}, expected 1")
    return psi


def as_density(rho, tol: float = STATE_TOL, eig_tol: float = EIG_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotAStateError(f"density operator must be square, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise NotAStateError("density operator is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise NotAStateError(f"density operator has trace {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -eig_tol:
        raise NotAStateError(f"density operator has negative eigenvalue {lo!r}")
    return rho


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class GeneratorBasis:
    """Traceless Hermitian generators of SU(d) normalized to Tr(t_i t_j) = 2 delta_ij.

    ``generators`` has shape ``(d*d - 1, d, d)``. ``labels`` names each
    element as ``("s", j, k)``, ``("a", j, k)`` or ``("z", l)``.
    """

    d: int
    generators: np.ndarray
    labels: tuple

    def __len__(self) -> int:
        return self.generators.shape[0]


def build_generator_basis(d: int) -> GeneratorBasis:
    """Generalized Gell-Mann basis in canonical order.

    Order: symmetric off-diagonal pairs ``(j, k)``, ``j < k``, lexicographic;
    then antisymmetric pairs in the same order; then the ``d - 1`` diagonal
    generators ``sqrt(2/(l(l+1))) diag(1, ..., 1, -l, 0, ...)``. For ``d = 2``
    this is ``(sigma_x, sigma_y, sigma_z)``.
    """
    d = check_dimension(d)
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    mats = []
    labels = []
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1.0
        mats.append(m)
        labels.append(("s", j, k))
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        mats.append(m)
        labels.append(("a", j, k))
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * diag).astype(complex))
        labels.append(("z", l))
    return GeneratorBasis(d=d, generators=np.array(mats), labels=tuple(labels))


def pure_bloch_length(d: int) -> float:
    """Length of the Bloch vector of any pure state, ``sqrt(2(1 - 1/d))``."""
    d = check_dimension(d)
    return float(np.sqrt(2.0 * (1.0 - 1.0 / d)))


def bloch_from_density(rho, basis: GeneratorBasis) -> np.ndarray:
    """Coordinates ``lambda_i = Tr(rho t_i)``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (basis.d, basis.d):
        raise DimensionError(f"operator shape {rho.shape} does not match basis dimension {basis.d}")
    # Tr(rho t) = sum_ab rho_ab t_ba
    return np.einsum("ab,iba->i", rho, basis.generators).real


def density_from_bloch(lam, basis: GeneratorBasis, eig_tol: float = EIG_TOL) -> np.ndarray:
    """Rebuild ``I/d + (1/2) sum_i lambda_i t_i``.

    Raises :class:`NotAStateError` if the result is not positive semidefinite,
    i.e. the vector lies outside the state space. No correction is attempted.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(basis),):
        raise DimensionError(f"Bloch vector of length {lam.size} does not match basis of size {len(basis)}")
    d = basis.d
    rho = np.eye(d, dtype=complex) / d + 0.5 * np.einsum("i,iab->ab", lam, basis.generators)
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -eig_tol:
        raise NotAStateError(
            f"Bloch vector of length {np.linalg.norm(lam):.6g} gives eigenvalue {lo:.3e}; outside the state space"
        )
    return rho


def check_shrinking_factor(eta: float) -> float:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"shrinking factor must lie in [0, 1], got {eta!r}")
    return float(eta)


def apply_shrink(psi, eta: float) -> np.ndarray:
    """Return ``eta |psi><psi| + (1 - eta) I/d``."""
    psi = as_pure_state(psi)
    eta = check_shrinking_factor(eta)
    d = psi.size
    return eta * projector(psi) + (1.0 - eta) * np.eye(d) / d


def shrink_operator(rho, eta: float) -> np.ndarray:
    """Depolarize a density operator: ``eta rho + (1 - eta) I/d``. No range check on eta."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    return eta * rho + (1.0 - eta) * np.eye(d) / d


def fidelity_pure(psi, rho) -> float:
    """Overlap ``<psi|rho|psi>`` of a pure reference state with an operator."""
    psi = as_pure_state(psi)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (psi.size, psi.size):
        raise DimensionError(f"state of dimension {psi.size} against operator of shape {rho.shape}")
    return float(np.vdot(psi, rho @ psi).real)


def fidelity_from_eta(eta: float, d: int) -> float:
    """Pure-state fidelity of a shrink map: ``(1 + (d - 1) eta) / d``."""
    d = check_dimension(d)
    if not -1.0 / (d - 1) - 1e-12 <= eta <= 1.0 + 1e-12:
        raise ValueError(f"shrinking factor {eta!r} out of range for d={d}")
    return (1.0 + (d - 1) * eta) / d


def eta_from_fidelity(fidelity: float, d: int) -> float:
    """Inverse of :func:`fidelity_from_eta`."""
    d = check_dimension(d)
    if not -1e-12 <= fidelity <= 1.0 + 1e-12:
        raise ValueError(f"fidelity must lie in [0, 1], got {fidelity!r}")
    return (d * fidelity - 1.0) / (d - 1)


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def haar_random_states(d: int, size: int, rng=None) -> np.ndarray:
    """``size`` Haar-distributed pure states as rows of a ``(size, d)`` array.

    Normalized i.i.d. complex Gaussian vectors are distributed according to
    the unitarily invariant measure.
    """
    d = check_dimension(d)
    gen = _rng(rng)
    z = gen.standard_normal((size, d)) + 1j * gen.standard_normal((size, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_random_state(d: int, rng=None) -> np.ndarray:
    return haar_random_states(d, 1, rng)[0]


def random_density(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Random mixed state ``G G^dag / Tr`` from a complex Ginibre matrix."""
    d = check_dimension(d)
    gen = _rng(rng)
    r = d if rank is None else rank
    g = gen.standard_normal((d, r)) + 1j * gen.standard_normal((d, r))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def overlap_moment(d: int, k: int) -> float:
    """Haar average of ``|<phi|psi>|^(2k)``, equal to ``1 / C(k + d - 1, k)``."""
    d = check_dimension(d)
    if k < 0:
        raise ValueError(f"moment order must be >= 0, got {k}")
    return 1.0 / comb(k + d - 1, k)
