"""Exact evolution during the on-interval via a Hermitian eigendecomposition.

One O(d^3) factorization per coupling serves every interaction time:
U(tau) = V exp(-i lambda tau) V^dagger.
"""

from __future__ import annotations

import functools
import hashlib
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .fock import DEFAULT_TAIL_TOL, G, FockBasis, JointState, TruncationError
from .model import ModelParams, build_hamiltonian

log = logging.getLogger(__name__)

HERMITIAN_WARN = 1e-13
HERMITIAN_FAIL = 1e-8
MAX_ESCALATIONS = 2


class NonHermitianError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralCache:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_hash: str

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def propagator(self, tau: float) -> np.ndarray:
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * tau)) @ v.conj().T

    def energy(self, psi: np.ndarray) -> float:
        c = self.eigenvectors.conj().T @ psi
        return float(np.sum(self.eigenvalues * np.abs(c) ** 2))


def _fingerprint(h: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(h).tobytes()).hexdigest()[:16]


def diagonalize(h: np.ndarray, source_hash: str | None = None) -> SpectralCache:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    scale = max(1.0, np.max(np.abs(h)))
    if asym > HERMITIAN_FAIL * scale:
        raise NonHermitianError(f"matrix is not Hermitian (max |H - H^dagger| = {asym:.3e})")
    if asym > HERMITIAN_WARN:
        warnings.warn(f"symmetrizing Hamiltonian, correction {asym:.2e}", RuntimeWarning, stacklevel=2)
    h_sym = 0.5 * (h + h.conj().T)
    try:
        w, v = scipy.linalg.eigh(h_sym)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed to converge: {exc}") from exc
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralCache(w, v, source_hash or _fingerprint(h_sym))


def evolve(initial: JointState, cache: SpectralCache, tau: float,
           tail_tol: float | None = DEFAULT_TAIL_TOL) -> JointState:
    """|psi(tau)> = V exp(-i lambda tau) V^dagger |psi(0)>.

    ``tail_tol=None`` skips the truncation check.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if cache.dim != initial.basis.joint_dim:
        raise ValueError(f"dimension mismatch: cache {cache.dim}, state {initial.basis.joint_dim}")
    return evolve_series(initial, cache, [tau], tail_tol)[0]


def evolve_series(initial: JointState, cache: SpectralCache, taus,
                  tail_tol: float | None = DEFAULT_TAIL_TOL) -> list[JointState]:
    taus = np.asarray(taus, dtype=float).ravel()
    if taus.size and (taus[0] < 0 or np.any(np.diff(taus) < 0)):
        raise ValueError("taus must be non-negative and sorted ascending")
    if cache.dim != initial.basis.joint_dim:
        raise ValueError(f"dimension mismatch: cache {cache.dim}, state {initial.basis.joint_dim}")
    v = cache.eigenvectors
    c0 = v.conj().T @ initial.amplitudes
    phases = np.exp(-1j * np.outer(taus, cache.eigenvalues))
    vecs = (phases * c0) @ v.T
    out = []
    for tau, psi in zip(taus, vecs):
        if tau == 0.0:
            psi = initial.amplitudes
        # renormalize away rounding only; the propagator is unitary to ~1e-15
        state = JointState(initial.basis, psi / np.linalg.norm(psi), initial.time + float(tau))
        if tail_tol is not None:
            state.check_truncation(tail_tol)
        out.append(state)
    return out


@functools.lru_cache(maxsize=64)
def _cached_spectrum(omega, omega_a, g, n_max, rwa) -> SpectralCache:
    params = ModelParams(omega=omega, omega_a=omega_a, g=g, basis=FockBasis(n_max), rwa=rwa)
    key = f"omega={omega!r},omega_a={omega_a!r},g={g!r},n_max={n_max},rwa={rwa}"
    return diagonalize(build_hamiltonian(params), hashlib.sha256(key.encode()).hexdigest()[:16])


def spectral_cache(params: ModelParams) -> SpectralCache:
    """Diagonalized coupled Hamiltonian for ``params`` (memoized, tau-independent)."""
    return _cached_spectrum(float(params.omega), float(params.omega_a), float(params.g),
                            params.n_max, bool(params.rwa))


def simulate(params: ModelParams, initial: tuple[int, int] = (G, 0),
             tail_tol: float = DEFAULT_TAIL_TOL, escalate: bool = True) -> JointState:
    """State right after the coupling switches off at ``params.tau``.

    Starts from the product state |q, n> given by ``initial``.  If the top of
    the Fock space is populated beyond ``tail_tol``, n_max is doubled and the
    run repeated (at most twice) before giving up with TruncationError.
    """
    tries = MAX_ESCALATIONS if escalate else 0
    while True:
        psi0 = JointState.product(params.basis, *initial)
        try:
            return evolve(psi0, spectral_cache(params), params.tau, tail_tol)
        except TruncationError:
            if tries == 0:
                raise
            tries -= 1
            log.warning("tail population too large at n_max=%d, retrying with %d",
                        params.n_max, 2 * params.n_max)
            params = params.with_(n_max=2 * params.n_max)


def simulate_series(params: ModelParams, taus, initial: tuple[int, int] = (G, 0),
                    tail_tol: float | None = DEFAULT_TAIL_TOL) -> list[JointState]:
    psi0 = JointState.product(params.basis, *initial)
    return evolve_series(psi0, spectral_cache(params), taus, tail_tol)
