"""Truncated Fock-space linear algebra for a qubit coupled to one field mode.

Joint states are stored with the qubit index varying slowest and the Fock
index fastest, so the joint basis vector |q, n> sits at position
``q * (n_max + 1) + n`` with q = 0 for |g> and q = 1 for |e>.

Sign convention: sigma_z |g> = +|g>, sigma_z |e> = -|e>.  With the free
qubit term -omega_a/2 sigma_z this makes |g> the lower level, so that
|g>|0> is the ground state of the uncoupled problem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gammaln

G, E = 0, 1

SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
# sigma_+ |g> = |e>, sigma_- |e> = |g>
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
IDENTITY_2 = np.eye(2, dtype=complex)

NORM_TOL = 1e-12
DEFAULT_TAIL_TOL = 1e-10
CONDITION_MIN_PROB = 1e-14


class TruncationError(RuntimeError):
    """Raised when too much population reaches the top of the Fock space."""

    def __init__(self, tail_mass: float, n_max: int, tol: float):
        self.tail_mass = tail_mass
        self.n_max = n_max
        self.tol = tol
        super().__init__(
            f"Fock truncation n_max={n_max} too small: tail population "
            f"{tail_mass:.3e} exceeds {tol:.1e}"
        )


class ConditioningError(ValueError):
    """Conditional field state undefined (measurement outcome has ~zero probability)."""


class FieldKind(str, Enum):
    UNCONDITIONAL = "unconditional"
    CONDITIONED_G = "conditioned_g"
    CONDITIONED_E = "conditioned_e"


@dataclass(frozen=True)
class FockBasis:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        """Field dimension n_max + 1."""
        return self.n_max + 1

    @property
    def joint_dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, qubit: int, n: int) -> int:
        if qubit not in (G, E) or not 0 <= n <= self.n_max:
            raise IndexError(f"|{qubit}, {n}> outside basis with n_max={self.n_max}")
        return qubit * self.dim + n


def annihilation_matrix(basis: FockBasis) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, basis.dim, dtype=float)), k=1).astype(complex)


def creation_matrix(basis: FockBasis) -> np.ndarray:
    return annihilation_matrix(basis).conj().T


def number_matrix(basis: FockBasis) -> np.ndarray:
    return np.diag(np.arange(basis.dim, dtype=float)).astype(complex)


def qubit_field_tensor(qubit_op, field_op) -> np.ndarray:
    """Kronecker product with the qubit as the slow index."""
    qubit_op = np.asarray(qubit_op)
    field_op = np.asarray(field_op)
    if qubit_op.shape != (2, 2):
        raise ValueError(f"qubit operator must be 2x2, got {qubit_op.shape}")
    if field_op.ndim != 2 or field_op.shape[0] != field_op.shape[1]:
        raise ValueError(f"field operator must be square, got {field_op.shape}")
    return np.kron(qubit_op, field_op)


def _complex_pairs(arr: np.ndarray) -> list:
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _from_pairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True, eq=False)
class JointState:
    """Pure qubit-field state; amplitudes laid out as (g, e) x (0..n_max)."""

    basis: FockBasis
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.joint_dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({self.basis.joint_dim},)"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |psi| = {norm!r}")
        if self.time < 0:
            raise ValueError("time must be >= 0")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, basis: FockBasis, qubit: int = G, n: int = 0) -> "JointState":
        amps = np.zeros(basis.joint_dim, dtype=complex)
        amps[basis.index(qubit, n)] = 1.0
        return cls(basis, amps)

    @classmethod
    def from_vector(cls, basis: FockBasis, vec, time: float = 0.0) -> "JointState":
        vec = np.asarray(vec, dtype=complex)
        return cls(basis, vec / np.linalg.norm(vec), time)

    @property
    def blocks(self) -> np.ndarray:
        """Amplitudes reshaped to (2, n_max + 1): row 0 is c_g phi_g, row 1 is c_e phi_e."""
        return self.amplitudes.reshape(2, self.basis.dim)

    def fock_populations(self) -> np.ndarray:
        return np.sum(np.abs(self.blocks) ** 2, axis=0)

    def tail_mass(self) -> float:
        """Population held in the two highest Fock levels."""
        return float(self.fock_populations()[-2:].sum())

    def check_truncation(self, tol: float = DEFAULT_TAIL_TOL) -> None:
        mass = self.tail_mass()
        if mass > tol:
            raise TruncationError(mass, self.basis.n_max, tol)

    def to_dict(self) -> dict:
        return {
            "basis": {"n_max": self.basis.n_max},
            "kind": "joint",
            "amplitudes": _complex_pairs(self.amplitudes),
            "time": float(self.time),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JointState":
        if data.get("kind", "joint") != "joint":
            raise ValueError(f"not a joint state document: kind={data.get('kind')!r}")
        return cls(FockBasis(int(data["basis"]["n_max"])), _from_pairs(data["amplitudes"]),
                   float(data.get("time", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "JointState":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class FieldState:
    """Density matrix of the field mode in the Fock basis."""

    basis: FockBasis
    matrix: np.ndarray
    kind: FieldKind = FieldKind.UNCONDITIONAL
    time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.shape != (self.basis.dim, self.basis.dim):
            raise ValueError(f"density matrix shape {rho.shape} does not match basis")
        herm_err = np.max(np.abs(rho - rho.conj().T))
        if herm_err > 1e-12:
            raise ValueError(f"density matrix not Hermitian (max error {herm_err:.2e})")
        if abs(np.trace(rho).real - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace {np.trace(rho).real!r} != 1")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)
        object.__setattr__(self, "kind", FieldKind(self.kind))

    @classmethod
    def pure(cls, basis: FockBasis, vec, kind=FieldKind.UNCONDITIONAL, time=0.0) -> "FieldState":
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(basis, np.outer(vec, vec.conj()), kind, time)

    @classmethod
    def fock(cls, basis: FockBasis, n: int) -> "FieldState":
        vec = np.zeros(basis.dim, dtype=complex)
        vec[n] = 1.0
        return cls.pure(basis, vec)

    @classmethod
    def coherent(cls, basis: FockBasis, alpha: complex) -> "FieldState":
        """Coherent state |alpha>, renormalized inside the truncated space."""
        if alpha == 0:
            return cls.fock(basis, 0)
        n = np.arange(basis.dim)
        log_mag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
        return cls.pure(basis, np.exp(log_mag + 1j * n * np.angle(alpha)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def to_dict(self) -> dict:
        return {
            "basis": {"n_max": self.basis.n_max},
            "kind": self.kind.value,
            "matrix": _complex_pairs(self.matrix),
            "time": float(self.time),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FieldState":
        return cls(FockBasis(int(data["basis"]["n_max"])), _from_pairs(data["matrix"]),
                   FieldKind(data["kind"]), float(data.get("time", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FieldState":
        return cls.from_dict(json.loads(text))


def load_state(data: dict):
    """Dispatch a serialized document to JointState or FieldState."""
    if data.get("kind", "joint") == "joint":
        return JointState.from_dict(data)
    return FieldState.from_dict(data)


def partial_trace_qubit(state: JointState) -> FieldState:
    blocks = state.blocks
    rho = blocks[G][:, None] * blocks[G].conj()[None, :] + blocks[E][:, None] * blocks[E].conj()[None, :]
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return FieldState(state.basis, rho, FieldKind.UNCONDITIONAL, state.time)


def condition_on_qubit(state: JointState, outcome) -> tuple[float, FieldState]:
    """Project the qubit onto ``outcome`` ('g' or 'e') and return (probability, field state)."""
    qubit = {"g": G, "e": E, G: G, E: E}[outcome]
    row = state.blocks[qubit]
    prob = float(np.vdot(row, row).real)
    if prob < CONDITION_MIN_PROB:
        raise ConditioningError(
            f"conditional state undefined: P({'ge'[qubit]}) = {prob:.3e}"
        )
    kind = FieldKind.CONDITIONED_G if qubit == G else FieldKind.CONDITIONED_E
    return prob, FieldState.pure(state.basis, row / np.sqrt(prob), kind, state.time)


def field_state(state: JointState, condition: str | None = None) -> FieldState:
    """Unconditional reduced state for ``condition`` in (None, 'none'), else the conditional one."""
    if condition in (None, "none"):
        return partial_trace_qubit(state)
    return condition_on_qubit(state, condition)[1]


def populations(field: FieldState) -> np.ndarray:
    return np.real(np.diag(field.matrix)).copy()


def parity_diagonal(basis: FockBasis) -> np.ndarray:
    """Diagonal of sigma_z (-1)^{a^dagger a} in the joint basis."""
    fock_sign = (-1.0) ** np.arange(basis.dim)
    return np.concatenate([fock_sign, -fock_sign])


def parity_expectation(state: JointState) -> float:
    value = np.sum(parity_diagonal(state.basis) * np.abs(state.amplitudes) ** 2)
    return float(np.clip(value, -1.0, 1.0))
