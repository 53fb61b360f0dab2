"""Qubit-oscillator Hamiltonian with a suddenly switched coupling.

H(t) = H_0 + f(t) H_I with

    H_0 = -omega_a/2 sigma_z + omega (a^dagger a + 1/2)
    H_I = g (sigma_+ + sigma_-) (a + a^dagger)            (full Rabi coupling)
    H_I = g (sigma_+ a + sigma_- a^dagger)                (rotating-wave / Jaynes-Cummings)

and f(t) = 1 for 0 <= t <= tau, 0 otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum

import numpy as np

from .fock import (
    IDENTITY_2,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    FockBasis,
    annihilation_matrix,
    creation_matrix,
    number_matrix,
    parity_diagonal,
    qubit_field_tensor,
)

DEFAULT_N_MAX = 60


class Switching(str, Enum):
    STEP = "step"


@dataclass(frozen=True)
class ModelParams:
    omega: float = 1.0
    omega_a: float = 1.0
    g: float = 0.0
    tau: float = 0.0
    basis: FockBasis = field(default_factory=lambda: FockBasis(DEFAULT_N_MAX))
    rwa: bool = False
    switching: Switching = Switching.STEP

    def __post_init__(self):
        if isinstance(self.basis, int):
            object.__setattr__(self, "basis", FockBasis(self.basis))
        object.__setattr__(self, "switching", Switching(self.switching))
        if isinstance(self.g, complex):
            raise TypeError("complex coupling is not supported; g must be real")
        for name in ("omega", "omega_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.g < 0:
            raise ValueError("g must be >= 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")

    @property
    def n_max(self) -> int:
        return self.basis.n_max

    def resonant(self) -> bool:
        return self.omega == self.omega_a

    def with_(self, **changes) -> "ModelParams":
        if "n_max" in changes:
            changes["basis"] = FockBasis(int(changes.pop("n_max")))
        return replace(self, **changes)

    def switch(self, t: float) -> float:
        """Coupling envelope f(t)."""
        return 1.0 if 0.0 <= t <= self.tau else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_max"] = d.pop("basis")["n_max"]
        d["switching"] = self.switching.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        """Build from a flat mapping; unknown keys are rejected."""
        allowed = {f.name for f in fields(cls)} - {"basis"} | {"n_max"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown model parameter(s): {sorted(unknown)}")
        data = dict(data)
        n_max = int(data.pop("n_max", DEFAULT_N_MAX))
        if "rwa" in data and not isinstance(data["rwa"], bool):
            raise ValueError("rwa must be a boolean")
        return cls(basis=FockBasis(n_max), **data)


def tau_from_units(tau: float, units: str, g: float) -> float:
    """Convert an interaction time given in ``abs`` or ``pi-over-2g`` units to absolute time."""
    if units == "abs":
        return float(tau)
    if units == "pi-over-2g":
        if g <= 0:
            raise ValueError("tau in units of pi/2g needs g > 0")
        return float(tau) * math.pi / (2.0 * g)
    raise ValueError(f"unknown tau units {units!r}")


def build_h0(params: ModelParams) -> np.ndarray:
    d = params.basis.dim
    h = -0.5 * params.omega_a * qubit_field_tensor(SIGMA_Z, np.eye(d))
    h = h + params.omega * qubit_field_tensor(IDENTITY_2, number_matrix(params.basis) + 0.5 * np.eye(d))
    return h


def build_interaction(params: ModelParams) -> np.ndarray:
    """Coupling term without the envelope f(t)."""
    a = annihilation_matrix(params.basis)
    ad = creation_matrix(params.basis)
    if params.rwa:
        h = qubit_field_tensor(SIGMA_PLUS, a) + qubit_field_tensor(SIGMA_MINUS, ad)
    else:
        h = qubit_field_tensor(SIGMA_PLUS + SIGMA_MINUS, a + ad)
    return params.g * h


def build_hamiltonian(params: ModelParams, t: float | None = None) -> np.ndarray:
    """H(t); with ``t=None`` the coupled Hamiltonian active during the on-interval."""
    h0 = build_h0(params)
    f = 1.0 if t is None else params.switch(t)
    return h0 + f * build_interaction(params) if f else h0


def parity_operator(basis: FockBasis) -> np.ndarray:
    return np.diag(parity_diagonal(basis)).astype(complex)
