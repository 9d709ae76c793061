"""Two-level system algebra: Pauli matrices, the spin Hamiltonian, and bare
propagators on the unfolded contour ``[0, 2t]``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IDENTITY",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SPIN_UP",
    "SystemSpec",
    "bare_propagator",
    "evolve",
    "expectation",
    "hamiltonian",
    "pauli_decompose",
]

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SPIN_UP = np.array([[1, 0], [0, 0]], dtype=complex)

for _m in (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, SPIN_UP):
    _m.setflags(write=False)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Spin parameters. Energies are in units of the tunnelling ``delta``.

    ``rho_s`` defaults to the spin-up projector, so ``<sigma_z(0)> = 1``.
    """

    epsilon: float = 0.0
    delta: float = 1.0
    rho_s: np.ndarray = field(default_factory=lambda: SPIN_UP.copy())
    observable: np.ndarray = field(default_factory=lambda: SIGMA_Z.copy())

    def __post_init__(self):
        rho = np.asarray(self.rho_s, dtype=complex)
        obs = np.asarray(self.observable, dtype=complex)
        if rho.shape != (2, 2) or obs.shape != (2, 2):
            raise ValueError("rho_s and observable must be 2x2 matrices")
        if not np.all(np.isfinite(rho)) or not np.all(np.isfinite(obs)):
            raise ValueError("rho_s and observable must be finite")
        if not np.allclose(rho, rho.conj().T, atol=1e-12):
            raise ValueError("rho_s must be Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError("rho_s must have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValueError("rho_s must be positive semidefinite")
        object.__setattr__(self, "rho_s", rho)
        object.__setattr__(self, "observable", obs)

    def __eq__(self, other):
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (
            self.epsilon == other.epsilon
            and self.delta == other.delta
            and np.array_equal(self.rho_s, other.rho_s)
            and np.array_equal(self.observable, other.observable)
        )


def hamiltonian(spec: SystemSpec) -> np.ndarray:
    """``H_s = epsilon * sigma_z + delta * sigma_x``."""
    return spec.epsilon * SIGMA_Z + spec.delta * SIGMA_X


def pauli_decompose(H: np.ndarray) -> tuple[float, np.ndarray]:
    """Split a Hermitian 2x2 matrix as ``a * Id + b . sigma``; returns ``(a, b)``."""
    H = np.asarray(H, dtype=complex)
    a = 0.5 * np.trace(H).real
    b = 0.5 * np.array([np.trace(H @ s).real for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])
    return a, b


def evolve(H: np.ndarray, theta: float) -> np.ndarray:
    """``exp(-1j * theta * H)`` for Hermitian 2x2 ``H``, in closed form."""
    a, b = pauli_decompose(H)
    norm = np.linalg.norm(b)
    phase = np.exp(-1j * theta * a)
    if norm == 0.0:
        return phase * IDENTITY
    n_sigma = (b[0] * SIGMA_X + b[1] * SIGMA_Y + b[2] * SIGMA_Z) / norm
    return phase * (np.cos(theta * norm) * IDENTITY - 1j * np.sin(theta * norm) * n_sigma)


def bare_propagator(spec: SystemSpec, Sf: float, Si: float, t: float, H: np.ndarray | None = None) -> np.ndarray:
    """Uncoupled system propagator from contour time ``Si`` to ``Sf``.

    Forward branch (``Sf < t``) evolves with ``exp(-i (Sf - Si) H)``, the
    backward branch with ``exp(+i (Sf - Si) H)``; a pair straddling ``t``
    picks up the observable in between.
    """
    if not 0.0 <= Si <= Sf <= 2 * t:
        raise ValueError(f"need 0 <= Si <= Sf <= 2t, got Si={Si}, Sf={Sf}, t={t}")
    if H is None:
        H = hamiltonian(spec)
    if Sf < t:
        return evolve(H, Sf - Si)
    if Si >= t:
        return evolve(H, Si - Sf)
    return evolve(H, t - Sf) @ spec.observable @ evolve(H, t - Si)


def expectation(rho_s: np.ndarray, A: np.ndarray) -> complex:
    """``tr(rho_s A)``."""
    return complex(np.trace(np.asarray(rho_s) @ np.asarray(A)))
