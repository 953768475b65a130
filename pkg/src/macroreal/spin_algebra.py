"""Spin-1/2 operator kit: 2x2 complex algebra, SU(2) exponentials and model parameters.

Conventions: hbar = 1, angular frequencies in rad/us, times in us. Matrices are
plain ``numpy`` arrays of shape ``(2, 2)`` and dtype ``complex128``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError

IDENTITY = np.eye(2, dtype=complex)
IX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
IY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
IZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
MAXIMALLY_MIXED = IDENTITY / 2

# Pauli basis (Id, sx, sy, sz) used for transfer matrices and Bloch vectors.
PAULI_BASIS = (IDENTITY, 2 * IX, 2 * IY, 2 * IZ)

# Coupling ratios A_perp / omega used by the two parameter presets.
MAIN_TEXT_COUPLING = 2.2
SNR_COUPLING = 2.3
DEFAULT_OMEGA = 2 * math.pi


class SpinOps(NamedTuple):
    Ix: np.ndarray
    Iy: np.ndarray
    Iz: np.ndarray


def spin_ops() -> SpinOps:
    return SpinOps(IX.copy(), IY.copy(), IZ.copy())


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the target-sensor model.

    Parameters
    ----------
    omega : float
        Larmor frequency of the target (rad/us), must be positive.
    a_perp : float
        Sensor-target coupling strength (rad/us), non-negative.
    tau : float
        Contact duration of one weak measurement (us), non-negative.
    """

    omega: float = DEFAULT_OMEGA
    a_perp: float = MAIN_TEXT_COUPLING * DEFAULT_OMEGA
    tau: float = 0.023

    def __post_init__(self):
        for name in ("omega", "a_perp", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.omega <= 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if self.a_perp < 0:
            raise DomainError(f"a_perp must be non-negative, got {self.a_perp}")
        if self.tau < 0:
            raise DomainError(f"tau must be non-negative, got {self.tau}")

    @classmethod
    def from_ratio(
        cls,
        tau_over_tp: float,
        coupling: float = MAIN_TEXT_COUPLING,
        omega: float = DEFAULT_OMEGA,
    ) -> "ModelParams":
        """Build parameters from tau / T_p and A_perp / omega."""
        return cls(omega=omega, a_perp=coupling * omega, tau=tau_over_tp * 2 * math.pi / omega)

    @property
    def theta(self) -> float:
        """Tilt of the conditional rotation axes away from z (tan theta = a_perp / omega)."""
        return math.atan2(self.a_perp, self.omega)

    @property
    def rotation_angle(self) -> float:
        """Rotation angle sqrt(a_perp**2 + omega**2) * tau of U_plus and U_minus."""
        return math.hypot(self.a_perp, self.omega) * self.tau

    @property
    def period(self) -> float:
        """Precession period T_p = 2 pi / omega."""
        return 2 * math.pi / self.omega

    @property
    def tau_over_tp(self) -> float:
        return self.tau / self.period

    @property
    def coupling_phase(self) -> float:
        """Dimensionless coupling a_perp * tau."""
        return self.a_perp * self.tau

    def with_tau(self, tau: float) -> "ModelParams":
        return replace(self, tau=tau)


def expm_su2(axis, angle: float) -> np.ndarray:
    """Return exp(-i * angle * axis.I) for a unit 3-vector ``axis``.

    Uses the spin-1/2 identity cos(a/2) Id - 2i sin(a/2) (n.I), which is exact.
    """
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,):
        raise DomainError(f"axis must be a 3-vector, got shape {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise DomainError(f"axis must be a unit vector, |axis| = {np.linalg.norm(n)!r}")
    if not math.isfinite(angle):
        raise DomainError("angle must be finite")
    generator = n[0] * IX + n[1] * IY + n[2] * IZ
    return math.cos(angle / 2) * IDENTITY - 2j * math.sin(angle / 2) * generator


def interaction_unitaries(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Target evolution over one contact, conditioned on the sensor branch.

    Returns ``(U_plus, U_minus)`` generated by omega*Iz +/- a_perp*Ix for a time tau.
    """
    st, ct = math.sin(p.theta), math.cos(p.theta)
    phi = p.rotation_angle
    return expm_su2((st, 0.0, ct), phi), expm_su2((-st, 0.0, ct), phi)


def free_propagator(t: float, p: ModelParams) -> np.ndarray:
    """exp(-i omega t Iz) as a diagonal 2x2 unitary."""
    half = 0.5 * p.omega * t
    return np.diag([np.exp(-1j * half), np.exp(1j * half)])


def free_evolution(rho: np.ndarray, t: float, p: ModelParams) -> np.ndarray:
    """Larmor precession of ``rho`` about z for a time ``t``."""
    if not math.isfinite(t):
        raise DomainError("t must be finite")
    u = free_propagator(t, p)
    return u @ rho @ dagger(u)


def density_violation(rho: np.ndarray) -> dict[str, float]:
    """Numerical distances of ``rho`` from the density-matrix conditions."""
    rho = np.asarray(rho)
    herm = float(np.max(np.abs(rho - dagger(rho))))
    trace = float(abs(np.trace(rho) - 1.0))
    min_eig = float(np.min(np.linalg.eigvalsh((rho + dagger(rho)) / 2)))
    return {"hermiticity": herm, "trace": trace, "min_eigenvalue": min_eig}


def is_density_matrix(rho, herm_tol: float = 1e-12, trace_tol: float = 1e-12, psd_tol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        return False
    v = density_violation(rho)
    return v["hermiticity"] <= herm_tol and v["trace"] <= trace_tol and v["min_eigenvalue"] >= -psd_tol


def as_density_matrix(rho, tol: float = 1e-12) -> np.ndarray:
    """Validate and return ``rho`` as a complex 2x2 density matrix."""
    m = np.asarray(rho, dtype=complex)
    if not is_density_matrix(m, herm_tol=tol, trace_tol=tol):
        raise DomainError(f"not a density matrix: {density_violation(m) if m.shape == (2, 2) else m.shape}")
    return m


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    """Real vector r with rho = (Id + r.sigma) / 2 (assumes unit trace)."""
    return np.array([np.trace(rho @ s).real for s in PAULI_BASIS[1:]])


def density_from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * (IDENTITY + r[0] * PAULI_BASIS[1] + r[1] * PAULI_BASIS[2] + r[2] * PAULI_BASIS[3])


def pauli_transfer(channel: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Real 4x4 matrix of a Hermiticity-preserving linear map in the Pauli basis.

    Coefficient vectors c represent X = (c0 Id + c1 sx + c2 sy + c3 sz) / 2, so
    c = (1, r) is a density matrix with Bloch vector r.
    """
    out = np.empty((4, 4))
    for b, pb in enumerate(PAULI_BASIS):
        image = channel(pb)
        for a, pa in enumerate(PAULI_BASIS):
            out[a, b] = np.trace(pa @ image).real / 2
    return out


def random_density_matrix(rng: np.random.Generator, pure: bool = False) -> np.ndarray:
    """Random state, uniform in the Bloch ball (or on the sphere if ``pure``)."""
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    radius = 1.0 if pure else rng.random() ** (1 / 3)
    return density_from_bloch(radius * v)
