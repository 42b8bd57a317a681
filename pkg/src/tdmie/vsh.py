"""Vector spherical harmonics and incident-field projections on the sphere.

Tangential fields are stored as (theta, phi) components. The basis is

    Psi_n^m = r grad Y_n^m / sqrt(n(n+1))
    Phi_n^m = r_hat x Psi_n^m

which is orthonormal under the unit-sphere inner product
``<A, B> = int A^* . B dOmega``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import BesselKind, gauss_legendre, riccati_factor, sph_bessel, ynm_angular

C0 = 299_792_458.0
MU0 = 4e-7 * math.pi
ETA0 = MU0 * C0


class Family(enum.Enum):
    PSI = "psi"
    PHI = "phi"


class Equation(enum.IntEnum):
    """Tested integral equation; the value is the kernel number it pairs with."""

    EFIE_PSI = 1
    EFIE_PHI = 2
    MFIE_PSI = 3
    MFIE_PHI = 4

    @property
    def family(self) -> Family:
        return Family.PSI if self in (Equation.EFIE_PSI, Equation.MFIE_PSI) else Family.PHI

    @property
    def is_mfie(self) -> bool:
        return self >= Equation.MFIE_PSI


@dataclass(frozen=True)
class ModeIndex:
    n: int
    m: int
    family: Family = Family.PSI

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"mode degree must be >= 1 (got n={self.n})")
        if abs(self.m) > self.n:
            raise ValueError(f"mode order must satisfy |m| <= n (got n={self.n}, m={self.m})")
        object.__setattr__(self, "family", Family(self.family))

    def __str__(self):
        return f"{self.family.value}_{self.n}_{self.m}"


@dataclass(frozen=True)
class TangentVector:
    v_theta: np.ndarray | complex
    v_phi: np.ndarray | complex

    def cross_r(self) -> "TangentVector":
        """r_hat x self."""
        return TangentVector(-self.v_phi, self.v_theta)

    def dot(self, other: "TangentVector"):
        """Plain (bilinear) dot product."""
        return self.v_theta * other.v_theta + self.v_phi * other.v_phi


@dataclass(frozen=True)
class IncidentConfig:
    """x-polarized, z-propagating modulated Gaussian plane wave.

    ``E = x_hat * amplitude * cos(2 pi f0 tau) exp(-(tau - tp)^2 / (2 sigma^2))``
    with retarded time ``tau = t - z/c``; ``H = z_hat x E / eta``.
    """

    f0: float = 0.4e9
    bandwidth: float = 0.3e9
    amplitude: float = 1.0
    c: float = C0
    eta: float = ETA0
    sigma: float = field(init=False)
    tp: float = field(init=False)

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        sigma = 3.0 / (2.0 * math.pi * self.bandwidth)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tp", 40.0 * sigma)

    @property
    def mu(self) -> float:
        return self.eta / self.c

    def waveform(self, tau):
        """Scalar excitation at retarded time ``tau``."""
        tau = np.asarray(tau, dtype=float)
        env = np.exp(-((tau - self.tp) ** 2) / (2.0 * self.sigma**2))
        return self.amplitude * np.cos(2.0 * math.pi * self.f0 * tau) * env


def vsh_psi(mode: ModeIndex, theta, phi) -> TangentVector:
    n, m = mode.n, mode.m
    _, dy, my = ynm_angular(n, m, theta)
    ph = np.exp(1j * m * np.asarray(phi, dtype=float)) / math.sqrt(n * (n + 1))
    return TangentVector(dy * ph, 1j * my * ph)


def vsh_phi(mode: ModeIndex, theta, phi) -> TangentVector:
    return vsh_psi(mode, theta, phi).cross_r()


def vsh(mode: ModeIndex, theta, phi) -> TangentVector:
    """Psi or Phi depending on ``mode.family``."""
    if mode.family is Family.PSI:
        return vsh_psi(mode, theta, phi)
    return vsh_phi(mode, theta, phi)


@dataclass(frozen=True)
class SurfaceRule:
    """Gauss-Legendre in cos(theta) times a uniform rule in phi."""

    n_theta: int
    n_phi: int

    @property
    def theta(self):
        return np.arccos(gauss_legendre(self.n_theta).nodes[::-1])

    @property
    def theta_weights(self):
        return gauss_legendre(self.n_theta).weights[::-1]

    @property
    def phi(self):
        return 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi

    def grid(self):
        """Flattened (theta, phi, weight) arrays over the product rule."""
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        w = np.outer(self.theta_weights, np.full(self.n_phi, 2.0 * math.pi / self.n_phi))
        return th.ravel(), ph.ravel(), w.ravel()


def default_surface_rule(n: int) -> SurfaceRule:
    # extra theta points resolve the exp(-jk a cos(theta)) retardation
    # up to ka ~ 30, where the default pulse spectrum is below 1e-16
    return SurfaceRule(n + 48, 2 * (n + 1) + 3)


def inner(a: TangentVector, b: TangentVector, weights) -> complex:
    """Quadrature approximation of int a^* . b dOmega."""
    return complex(np.sum(weights * (np.conj(a.v_theta) * b.v_theta + np.conj(a.v_phi) * b.v_phi)))


def _tested_direction(equation: Equation, theta, phi, eta):
    """Tangential vector field multiplying the scalar waveform on the surface.

    EFIE rows test ``n x n x E = -E_tan``; MFIE rows test ``n x H``.
    """
    ct, cp, sp = np.cos(theta), np.cos(phi), np.sin(phi)
    if not equation.is_mfie:
        # -x_hat tangential: x_hat = cos(t)cos(p) theta_hat - sin(p) phi_hat
        return TangentVector(-ct * cp, sp)
    # H = y_hat g / eta; y_hat tangential = cos(t)sin(p) theta_hat + cos(p) phi_hat
    h = TangentVector(ct * sp / eta, cp / eta)
    return h.cross_r()


@dataclass(frozen=True)
class ProjectionWeights:
    """Per-latitude weights turning the scalar waveform into f_nm(t).

    ``f(t) = sum_i weights[i] * waveform(t - a * cos_theta[i] / c)``.
    The surface measure ``a^2 dOmega`` is already folded in.
    """

    cos_theta: np.ndarray
    weights: np.ndarray
    a: float
    c: float

    def delays(self):
        return self.a * self.cos_theta / self.c


def projection_weights(
    config: IncidentConfig,
    mode: ModeIndex,
    equation: Equation,
    a: float,
    rule: SurfaceRule | None = None,
) -> ProjectionWeights:
    equation = Equation(equation)
    if equation.family is not mode.family:
        raise ValueError(f"{equation.name} tests the {equation.family.value} family, mode is {mode.family.value}")
    rule = rule or default_surface_rule(mode.n)
    if rule.n_theta < mode.n + 2 or rule.n_phi < 2 * (mode.n + 1) + 1:
        raise ValueError(
            f"surface rule {rule.n_theta}x{rule.n_phi} too coarse for n={mode.n}; "
            f"need >= {mode.n + 2} x {2 * (mode.n + 1) + 1}"
        )
    th = rule.theta
    th2, ph2 = np.meshgrid(th, rule.phi, indexing="ij")
    test = vsh(mode, th2, ph2)
    src = _tested_direction(equation, th2, ph2, config.eta)
    dphi = 2.0 * math.pi / rule.n_phi
    per_lat = np.sum(np.conj(test.v_theta) * src.v_theta + np.conj(test.v_phi) * src.v_phi, axis=1) * dphi
    return ProjectionWeights(np.cos(th), a * a * rule.theta_weights * per_lat, a, config.c)


def incident_e(config: IncidentConfig, r, t) -> np.ndarray:
    """Incident electric field (Cartesian 3-vector) at point ``r``, time ``t``."""
    r = np.asarray(r, dtype=float)
    g = config.waveform(t - r[2] / config.c)
    return np.array([g, 0.0 * g, 0.0 * g])


def incident_h(config: IncidentConfig, r, t) -> np.ndarray:
    e = incident_e(config, r, t)
    return np.cross([0.0, 0.0, 1.0], e, axis=0) / config.eta


def project_incident(config, mode, equation, a, t, rule=None, weights=None):
    """Tested surface projection f_nm(t) of the incident field.

    ``t`` may be an array. Pass precomputed ``weights`` to skip the surface
    quadrature setup when calling repeatedly.
    """
    pw = weights or projection_weights(config, mode, equation, a, rule)
    t = np.asarray(t, dtype=float)
    tau = t[..., None] - pw.delays()
    return config.waveform(tau) @ pw.weights


def plane_wave_factor(config: IncidentConfig, mode: ModeIndex, equation: Equation, a: float, omega):
    """Closed-form spectral projection factor of the tested incident field.

    ``f(omega) = G(omega) * factor`` where ``G`` is the spectrum of the scalar
    waveform. Only ``m = +-1`` couple to an x-polarized, z-directed wave. With
    ``C = (-j)^n sqrt(pi (2n+1))`` and ``x = omega a / c``:

    ========  =====================
    EFIE Psi  a^2 j m C [x j_n]'/x
    EFIE Phi  a^2 j C j_n
    MFIE Psi  a^2 m C j_n / eta
    MFIE Phi  -a^2 C [x j_n]'/x / eta
    ========  =====================

    Unlike surface quadrature this has no cancellation at small ``x``.
    """
    equation = Equation(equation)
    if equation.family is not mode.family:
        raise ValueError(f"{equation.name} tests the {equation.family.value} family, mode is {mode.family.value}")
    omega = np.asarray(omega, dtype=float)
    if abs(mode.m) != 1:
        return np.zeros(omega.shape, dtype=complex)
    n, m = mode.n, mode.m
    x = omega * a / config.c
    C = (-1j) ** n * math.sqrt(math.pi * (2 * n + 1)) * a * a
    if equation is Equation.EFIE_PSI:
        return 1j * m * C * riccati_factor(BesselKind.BESSEL_J, n, x)
    if equation is Equation.EFIE_PHI:
        return 1j * C * sph_bessel(BesselKind.BESSEL_J, n, x)
    if equation is Equation.MFIE_PSI:
        return m * C * sph_bessel(BesselKind.BESSEL_J, n, x) / config.eta
    return -C * riccati_factor(BesselKind.BESSEL_J, n, x) / config.eta
