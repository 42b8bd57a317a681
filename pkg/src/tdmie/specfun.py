"""Special functions: Legendre polynomials, spherical Bessel/Hankel functions,
Gauss-Legendre rules and orthonormal scalar spherical harmonics.

Time-harmonic quantities use the ``exp(+j omega t)`` convention throughout, so
the outgoing spherical Hankel function is ``h_n^(2) = j_n - 1j * y_n``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_DOMAIN_SLACK = 1e-12


class BesselKind(enum.Enum):
    """Radial factor of a spherical wave function."""

    BESSEL_J = "bessel_j"  # regular, z^(1)
    HANKEL2 = "hankel2"  # outgoing, z^(4)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return len(self.nodes)

    def mapped(self, lo, hi):
        """Nodes and weights for the interval [lo, hi]."""
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights


_GL_CACHE: dict[int, QuadratureRule] = {}


def gauss_legendre(N: int) -> QuadratureRule:
    """Return the N-point Gauss-Legendre rule (cached, immutable)."""
    if N < 1:
        raise ValueError(f"quadrature size must be >= 1, got {N}")
    rule = _GL_CACHE.get(N)
    if rule is None:
        x, w = np.polynomial.legendre.leggauss(N)
        rule = QuadratureRule(np.ascontiguousarray(x), np.ascontiguousarray(w))
        _GL_CACHE[N] = rule
    return rule


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _DOMAIN_SLACK):
        raise ValueError("argument outside [-1, 1]")
    return np.clip(x, -1.0, 1.0)


def legendre(n: int, x):
    """Legendre polynomial P_n and its first two derivatives.

    All three come from forward recurrences that never divide by
    ``1 - x^2``, so accuracy does not degrade near the endpoints:
    ``P'_{k+1} = P'_{k-1} + (2k+1) P_k`` and likewise for ``P''``.

    Returns
    -------
    (p, dp, d2p) : arrays shaped like ``x``
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = _check_unit_interval(x)
    # (P_{k-1}, P_k) and the same pairs for the derivatives, starting at k = 0
    p_prev, p = np.zeros_like(x), np.ones_like(x)
    d_prev, d = np.zeros_like(x), np.zeros_like(x)
    s_prev, s = np.zeros_like(x), np.zeros_like(x)
    for k in range(n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = d_prev + (2 * k + 1) * p
        s_next = s_prev + (2 * k + 1) * d
        p_prev, p = p, p_next
        d_prev, d = d, d_next
        s_prev, s = s, s_next
    return p, d, s


def legendre_all(nmax: int, x):
    """Stack of P_0..P_nmax evaluated at ``x`` (shape ``(nmax+1,) + x.shape``)."""
    x = _check_unit_interval(x)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1)
    return out


def assoc_legendre(n: int, m: int, x):
    """Unnormalized associated Legendre function P_n^m(x), Condon-Shortley phase.

    Negative orders use ``P_n^{-m} = (-1)^m (n-m)!/(n+m)! P_n^m``.
    """
    if abs(m) > n:
        raise ValueError(f"|m| must not exceed n (n={n}, m={m})")
    x = _check_unit_interval(x)
    if m < 0:
        mm = -m
        scale = (-1) ** mm * math.exp(math.lgamma(n - mm + 1) - math.lgamma(n + mm + 1))
        return scale * assoc_legendre(n, mm, x)
    s = np.sqrt(np.maximum(1.0 - x * x, 0.0))
    # P_m^m = (-1)^m (2m-1)!! s^m
    pmm = np.ones_like(x)
    for k in range(1, m + 1):
        pmm = -pmm * (2 * k - 1) * s
    if n == m:
        return pmm
    pm1 = x * (2 * m + 1) * pmm
    for k in range(m + 2, n + 1):
        pmm, pm1 = pm1, ((2 * k - 1) * x * pm1 - (k + m - 1) * pmm) / (k - m)
    return pm1


def _ynm_norm(n, m):
    return math.sqrt((2 * n + 1) / (4 * math.pi) * math.exp(math.lgamma(n - m + 1) - math.lgamma(n + m + 1)))


def ynm(n: int, m: int, theta, phi):
    """Orthonormal spherical harmonic Y_n^m(theta, phi)."""
    if abs(m) > n:
        raise ValueError(f"|m| must not exceed n (n={n}, m={m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return _ynm_norm(n, m) * assoc_legendre(n, m, np.cos(theta)) * np.exp(1j * m * phi)


def ynm_angular(n: int, m: int, theta):
    """Theta-dependent factors of Y_n^m: value, d/dtheta and m/sin(theta).

    The ``exp(j m phi)`` factor is left out. Both the derivative and the
    ``m Y / sin(theta)`` term come from degree-lowering identities that are
    regular at the poles, so no limit special-casing is needed.

    Returns
    -------
    (y, dy_dtheta, m_y_over_sin) : real arrays shaped like ``theta``
    """
    if abs(m) > n:
        raise ValueError(f"|m| must not exceed n (n={n}, m={m})")
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    norm = _ynm_norm(n, m)

    def P(nn, mm):
        if nn < 0 or abs(mm) > nn:
            return np.zeros_like(x)
        return assoc_legendre(nn, mm, x)

    y = norm * P(n, m)
    # dP_n^m(cos t)/dt = [P_n^{m+1} - (n+m)(n-m+1) P_n^{m-1}] / 2
    dy = norm * 0.5 * (P(n, m + 1) - (n + m) * (n - m + 1) * P(n, m - 1))
    # m P_n^m / sin = -[P_{n-1}^{m+1} + (n+m-1)(n+m) P_{n-1}^{m-1}] / 2
    if m == 0:
        my = np.zeros_like(x)
    else:
        my = -norm * 0.5 * (P(n - 1, m + 1) + (n + m - 1) * (n + m) * P(n - 1, m - 1))
    return y, dy, my


# -- spherical Bessel family -------------------------------------------------

_BIG = 1e200


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("spherical Bessel argument must be > 0")
    return x


def _sph_jn_all(nmax, x):
    """j_0..j_nmax at positive ``x`` by Miller's downward recurrence."""
    nmax = max(nmax, 1)
    start = int(nmax + np.max(x) + 40 + 2 * math.sqrt(nmax + np.max(x)))
    out = np.zeros((nmax + 1,) + x.shape)
    f_next = np.zeros_like(x)
    f = np.full_like(x, 1e-300)
    for k in range(start, 0, -1):
        # f_{k-1} = (2k+1)/x f_k - f_{k+1}
        f_prev = (2 * k + 1) / x * f - f_next
        f_next, f = f, f_prev
        if k - 1 <= nmax:
            out[k - 1] = f
        big = np.abs(f) > _BIG
        if np.any(big):
            scale = np.where(big, 1.0 / _BIG, 1.0)
            f = f * scale
            f_next = f_next * scale
            out *= scale
    # normalize against whichever of j_0, j_1 is better conditioned
    j0 = np.sin(x) / x
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    use0 = np.abs(j0) >= np.abs(j1)
    ref_true = np.where(use0, j0, j1)
    ref_rec = np.where(use0, out[0], out[1])
    return out * (ref_true / ref_rec)


def _sph_yn_all(nmax, x):
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = -np.cos(x) / x
    if nmax >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    for k in range(1, nmax):
        out[k + 1] = (2 * k + 1) / x * out[k] - out[k - 1]
    return out


def sph_bessel(kind: BesselKind, n: int, x, derivative: bool = False):
    """Spherical Bessel j_n (kind BESSEL_J) or Hankel h_n^(2) (kind HANKEL2).

    ``x`` must be positive. Values are real for BESSEL_J and complex for
    HANKEL2. With ``derivative=True`` the derivative with respect to ``x`` is
    returned instead.
    """
    kind = BesselKind(kind)
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = _check_positive(x)
    top = n + 1 if derivative else n
    j = _sph_jn_all(top, x)
    if kind is BesselKind.BESSEL_J:
        vals = j
    else:
        vals = j - 1j * _sph_yn_all(max(top, 1), x)
    if not derivative:
        return vals[n]
    # z_n' = z_{n-1} - (n+1)/x z_n ; z_0' = -z_1
    if n == 0:
        return -vals[1]
    return vals[n - 1] - (n + 1) / x * vals[n]


def riccati_factor(kind: BesselKind, n: int, x):
    """Return ``[x z_n(x)]' / x = z_n/x + z_n'``."""
    kind = BesselKind(kind)
    if n < 0:
        raise ValueError("degree must be non-negative")
    x = _check_positive(x)
    j = _sph_jn_all(n, x)
    vals = j if kind is BesselKind.BESSEL_J else j - 1j * _sph_yn_all(max(n, 1), x)
    if n == 0:
        # [x z_0]'/x = z_0/x - z_1
        return vals[0] / x - vals[1]
    return vals[n - 1] - n * vals[n] / x
