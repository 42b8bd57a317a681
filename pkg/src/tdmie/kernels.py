"""Per-degree Volterra kernels on the sphere surface and their spectra.

Every kernel lives at r = r' = a and is made of three pieces:

* a smooth polynomial part on the open interval (0, 2a/c),
* impulses at t = 0 and t = 2a/c,
* a constant tail for t > 2a/c (only the Psi-family EFIE kernel).

Kernel numbering follows the tested equations:

====  ===========  ==================================================
kind  equation     kernel
====  ===========  ==================================================
K0    (scalar)     c/(2a^2) P_n(1 - c^2 t^2/(2a^2)) on [0, 2a/c]
K1    EFIE, Psi    mu c^2 d_t^{-1} (1/rr') d_r d_r' [r r' K0]
K2    EFIE, Phi    -mu d_t K0
K3    MFIE, Psi    -(1/r') d_r' [r' K0]
K4    MFIE, Phi    (1/r) d_r [r K0]
====  ===========  ==================================================

Radial derivatives are taken with r > r' (the exterior limit) before r and r'
are set to a. EFIE rows use the ``n x n x`` tested form, which fixes the
overall sign of K1 and K2.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev

from .specfun import BesselKind, gauss_legendre, legendre, riccati_factor, sph_bessel
from .vsh import C0, MU0


class KernelKind(enum.IntEnum):
    K0 = 0
    K1 = 1
    K2 = 2
    K3 = 3
    K4 = 4


@dataclass(frozen=True)
class KernelSymbols:
    xi: np.ndarray
    alpha: float
    beta: float
    pulse: np.ndarray


def kernel_symbols(r, rp, t, c=C0) -> KernelSymbols:
    t = np.asarray(t, dtype=float)
    alpha = abs(r - rp) / c
    beta = (r + rp) / c
    xi = r * r + rp * rp - (c * t) ** 2
    pulse = ((t >= alpha) & (t <= beta)).astype(float)
    return KernelSymbols(xi, alpha, beta, pulse)


def kernel_k0(n: int, r: float, rp: float, t, c: float = C0):
    """Scalar retarded-potential kernel of degree n for radii r, r'."""
    sym = kernel_symbols(r, rp, t, c)
    arg = np.clip(sym.xi / (2.0 * r * rp), -1.0, 1.0)
    p, _, _ = legendre(n, arg)
    return c / (2.0 * r * rp) * p * sym.pulse


@dataclass(frozen=True)
class PiecewiseKernel:
    """Impulses + smooth part on (0, 2a/c) + constant tail."""

    n: int
    kind: KernelKind
    a: float
    c: float
    smooth: Chebyshev
    deltas: tuple[tuple[float, float], ...] = ()
    tail: float = 0.0
    support: tuple[float, float] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "support", (0.0, 2.0 * self.a / self.c))

    @property
    def end(self) -> float:
        return self.support[1]

    @property
    def breakpoints(self) -> tuple[float, float]:
        return self.support

    def smooth_at(self, t):
        """Smooth part (plus tail) at ``t``; impulses are not included."""
        t = np.asarray(t, dtype=float)
        inside = (t > 0.0) & (t < self.end)
        val = np.where(inside, self.smooth(np.clip(t, 0.0, self.end)), 0.0)
        if self.tail:
            val = val + np.where(t >= self.end, self.tail, 0.0)
        return val

    __call__ = smooth_at

    def scaled(self, factor: float) -> "PiecewiseKernel":
        return PiecewiseKernel(
            self.n,
            self.kind,
            self.a,
            self.c,
            self.smooth * factor,
            tuple((t0, w * factor) for t0, w in self.deltas),
            self.tail * factor,
        )

    def to_csv(self, samples: int = 201) -> str:
        """Debug dump: ``# delta``/``# tail`` header lines, then ``t,smooth_value``."""
        buf = io.StringIO()
        for t0, w in self.deltas:
            buf.write(f"# delta t={t0:.17g} w={w:.17g}\n")
        buf.write(f"# tail={self.tail:.17g}\n")
        buf.write("t,smooth_value\n")
        ts = np.linspace(0.0, self.end, samples)
        for t, v in zip(ts, self.smooth(ts)):
            buf.write(f"{t:.17g},{v:.17g}\n")
        return buf.getvalue()


def build_kernel(kind, n: int, a: float = 1.0, c: float = C0, mu: float = MU0) -> PiecewiseKernel:
    kind = KernelKind(kind)
    if n < 0 or (kind is not KernelKind.K0 and n < 1):
        raise ValueError(f"kernel {kind.name} needs n >= 1 (got {n})")
    beta = 2.0 * a / c
    pref = c / (2.0 * a * a)
    sgn = (-1.0) ** n
    deg = 2 * n + 3
    dom = [0.0, beta]

    def u_of(t):
        return np.clip(1.0 - (c * t) ** 2 / (2.0 * a * a), -1.0, 1.0)

    def fit(fn):
        return Chebyshev.interpolate(fn, deg, domain=dom)

    if kind is KernelKind.K0:
        return PiecewiseKernel(n, kind, a, c, fit(lambda t: pref * legendre(n, u_of(t))[0]))

    if kind is KernelKind.K2:
        smooth = fit(lambda t: mu * pref * legendre(n, u_of(t))[1] * c * c * t / (a * a))
        deltas = ((0.0, -mu * pref), (beta, mu * pref * sgn))
        return PiecewiseKernel(n, kind, a, c, smooth, deltas)

    if kind in (KernelKind.K3, KernelKind.K4):
        s = -1.0 if kind is KernelKind.K3 else 1.0
        smooth = fit(lambda t: s * pref * legendre(n, u_of(t))[1] * (c * t) ** 2 / (2.0 * a**3))
        deltas = ((0.0, -1.0 / (2.0 * a * a)), (beta, s * sgn / (2.0 * a * a)))
        return PiecewiseKernel(n, kind, a, c, smooth, deltas)

    # K1: running integral of the mixed radial derivative
    def integrand(t):
        _, dp, d2p = legendre(n, u_of(t))
        ur = (c * t) ** 2 / (2.0 * a**3)
        urr = -1.0 / a**2 - (c * t) ** 2 / (2.0 * a**4)
        return d2p * ur * ur + dp * urr

    running = fit(integrand).integ(lbnd=0.0)
    scale = mu * c**3 / (2.0 * a * a)
    dp_end = -sgn * n * (n + 1) / 2.0  # P_n'(-1)
    tail = scale * (running(beta) + 2.0 / (a * c) * dp_end)
    deltas = ((0.0, -mu * c / (2.0 * a * a)), (beta, -mu * c * sgn / (2.0 * a * a)))
    return PiecewiseKernel(n, kind, a, c, running * scale, deltas, tail)


def kernel_fd_oracle(kind, n: int, a: float, omega, c: float = C0, mu: float = MU0):
    """Closed-form spectrum ``int K(t) exp(-j omega t) dt`` from Bessel/Hankel products."""
    kind = KernelKind(kind)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    k = omega / c
    x = k * a
    if kind in (KernelKind.K0, KernelKind.K2):
        prod = sph_bessel(BesselKind.HANKEL2, n, x) * sph_bessel(BesselKind.BESSEL_J, n, x)
        return -1j * k * prod if kind is KernelKind.K0 else -omega * mu * k * prod
    if kind is KernelKind.K1:
        prod = riccati_factor(BesselKind.HANKEL2, n, x) * riccati_factor(BesselKind.BESSEL_J, n, x)
        return -omega * mu * k * prod
    if kind is KernelKind.K3:
        return 1j * k * k * sph_bessel(BesselKind.HANKEL2, n, x) * riccati_factor(BesselKind.BESSEL_J, n, x)
    return -1j * k * k * riccati_factor(BesselKind.HANKEL2, n, x) * sph_bessel(BesselKind.BESSEL_J, n, x)


def kernel_fd_numeric(kernel: PiecewiseKernel, omega, panels: int | None = None):
    """Fourier integral of a piecewise kernel by panel Gauss quadrature."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    beta = kernel.end
    if panels is None:
        panels = max(4, int(np.max(np.abs(omega)) * beta / 4.0) + 4)
    order = kernel.smooth.degree() // 2 + 24
    rule = gauss_legendre(order)
    edges = np.linspace(0.0, beta, panels + 1)
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        t, w = rule.mapped(lo, hi)
        ts.append(t)
        ws.append(w)
    ts = np.concatenate(ts)
    ws = np.concatenate(ws) * kernel.smooth(ts)
    out = np.exp(-1j * np.outer(omega, ts)) @ ws
    for t0, w in kernel.deltas:
        out = out + w * np.exp(-1j * omega * t0)
    if kernel.tail:
        if np.any(omega == 0):
            raise ValueError("tail transform diverges at omega = 0")
        out = out + kernel.tail * np.exp(-1j * omega * beta) / (1j * omega)
    return out
