"""Frequency-domain reference currents and the time/frequency comparison.

The reference solves the same tested per-mode equations in the frequency
domain, so both sides share one normalization:

    (identity + a^4 K(omega)) J(omega) = f(omega)

with ``identity = a^2`` for the MFIE rows and zero for the EFIE rows.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .kernels import KernelKind, kernel_fd_oracle
from .mot import CoefficientSeries, NumericalFailure
from .specfun import BesselKind, sph_bessel
from .vsh import Equation, IncidentConfig, ModeIndex, plane_wave_factor, projection_weights


@dataclass(frozen=True)
class BandSpec:
    f_lo: float = 0.1e9
    f_hi: float = 0.7e9
    count: int = 61

    def __post_init__(self):
        if not self.f_lo > 0:
            raise ValueError("f_lo must be positive")
        if self.f_hi < self.f_lo:
            raise ValueError("f_hi must not be below f_lo")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    @property
    def freqs(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.f_lo])
        return np.linspace(self.f_lo, self.f_hi, self.count)

    @property
    def omegas(self) -> np.ndarray:
        return 2.0 * math.pi * self.freqs


def incident_spectrum(config: IncidentConfig, f):
    """Fourier transform of the scalar excitation ``config.waveform``.

    The carrier is referenced to the origin of retarded time while the
    envelope is centred on ``tp``, so each sideband carries its own phase.
    """
    f = np.asarray(f, dtype=float)
    sig, tp, f0 = config.sigma, config.tp, config.f0

    def side(nu):
        return sig * math.sqrt(2.0 * math.pi) * np.exp(-2.0 * (math.pi * sig * nu) ** 2) * np.exp(
            -2j * math.pi * nu * tp
        )

    return 0.5 * config.amplitude * (side(f - f0) + side(f + f0))


@dataclass(frozen=True)
class FdModeSolution:
    mode: ModeIndex
    kind: Equation
    freqs: np.ndarray
    values: np.ndarray
    rhs: np.ndarray
    operator: np.ndarray

    def residual(self) -> np.ndarray:
        """Relative residual of ``operator * values = rhs`` per frequency."""
        return np.abs(self.operator * self.values - self.rhs) / np.maximum(np.abs(self.rhs), np.finfo(float).tiny)


def projected_spectrum(config: IncidentConfig, mode: ModeIndex, kind, freqs, a: float = 1.0, rule=None, method="analytic"):
    """Spectrum of the tested incident projection ``f(omega)``.

    ``method="analytic"`` uses the closed-form plane-wave factor.
    ``method="quadrature"`` sums the surface rule instead: each latitude is
    delayed by ``a cos(theta)/c``, so the factor is re-summed per frequency.
    For high degrees that sum cancels down to roundoff at low frequency.
    """
    omega = 2.0 * math.pi * np.asarray(freqs, dtype=float)
    if method == "analytic":
        spatial = plane_wave_factor(config, mode, Equation(kind), a, omega)
    elif method == "quadrature":
        pw = projection_weights(config, mode, Equation(kind), a, rule)
        spatial = np.exp(-1j * np.outer(omega, pw.delays())) @ pw.weights
    else:
        raise ValueError(f"unknown projection method {method!r}")
    return incident_spectrum(config, freqs) * spatial


def fd_mode_solution(
    mode: ModeIndex,
    kind,
    band: BandSpec,
    config: IncidentConfig | None = None,
    a: float = 1.0,
    method: str = "analytic",
) -> FdModeSolution:
    """Frequency-domain current for one mode and tested equation."""
    config = config or IncidentConfig()
    kind = Equation(kind)
    freqs = band.freqs
    omega = 2.0 * math.pi * freqs
    khat = kernel_fd_oracle(KernelKind(int(kind)), mode.n, a, omega, config.c, config.mu)
    op = (a * a if kind.is_mfie else 0.0) + a**4 * khat
    if np.any(np.abs(op) < 1e-300):
        bad = freqs[np.abs(op) < 1e-300]
        raise NumericalFailure(f"operator vanishes (resonance or underflow) at f = {bad[0]:.17g} Hz")
    rhs = projected_spectrum(config, mode, kind, freqs, a, method=method)
    return FdModeSolution(mode, kind, freqs, rhs / op, rhs, op)


def decay_ratio(series: CoefficientSeries, tail_fraction: float = 0.01) -> float:
    """Largest coefficient over the final steps relative to the global peak."""
    amp = np.max(np.abs(series.values), axis=1)
    peak = amp.max()
    if peak == 0.0:
        return 0.0
    tail = max(1, int(series.Nt * tail_fraction))
    return float(amp[-tail:].max() / peak)


def td_to_fd(series: CoefficientSeries, band, decay_tol: float = 1e-8) -> np.ndarray:
    """Fourier integral of the piecewise-Legendre current at band frequencies.

    Each step contributes exactly:
    ``int_0^dt P_i(2s/dt - 1) exp(-j w s) ds = dt exp(-j w dt/2) (-j)^i j_i(w dt/2)``.
    """
    freqs = band.freqs if isinstance(band, BandSpec) else np.asarray(band, dtype=float)
    ratio = decay_ratio(series)
    if ratio > decay_tol:
        warnings.warn(f"series has not decayed: tail/peak = {ratio:.3e}", RuntimeWarning, stacklevel=2)
    omega = 2.0 * math.pi * np.atleast_1d(freqs)
    dt = series.dt
    x = 0.5 * omega * dt
    per_order = np.stack(
        [dt * (-1j) ** i * sph_bessel(BesselKind.BESSEL_J, i, x) for i in range(series.Np + 1)], axis=-1
    )  # (F, P)
    out = np.zeros(omega.shape, dtype=complex)
    chunk = 8192
    for start in range(0, series.Nt, chunk):
        q = np.arange(start, min(series.Nt, start + chunk))
        phase = np.exp(-1j * np.outer(omega, q * dt))  # (F, nq)
        out += np.einsum("fq,qi,fi->f", phase, series.values[q], per_order)
    return out * np.exp(-1j * omega * dt / 2.0)


def band_compare(td, fd) -> float:
    """Relative L2 band error ``|td - fd| / |fd|``."""
    ref = fd.values if isinstance(fd, FdModeSolution) else np.asarray(fd)
    td = np.asarray(td)
    if td.shape != ref.shape:
        raise ValueError(f"band sampling mismatch: {td.shape} vs {ref.shape}")
    den = np.linalg.norm(ref)
    if den == 0.0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(td - ref) / den)


def comparison_csv(freqs, td, fd) -> str:
    ref = fd.values if isinstance(fd, FdModeSolution) else np.asarray(fd)
    buf = io.StringIO()
    buf.write("f_hz,td_re,td_im,fd_re,fd_im,abs_err\n")
    for f, a_, b_ in zip(freqs, td, ref):
        buf.write(f"{f:.17g},{a_.real:.17g},{a_.imag:.17g},{b_.real:.17g},{b_.imag:.17g},{abs(a_ - b_):.17g}\n")
    return buf.getvalue()
