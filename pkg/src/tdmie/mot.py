"""Galerkin marching-on-in-time for the per-mode Volterra equations.

Unknowns are expanded as ``J(t_i + tau dt) = sum_j J_ij P_j(2 tau - 1)`` on
each step and tested with the same functions. A kernel ``K`` then becomes a
sequence of small blocks ``Z_k`` indexed by the step lag ``k``:

    Z_k[i, j] = int_{-dt}^{dt} W_ij(v) K(k dt + v) dv,
    W_ij(v)   = int phi_i(s) phi_j(s - v) ds.

The smooth part is integrated with Gauss panels split wherever ``k dt + v``
hits a kernel breakpoint; impulses are added exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import KernelKind, PiecewiseKernel, build_kernel
from .specfun import gauss_legendre, legendre_all
from .vsh import Equation, IncidentConfig, ModeIndex, ProjectionWeights, projection_weights


class Variant(enum.Enum):
    PLAIN = "plain"
    DIFFERENCED = "differenced"


class NumericalFailure(RuntimeError):
    """Raised when a marching system cannot be solved."""


@dataclass(frozen=True)
class TemporalBasisConfig:
    dt: float
    Np: int = 1
    Nt: int = 1000

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.Np < 0:
            raise ValueError("Np must be >= 0")
        if self.Nt < 1:
            raise ValueError("Nt must be >= 1")

    @property
    def size(self) -> int:
        return self.Np + 1

    def gram(self) -> np.ndarray:
        return np.diag(self.dt / (2.0 * np.arange(self.size) + 1.0))


def temporal_basis(j: int, tau):
    """Shifted Legendre polynomial ``P_j(2 tau - 1)``."""
    tau = np.asarray(tau, dtype=float)
    return legendre_all(j, np.clip(2.0 * tau - 1.0, -1.0, 1.0))[j]


def lag_weight(v, dt: float, Np: int) -> np.ndarray:
    """Correlation of test and source polynomials at step offset ``v``.

    Returns an array of shape ``v.shape + (Np+1, Np+1)``; zero for |v| >= dt.
    """
    v = np.asarray(v, dtype=float)
    rule = gauss_legendre(Np + 1)
    lo = np.clip(np.maximum(0.0, v), 0.0, dt)
    hi = np.clip(np.minimum(dt, dt + v), 0.0, dt)
    half = 0.5 * (hi - lo)
    s = lo[..., None] + half[..., None] * (rule.nodes + 1.0)
    w = half[..., None] * rule.weights
    pt = legendre_all(Np, 2.0 * s / dt - 1.0)
    ps = legendre_all(Np, np.clip(2.0 * (s - v[..., None]) / dt - 1.0, -1.0, 1.0))
    return np.einsum("i...g,j...g,...g->...ij", pt, ps, w)


@dataclass(frozen=True)
class MotBlocks:
    """Lag blocks ``Z_0 .. Z_Nk`` of one marching system.

    For a kernel with a constant tail the plain variant also carries
    ``tail_block``: the value of every block with lag > Nk.
    """

    blocks: np.ndarray
    Nk: int
    variant: Variant
    dt: float
    tail_constant: float = 0.0
    tail_block: np.ndarray | None = None
    label: str = ""

    @property
    def size(self) -> int:
        return self.blocks.shape[1]

    def block(self, k: int) -> np.ndarray:
        if k < 0:
            return np.zeros((self.size, self.size))
        if k <= self.Nk:
            return self.blocks[k]
        if self.tail_block is not None:
            return self.tail_block
        return np.zeros((self.size, self.size))


def _smooth_block(kernel: PiecewiseKernel, k: int, dt: float, Np: int) -> np.ndarray:
    # panel edges in v: [-dt, dt] split at 0 and where k dt + v is a breakpoint
    cuts = {-dt, 0.0, dt}
    for bp in kernel.breakpoints:
        v = bp - k * dt
        if -dt < v < dt:
            cuts.add(v)
    edges = sorted(cuts)
    order = (kernel.smooth.degree() + 2 * Np + 2) // 2 + 2
    rule = gauss_legendre(order)
    out = np.zeros((Np + 1, Np + 1))
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 0.0 or k * dt + hi <= 0.0:
            continue
        v, w = rule.mapped(lo, hi)
        kv = kernel.smooth_at(k * dt + v)
        out += np.einsum("g,gij->ij", w * kv, lag_weight(v, dt, Np))
    return out


def assemble_blocks(
    kernel: PiecewiseKernel,
    basis: TemporalBasisConfig,
    identity: float = 0.0,
    variant: Variant | str = Variant.PLAIN,
) -> MotBlocks:
    """Blocks of ``identity * J + K (*) J`` for the given temporal basis.

    ``identity`` adds a multiple of the basis Gram matrix to ``Z_0`` (the
    second-kind term of the MFIE rows).
    """
    variant = Variant(variant)
    dt, Np = basis.dt, basis.Np
    Nk = math.ceil(kernel.end / dt) + 1
    blocks = np.zeros((Nk + 1, Np + 1, Np + 1))
    for k in range(Nk + 1):
        blocks[k] = _smooth_block(kernel, k, dt, Np)
        for t0, w in kernel.deltas:
            v = t0 - k * dt
            if -dt < v < dt:
                blocks[k] += w * lag_weight(np.array(v), dt, Np)
    blocks[0] += identity * basis.gram()
    tail_block = None
    if kernel.tail:
        tail_block = np.zeros((Np + 1, Np + 1))
        tail_block[0, 0] = kernel.tail * dt * dt
    label = f"K{int(kernel.kind)} n={kernel.n}"
    if variant is Variant.PLAIN:
        return MotBlocks(blocks, Nk, variant, dt, kernel.tail, tail_block, label)
    # Z^I_k = Z_k - Z_{k-1}; one extra lag absorbs the step into the tail
    ext = np.concatenate([blocks, (tail_block if tail_block is not None else np.zeros_like(blocks[0]))[None]])
    diff = ext.copy()
    diff[1:] -= ext[:-1]
    return MotBlocks(diff, Nk + 1, variant, dt, kernel.tail, None, label)


def difference_blocks(blocks: MotBlocks) -> MotBlocks:
    """Differenced (auxiliary-charge) form of a plain block set."""
    if blocks.variant is not Variant.PLAIN:
        raise ValueError("blocks are already differenced")
    tail = blocks.tail_block if blocks.tail_block is not None else np.zeros_like(blocks.blocks[0])
    ext = np.concatenate([blocks.blocks, tail[None]])
    diff = ext.copy()
    diff[1:] -= ext[:-1]
    return MotBlocks(diff, blocks.Nk + 1, Variant.DIFFERENCED, blocks.dt, blocks.tail_constant, None, blocks.label)


@dataclass
class CoefficientSeries:
    mode: ModeIndex | None
    kind: KernelKind | None
    values: np.ndarray
    dt: float

    @property
    def Nt(self) -> int:
        return self.values.shape[0]

    @property
    def Np(self) -> int:
        return self.values.shape[1] - 1

    def evaluate(self, t) -> np.ndarray:
        """Piecewise-polynomial current at times ``t`` (zero outside the run)."""
        t = np.asarray(t, dtype=float)
        step = np.floor(t / self.dt).astype(int)
        ok = (step >= 0) & (step < self.Nt)
        stepc = np.clip(step, 0, self.Nt - 1)
        tau = t / self.dt - stepc
        P = legendre_all(self.Np, np.clip(2.0 * tau - 1.0, -1.0, 1.0))
        vals = np.einsum("...j,j...->...", self.values[stepc], P)
        return np.where(ok, vals, 0.0)

    def to_csv(self) -> str:
        lines = ["step,t_start,order,re,im"]
        for q in range(self.Nt):
            for j in range(self.Np + 1):
                z = self.values[q, j]
                lines.append(f"{q},{q * self.dt:.17g},{j},{z.real:.17g},{z.imag:.17g}")
        return "\n".join(lines) + "\n"


def _factor(blocks: MotBlocks):
    z0 = blocks.blocks[0]
    if not np.all(np.isfinite(z0)) or np.linalg.cond(z0) > 1e14:
        raise NumericalFailure(f"singular Z_0 for {blocks.label or 'kernel'}")
    return scipy.linalg.lu_factor(z0)


def march(blocks: MotBlocks, rhs, mode=None, kind=None) -> CoefficientSeries:
    """Solve ``sum_k Z_k I_{q-k} = V_q`` step by step.

    With a constant-tail kernel every past step contributes; that history is
    summed directly (O(Nt^2)). Use :func:`march_with_charge` on differenced
    blocks for the O(Nt) variant.
    """
    if blocks.variant is not Variant.PLAIN:
        raise ValueError("march expects plain blocks; use march_with_charge")
    rhs = np.asarray(rhs, dtype=complex)
    Nt, P = rhs.shape
    lu = _factor(blocks)
    L = blocks.Nk
    # Zrev = [Z_L, ..., Z_1] side by side, matching history X[q : q+L]
    zrev = np.concatenate(list(blocks.blocks[L:0:-1]), axis=1) if L else np.zeros((P, 0))
    X = np.zeros((Nt + L, P), dtype=complex)
    tail = blocks.tail_block
    older = np.zeros(P, dtype=complex)
    for q in range(Nt):
        acc = rhs[q] - zrev @ X[q : q + L].ravel()
        if tail is not None and q - L - 1 >= 0:
            # all steps j <= q - L - 1 see the tail block
            older += X[q - 1]  # X[L + (q-L-1)]
            acc -= tail @ older
        X[q + L] = scipy.linalg.lu_solve(lu, acc)
    return CoefficientSeries(mode, kind, X[L:], blocks.dt)


def march_full_history(blocks: MotBlocks, rhs) -> np.ndarray:
    """Brute-force reference: explicit double sum over every past step."""
    rhs = np.asarray(rhs, dtype=complex)
    Nt, P = rhs.shape
    Z = np.array([blocks.block(k) for k in range(Nt)])
    z0inv = np.linalg.inv(Z[0])
    out = np.zeros((Nt, P), dtype=complex)
    for q in range(Nt):
        acc = rhs[q].copy()
        for j in range(q):
            acc -= Z[q - j] @ out[j]
        out[q] = z0inv @ acc
    return out


@dataclass
class ChargeState:
    """Running auxiliary accumulator ``C_q = C_{q-1} + sum_k Z^I_{q-k} I_k``."""

    C: np.ndarray

    def update(self, contribution):
        self.C = self.C + contribution


def march_with_charge(blocks: MotBlocks, rhs, mode=None, kind=None, return_charge: bool = False):
    """Marching with an auxiliary charge accumulator over differenced blocks.

    ``Z^I_0 I_q = V_q - sum_{k=1}^{L} Z^I_k I_{q-k} - C_{q-1}`` with
    ``C_q = C_{q-1} + sum_{k=0}^{L} Z^I_k I_{q-k}``. Per-step cost is
    independent of q.
    """
    if blocks.variant is not Variant.DIFFERENCED:
        raise ValueError("march_with_charge expects differenced blocks")
    rhs = np.asarray(rhs, dtype=complex)
    Nt, P = rhs.shape
    lu = _factor(blocks)
    L = blocks.Nk
    zrev = np.concatenate(list(blocks.blocks[L:0:-1]), axis=1)
    X = np.zeros((Nt + L, P), dtype=complex)
    state = ChargeState(np.zeros(P, dtype=complex))
    z0 = blocks.blocks[0]
    for q in range(Nt):
        hist = zrev @ X[q : q + L].ravel()
        iq = scipy.linalg.lu_solve(lu, rhs[q] - hist - state.C)
        X[q + L] = iq
        state.update(z0 @ iq + hist)
    series = CoefficientSeries(mode, kind, X[L:], blocks.dt)
    return (series, state) if return_charge else series


# -- right-hand sides --------------------------------------------------------


def _rhs_quadrature(Np: int):
    return gauss_legendre(Np + 12)


def assemble_rhs_all(
    config: IncidentConfig,
    mode: ModeIndex,
    equation: Equation,
    basis: TemporalBasisConfig,
    a: float,
    weights: ProjectionWeights | None = None,
) -> np.ndarray:
    """Time-tested projections ``V_q`` for all steps, shape (Nt, Np+1)."""
    pw = weights or projection_weights(config, mode, equation, a)
    rule = _rhs_quadrature(basis.Np)
    tau = 0.5 * (rule.nodes + 1.0)
    P = legendre_all(basis.Np, rule.nodes) * (0.5 * basis.dt * rule.weights)  # (Np+1, G)
    out = np.zeros((basis.Nt, basis.size), dtype=complex)
    # beyond this time the Gaussian envelope underflows to exactly zero
    t_stop = config.tp + 40.0 * config.sigma + pw.a / pw.c
    last = min(basis.Nt, int(t_stop / basis.dt) + 2)
    chunk = 4096
    for start in range(0, last, chunk):
        q = np.arange(start, min(last, start + chunk))
        t = (q[:, None] + tau) * basis.dt
        f = config.waveform(t[..., None] - pw.delays()) @ pw.weights  # (nq, G)
        out[q] = f @ P.T
    return out


def assemble_rhs(config, mode, equation, basis, q: int, a: float = 1.0, weights=None) -> np.ndarray:
    """Time-tested projection ``V_q`` for a single step."""
    pw = weights or projection_weights(config, mode, equation, a)
    rule = _rhs_quadrature(basis.Np)
    t = (q + 0.5 * (rule.nodes + 1.0)) * basis.dt
    f = config.waveform(t[:, None] - pw.delays()) @ pw.weights
    P = legendre_all(basis.Np, rule.nodes)
    return (P * (0.5 * basis.dt * rule.weights)) @ f


# -- per-mode systems --------------------------------------------------------


def surface_system(equation: Equation, n: int, a: float, c: float, mu: float):
    """Identity weight and surface-scaled kernel for one tested equation.

    Testing and source integrals each carry the surface measure ``a^2``, so
    the kernel enters as ``a^4 K`` and the MFIE identity term as ``a^2``.
    """
    equation = Equation(equation)
    kernel = build_kernel(KernelKind(int(equation)), n, a, c, mu).scaled(a**4)
    identity = a * a if equation.is_mfie else 0.0
    return identity, kernel


def default_dt(config: IncidentConfig) -> float:
    return 1.0 / (20.0 * (config.f0 + config.bandwidth))


def solve_mode(
    config: IncidentConfig,
    mode: ModeIndex,
    equation: Equation,
    basis: TemporalBasisConfig,
    a: float = 1.0,
) -> CoefficientSeries:
    """Assemble and march one (mode, equation) pair."""
    equation = Equation(equation)
    identity, kernel = surface_system(equation, mode.n, a, config.c, config.mu)
    rhs = assemble_rhs_all(config, mode, equation, basis, a)
    kind = KernelKind(int(equation))
    if kernel.tail:
        blocks = assemble_blocks(kernel, basis, identity, Variant.DIFFERENCED)
        series = march_with_charge(blocks, rhs, mode, kind)
    else:
        blocks = assemble_blocks(kernel, basis, identity)
        series = march(blocks, rhs, mode, kind)
    if not np.all(np.isfinite(series.values)):
        raise NumericalFailure(f"non-finite coefficients for {mode} kernel {int(kind)}")
    return series


def project_samples(t, values, basis: TemporalBasisConfig) -> np.ndarray:
    """L2 projection of a piecewise-linear sample trace onto the step basis.

    ``t`` must be a uniform grid starting at 0 whose spacing divides ``dt``.
    Returns ``(Nq, Np+1)`` coefficients for every step the trace covers.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values)
    h = t[1] - t[0]
    r = int(round(basis.dt / h))
    if abs(r * h - basis.dt) > 1e-9 * basis.dt:
        raise ValueError("sample spacing must divide dt")
    Nq = (len(t) - 1) // r
    rule = gauss_legendre(basis.Np + 2)
    u = 0.5 * (rule.nodes + 1.0)  # position inside a fine interval
    sub = np.arange(r)
    tau = (sub[:, None] + u) / r  # (r, G) position inside a step
    P = legendre_all(basis.Np, 2.0 * tau - 1.0)  # (Np+1, r, G)
    w = 0.5 * rule.weights / r
    out = np.zeros((Nq, basis.size), dtype=complex)
    for q in range(Nq):
        j = q * r + sub
        seg = values[j][:, None] * (1.0 - u) + values[j + 1][:, None] * u  # (r, G)
        out[q] = np.einsum("irg,rg,g->i", P, seg, w)
    return out * (2.0 * np.arange(basis.size) + 1.0)


# -- independent fine-step oracle --------------------------------------------


def volterra_oracle(kernel: PiecewiseKernel, rhs_sampler, dt_fine: float, Nt_fine: int, identity: float = 0.0):
    """Solve ``identity J + K (*) J = f`` by product-trapezoid collocation.

    J is piecewise linear on the grid ``t_i = i dt_fine``. Convolution weights
    against the hat functions are integrated exactly per panel; impulses are
    applied with linear interpolation of the past solution.

    Returns ``(t, J)`` sample arrays.
    """
    h = dt_fine
    t = np.arange(Nt_fine) * h
    f = np.asarray(rhs_sampler(t), dtype=complex)
    beta = kernel.end
    m_tail = math.ceil(beta / h) + 2  # lags from here on see only the tail
    M = min(Nt_fine, m_tail)
    rule = gauss_legendre(kernel.smooth.degree() // 2 + 4)

    def hat_weight(m, side):
        # int over v in (-h,0) [side=-1] or (0,h) [side=+1] of K(m h + v)(1-|v|/h)
        lo, hi = (-h, 0.0) if side < 0 else (0.0, h)
        cuts = sorted({lo, hi} | {b - m * h for b in kernel.breakpoints if lo < b - m * h < hi})
        tot = 0.0
        for a_, b_ in zip(cuts[:-1], cuts[1:]):
            v, w = rule.mapped(a_, b_)
            tot += np.sum(w * kernel.smooth_at(m * h + v) * (1.0 - np.abs(v) / h))
        return tot

    # v > 0 covers the part of the hat at t_j with s < t_j, v < 0 the part after
    before = np.array([hat_weight(m, +1) for m in range(M + 1)])
    after = np.array([hat_weight(m, -1) for m in range(M + 1)])
    omega = before + after
    w0 = sum(w for t0, w in kernel.deltas if t0 == 0.0)
    far = [(t0, w) for t0, w in kernel.deltas if t0 != 0.0]
    diag = identity + w0 + omega[0]
    J = np.zeros(Nt_fine, dtype=complex)
    cum = np.zeros(Nt_fine + 1, dtype=complex)  # cum[i] = sum_{j<i} J_j
    for i in range(Nt_fine):
        acc = f[i]
        lo = max(0, i - M + 1)
        if i > 0:
            js = np.arange(lo, i)
            wts = omega[i - js]
            if lo == 0:
                wts = wts.copy()
                wts[0] = after[i]  # the J_0 hat starts at t = 0
            acc -= np.dot(wts, J[js])
        if kernel.tail and i - M >= 0:
            # lags >= M: weight tail*h, half weight for the j=0 hat
            acc -= kernel.tail * h * (cum[i - M + 1] - 0.5 * J[0])
        for t0, w in far:
            x = (t[i] - t0) / h
            if x >= 0:
                j0 = int(math.floor(x))
                frac = x - j0
                acc -= w * ((1 - frac) * J[j0] + (frac * J[j0 + 1] if frac > 0 else 0.0))
        J[i] = acc / diag
        cum[i + 1] = cum[i] + J[i]
    return t, J
