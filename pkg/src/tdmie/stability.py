"""Companion-matrix form of the marching recursion and its eigen-spectrum.

The march is rewritten as ``A s_{j+1} = F_{j+1} - B s_j`` with a stacked
state ``s_j``. Stability is read off the spectrum of the one-step
propagator ``T = -A^{-1} B`` (same moduli as ``A^{-1} B``).

Plain systems (kernels 2-4) stack ``[I_j, ..., I_{j-Nk}]``. Differenced
systems (kernel 1, auxiliary charge) append ``[C_{j-1}, ..., C_{j-1-Nk}]``.

The eigensolver is a dense real one: balancing, Householder reduction to
Hessenberg form, then Francis double-shift QR with deflation.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .kernels import KernelKind
from .mot import MotBlocks, Variant, difference_blocks

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CompanionSystem:
    """Block matrices of ``A s_{j+1} = F_{j+1} - B s_j``."""

    A: np.ndarray
    B: np.ndarray
    block_size: int
    charged: bool
    label: str = ""

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def propagator(self) -> np.ndarray:
        """One-step transition matrix ``-A^{-1} B``."""
        return -np.linalg.solve(self.A, self.B)

    def forcing(self, v) -> np.ndarray:
        """``F`` for one step: the RHS vector in the leading block, zero elsewhere."""
        f = np.zeros(self.dim, dtype=complex)
        f[: self.block_size] = v
        return f

    def step(self, state, v) -> np.ndarray:
        return np.linalg.solve(self.A, self.forcing(v) - self.B @ state)

    def current(self, state) -> np.ndarray:
        return state[: self.block_size]


def build_companion(blocks: MotBlocks, kind=None) -> CompanionSystem:
    """Companion form of a block set.

    Plain blocks with a constant tail (kernel 1) are differenced first, so the
    result always uses the auxiliary-charge structure for that kernel.
    """
    if kind is not None:
        kind = KernelKind(kind)
    if blocks.variant is Variant.PLAIN and (blocks.tail_block is not None or kind is KernelKind.K1):
        blocks = difference_blocks(blocks)
    P = blocks.size
    L = blocks.Nk
    Z = blocks.blocks
    eye = np.eye(P)
    nI = (L + 1) * P
    charged = blocks.variant is Variant.DIFFERENCED
    dim = 2 * nI if charged else nI
    A = np.eye(dim)
    B = np.zeros((dim, dim))
    A[:P, :P] = Z[0]
    # history shift of the current blocks
    for m in range(L):
        B[(m + 1) * P : (m + 2) * P, m * P : (m + 1) * P] = -eye
    if not charged:
        for m in range(L):
            B[:P, m * P : (m + 1) * P] = Z[m + 1]
        return CompanionSystem(A, B, P, False, blocks.label)
    # C_j = C_{j-1} + sum_m Z_m I_{j-m} is eliminated from the current row,
    # so the current row sees (Z_{m+1} + Z_m) and C_{j-1}
    for m in range(L + 1):
        nxt = Z[m + 1] if m + 1 <= L else 0.0
        B[:P, m * P : (m + 1) * P] = nxt + Z[m]
        B[nI : nI + P, m * P : (m + 1) * P] = -Z[m]
    B[:P, nI : nI + P] = eye
    B[nI : nI + P, nI : nI + P] = -eye
    for m in range(L):
        r = nI + (m + 1) * P
        B[r : r + P, r - P : r] = -eye
    return CompanionSystem(A, B, P, True, blocks.label)


# -- dense eigensolver -------------------------------------------------------


def balance(M: np.ndarray) -> np.ndarray:
    """Parlett-Reinsch diagonal similarity by powers of two."""
    M = np.array(M, dtype=float)
    n = M.shape[0]
    radix = 2.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(M[:, i])) - abs(M[i, i])
            r = np.sum(np.abs(M[i, :])) - abs(M[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g, f, s = r / radix, 1.0, c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c > g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                done = False
                M[i, :] /= f
                M[:, i] *= f
    return M


def _householder(x):
    """``v, beta`` with ``(I - beta v v^T) x = -sign(x0) |x| e_0``."""
    v = np.array(x, dtype=float)
    alpha = math.hypot(*v) if v.size <= 3 else np.linalg.norm(v)
    if alpha == 0.0:
        return v, 0.0
    v[0] += math.copysign(alpha, v[0])
    return v, 2.0 / np.dot(v, v)


def hessenberg(M: np.ndarray) -> np.ndarray:
    """Upper Hessenberg matrix orthogonally similar to ``M``."""
    H = np.array(M, dtype=float)
    n = H.shape[0]
    for k in range(n - 2):
        v, beta = _householder(H[k + 1 :, k])
        if beta == 0.0:
            continue
        H[k + 1 :, k:] -= beta * np.outer(v, v @ H[k + 1 :, k:])
        H[:, k + 1 :] -= beta * np.outer(H[:, k + 1 :] @ v, v)
        H[k + 2 :, k] = 0.0
    return H


def _pair(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]]."""
    tr = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    if disc >= 0.0:
        s = math.sqrt(disc)
        # avoid cancellation in the smaller root
        big = tr + math.copysign(s, tr) if tr != 0.0 else s
        det = a * d - b * c
        small = det / big if big != 0.0 else tr - s
        return complex(big), complex(small)
    s = math.sqrt(-disc)
    return complex(tr, s), complex(tr, -s)


def hessenberg_qr(H: np.ndarray, max_iter: int = 60):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    Returns ``(eigenvalues, converged)``; ``converged[i]`` is False for any
    eigenvalue read off a block that hit ``max_iter`` sweeps without deflating.
    """
    H = np.array(H, dtype=float)
    n = H.shape[0]
    eigs = np.zeros(n, dtype=complex)
    ok = np.ones(n, dtype=bool)
    norm = max(np.max(np.abs(H)) if n else 0.0, np.finfo(float).tiny)
    hi = n - 1
    its = 0
    while hi >= 0:
        # locate the start of the active unreduced block
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if s == 0.0:
                s = norm
            if abs(H[lo, lo - 1]) <= _EPS * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            eigs[hi - 1], eigs[hi] = _pair(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
            hi -= 2
            its = 0
            continue
        if its >= max_iter:
            # give up on this block: report its diagonal as unconverged
            eigs[lo : hi + 1] = np.diag(H)[lo : hi + 1]
            ok[lo : hi + 1] = False
            hi = lo - 1
            its = 0
            continue
        its += 1
        if its % 10 == 0:
            # exceptional shift breaks symmetric stalls
            w = abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2])
            sh, det = 1.5 * w, w * w
        else:
            a, b, c, d = H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi]
            sh, det = a + d, a * d - b * c
        x = H[lo, lo] ** 2 + H[lo, lo + 1] * H[lo + 1, lo] - sh * H[lo, lo] + det
        y = H[lo + 1, lo] * (H[lo, lo] + H[lo + 1, lo + 1] - sh)
        z = H[lo + 1, lo] * H[lo + 2, lo + 1]
        for k in range(lo, hi - 1):
            v, beta = _householder((x, y, z))
            if beta:
                r = max(lo, k - 1)
                H[k : k + 3, r : hi + 1] -= beta * np.outer(v, v @ H[k : k + 3, r : hi + 1])
                rr = min(k + 3, hi)
                H[lo : rr + 1, k : k + 3] -= beta * np.outer(H[lo : rr + 1, k : k + 3] @ v, v)
            x = H[k + 1, k]
            y = H[k + 2, k]
            if k < hi - 2:
                z = H[k + 3, k]
        v, beta = _householder((x, y))
        if beta:
            H[hi - 1 : hi + 1, hi - 2 : hi + 1] -= beta * np.outer(v, v @ H[hi - 1 : hi + 1, hi - 2 : hi + 1])
            H[lo : hi + 1, hi - 1 : hi + 1] -= beta * np.outer(H[lo : hi + 1, hi - 1 : hi + 1] @ v, v)
    return eigs, ok


def eigenvalues(M: np.ndarray, max_iter: int = 60):
    """All eigenvalues of a real square matrix (``(values, converged)``)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex), np.zeros(0, dtype=bool)
    return hessenberg_qr(hessenberg(balance(M)), max_iter)


def power_iteration(M: np.ndarray, iters: int = 200, squarings: int = 40, seed: int = 0) -> float:
    """Dominant |lambda| by power iteration on ``M^(2^squarings)``.

    Plain power iteration stalls when many eigenvalues crowd the unit circle.
    Repeated squaring (with the scale kept in log form) separates them first,
    and the 2^squarings-th root shrinks the remaining error accordingly.
    """
    M = np.asarray(M, dtype=float)
    nrm = np.linalg.norm(M)
    if nrm == 0.0:
        return 0.0
    S = M / nrm
    log_scale = math.log(nrm)
    for _ in range(squarings):
        S = S @ S
        nrm = np.linalg.norm(S)
        if nrm == 0.0:
            return 0.0
        S /= nrm
        log_scale = 2.0 * log_scale + math.log(nrm)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[0])
    x /= np.linalg.norm(x)
    logs = []
    for _ in range(iters):
        x = S @ x
        g = np.linalg.norm(x)
        if g == 0.0:
            return 0.0
        logs.append(math.log(g))
        x /= g
    tail = logs[iters // 2 :]
    return math.exp((log_scale + sum(tail) / len(tail)) / 2.0**squarings)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    rho: float
    on_circle_count: int
    tol: float
    converged: np.ndarray

    @property
    def unconverged(self) -> int:
        return int(np.count_nonzero(~self.converged))

    def summary(self) -> str:
        return f"rho={self.rho:.17g} on_circle={self.on_circle_count}"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("re,im,abs\n")
        order = np.lexsort((self.eigenvalues.imag, -np.abs(self.eigenvalues)))
        for lam in self.eigenvalues[order]:
            buf.write(f"{lam.real:.17g},{lam.imag:.17g},{abs(lam):.17g}\n")
        return buf.getvalue()


def eigen_spectrum(system: CompanionSystem | np.ndarray, tol: float = 1e-8, max_iter: int = 60) -> SpectrumReport:
    """Full spectrum of the one-step propagator of ``system``."""
    M = system.propagator() if isinstance(system, CompanionSystem) else np.asarray(system, dtype=float)
    lam, ok = eigenvalues(M, max_iter)
    mag = np.abs(lam)
    rho = float(mag.max()) if mag.size else 0.0
    count = int(np.count_nonzero(np.abs(mag - 1.0) <= tol))
    return SpectrumReport(lam, rho, count, tol, ok)
