import numpy as np
import pytest
from numpy.polynomial import Chebyshev

from tdmie.kernels import KernelKind, PiecewiseKernel
from tdmie.mot import (
    TemporalBasisConfig,
    assemble_blocks,
    default_dt,
    difference_blocks,
    march,
    march_with_charge,
    surface_system,
)
from tdmie.stability import (
    SpectrumReport,
    balance,
    build_companion,
    eigen_spectrum,
    eigenvalues,
    hessenberg,
    power_iteration,
)
from tdmie.vsh import C0, MU0, Equation, IncidentConfig

DT = default_dt(IncidentConfig())


def _blocks(kind, n, Np=1, variant="plain"):
    identity, K = surface_system(Equation(kind), n, 1.0, C0, MU0)
    return assemble_blocks(K, TemporalBasisConfig(DT, Np), identity, variant)


def _sorted(lam):
    return lam[np.lexsort((np.round(lam.imag, 9), np.round(lam.real, 9)))]


# -- eigensolver ---------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_eigenvalues_match_reference_on_random_matrices(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((120, 120)) * np.exp(rng.uniform(-3, 3, 120))
    lam, ok = eigenvalues(M)
    assert ok.all()
    ref = np.linalg.eigvals(M)
    # match each reference eigenvalue to the nearest computed one
    dist = np.abs(ref[:, None] - lam[None, :])
    assert np.max(dist.min(axis=1) / np.maximum(1.0, np.abs(ref))) <= 1e-9


def test_eigenvalues_special_structures():
    J = np.diag(np.ones(5), 1)  # nilpotent Jordan block
    lam, ok = eigenvalues(J)
    assert ok.all() and np.max(np.abs(lam)) <= 1e-10
    R = np.array([[0.0, -2.0], [2.0, 0.0]])
    lam, _ = eigenvalues(R)
    np.testing.assert_allclose(sorted(lam.imag), [-2.0, 2.0], atol=1e-14)
    lam, _ = eigenvalues(np.diag([3.0, -1.0, 0.5]))
    np.testing.assert_allclose(sorted(lam.real), [-1.0, 0.5, 3.0], atol=1e-14)
    assert eigenvalues(np.zeros((0, 0)))[0].size == 0
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((2, 3)))


def test_balance_and_hessenberg_are_similarities(rng):
    M = rng.standard_normal((30, 30))
    M[0] *= 1e6
    Bm = balance(M)
    H = hessenberg(Bm)
    assert np.all(np.tril(H, -2) == 0.0)
    for X in (Bm, H):
        assert np.trace(X) == pytest.approx(np.trace(M), rel=1e-10)
        np.testing.assert_allclose(_sorted(np.linalg.eigvals(X)), _sorted(np.linalg.eigvals(M)), rtol=1e-8, atol=1e-6)


def test_power_iteration_on_crowded_spectrum(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((60, 60)))
    d = np.concatenate([[0.9999], 0.9998 - 0.5 * rng.random(59)])
    M = Q @ np.diag(d) @ Q.T
    assert power_iteration(M) == pytest.approx(0.9999, rel=1e-9)
    assert power_iteration(np.zeros((4, 4))) == 0.0


# -- companion systems -----------------------------------------------------------


def test_delta_kernel_gives_nilpotent_shift():
    K = PiecewiseKernel(1, KernelKind.K0, 1.0, 1.0, Chebyshev([0.0], domain=[0, 2.0]), ((0.0, 3.0),))
    blocks = assemble_blocks(K, TemporalBasisConfig(0.5, 1))
    cs = build_companion(blocks)
    assert not cs.charged and cs.dim == (blocks.Nk + 1) * 2
    assert np.all(cs.B[:2] == 0.0)
    rep = eigen_spectrum(cs)
    assert np.max(np.abs(rep.eigenvalues)) <= 1e-10


@pytest.mark.parametrize("kind", [2, 3, 4])
def test_plain_companion_trajectory_matches_march(kind, rng):
    blocks = _blocks(kind, 3)
    cs = build_companion(blocks, kind)
    rhs = rng.standard_normal((50, 2)) + 1j * rng.standard_normal((50, 2))
    ref = march(blocks, rhs).values
    state = np.zeros(cs.dim, dtype=complex)
    out = []
    for v in rhs:
        state = cs.step(state, v)
        out.append(cs.current(state))
    assert np.max(np.abs(np.array(out) - ref)) <= 1e-10 * np.max(np.abs(ref))
    # one step from a random state also agrees with a single solve
    s0 = rng.standard_normal(cs.dim)
    hist = s0.reshape(-1, 2)
    acc = rhs[0] - sum(blocks.blocks[m + 1] @ hist[m] for m in range(blocks.Nk))
    np.testing.assert_allclose(cs.current(cs.step(s0, rhs[0])), np.linalg.solve(blocks.blocks[0], acc), atol=1e-12 * np.max(np.abs(acc)))


@pytest.mark.parametrize("Np", [1, 2])
def test_charged_companion_trajectory_matches_march(Np, rng):
    plain = _blocks(1, 3, Np)
    cs = build_companion(plain, KernelKind.K1)
    assert cs.charged
    diff = difference_blocks(plain)
    assert cs.dim == 2 * (diff.Nk + 1) * (Np + 1)
    rhs = rng.standard_normal((50, Np + 1)) + 1j * rng.standard_normal((50, Np + 1))
    ref, charge = march_with_charge(diff, rhs, return_charge=True)
    state = np.zeros(cs.dim, dtype=complex)
    out = []
    for v in rhs:
        state = cs.step(state, v)
        out.append(cs.current(state))
    assert np.max(np.abs(np.array(out) - ref.values)) <= 1e-10 * np.max(np.abs(ref.values))
    # the charge block of the state is C_{j-1}; advancing once more exposes C_j
    nI = cs.dim // 2
    state = cs.step(state, np.zeros(Np + 1))
    np.testing.assert_allclose(state[nI : nI + Np + 1], charge.C, atol=1e-10 * np.max(np.abs(charge.C)))


def test_charged_row_implements_accumulator():
    diff = difference_blocks(_blocks(1, 3))
    cs = build_companion(diff)
    P, nI = 2, cs.dim // 2
    np.testing.assert_array_equal(cs.B[nI : nI + P, nI : nI + P], -np.eye(P))
    for m in range(diff.Nk + 1):
        np.testing.assert_array_equal(cs.B[nI : nI + P, m * P : (m + 1) * P], -diff.blocks[m])


@pytest.mark.parametrize("kind", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [3, 30])
def test_power_iteration_matches_qr(kind, n):
    cs = build_companion(_blocks(kind, n), kind)
    M = cs.propagator()
    rep = eigen_spectrum(M)
    assert rep.unconverged == 0
    assert power_iteration(M) == pytest.approx(rep.rho, abs=1e-6)


@pytest.mark.parametrize("Np", [1, 2])
@pytest.mark.parametrize("n", [1, 3, 10, 30])
@pytest.mark.parametrize("kind", [1, 2, 3, 4])
def test_spectral_radius_bounded(kind, n, Np):
    rep = eigen_spectrum(build_companion(_blocks(kind, n, Np), kind))
    assert rep.unconverged == 0
    assert rep.rho <= 1.0 + 1e-8


def test_report_formats():
    lam = np.array([0.5 + 0.5j, 1.0, 0.5 - 0.5j, 0.1])
    rep = eigen_spectrum(np.diag([1.0, 0.1, 0.2]))
    assert rep.summary() == "rho=1 on_circle=1"
    r = SpectrumReport(lam, 1.0, 1, 1e-8, np.ones(4, bool))
    lines = r.to_csv().splitlines()
    assert lines[0] == "re,im,abs"
    assert lines[1].startswith("1,0,1")
    assert len(lines) == 5
