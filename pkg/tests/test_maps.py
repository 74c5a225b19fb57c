import numpy as np
import pytest

from loschmidt.errors import DimensionMismatchError
from loschmidt.maps import (
    build_floquet,
    draw_centers,
    echo_matrix,
    ensemble_echo,
    evolve_step,
    floquet_matrix,
    loschmidt_echo,
)
from loschmidt.models import KickedModel
from loschmidt.torus import GaussianPacketSpec, Representation, StateVector, gaussian_packet, make_grid, to_momentum

SAW = KickedModel.sawtooth(2.0)
ROT = KickedModel.rotator(11.0)


def test_phase_examples():
    g = make_grid(8)
    U = build_floquet(SAW, g, 0.7)
    assert U.potential_phases[4] == 1  # r_4 = pi
    assert U.kinetic_phases[0] == 1
    assert U.K_eff == pytest.approx(2.0 + 0.7 * g.hbar_eff)


def test_sawtooth_requires_positive_K():
    with pytest.raises(ValueError):
        KickedModel.sawtooth(0.0)


def test_dense_matrix_unitary_n4():
    W = floquet_matrix(build_floquet(SAW, make_grid(4)))
    assert np.max(np.abs(W.conj().T @ W - np.eye(4))) < 1e-14


@pytest.mark.parametrize("model", [SAW, ROT])
@pytest.mark.parametrize("N", [5, 8, 16])
def test_step_matches_dense_oracle(model, N):
    g = make_grid(N)
    U = build_floquet(model, g, 0.4)
    W = floquet_matrix(U)
    psi = gaussian_packet(GaussianPacketSpec(1.3, 4.0), g)
    out = psi.amplitudes
    dense = psi.amplitudes
    for _ in range(5):
        out = evolve_step(StateVector(out, Representation.POSITION, g), U).amplitudes
        dense = W @ dense
    assert np.max(np.abs(out - dense)) < 1e-12


def test_step_accepts_momentum_input():
    g = make_grid(8)
    U = build_floquet(SAW, g)
    psi = gaussian_packet(GaussianPacketSpec(1.0, 2.0), g)
    a = evolve_step(psi, U).amplitudes
    b = evolve_step(to_momentum(psi), U).amplitudes
    assert np.allclose(a, b, atol=1e-14)


def test_step_grid_mismatch():
    with pytest.raises(DimensionMismatchError):
        evolve_step(gaussian_packet(GaussianPacketSpec(1, 1), make_grid(8)), build_floquet(SAW, make_grid(16)))


def test_identical_operators_bitwise():
    g = make_grid(64)
    psi = gaussian_packet(GaussianPacketSpec(1.0, 2.0), g)
    a = evolve_step(psi, build_floquet(SAW, g, 0.0)).amplitudes
    b = evolve_step(psi, build_floquet(SAW, g, 0.0)).amplitudes
    assert np.array_equal(a, b)


@pytest.mark.slow
def test_unitarity_long_run():
    g = make_grid(2**13)
    U = build_floquet(ROT, g, 0.3)
    psi = gaussian_packet(GaussianPacketSpec(1.0, 2.0), g)
    a = psi.amplitudes
    worst = 0.0
    for t in range(10**4):
        a = evolve_step(StateVector(a, Representation.POSITION, g), U).amplitudes
        if t % 1000 == 999:
            worst = max(worst, abs(np.linalg.norm(a) - 1))
    assert worst < 1e-10


@pytest.mark.parametrize("model", [SAW, ROT])
def test_sigma_zero_gives_unit_echo(model):
    s = loschmidt_echo(model, 0.0, make_grid(128), GaussianPacketSpec(2.0, 1.0), 40)
    assert np.max(np.abs(s.M - 1)) < 1e-10


def test_echo_starts_at_one_and_is_bounded():
    s = loschmidt_echo(SAW, 0.5, make_grid(256), GaussianPacketSpec(2.0, 1.0), 30)
    assert abs(s.M[0] - 1) < 1e-12
    assert np.all(s.M <= 1 + 1e-12) and np.all(s.M >= 0)
    assert list(s.times) == list(range(31))


def test_echo_against_dense_evolution():
    g = make_grid(12)
    psi = gaussian_packet(GaussianPacketSpec(2.5, 1.5), g).amplitudes
    W0 = floquet_matrix(build_floquet(SAW, g, 0.0))
    W1 = floquet_matrix(build_floquet(SAW, g, 1.7))
    s = loschmidt_echo(SAW, 1.7, g, GaussianPacketSpec(2.5, 1.5), 6)
    a, b = psi, psi
    for t in range(1, 7):
        a, b = W0 @ a, W1 @ b
        assert s.M[t] == pytest.approx(abs(np.vdot(b, a)) ** 2, abs=1e-12)


def test_echo_symmetric_in_roles():
    # |<psi1|psi0>|^2 is symmetric, so swapping which map is perturbed leaves M unchanged
    g = make_grid(64)
    psi = gaussian_packet(GaussianPacketSpec(1.0, 2.0), g).amplitudes[None, :]
    m1 = echo_matrix(SAW, 0.8, g, psi, 10)
    U0 = build_floquet(SAW, g, 0.0)
    U1 = build_floquet(KickedModel.sawtooth(2.0 + 0.8 * g.hbar_eff), g, 0.0)
    a = b = psi[0]
    for t in range(1, 11):
        a = evolve_step(StateVector(a, Representation.POSITION, g), U0).amplitudes
        b = evolve_step(StateVector(b, Representation.POSITION, g), U1).amplitudes
        assert abs(np.vdot(a, b)) ** 2 == pytest.approx(m1[0, t], abs=1e-12)


def test_ensemble_single_state_matches_single_packet():
    g = make_grid(128)
    e = ensemble_echo(SAW, 0.5, g, n_states=1, seed=11, t_max=20)
    r0, p0 = draw_centers(1, 11)[0]
    s = loschmidt_echo(SAW, 0.5, g, GaussianPacketSpec(r0, p0), 20)
    assert np.allclose(e.M, s.M, atol=1e-14)
    assert e.ensemble_size == 1


def test_ensemble_deterministic_and_seed_sensitive():
    g = make_grid(64)
    a = ensemble_echo(SAW, 0.5, g, n_states=20, seed=4, t_max=15)
    b = ensemble_echo(SAW, 0.5, g, n_states=20, seed=4, t_max=15)
    c = ensemble_echo(SAW, 0.5, g, n_states=20, seed=5, t_max=15)
    assert np.array_equal(a.M, b.M) and np.array_equal(a.stderr, b.stderr)
    assert not np.array_equal(a.M, c.M)


def test_ensemble_is_mean_of_members():
    g = make_grid(64)
    centers = draw_centers(7, 2)
    e = ensemble_echo(SAW, 0.5, g, n_states=7, seed=2, t_max=10)
    singles = [loschmidt_echo(SAW, 0.5, g, GaussianPacketSpec(r, p), 10).M for r, p in centers]
    assert np.allclose(e.M, np.mean(singles, axis=0), atol=1e-14)
    assert np.allclose(e.stderr, np.std(singles, axis=0, ddof=1) / np.sqrt(7), atol=1e-14)


def test_ensemble_chunking_does_not_change_result():
    # 300 members spans two internal blocks
    g = make_grid(32)
    e = ensemble_echo(SAW, 0.5, g, n_states=300, seed=8, t_max=5)
    centers = draw_centers(300, 8)
    from loschmidt.torus import packet_amplitudes

    M = echo_matrix(SAW, 0.5, g, packet_amplitudes(centers[:, 0], centers[:, 1], np.sqrt(g.hbar_eff), g), 5)
    assert np.allclose(e.M, M.mean(axis=0), atol=1e-14)


def test_echo_decreases_with_sigma_on_average():
    g = make_grid(256)
    vals = [ensemble_echo(SAW, s, g, n_states=50, seed=0, t_max=6).M[6] for s in (0.1, 0.3, 0.6)]
    assert vals[0] > vals[1] > vals[2]


def test_ensemble_rejects_empty():
    with pytest.raises(ValueError):
        ensemble_echo(SAW, 0.5, make_grid(16), n_states=0)
