"""Quantized kicked maps on the torus and their exact Loschmidt echo.

One period is U = exp(-i p^2 / (2 hbar)) exp(-i K_eff v(r) / hbar) with
T = hbar = 2 pi / N and K_eff = K + eps, eps = sigma * hbar.  With the
momentum p = hbar l the kinetic phase reduces to exp(-i pi l^2 / N).

A step applies the kick in position space, transforms to momentum space,
applies the kinetic phase and transforms back.  States are evolved in
batches of shape (B, N) so an ensemble costs one FFT call per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .models import KickedModel
from .series import EchoSeries
from .torus import (
    TWO_PI,
    GaussianPacketSpec,
    Representation,
    StateVector,
    TorusGrid,
    packet_amplitudes,
    to_position,
)

DEFAULT_ENSEMBLE_SIZE = 100
_CHUNK = 256


@dataclass(frozen=True)
class PerturbationSpec:
    sigma: float
    hbar_eff: float
    epsilon: float = field(init=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        object.__setattr__(self, "epsilon", self.sigma * self.hbar_eff)


@dataclass(frozen=True, eq=False)
class FloquetOperator:
    kinetic_phases: np.ndarray
    potential_phases: np.ndarray
    grid: TorusGrid
    model: KickedModel
    sigma_shift: float

    @property
    def K_eff(self) -> float:
        return self.model.K + self.sigma_shift * self.grid.hbar_eff


def build_floquet(model: KickedModel, grid: TorusGrid, sigma_shift: float = 0.0) -> FloquetOperator:
    l = grid.momentum_index.astype(np.float64)
    kinetic = np.exp(-1j * np.pi * (l * l) / grid.N)
    K_eff = model.K + sigma_shift * grid.hbar_eff
    kick = np.exp(-1j * K_eff * model.v(grid.r_sites) / grid.hbar_eff)
    return FloquetOperator(kinetic, kick, grid, model, float(sigma_shift))


def _step(amps: np.ndarray, U: FloquetOperator) -> np.ndarray:
    """One period on position amplitudes of shape (N,) or (B, N)."""
    phi = np.fft.fft(amps * U.potential_phases, axis=-1, norm="ortho")
    return np.fft.ifft(phi * U.kinetic_phases, axis=-1, norm="ortho")


def evolve_step(psi: StateVector, U: FloquetOperator) -> StateVector:
    if not psi.grid.compatible(U.grid):
        raise DimensionMismatchError(f"state has N={psi.grid.N}, operator has N={U.grid.N}")
    if psi.representation is Representation.MOMENTUM:
        psi = to_position(psi)
    return StateVector(_step(psi.amplitudes, U), Representation.POSITION, psi.grid)


def floquet_matrix(U: FloquetOperator) -> np.ndarray:
    """Dense N x N matrix of U built from an explicit DFT matrix (no FFT)."""
    N = U.grid.N
    j = np.arange(N)
    l = U.grid.momentum_index
    W = np.exp(-2j * np.pi * np.outer(l, j) / N) / np.sqrt(N)
    return W.conj().T @ (U.kinetic_phases[:, None] * W) @ np.diag(U.potential_phases)


def echo_matrix(model: KickedModel, sigma: float, grid: TorusGrid, psi0: np.ndarray, t_max: int) -> np.ndarray:
    """Echo M(t), t = 0..t_max, for a batch of initial states psi0 of shape (B, N)."""
    U0 = build_floquet(model, grid, 0.0)
    U1 = build_floquet(model, grid, sigma)
    a = np.array(psi0, dtype=np.complex128, copy=True)
    b = a.copy()
    out = np.empty((a.shape[0], t_max + 1))
    out[:, 0] = np.abs(np.einsum("bj,bj->b", b.conj(), a)) ** 2
    for t in range(1, t_max + 1):
        a = _step(a, U0)
        b = _step(b, U1)
        out[:, t] = np.abs(np.einsum("bj,bj->b", b.conj(), a)) ** 2
    return out


def _metadata(model, sigma, grid, xi, **extra):
    meta = {
        "model": model.kind.value,
        "K": float(model.K),
        "sigma": float(sigma),
        "N": grid.N,
        "hbar_eff": grid.hbar_eff,
        "epsilon": sigma * grid.hbar_eff,
        "xi": float(xi),
    }
    meta.update(extra)
    return meta


def loschmidt_echo(model: KickedModel, sigma: float, grid: TorusGrid, packet: GaussianPacketSpec, t_max: int) -> EchoSeries:
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    xi = packet.width(grid)
    psi0 = packet_amplitudes(packet.r0, packet.p0, xi, grid)[None, :]
    M = echo_matrix(model, sigma, grid, psi0, t_max)[0]
    meta = _metadata(model, sigma, grid, xi, r0=float(packet.r0), p0=float(packet.p0))
    return EchoSeries(np.arange(t_max + 1), M, np.zeros_like(M), 1, meta)


def draw_centers(n_states: int, seed: int) -> np.ndarray:
    """Packet centers (r0, p0), uniform on [0, 2pi)^2, shape (n_states, 2)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, TWO_PI, size=(n_states, 2))


def member_echoes(model, sigma, grid, centers: np.ndarray, t_max: int, xi: float | None = None) -> np.ndarray:
    """Per-member echo curves, shape (len(centers), t_max + 1), in center order."""
    xi = np.sqrt(grid.hbar_eff) if xi is None else xi
    blocks = []
    for start in range(0, len(centers), _CHUNK):
        c = centers[start:start + _CHUNK]
        psi0 = packet_amplitudes(c[:, 0], c[:, 1], xi, grid)
        blocks.append(echo_matrix(model, sigma, grid, psi0, t_max))
    return np.concatenate(blocks, axis=0)


def reduce_members(M: np.ndarray):
    n = M.shape[0]
    mean = M.mean(axis=0)
    stderr = M.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(M.shape[1])
    return mean, stderr


def ensemble_echo(
    model: KickedModel,
    sigma: float,
    grid: TorusGrid,
    n_states: int = DEFAULT_ENSEMBLE_SIZE,
    seed: int = 0,
    t_max: int = 50,
    xi: float | None = None,
) -> EchoSeries:
    """Echo averaged (as M, not m) over packets with seeded uniform random centers."""
    if n_states < 1:
        raise ValueError("n_states must be at least 1")
    xi = np.sqrt(grid.hbar_eff) if xi is None else xi
    centers = draw_centers(n_states, seed)
    M = member_echoes(model, sigma, grid, centers, t_max, xi)
    mean, stderr = reduce_members(M)
    meta = _metadata(model, sigma, grid, xi, seed=int(seed))
    return EchoSeries(np.arange(t_max + 1), mean, stderr, n_states, meta)
