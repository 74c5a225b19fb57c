"""Hilbert space of a particle on the unit torus [0, 2pi)^2.

A torus with N sites has hbar_eff = 2 pi / N.  Position sites are
r_j = 2 pi j / N and momentum sites p_l = 2 pi l / N = hbar_eff * l.

Momentum amplitudes are stored in FFT order: array index i holds the
centered index l = i for i < ceil(N/2) and l = i - N otherwise, i.e. the
set {-floor(N/2), ..., ceil(N/2) - 1}.  For even N the array index N/2 is
l = -N/2, which is the momentum p = -pi == pi (mod 2 pi).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidDimensionError, RepresentationError

TWO_PI = 2.0 * np.pi
PERIODIZATION_IMAGES = 3


class Representation(enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"


@dataclass(frozen=True, eq=False)
class TorusGrid:
    N: int
    hbar_eff: float = field(init=False)
    r_sites: np.ndarray = field(init=False, repr=False)
    momentum_index: np.ndarray = field(init=False, repr=False)
    p_sites: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = self.N
        object.__setattr__(self, "hbar_eff", TWO_PI / N)
        object.__setattr__(self, "r_sites", TWO_PI * np.arange(N) / N)
        l = np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)
        object.__setattr__(self, "momentum_index", l)
        object.__setattr__(self, "p_sites", TWO_PI * l / N)

    def compatible(self, other: "TorusGrid") -> bool:
        return self.N == other.N


def make_grid(N: int) -> TorusGrid:
    if int(N) != N or N < 2:
        raise InvalidDimensionError(f"Hilbert dimension must be an integer >= 2, got {N!r}")
    return TorusGrid(int(N))


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    representation: Representation
    grid: TorusGrid

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def to_record(self) -> dict:
        """JSON-ready dump; amplitudes as [re, im] pairs of doubles."""
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        return {
            "N": self.grid.N,
            "representation": self.representation.value,
            "amplitudes": np.stack([a.real, a.imag], axis=1).tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "StateVector":
        pairs = np.asarray(record["amplitudes"], dtype=np.float64)
        grid = make_grid(record["N"])
        if pairs.shape != (grid.N, 2):
            raise DimensionMismatchError(f"expected {grid.N} amplitude pairs, got shape {pairs.shape}")
        return cls(pairs[:, 0] + 1j * pairs[:, 1], Representation(record["representation"]), grid)


@dataclass(frozen=True)
class GaussianPacketSpec:
    r0: float
    p0: float
    xi: float | None = None  # None -> sqrt(hbar_eff) of the grid it is placed on

    def width(self, grid: TorusGrid) -> float:
        xi = np.sqrt(grid.hbar_eff) if self.xi is None else float(self.xi)
        if not xi > 0:
            raise ValueError(f"packet dispersion must be positive, got {xi}")
        return xi


def momentum_width(xi: float, hbar: float) -> float:
    """Width w_p of the momentum weight exp[-(p - p0)^2 / w_p^2] of a packet of dispersion xi."""
    return hbar / xi


def to_momentum(psi: StateVector) -> StateVector:
    if psi.representation is not Representation.POSITION:
        raise RepresentationError("to_momentum expects a position-representation state")
    return StateVector(np.fft.fft(psi.amplitudes, norm="ortho"), Representation.MOMENTUM, psi.grid)


def to_position(psi: StateVector) -> StateVector:
    if psi.representation is not Representation.MOMENTUM:
        raise RepresentationError("to_position expects a momentum-representation state")
    return StateVector(np.fft.ifft(psi.amplitudes, norm="ortho"), Representation.POSITION, psi.grid)


def packet_amplitudes(r0, p0, xi: float, grid: TorusGrid) -> np.ndarray:
    """Normalized position amplitudes of periodized Gaussian packets.

    ``r0`` and ``p0`` may be arrays of equal shape (B,); the result is then
    (B, N).  Scalars give shape (N,).
    """
    r0 = np.asarray(r0, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    scalar = r0.ndim == 0
    r0 = np.atleast_1d(r0)[:, None]
    p0 = np.atleast_1d(p0)[:, None]
    psi = np.zeros((r0.shape[0], grid.N), dtype=np.complex128)
    for n in range(-PERIODIZATION_IMAGES, PERIODIZATION_IMAGES + 1):
        x = grid.r_sites[None, :] + TWO_PI * n
        psi += np.exp(1j * p0 * x / grid.hbar_eff - (x - r0) ** 2 / (2.0 * xi**2))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    return psi[0] if scalar else psi


def gaussian_packet(spec: GaussianPacketSpec, grid: TorusGrid) -> StateVector:
    xi = spec.width(grid)
    if xi >= TWO_PI:
        warnings.warn(
            f"packet dispersion xi={xi:.3g} exceeds the torus period; the packet is ill-conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    amps = packet_amplitudes(spec.r0, spec.p0, xi, grid)
    return StateVector(amps, Representation.POSITION, grid)


def overlap(psi: StateVector, phi: StateVector) -> complex:
    """<psi|phi>."""
    if not psi.grid.compatible(phi.grid):
        raise DimensionMismatchError(f"grid mismatch: N={psi.grid.N} vs N={phi.grid.N}")
    if psi.representation is not phi.representation:
        raise RepresentationError("overlap needs both states in the same representation")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes))
