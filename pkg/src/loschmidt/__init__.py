"""Loschmidt echo in quantized kicked maps and the transverse-field Ising chain.

Exact echoes come from FFT split-step propagation on the torus
(``maps``) and from the free-fermion product (``ising``); semiclassical
curves are built from classical oracles (``classical``,
``semiclassics``) and compared in ``analysis``.
"""

from .torus import make_grid, gaussian_packet, GaussianPacketSpec, TorusGrid, StateVector, Representation
from .models import KickedModel, ModelKind
from .maps import build_floquet, evolve_step, loschmidt_echo, ensemble_echo
from .series import EchoSeries, read_series, write_series
from .ising import IsingQuench, ising_echo, ed_oracle_echo

__version__ = "0.1.0"

__all__ = [
    "make_grid", "gaussian_packet", "GaussianPacketSpec", "TorusGrid", "StateVector", "Representation",
    "KickedModel", "ModelKind", "build_floquet", "evolve_step", "loschmidt_echo", "ensemble_echo",
    "EchoSeries", "read_series", "write_series", "IsingQuench", "ising_echo", "ed_oracle_echo",
]
