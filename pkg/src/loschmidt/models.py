"""Kicked models shared by the quantum and classical modules.

Both models are H = p^2/2 + k v(r) sum_n delta(t - n T) in dimensionless
form with kick strength K = k T:

    sawtooth  v(r) = -(r - pi)^2 / 2   (chaotic for every K > 0)
    rotator   v(r) = cos r             (standard map)

The perturbation of the echo experiments is K -> K + eps, i.e. the
perturbing observable is v itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class ModelKind(enum.Enum):
    SAWTOOTH = "sawtooth"
    ROTATOR = "rotator"


@dataclass(frozen=True)
class KickedModel:
    kind: ModelKind
    K: float

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kind is ModelKind.SAWTOOTH and not self.K > 0:
            raise ValueError(f"sawtooth kick strength must be positive, got K={self.K}")

    @classmethod
    def sawtooth(cls, K):
        return cls(ModelKind.SAWTOOTH, K)

    @classmethod
    def rotator(cls, K):
        return cls(ModelKind.ROTATOR, K)

    def v(self, r):
        return potential(self.kind, r)


def potential(kind: ModelKind, r):
    r = np.asarray(r, dtype=np.float64)
    if kind is ModelKind.SAWTOOTH:
        return -0.5 * (r - np.pi) ** 2
    return np.cos(r)


def force(kind: ModelKind, r):
    """-dv/dr, the momentum kick per unit K."""
    r = np.asarray(r, dtype=np.float64)
    if kind is ModelKind.SAWTOOTH:
        return r - np.pi
    return np.sin(r)


def force_derivative(kind: ModelKind, r):
    r = np.asarray(r, dtype=np.float64)
    if kind is ModelKind.SAWTOOTH:
        return np.ones_like(r)
    return np.cos(r)
