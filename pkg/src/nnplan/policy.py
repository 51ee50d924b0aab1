"""Multilayer-perceptron controller and its goal-error feature vector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlAction

N_FEATURES = 5
N_OUTPUTS = 2


@dataclass(frozen=True)
class MlpArchitecture:
    layer_sizes: tuple[int, ...] = (5, 2, 2)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if sizes[0] != N_FEATURES or sizes[-1] != N_OUTPUTS:
            raise ValueError(f"layer sizes must start with {N_FEATURES} and end with {N_OUTPUTS}, got {list(sizes)}")
        if any(n <= 0 for n in sizes):
            raise ValueError("layer sizes must be positive")

    @classmethod
    def parse(cls, text: str) -> "MlpArchitecture":
        """Parse ``"5,10,2"`` or ``"[5, 10, 2]"``."""
        return cls(tuple(int(tok) for tok in text.strip("[] ").split(",") if tok.strip()))

    def __str__(self):
        return "NN-[" + ",".join(map(str, self.layer_sizes)) + "]"


@dataclass(frozen=True)
class NormConstants:
    d_xi: float = 30.0
    d_eta: float = 3.5
    d_phi: float = 2.0 * math.pi
    d_v: float = 120.0 / 3.6

    def __post_init__(self):
        if min(self.d_xi, self.d_eta, self.d_phi, self.d_v) <= 0:
            raise ValueError("normalization constants must be positive")


def param_count(arch: MlpArchitecture) -> int:
    s = arch.layer_sizes
    return sum((n_in + 1) * n_out for n_in, n_out in zip(s[:-1], s[1:]))


def wrap_angle(a: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    w = a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))
    # floor puts exact odd multiples of pi at -pi; fold onto +pi
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


class Mlp:
    """A fixed-architecture tanh network bound to one flat parameter vector.

    Layout per layer: weights row-major ``(n_out, n_in)`` then biases, layers
    concatenated from input to output. Every layer, the output layer included,
    uses ``tanh``.
    """

    def __init__(self, arch: MlpArchitecture, theta):
        theta = np.asarray(theta, dtype=float)
        expected = param_count(arch)
        if theta.shape != (expected,):
            raise ValueError(f"{arch} expects {expected} parameters, got shape {theta.shape}")
        self.arch = arch
        self.theta = theta
        self._layers = []
        off = 0
        for n_in, n_out in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
            W = theta[off:off + n_in * n_out].reshape(n_out, n_in)
            off += n_in * n_out
            b = theta[off:off + n_out]
            off += n_out
            self._layers.append((W, b))

    def __call__(self, s) -> ControlAction:
        # scalar loops keep the summation order identical to the rollout kernel
        h = [float(v) for v in s]
        for W, b in self._layers:
            out = []
            for i in range(W.shape[0]):
                acc = 0.0
                row = W[i]
                for j in range(len(h)):
                    acc += float(row[j]) * h[j]
                out.append(math.tanh(acc + float(b[i])))
            h = out
        return ControlAction(h[0], h[1])


def forward(arch: MlpArchitecture, theta, s) -> ControlAction:
    return Mlp(arch, theta)(s)


def build_features(ev_in_anchor, goal_in_anchor, prev_a0: float, nc: NormConstants) -> np.ndarray:
    """Normalized goal errors plus the previous steering output.

    Both arguments carry ``x, y, phi, v`` expressed in the same anchor frame.
    """
    return np.array([
        (goal_in_anchor.x - ev_in_anchor.x) / nc.d_xi,
        (goal_in_anchor.y - ev_in_anchor.y) / nc.d_eta,
        wrap_angle(goal_in_anchor.phi - ev_in_anchor.phi) / nc.d_phi,
        (goal_in_anchor.v - ev_in_anchor.v) / nc.d_v,
        prev_a0,
    ])
