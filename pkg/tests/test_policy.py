import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnplan.dynamics import VehicleState
from nnplan.planner import GoalSetpoint
from nnplan.policy import Mlp, MlpArchitecture, NormConstants, build_features, forward, param_count, wrap_angle

ARCHS = [(5, 2, 2), (5, 10, 2), (5, 10, 10, 2)]


@pytest.mark.parametrize("sizes,count", list(zip(ARCHS, [18, 82, 192])))
def test_param_counts(sizes, count):
    arch = MlpArchitecture(sizes)
    assert param_count(arch) == count
    forward(arch, np.zeros(count), np.zeros(5))
    with pytest.raises(ValueError):
        forward(arch, np.zeros(count + 1), np.zeros(5))


def test_parse_and_label():
    arch = MlpArchitecture.parse("[5, 10, 2]")
    assert arch.layer_sizes == (5, 10, 2)
    assert str(arch) == "NN-[5,10,2]"
    with pytest.raises(ValueError):
        MlpArchitecture((4, 2))


def test_zero_weights_give_zero_action():
    a = forward(MlpArchitecture(), np.zeros(18), [0.3, -0.2, 0.1, 0.5, -1.0])
    assert (a.a0, a.a1) == (0.0, 0.0)


def test_layout_weights_then_bias():
    theta = np.zeros(18)
    theta[10] = 1.0  # hidden bias 0
    theta[12] = 1.0  # W2[0, 0]
    a = forward(MlpArchitecture(), theta, np.zeros(5))
    assert a.a0 == pytest.approx(math.tanh(math.tanh(1.0)))
    assert a.a0 == pytest.approx(0.642015, abs=1e-6)
    assert a.a1 == 0.0


def test_matches_matrix_form():
    rng = np.random.default_rng(1)
    arch = MlpArchitecture((5, 10, 10, 2))
    theta = rng.normal(size=192)
    s = rng.normal(size=5)
    h, off = s, 0
    for n_in, n_out in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
        W = theta[off:off + n_in * n_out].reshape(n_out, n_in)
        off += n_in * n_out
        h = np.tanh(W @ h + theta[off:off + n_out])
        off += n_out
    a = Mlp(arch, theta)(s)
    assert [a.a0, a.a1] == pytest.approx(h, abs=1e-14)


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=18, max_size=18), st.lists(st.floats(-2, 2), min_size=5, max_size=5))
def test_forward_is_pure(theta, s):
    arch = MlpArchitecture()
    a, b = forward(arch, theta, s), forward(arch, list(theta), list(s))
    assert a == b
    assert -1.0 <= a.a0 <= 1.0 and -1.0 <= a.a1 <= 1.0


@pytest.mark.parametrize("a,w", [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi),
                                 (3 * math.pi, math.pi), (2 * math.pi + 0.5, 0.5), (-0.5, -0.5)])
def test_wrap_angle(a, w):
    assert wrap_angle(a) == pytest.approx(w, abs=1e-12)


@given(st.floats(-100, 100))
def test_wrap_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_features():
    nc = NormConstants()
    s = build_features(VehicleState(0, 0, 0, 0), GoalSetpoint(15.0, -1.75, math.pi, 60 / 3.6), 0.25, nc)
    assert s == pytest.approx([0.5, -0.5, 0.5, 0.5, 0.25])
    s = build_features(VehicleState(1, 0, 3.0, 0), GoalSetpoint(1, 0, -3.0, 0), 0.0, nc)
    assert s[2] == pytest.approx((2 * math.pi - 6.0) / (2 * math.pi))
