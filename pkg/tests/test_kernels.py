import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adtalk import _kernels

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")

np_split = _kernels.NUMPY_KERNELS["split_losses"]
nb_split = _kernels.NUMBA_KERNELS["split_losses"]


@settings(max_examples=150, deadline=None)
@given(arrays(np.float64, st.integers(2, 30), elements=st.integers(-5, 5).map(float)),
       st.integers(0, 2**31 - 1))
def test_split_losses_backends_agree(x, seed):
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(x.size) < 0.5, 1, -1)
    w = rng.random(x.size) + 0.01
    w /= w.sum()
    order = np.argsort(x, kind="stable")
    a = np_split(x[order], y[order], w[order], 1e-6)
    b = nb_split(x[order], y[order], w[order], 1e-6)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-15)


def test_split_losses_guard_candidate():
    th, z, sl, sr = np_split(np.array([1.0, 2.0]), np.array([-1, 1]), np.array([0.5, 0.5]), 1e-6)
    assert th[0] == -np.inf and sl[0] == 0.0
    assert th[1] == 1.5
    assert z[0] == pytest.approx(1.0)


def test_midpoint_of_adjacent_floats_stays_left():
    a = 1.0
    b = np.nextafter(a, 2.0)
    th, *_ = np_split(np.array([a, b]), np.array([-1, 1]), np.array([0.5, 0.5]), 1e-6)
    assert a <= th[1] < b


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(4, 200), elements=st.floats(-1, 1)), st.integers(1, 5),
       st.integers(0, 60))
def test_autocorr_backends_agree(x, lo, span):
    a = _kernels.NUMPY_KERNELS["max_autocorr"](x, lo, lo + span)
    b = _kernels.NUMBA_KERNELS["max_autocorr"](x, lo, lo + span)
    assert a == pytest.approx(b, abs=1e-9)


def test_autocorr_of_periodic_signal_is_one():
    x = np.tile([1.0, 0.0, -1.0, 0.0], 20)
    for kern in (_kernels.NUMPY_KERNELS, _kernels.NUMBA_KERNELS):
        assert kern["max_autocorr"](x, 2, 6) == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, st.integers(1, 300), elements=st.integers(0, 4)))
def test_transition_counts_backends_agree(s):
    a = _kernels.NUMPY_KERNELS["transition_counts"](s, 5)
    b = _kernels.NUMBA_KERNELS["transition_counts"](s, 5)
    np.testing.assert_array_equal(a, b)
    assert a.sum() == s.size - 1
