import numpy as np
import pytest

import levypim as lp
from levypim import fastmath
from levypim.errors import ParameterError
from levypim.rng import RngStream


@pytest.fixture
def restore_backend():
    before = fastmath.active_backend()
    yield
    fastmath.set_backend(before)


def test_backends_agree_statistically(restore_backend):
    # the two transcendental backends may differ by ulps, never materially
    if fastmath.active_backend() == "numpy":
        pytest.skip("torch backend not available in this environment")
    results = {}
    for name in ("numpy", "torch"):
        fastmath.set_backend(name)
        x = lp.sample_standard_stable(lp.StableSpec(1.5), RngStream(42, 0),
                                      size=50_000)
        results[name] = x
    a, b = results["numpy"], results["torch"]
    assert np.max(np.abs(a - b)) < 1e-9 * (1.0 + np.max(np.abs(a)))
    ecf_gap = abs(lp.empirical_cf(a, [1.0])[0] - lp.empirical_cf(b, [1.0])[0])
    assert ecf_gap < 1e-10


def test_numpy_backend_is_self_deterministic(restore_backend):
    fastmath.set_backend("numpy")
    a = lp.sample_standard_stable(lp.StableSpec(1.3), RngStream(7, 1), size=4096)
    b = lp.sample_standard_stable(lp.StableSpec(1.3), RngStream(7, 1), size=4096)
    assert np.array_equal(a, b)


def test_unknown_backend_rejected():
    with pytest.raises(ParameterError):
        fastmath.set_backend("cuda")


def test_thread_setting_validated():
    with pytest.raises(ParameterError):
        fastmath.set_threads(0)


def test_elementwise_grouping_invariance():
    # the same element must map to the same bits however the batch is shaped
    x = np.linspace(-1.5, 1.5, 4096)
    whole = fastmath.sin(x)
    parts = np.concatenate([fastmath.sin(x[:17]), fastmath.sin(x[17:])])
    assert np.array_equal(whole, parts)


def test_path_error_diagnostic_variants():
    from levypim.systems import Trajectory

    a = Trajectory(np.arange(5) * 0.1, np.zeros(5))
    gaps = np.array([0.0, 1.0, 2.0, 1.0, 1.0])
    b = Trajectory(np.arange(5) * 0.1, gaps)
    p = 1.4
    plain = lp.lp_path_error(a, b, p)
    assert plain == pytest.approx(np.mean(gaps[1:] ** p))
    assert lp.lp_path_error(a, b, p, sup_norm=True) == pytest.approx(2.0 ** p)
    assert lp.lp_path_error(a, b, p, rooted=True) == pytest.approx(plain ** (1 / p))
