import pytest

import levypim as lp


@pytest.fixture(scope="session")
def paper_system():
    return lp.make_system("paper_example", alpha=1.5)


@pytest.fixture(scope="session")
def linear_system():
    return lp.make_system("linear_slow", alpha=1.5)


@pytest.fixture(scope="session")
def abar15():
    return lp.compute_abar_quadrature(1.5)


@pytest.fixture(scope="session")
def quad_drift(abar15):
    return lp.EffectiveDrift(mode="quadrature_example", abar=abar15)


def assert_close(actual, expected, tol, what=""):
    actual = float(actual)
    expected = float(expected)
    assert abs(actual - expected) <= tol, (
        f"{what or 'value'}: {actual} vs {expected} (tol {tol}, "
        f"dev {abs(actual - expected):.3g})")
