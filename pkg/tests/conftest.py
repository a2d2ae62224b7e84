import math

import pytest

from gmcf.kernels import BSPLINE3, TRIANGLE, ScaleCovariance


@pytest.fixture(scope="session")
def tri():
    return ScaleCovariance(TRIANGLE)


@pytest.fixture(scope="session")
def bsp():
    return ScaleCovariance(BSPLINE3)


SQRT2 = math.sqrt(2.0)
