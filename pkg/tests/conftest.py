# tests/conftest.py
import mpmath
import pytest


@pytest.fixture(autouse=True)
def restore_mpmath_precision():
    saved = mpmath.mp.prec
    yield
    mpmath.mp.prec = saved
