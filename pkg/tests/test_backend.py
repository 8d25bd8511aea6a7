import os
import subprocess
import sys

import numpy as np
import pytest

from hyperform import _backend
from hyperform import formcalc as fc
from hyperform import hyperops as ho
from hyperform import quadpair as qp
from hyperform import symexpr as se

try:
    from hyperform import _kernels  # noqa: F401
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernel not built")

EXPRS = ["exp(z1)*zb2^3 - 1/(z1 + 2)", "sin(z1*zb1)^2 + cos(z2)", "norm2z(1,2)^(-2)*zb1",
         "log(2 + z2)*sqrt(3 + z1)", "achi(y1 - y2)*bump(y1, 0.3)"]


@pytest.fixture
def restore_backend():
    yield
    _backend._BACKEND = None


@needs_cython
def test_evaluate_agrees(restore_backend):
    es = [se.parse(t, 2) for t in EXPRS]
    Z = se.default_points(2, 3000, 1.5)
    _backend.set_backend("numpy")
    a = se.evaluate(es, Z, check=False)
    _backend.set_backend("cython")
    b = se.evaluate(es, Z, check=False)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13, equal_nan=True)


@needs_cython
def test_pairing_agrees(restore_backend):
    w = qp.Density.top("x1*x2 + 3", 2)
    vals = []
    for name in ("numpy", "cython"):
        _backend.set_backend(name)
        vals.append(qp.pair(ho.delta(2), w).value)
        vals.append(qp.sphere_integral(fc.bm_kernel(3), N=16).value)
    assert vals[0] == pytest.approx(vals[2], abs=1e-13)
    assert vals[1] == pytest.approx(vals[3], abs=1e-13)


def test_pure_fallback_selected_by_env():
    env = dict(os.environ, HYPERFORM_PURE="1")
    code = "from hyperform._backend import backend; print(backend().name)"
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert r.stdout.strip() == "numpy"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")


def test_compensated_sum():
    # compensation acts between chunk partials
    C = _backend.CHUNK
    v = np.zeros(4 * C, dtype=complex)
    v[0], v[C], v[2 * C], v[3 * C] = 1e16, 1.0 + 1j, -1e16, 1.0
    assert _backend.neumaier_sum(v) == 2.0 + 1j
    assert np.sum(v) != 2.0 + 1j
