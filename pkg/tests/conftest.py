import math

import numpy as np
import pytest
from scipy import integrate

from realcheck import _accel
from realcheck.kernels import numpy_impl


def chi2_quad(d, x):
    """chi2(d) CDF by adaptive quadrature of the density.

    Substituting t = u**2 removes the t**(d/2-1) endpoint singularity at d=1.
    """
    if x == 0.0:
        return 0.0
    lognorm = -(0.5 * d) * math.log(2.0) - math.lgamma(0.5 * d)

    def f(u):
        t = u * u
        return 2.0 * u * math.exp(lognorm + (0.5 * d - 1.0) * math.log(t) - 0.5 * t) if u > 0 else (
            2.0 * math.exp(lognorm) if d == 1 else 0.0
        )

    mode = math.sqrt(max(d - 2.0, 0.0))
    pts = [p for p in (mode,) if 0.0 < p < math.sqrt(x)]
    val, _ = integrate.quad(f, 0.0, math.sqrt(x), epsabs=0.0, epsrel=1e-13, limit=400, points=pts or None)
    return val


def kernel_backends():
    out = [pytest.param(numpy_impl, id="numpy")]
    if _accel.HAVE_NUMBA:
        from realcheck.kernels import numba_impl

        out.append(pytest.param(numba_impl, id="numba"))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(gen, d, cond=50.0):
    q, _ = np.linalg.qr(gen.standard_normal((d, d)))
    lam = np.exp(gen.uniform(0.0, math.log(cond), d))
    return (q * lam) @ q.T


ACCEPTANCE_LINES = []


def acceptance_line(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
