"""Both kernel backends against each other and against library oracles."""
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import special

from realcheck import kernels
from realcheck.kernels import numpy_impl

from conftest import kernel_backends, random_spd

BACKENDS = kernel_backends()


def _spd_stack(gen, n, d, cond=1e3):
    return np.stack([random_spd(gen, d, cond) for _ in range(n)])


@pytest.mark.parametrize("impl", BACKENDS)
class TestKernelContracts:
    def test_chol(self, impl, rng):
        a = _spd_stack(rng, 40, 5)
        L, ok = impl.chol_batch(a)
        assert ok.all()
        np.testing.assert_allclose(L, np.linalg.cholesky(a), rtol=1e-12, atol=1e-12)
        assert np.all(np.triu(L, 1) == 0)

    def test_chol_flags_failures(self, impl):
        a = np.stack([np.eye(3), np.zeros((3, 3)), -np.eye(3), np.diag([1.0, 1e-20, 1.0])])
        _, ok = impl.chol_batch(a)
        assert ok.tolist() == [True, False, False, False]

    def test_forward_and_mahalanobis(self, impl, rng):
        a = _spd_stack(rng, 10, 4)
        L = np.linalg.cholesky(a)
        r = rng.standard_normal((10, 7, 4))
        z = impl.forward_solve(L, r)
        np.testing.assert_allclose(np.einsum("nij,nkj->nki", L, z), r, atol=1e-12)
        m = impl.mahalanobis_batch(L, r)
        ref = np.einsum("nki,nki->nk", r, np.linalg.solve(a[:, None], r[..., None])[..., 0])
        np.testing.assert_allclose(m, ref, rtol=1e-10)

    def test_jacobi(self, impl, rng):
        a = _spd_stack(rng, 25, 6)
        w, V, ok = impl.jacobi_eigh_batch(a)
        assert ok.all()
        np.testing.assert_allclose(w, np.linalg.eigvalsh(a)[:, ::-1], rtol=1e-11)
        np.testing.assert_allclose(np.einsum("nij,nj,nkj->nik", V, w, V), a, atol=1e-10)

    def test_gammainc(self, impl):
        a = np.repeat([0.5, 1.0, 2.0, 3.5, 10.0, 40.0], 50)
        x = np.tile(np.geomspace(1e-6, 200.0, 50), 6)
        np.testing.assert_allclose(impl.gammainc_lower(a, x), special.gammainc(a, x), rtol=1e-13, atol=1e-300)

    def test_moments(self, impl, rng):
        s = rng.standard_normal((8, 30, 3))
        mean, cov = impl.sample_moments(s)
        np.testing.assert_allclose(mean, s.mean(axis=1), rtol=1e-13)
        for i in range(8):
            np.testing.assert_allclose(cov[i], np.cov(s[i], rowvar=False), rtol=1e-12)

    def test_splitmix_reference(self, impl):
        # SplitMix64 seeded with 0: first outputs of the reference generator
        words = impl.splitmix_words(np.array([0], dtype=np.uint64), 3)[0]
        assert [int(w) for w in words] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_class_scores(self, impl, rng):
        logits = rng.standard_normal((300, 6, 5)) * 3
        p = np.exp(logits) / np.exp(logits).sum(axis=2, keepdims=True)
        umax, ent, wv, mi, wvp, pred = impl.class_scores(p)
        m = p.mean(axis=1)
        np.testing.assert_array_equal(pred, m.argmax(axis=1))
        np.testing.assert_allclose(umax, 1 - m.max(axis=1), rtol=1e-13)
        np.testing.assert_allclose(ent, special.entr(m).sum(axis=1), rtol=1e-12)
        np.testing.assert_allclose(mi, ent - special.entr(p).sum(axis=2).mean(axis=1), atol=1e-13)
        np.testing.assert_allclose(wv, p[np.arange(300), :, pred].var(axis=1, ddof=1), rtol=1e-12)
        np.testing.assert_allclose(wvp, p.max(axis=2).var(axis=1, ddof=1), rtol=1e-12)
        one = impl.class_scores(p[:, :1])
        assert np.all(np.isnan(one[2])) and np.all(np.isnan(one[3]))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="numba not installed")
def test_backends_agree(rng):
    from realcheck.kernels import numba_impl

    a = _spd_stack(rng, 200, 4)
    r = rng.standard_normal((200, 50, 4))
    La, oka = numpy_impl.chol_batch(a)
    Lb, okb = numba_impl.chol_batch(a)
    np.testing.assert_array_equal(oka, okb)
    np.testing.assert_allclose(La, Lb, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(numpy_impl.mahalanobis_batch(La, r), numba_impl.mahalanobis_batch(La, r), rtol=1e-13)
    wa, Va, _ = numpy_impl.jacobi_eigh_batch(a)
    wb, Vb, _ = numba_impl.jacobi_eigh_batch(a)
    np.testing.assert_allclose(wa, wb, rtol=1e-13)
    np.testing.assert_allclose(Va, Vb, atol=1e-12)
    keys = rng.integers(0, 2**63, 100, dtype=np.int64).astype(np.uint64)
    np.testing.assert_array_equal(numpy_impl.splitmix_words(keys, 9), numba_impl.splitmix_words(keys, 9))


def test_backend_env_flag():
    code = "from realcheck import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, REALCHECK_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["REALCHECK_BACKEND"] = "fortran"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0 and "REALCHECK_BACKEND" in bad.stderr


def test_active_backend_exported():
    assert kernels.BACKEND in ("numba", "numpy")
    for name in kernels.KERNELS:
        assert callable(getattr(kernels, name))
