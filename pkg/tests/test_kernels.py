import os
import subprocess
import sys

import numpy as np
import pytest

from cayley_qa import _fallback, kernels

compiled = pytest.importorskip("cayley_qa._kernels")


def _couplings(n, seed=0):
    rng = np.random.default_rng(seed)
    U = rng.random((n, n))
    U = U + U.T
    np.fill_diagonal(U, 0)
    return U


def test_compiled_backend_selected_by_default():
    assert kernels.BACKEND == "cython"


def test_env_var_forces_fallback():
    env = dict(os.environ, CAYLEY_QA_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from cayley_qa import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_diagonal_and_counts_agree(n):
    U = _couplings(n)
    assert np.allclose(compiled.interaction_diagonal(U), _fallback.interaction_diagonal(U), atol=1e-12)
    assert np.array_equal(compiled.up_counts(n), _fallback.up_counts(n))


def test_diagonal_matches_direct_sum():
    n = 6
    U = _couplings(n, 4)
    diag = _fallback.interaction_diagonal(U)
    for s in range(1 << n):
        occ = [(s >> (n - 1 - a)) & 1 for a in range(n)]
        direct = sum(U[j, k] * occ[j] * occ[k] for j in range(n) for k in range(j + 1, n))
        assert diag[s] == pytest.approx(direct, abs=1e-12)


def _random_state(shape, seed):
    rng = np.random.default_rng(seed)
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)).astype(np.complex128)


@pytest.mark.parametrize("n", [1, 4, 8])
def test_matvec_agrees(n):
    diag = np.random.default_rng(n).normal(size=1 << n)
    psi = _random_state(1 << n, 1)
    a = np.empty_like(psi)
    b = np.empty_like(psi)
    compiled.matvec(psi, diag, 0.37, n, a)
    _fallback.matvec(psi, diag, 0.37, n, b)
    assert np.allclose(a, b, atol=1e-13)


@pytest.mark.parametrize("batch", [False, True])
def test_chebyshev_step_agrees(batch):
    n = 7
    shape = (1 << n, 5) if batch else (1 << n,)
    diag = np.random.default_rng(2).normal(size=1 << n)
    phi, prev = _random_state(shape, 3), _random_state(shape, 4)
    results = []
    for mod in (compiled, _fallback):
        out = np.empty_like(phi)
        acc = _random_state(shape, 5)
        fn = mod.cheb_step_batch if batch else mod.cheb_step
        fn(phi, prev, out, acc, diag, 0.41, n, 0.3, 0.2, 0.5 - 0.25j, 2.0)
        results.append((out, acc))
    assert np.allclose(results[0][0], results[1][0], atol=1e-13)
    assert np.allclose(results[0][1], results[1][1], atol=1e-13)
