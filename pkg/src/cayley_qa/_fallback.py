"""Pure-numpy versions of the compiled kernels (same signatures, same results)."""
import numpy as np


def interaction_diagonal(U):
    U = np.ascontiguousarray(U, dtype=np.float64)
    n = U.shape[0]
    out = np.zeros(1, dtype=np.float64)
    # states whose highest set bit is `pos` extend the states below it by one atom
    for pos in range(n):
        a = n - 1 - pos
        rowsum = np.zeros(1, dtype=np.float64)
        for b in range(pos):
            rowsum = np.concatenate([rowsum, rowsum + U[a, n - 1 - b]])
        out = np.concatenate([out, out + rowsum])
    return out


def up_counts(n):
    s = np.arange(1 << n, dtype=np.int64)
    count = np.zeros_like(s)
    for b in range(n):
        count += (s >> b) & 1
    return count


def _flip_sum(psi, n):
    # trailing axes beyond the 2**n basis index are batch dimensions
    view = psi.reshape((2,) * n + psi.shape[1:])
    acc = np.zeros_like(view)
    for axis in range(n):
        acc += np.flip(view, axis=axis)
    return acc.reshape(psi.shape)


def matvec(psi, diag, half_omega, n, out):
    out[:] = diag * psi + half_omega * _flip_sum(psi, n)
    return out


def cheb_step(phi, prev, out, acc_vec, diag, half_omega, n, inv_scale, shift, coef, factor):
    hv = (diag - shift) * phi + half_omega * _flip_sum(phi, n)
    out[:] = factor * inv_scale * hv - prev
    acc_vec += coef * out


def cheb_step_batch(phi, prev, out, acc_vec, diag, half_omega, n, inv_scale, shift, coef, factor):
    hv = (diag - shift)[:, None] * phi + half_omega * _flip_sum(phi, n)
    out[:] = factor * inv_scale * hv - prev
    acc_vec += coef * out
