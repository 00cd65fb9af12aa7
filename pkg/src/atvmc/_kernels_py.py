"""Pure-Python twin of the compiled chain kernels.

Same signatures, same uniform consumption order and acceptance test as
``_kernels.pyx``. Scalar math goes through :mod:`math`/:mod:`cmath` so the
accept/reject decisions agree with the C build; per-sample measurements
are vectorized with numpy.
"""

import cmath
import math

import numpy as np

BACKEND = "python"


def _accept(r: complex, u: float) -> bool:
    x = 2.0 * r.real
    if x >= 0.0:
        return True
    return u < math.exp(x)


def jastrow_chain(spins, alpha, uniforms, n_burn, n_keep, J, h):
    N = spins.shape[0]
    P = alpha.shape[0]
    antipode = N % 2 == 0
    alpha = [complex(x) for x in alpha]
    s = [int(x) for x in spins]
    field = []
    for i in range(N):
        acc = 0j
        for d in range(1, P + 1):
            if antipode and 2 * d == N:
                acc += alpha[d - 1] * s[(i + d) % N]
            else:
                acc += alpha[d - 1] * (s[(i + d) % N] + s[(i - d) % N])
        field.append(acc)

    O = np.zeros((n_keep, P), dtype=np.complex128)
    eloc = np.zeros(n_keep, dtype=np.complex128)
    sx = np.zeros(n_keep, dtype=np.complex128)
    n_acc_burn = n_acc_keep = 0
    k = 0
    for sweep in range(n_burn + n_keep):
        for i in range(N):
            r = -2.0 * s[i] * field[i]
            if _accept(r, uniforms[k]):
                sold = s[i]
                s[i] = -sold
                for d in range(1, P + 1):
                    field[(i - d) % N] -= 2.0 * sold * alpha[d - 1]
                    if not (antipode and 2 * d == N):
                        field[(i + d) % N] -= 2.0 * sold * alpha[d - 1]
                if sweep < n_burn:
                    n_acc_burn += 1
                else:
                    n_acc_keep += 1
            k += 1
        if sweep >= n_burn:
            idx = sweep - n_burn
            arr = np.array(s, dtype=np.float64)
            flips = sum(cmath.exp(-2.0 * s[i] * field[i]) for i in range(N))
            eloc[idx] = -J * float(np.dot(arr, np.roll(arr, -1))) - h * flips
            sx[idx] = flips / N
            for d in range(1, P + 1):
                if antipode and 2 * d == N:
                    O[idx, d - 1] = float(np.dot(arr[: N // 2], arr[N // 2 :]))
                else:
                    O[idx, d - 1] = float(np.dot(arr, np.roll(arr, -d)))
    spins[:] = s
    return O, eloc, sx, n_acc_burn, n_acc_keep


def _flip_ratio_rbm(i, N, a, s, tnh, ch, sh):
    si = s[i]
    kk = (i - np.arange(N)) % N
    factors = ch[:, kk] - si * sh[:, kk] * tnh
    # log of the product, computed per factor to stay overflow-safe
    return -2.0 * a * si + complex(np.sum(np.log(factors)))


def rbm_chain(spins, a, b, W, uniforms, n_burn, n_keep, J, h):
    N = spins.shape[0]
    dens = b.shape[0]
    P = N * dens + dens + 1
    a = complex(a)
    W = np.asarray(W)
    s = spins.astype(np.float64)
    offset = (np.arange(N)[None, :] - np.arange(N)[:, None]) % N  # (shift, site)
    site = (np.arange(N)[None, :] + np.arange(N)[:, None]) % N  # (shift, k)
    theta = b[:, None] + np.einsum("fsi,i->fs", W[:, offset], s)
    tnh = np.tanh(theta)
    ch = np.cosh(2.0 * W)
    sh = np.sinh(2.0 * W)
    th2 = np.tanh(2.0 * W)

    O = np.zeros((n_keep, P), dtype=np.complex128)
    eloc = np.zeros(n_keep, dtype=np.complex128)
    sx = np.zeros(n_keep, dtype=np.complex128)
    n_acc_burn = n_acc_keep = 0
    k = 0
    for sweep in range(n_burn + n_keep):
        for i in range(N):
            r = _flip_ratio_rbm(i, N, a, s, tnh, ch, sh)
            if _accept(r, uniforms[k]):
                sold = s[i]
                s[i] = -sold
                cols = (i - np.arange(N)) % N
                theta = theta - 2.0 * sold * W[:, cols]
                u = -sold * th2[:, cols]
                tnh = (tnh + u) / (1.0 + tnh * u)
                if sweep < n_burn:
                    n_acc_burn += 1
                else:
                    n_acc_keep += 1
            k += 1
        tnh = np.tanh(theta)
        if sweep >= n_burn:
            idx = sweep - n_burn
            flips = sum(cmath.exp(_flip_ratio_rbm(i, N, a, s, tnh, ch, sh)) for i in range(N))
            eloc[idx] = -J * float(np.dot(s, np.roll(s, -1))) - h * flips
            sx[idx] = flips / N
            O[idx, 0] = s.sum()
            O[idx, 1 : 1 + dens] = tnh.sum(axis=1)
            O[idx, 1 + dens :] = np.einsum("fs,sk->fk", tnh, s[site]).reshape(-1)
    spins[:] = s.astype(np.int8)
    return O, eloc, sx, n_acc_burn, n_acc_keep
