# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Metropolis chains for the Jastrow and symmetric-RBM ansatze.

Mirrors atvmc._kernels_py exactly: same uniforms consumed in the same order,
same acceptance test ``u < exp(2 Re r)``.
"""

import numpy as np
cimport numpy as cnp

from libc.math cimport exp, fabs

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex clog(double complex)
    double complex ctanh(double complex)
    double complex ccosh(double complex)
    double complex csinh(double complex)
    double creal(double complex)
    double cimag(double complex)

cnp.import_array()

BACKEND = "cython"

cdef inline bint _accept(double complex r, double u) nogil:
    cdef double x = 2.0 * creal(r)
    if x >= 0.0:
        return True
    return u < exp(x)


def jastrow_chain(signed char[::1] spins, double complex[::1] alpha,
                  double[::1] uniforms, Py_ssize_t n_burn, Py_ssize_t n_keep,
                  double J, double h):
    cdef Py_ssize_t N = spins.shape[0]
    cdef Py_ssize_t P = alpha.shape[0]
    cdef Py_ssize_t i, j, d, s_idx, sweep, k
    cdef Py_ssize_t half = N // 2
    cdef bint antipode = (N % 2 == 0)
    cdef double complex r, acc
    cdef double sold, diag
    cdef long n_acc_burn = 0, n_acc_keep = 0

    O_arr = np.zeros((n_keep, P), dtype=np.complex128)
    e_arr = np.zeros(n_keep, dtype=np.complex128)
    x_arr = np.zeros(n_keep, dtype=np.complex128)
    cdef double complex[:, ::1] O = O_arr
    cdef double complex[::1] eloc = e_arr
    cdef double complex[::1] sx = x_arr
    field_arr = np.zeros(N, dtype=np.complex128)
    cdef double complex[::1] field = field_arr

    # field[i] = sum_d alpha_d (s_{i+d} + s_{i-d}), antipode counted once
    for i in range(N):
        acc = 0
        for d in range(1, P + 1):
            if antipode and 2 * d == N:
                acc = acc + alpha[d - 1] * spins[(i + d) % N]
            else:
                acc = acc + alpha[d - 1] * (spins[(i + d) % N] + spins[(i - d + N) % N])
        field[i] = acc

    k = 0
    for sweep in range(n_burn + n_keep):
        for i in range(N):
            r = -2.0 * spins[i] * field[i]
            if _accept(r, uniforms[k]):
                sold = spins[i]
                spins[i] = <signed char>(-spins[i])
                for d in range(1, P + 1):
                    field[(i - d + N) % N] = field[(i - d + N) % N] - 2.0 * sold * alpha[d - 1]
                    if not (antipode and 2 * d == N):
                        field[(i + d) % N] = field[(i + d) % N] - 2.0 * sold * alpha[d - 1]
                if sweep < n_burn:
                    n_acc_burn += 1
                else:
                    n_acc_keep += 1
            k += 1
        if sweep >= n_burn:
            s_idx = sweep - n_burn
            diag = 0.0
            acc = 0
            for i in range(N):
                diag += spins[i] * spins[(i + 1) % N]
                acc = acc + cexp(-2.0 * spins[i] * field[i])
            eloc[s_idx] = -J * diag - h * acc
            sx[s_idx] = acc / N
            for d in range(1, P + 1):
                diag = 0.0
                if antipode and 2 * d == N:
                    for j in range(half):
                        diag += spins[j] * spins[j + half]
                else:
                    for j in range(N):
                        diag += spins[j] * spins[(j + d) % N]
                O[s_idx, d - 1] = diag
    return O_arr, e_arr, x_arr, n_acc_burn, n_acc_keep


cdef inline double complex _flip_ratio_rbm(Py_ssize_t i, Py_ssize_t N, Py_ssize_t dens,
                                         double complex a, signed char[::1] spins,
                                         double complex[::1] tnh,
                                         double complex[:, ::1] ch,
                                         double complex[:, ::1] sh) nogil:
    cdef double complex prod = 1.0, lsum = 0.0
    cdef double si = spins[i]
    cdef Py_ssize_t f, s, kk
    cdef double mag
    for f in range(dens):
        for s in range(N):
            kk = (i - s + N) % N
            prod = prod * (ch[f, kk] - si * sh[f, kk] * tnh[f * N + s])
            mag = fabs(creal(prod)) + fabs(cimag(prod))
            if mag > 1e150 or mag < 1e-150:
                lsum = lsum + clog(prod)
                prod = 1.0
    return -2.0 * a * si + lsum + clog(prod)


def rbm_chain(signed char[::1] spins, double complex a, double complex[::1] b,
              double complex[:, ::1] W, double[::1] uniforms,
              Py_ssize_t n_burn, Py_ssize_t n_keep, double J, double h):
    cdef Py_ssize_t N = spins.shape[0]
    cdef Py_ssize_t dens = b.shape[0]
    cdef Py_ssize_t P = N * dens + dens + 1
    cdef Py_ssize_t i, f, s, kk, sweep, s_idx, k
    cdef double complex r, acc
    cdef double diag, sold, ssum
    cdef long n_acc_burn = 0, n_acc_keep = 0

    O_arr = np.zeros((n_keep, P), dtype=np.complex128)
    e_arr = np.zeros(n_keep, dtype=np.complex128)
    x_arr = np.zeros(n_keep, dtype=np.complex128)
    cdef double complex[:, ::1] O = O_arr
    cdef double complex[::1] eloc = e_arr
    cdef double complex[::1] sx = x_arr

    theta_arr = np.zeros(dens * N, dtype=np.complex128)
    tnh_arr = np.zeros(dens * N, dtype=np.complex128)
    ch_arr = np.cosh(2.0 * np.asarray(W))
    sh_arr = np.sinh(2.0 * np.asarray(W))
    th_arr = np.tanh(2.0 * np.asarray(W))
    cdef double complex[::1] theta = theta_arr
    cdef double complex[::1] tnh = tnh_arr
    cdef double complex[:, ::1] ch = ch_arr
    cdef double complex[:, ::1] sh = sh_arr
    cdef double complex[:, ::1] th2 = th_arr
    cdef double complex u, t

    for f in range(dens):
        for s in range(N):
            acc = b[f]
            for i in range(N):
                acc = acc + W[f, (i - s + N) % N] * spins[i]
            theta[f * N + s] = acc
            tnh[f * N + s] = ctanh(acc)

    k = 0
    for sweep in range(n_burn + n_keep):
        for i in range(N):
            r = _flip_ratio_rbm(i, N, dens, a, spins, tnh, ch, sh)
            if _accept(r, uniforms[k]):
                sold = spins[i]
                spins[i] = <signed char>(-spins[i])
                # tanh addition formula; the cache is refreshed from theta every sweep
                for f in range(dens):
                    for s in range(N):
                        kk = (i - s + N) % N
                        theta[f * N + s] = theta[f * N + s] - 2.0 * sold * W[f, kk]
                        u = -sold * th2[f, kk]
                        t = tnh[f * N + s]
                        tnh[f * N + s] = (t + u) / (1.0 + t * u)
                if sweep < n_burn:
                    n_acc_burn += 1
                else:
                    n_acc_keep += 1
            k += 1
        for s in range(dens * N):
            tnh[s] = ctanh(theta[s])
        if sweep >= n_burn:
            s_idx = sweep - n_burn
            diag = 0.0
            ssum = 0.0
            acc = 0
            for i in range(N):
                diag += spins[i] * spins[(i + 1) % N]
                ssum += spins[i]
                acc = acc + cexp(_flip_ratio_rbm(i, N, dens, a, spins, tnh, ch, sh))
            eloc[s_idx] = -J * diag - h * acc
            sx[s_idx] = acc / N
            O[s_idx, 0] = ssum
            for f in range(dens):
                acc = 0
                for s in range(N):
                    acc = acc + tnh[f * N + s]
                O[s_idx, 1 + f] = acc
                for kk in range(N):
                    acc = 0
                    for s in range(N):
                        acc = acc + tnh[f * N + s] * spins[(kk + s) % N]
                    O[s_idx, 1 + dens + f * N + kk] = acc
    return O_arr, e_arr, x_arr, n_acc_burn, n_acc_keep
