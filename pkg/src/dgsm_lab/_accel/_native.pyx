# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the numerical hot paths.

Same interface as ``pyimpl``; see that module for the reference semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt
from scipy.special.cython_special cimport dawsn as c_dawsn
from scipy.special.cython_special cimport ndtr as c_ndtr

cnp.import_array()

BACKEND_NAME = "native"

cdef double SQRT2 = sqrt(2.0)
cdef double SQRT_2_OVER_PI = sqrt(2.0 / 3.14159265358979323846)
cdef double EULER_GAMMA = 0.5772156649015328606
cdef double C_INF = (0.5772156649015328606 + 2.0 * log(2.0)) / 4.0
cdef double R_CLAMP = 1e8
cdef double Z_SERIES = 3.0
cdef double Z_QUAD = 12.0

cdef double[6] ASYM
ASYM[0] = 1.0 / 8.0
ASYM[1] = 3.0 / 32.0
ASYM[2] = 5.0 / 32.0
ASYM[3] = 105.0 / 256.0
ASYM[4] = 945.0 / 640.0
ASYM[5] = 10395.0 / 1536.0

cdef double[64] GLX
cdef double[64] GLW
_nodes, _weights = np.polynomial.legendre.leggauss(64)
for _k in range(64):
    GLX[_k] = _nodes[_k]
    GLW[_k] = _weights[_k]
del _nodes, _weights


cdef double g_series(double z) nogil:
    cdef double x = z * z
    cdef double term = 1.0
    cdef double total = 1.0
    cdef int n
    for n in range(500):
        term = term * (-x) * (n + 1.0) / ((n + 1.5) * (n + 2.0))
        total += term
        if fabs(term) <= 1e-16 * fabs(total):
            break
    return 2.0 * x * total / 4.0


cdef double g_quad(double z) nogil:
    cdef double half = 0.5 * z
    cdef double acc = 0.0
    cdef int k
    for k in range(64):
        acc += GLW[k] * c_dawsn(half * (GLX[k] + 1.0))
    return half * acc


cdef double g_asym(double z) nogil:
    cdef double out = 0.5 * log(z) + C_INF
    cdef double z2 = z * z
    cdef double p = z2
    cdef int k
    for k in range(6):
        out -= ASYM[k] / p
        p *= z2
    return out


cdef double term_scalar(double r) nogil:
    cdef double z = fabs(r)
    if z > R_CLAMP:
        z = R_CLAMP
    z /= SQRT2
    if z <= Z_SERIES:
        return 4.0 * g_series(z)
    if z <= Z_QUAD:
        return 4.0 * g_quad(z)
    return 4.0 * g_asym(z)


def entropy_term(r):
    """r^2 * 2F2(1,1;3/2,2;-r^2/2), elementwise."""
    arr = np.ascontiguousarray(np.asarray(r, dtype=np.float64))
    shape = arr.shape
    cdef double[::1] flat = arr.ravel()
    out_arr = np.empty(flat.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(flat.shape[0]):
        out[i] = term_scalar(flat[i])
    return out_arr.reshape(shape)


def folded_mean_var(mu, sigma):
    """Mean and variance of |X| for X ~ N(mu, sigma^2), elementwise."""
    mu_arr = np.ascontiguousarray(np.asarray(mu, dtype=np.float64))
    sg_arr = np.ascontiguousarray(np.asarray(sigma, dtype=np.float64))
    mu_arr, sg_arr = np.broadcast_arrays(mu_arr, sg_arr)
    shape = mu_arr.shape
    cdef double[::1] m = np.ascontiguousarray(mu_arr).ravel()
    cdef double[::1] s = np.ascontiguousarray(sg_arr).ravel()
    mean_arr = np.empty(m.shape[0], dtype=np.float64)
    var_arr = np.empty(m.shape[0], dtype=np.float64)
    cdef double[::1] mean = mean_arr
    cdef double[::1] var = var_arr
    cdef Py_ssize_t i
    cdef double r, mv, vv
    for i in range(m.shape[0]):
        r = m[i] / s[i] if s[i] > 0.0 else 0.0
        mv = SQRT_2_OVER_PI * s[i] * exp(-0.5 * r * r) + m[i] * (1.0 - 2.0 * c_ndtr(-r))
        vv = m[i] * m[i] + s[i] * s[i] - mv * mv
        mean[i] = mv
        var[i] = vv if vv > 0.0 else 0.0
    return mean_arr.reshape(shape), var_arr.reshape(shape)


def rbf_cross_stack(Xc, X, inv_ls2, double outputscale):
    """Kernel row c (n, t) and its first-argument gradient G (n, d, t)."""
    cdef double[:, ::1] A = np.ascontiguousarray(Xc, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(inv_ls2, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], t = B.shape[0], d = A.shape[1]
    c_arr = np.empty((n, t), dtype=np.float64)
    g_arr = np.empty((n, d, t), dtype=np.float64)
    cdef double[:, ::1] c = c_arr
    cdef double[:, :, ::1] G = g_arr
    cdef Py_ssize_t p, j, i
    cdef double q, diff, cij
    with nogil:
        for p in range(n):
            for j in range(t):
                q = 0.0
                for i in range(d):
                    diff = A[p, i] - B[j, i]
                    q += diff * diff * w[i]
                cij = outputscale * exp(-0.5 * q)
                c[p, j] = cij
                for i in range(d):
                    G[p, i, j] = -(A[p, i] - B[j, i]) * w[i] * cij
    return c_arr, g_arr


cdef inline unsigned long long mix64(unsigned long long z) nogil:
    z = z + <unsigned long long>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <unsigned long long>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <unsigned long long>0x94D049BB133111EB
    return z ^ (z >> 31)


def splitmix64(z):
    """SplitMix64 finalizer; the counter-based hash behind Owen scrambling."""
    arr = np.ascontiguousarray(np.asarray(z, dtype=np.uint64))
    shape = arr.shape
    cdef unsigned long long[::1] flat = arr.ravel()
    out_arr = np.empty(flat.shape[0], dtype=np.uint64)
    cdef unsigned long long[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(flat.shape[0]):
        out[i] = mix64(flat[i])
    return out_arr.reshape(shape)


def sobol_raw(V, Py_ssize_t start, Py_ssize_t n):
    """Gray-code Sobol integers: points start..start+n-1, 32-bit values."""
    cdef unsigned long long[:, ::1] Vm = np.ascontiguousarray(V, dtype=np.uint64)
    cdef Py_ssize_t dim = Vm.shape[0]
    out_arr = np.empty((n, dim), dtype=np.uint64)
    cdef unsigned long long[:, ::1] out = out_arr
    x_arr = np.zeros(dim, dtype=np.uint64)
    cdef unsigned long long[::1] x = x_arr
    cdef Py_ssize_t m, k, j, c
    cdef unsigned long long low
    with nogil:
        for m in range(start):
            low = (m + 1) & (-(m + 1))
            c = 0
            while not (low & 1):
                low >>= 1
                c += 1
            for j in range(dim):
                x[j] ^= Vm[j, c]
        for k in range(n):
            for j in range(dim):
                out[k, j] = x[j]
            m = start + k
            low = (m + 1) & (-(m + 1))
            c = 0
            while not (low & 1):
                low >>= 1
                c += 1
            for j in range(dim):
                x[j] ^= Vm[j, c]
    return out_arr


def owen_scramble(ints, keys):
    """Nested uniform scrambling of 32-bit Sobol integers."""
    cdef unsigned long long[:, ::1] v = np.ascontiguousarray(ints, dtype=np.uint64)
    cdef unsigned long long[::1] key = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n = v.shape[0], dim = v.shape[1]
    out_arr = np.empty((n, dim), dtype=np.uint64)
    cdef unsigned long long[:, ::1] out = out_arr
    cdef Py_ssize_t p, j, k
    cdef unsigned long long val, res, prefix, bit, node, flip
    with nogil:
        for p in range(n):
            for j in range(dim):
                val = v[p, j]
                res = 0
                prefix = 0
                for k in range(32):
                    bit = (val >> (31 - k)) & 1
                    node = (<unsigned long long>1 << k) | prefix
                    flip = mix64(key[j] ^ node) & 1
                    res |= (bit ^ flip) << (31 - k)
                    prefix = (prefix << 1) | bit
                out[p, j] = res
    return out_arr
