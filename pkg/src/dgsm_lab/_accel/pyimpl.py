"""Pure-NumPy implementations of the numerical hot paths.

This module mirrors the interface of the compiled extension ``_native`` and is
used whenever the extension is unavailable (or when ``DGSM_LAB_PURE_PYTHON=1``
is set).  Both backends must agree to high accuracy; ``tests/test_backends.py``
enforces parity on random inputs.
"""

import numpy as np
from scipy.special import dawsn, ndtr

BACKEND_NAME = "python"

_SQRT_2 = np.sqrt(2.0)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_EULER_GAMMA = 0.5772156649015328606
# G(z) = int_0^z dawsn(s) ds tends to (1/2) ln z + C_INF as z -> inf.
_C_INF = (_EULER_GAMMA + 2.0 * np.log(2.0)) / 4.0
# Asymptotic tail coefficients: dawsn(s) ~ sum_k (2k-1)!!/2^{k+1} s^{-(2k+1)},
# integrated term by term; entry k holds (2k-1)!!/2^{k+1}/(2k).
_ASYM = np.array([1.0 / 8, 3.0 / 32, 5.0 / 32, 105.0 / 256, 945.0 / 640, 10395.0 / 1536])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)

_R_CLAMP = 1e8
_Z_SERIES = 3.0
_Z_QUAD = 12.0


def _dawson_integral_series(z):
    """G(z) for z <= 3 via the power series of r^2 * 2F2(1,1;3/2,2;-r^2/2) / 4.

    With x = z^2 the series is 2x * sum_n t_n, t_0 = 1 and
    t_{n+1} = t_n * (-x) (n+1) / ((n+3/2)(n+2)).  Truncation: term magnitude
    below 1e-16 of the partial sum, or 500 terms.
    """
    x = z * z
    term = np.ones_like(x)
    total = np.ones_like(x)
    for n in range(500):
        term = term * (-x) * (n + 1.0) / ((n + 1.5) * (n + 2.0))
        total += term
        if np.all(np.abs(term) <= 1e-16 * np.maximum(np.abs(total), 1e-300)):
            break
    return 2.0 * x * total / 4.0


def _dawson_integral_quad(z):
    """G(z) by 64-node Gauss-Legendre quadrature of the Dawson function."""
    half = 0.5 * z
    s = half[:, None] * (_GL_X[None, :] + 1.0)
    return half * (dawsn(s) @ _GL_W)


def _dawson_integral_asym(z):
    out = 0.5 * np.log(z) + _C_INF
    z2 = z * z
    p = z2.copy()
    for c in _ASYM:
        out -= c / p
        p *= z2
    return out


def entropy_term(r):
    """r^2 * 2F2(1,1;3/2,2;-r^2/2), elementwise, equal to 4 * G(|r|/sqrt(2))."""
    r = np.asarray(r, dtype=np.float64)
    z = np.minimum(np.abs(r), _R_CLAMP) / _SQRT_2
    out = np.empty_like(z)
    small = z <= _Z_SERIES
    mid = (z > _Z_SERIES) & (z <= _Z_QUAD)
    big = z > _Z_QUAD
    if small.any():
        out[small] = 4.0 * _dawson_integral_series(z[small])
    if mid.any():
        out[mid] = 4.0 * _dawson_integral_quad(z[mid])
    if big.any():
        out[big] = 4.0 * _dawson_integral_asym(z[big])
    return out


def folded_mean_var(mu, sigma):
    """Mean and variance of |X| for X ~ N(mu, sigma^2), elementwise."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    r = np.divide(mu, sigma, out=np.zeros_like(mu + sigma), where=sigma > 0)
    mean = _SQRT_2_OVER_PI * sigma * np.exp(-0.5 * r * r) + mu * (1.0 - 2.0 * ndtr(-r))
    var = mu * mu + sigma * sigma - mean * mean
    return mean, np.maximum(var, 0.0)


def rbf_cross_stack(Xc, X, inv_ls2, outputscale):
    """Cross-covariances between candidates and training inputs.

    Returns ``c`` of shape (n, t) with c[p, j] = k(Xc[p], X[j]) and ``G`` of
    shape (n, d, t) with G[p, i, j] = -(Xc[p,i] - X[j,i]) / ell_i^2 * c[p, j]
    (the gradient of the kernel in its first argument).
    """
    diff = Xc[:, None, :] - X[None, :, :]            # (n, t, d)
    q = np.einsum("ntd,d->nt", diff * diff, inv_ls2)
    c = outputscale * np.exp(-0.5 * q)
    G = -np.transpose(diff, (0, 2, 1)) * inv_ls2[None, :, None] * c[:, None, :]
    return c, G


_U64 = np.uint64
_MASK64 = _U64(0xFFFFFFFFFFFFFFFF)
_MIX1 = _U64(0x9E3779B97F4A7C15)
_MIX2 = _U64(0xBF58476D1CE4E5B9)
_MIX3 = _U64(0x94D049BB133111EB)


def splitmix64(z):
    """SplitMix64 finalizer; the counter-based hash behind Owen scrambling."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z + _MIX1) & _MASK64
        z = ((z ^ (z >> _U64(30))) * _MIX2) & _MASK64
        z = ((z ^ (z >> _U64(27))) * _MIX3) & _MASK64
        return z ^ (z >> _U64(31))


def sobol_raw(V, start, n):
    """Gray-code Sobol integers: points start..start+n-1, 32-bit values.

    ``V`` is the (dim, 32) uint64 direction-number matrix.  Point 0 is the
    zero vector; point m+1 differs from point m in direction V[:, c] where c
    is the index of the lowest set bit of m+1.
    """
    dim = V.shape[0]
    x = np.zeros(dim, dtype=np.uint64)
    for m in range(start):
        c = ((m + 1) & -(m + 1)).bit_length() - 1
        x ^= V[:, c]
    out = np.empty((n, dim), dtype=np.uint64)
    for k in range(n):
        out[k] = x
        m = start + k
        c = ((m + 1) & -(m + 1)).bit_length() - 1
        x ^= V[:, c]
    return out


def owen_scramble(ints, keys):
    """Nested uniform scrambling of 32-bit Sobol integers.

    For each dimension (hash key ``keys[j]``) and each point value, walk the
    32 bits from the most significant down; the flip decision for bit k is
    the parity of splitmix64(key ^ node) where ``node`` encodes the position
    in the binary tree: (1 << k) | prefix-of-already-consumed-bits.
    """
    ints = np.asarray(ints, dtype=np.uint64)
    n, dim = ints.shape
    out = np.zeros_like(ints)
    prefix = np.zeros_like(ints)
    one = _U64(1)
    for k in range(32):
        shift = _U64(31 - k)
        bits = (ints >> shift) & one
        node = (one << _U64(k)) | prefix
        flips = splitmix64(node ^ keys[None, :]) & one
        out |= (bits ^ flips) << shift
        prefix = (prefix << one) | bits
    return out
