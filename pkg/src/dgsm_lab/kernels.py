r"""ARD squared-exponential kernel and its spatial derivatives.

The covariance between function values at :math:`x` and :math:`z` is

.. math::

   k(x, z) = s \exp\Bigl(-\tfrac12 \sum_i (x_i - z_i)^2 / \ell_i^2\Bigr),

with one lengthscale :math:`\ell_i` per input dimension (automatic relevance
determination) and signal variance :math:`s`.  Because the kernel is smooth
and stationary, the derivative field :math:`\partial f/\partial x_i` is again
a Gaussian process, and every covariance the derivative posterior needs is a
closed-form derivative of :math:`k`:

* ``kernel_grad_x``    — :math:`\partial k /\partial x_i`, the covariance
  between an observation at ``z`` and the derivative at ``x``;
* ``kernel_hess_diag`` — :math:`\partial^2 k/\partial x_i \partial z_i` at
  ``x = z``, the prior variance of each derivative component;
* ``kernel_cross_f_deriv`` — :math:`\partial k/\partial z_i`, the covariance
  between a function value at ``x`` and the derivative at ``z``.

All functions treat inputs as points in the unit cube; callers are expected
to normalize beforehand.  A constant prior mean is used throughout the
package, so mean derivatives vanish and never appear here.
"""

from dataclasses import dataclass

import numpy as np

from ._accel import rbf_cross_stack

__all__ = [
    "Hyperparams",
    "kernel",
    "kernel_grad_x",
    "kernel_hess_diag",
    "kernel_cross_f_deriv",
    "kernel_matrix",
    "cross_stack",
]


@dataclass(frozen=True)
class Hyperparams:
    """Kernel, noise, and mean parameters of the surrogate.

    ``lengthscales`` has one positive entry per input dimension;
    ``outputscale`` is the signal variance (the kernel value at zero lag);
    ``noise_var`` is the observation-noise variance; ``mean_const`` the
    constant prior mean.
    """

    lengthscales: np.ndarray
    outputscale: float
    noise_var: float
    mean_const: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=np.float64))
        object.__setattr__(self, "lengthscales", ls)
        if ls.ndim != 1 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError("lengthscales must be a vector of positive finite reals")
        if not self.outputscale > 0:
            raise ValueError("outputscale must be positive")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")

    @property
    def dim(self):
        return self.lengthscales.shape[0]

    @property
    def inv_ls2(self):
        return 1.0 / (self.lengthscales * self.lengthscales)


def _check_points(hp, *points):
    out = []
    for p in points:
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (hp.dim,):
            raise ValueError(
                f"point of dimension {p.shape} does not match {hp.dim} lengthscales"
            )
        out.append(p)
    return out


def kernel(x, z, hp):
    """Covariance k(x, z); symmetric, equal to ``outputscale`` at x = z."""
    x, z = _check_points(hp, x, z)
    diff = x - z
    return hp.outputscale * float(np.exp(-0.5 * np.sum(diff * diff * hp.inv_ls2)))


def kernel_grad_x(x, z, hp):
    r"""Gradient of k in its first argument.

    Component :math:`i` is :math:`-(x_i - z_i)/\ell_i^2 \, k(x, z)`; this is
    the prior covariance between :math:`\partial f(x)/\partial x_i` and an
    observation of :math:`f(z)`.
    """
    x, z = _check_points(hp, x, z)
    return -(x - z) * hp.inv_ls2 * kernel(x, z, hp)


def kernel_hess_diag(x, hp):
    r"""Prior derivative variances: component i is outputscale / \ell_i^2.

    For the squared-exponential kernel
    :math:`\partial^2 k(x, z)/\partial x_i \partial z_i |_{x=z}` does not
    depend on ``x``.
    """
    (x,) = _check_points(hp, x)
    return hp.outputscale * hp.inv_ls2


def kernel_cross_f_deriv(x, z, hp):
    r"""Covariance between f(x) and the derivative at z.

    Component :math:`i` is :math:`\partial k(x,z)/\partial z_i =
    (x_i - z_i)/\ell_i^2 \, k(x, z)` — the negative of ``kernel_grad_x`` at
    the same arguments.  At ``x = z`` it vanishes: a stationary prior makes
    function value and derivative uncorrelated at the same point.
    """
    x, z = _check_points(hp, x, z)
    return (x - z) * hp.inv_ls2 * kernel(x, z, hp)


def kernel_matrix(A, B, hp):
    """Gram block k(A_p, B_j) for row stacks of points."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != hp.dim or B.shape[1] != hp.dim:
        raise ValueError("point stack dimension does not match hyperparameters")
    diff = A[:, None, :] - B[None, :, :]
    q = np.einsum("ntd,d->nt", diff * diff, hp.inv_ls2)
    return hp.outputscale * np.exp(-0.5 * q)


def cross_stack(Xc, X, hp):
    """Batched kernel rows and gradient rows against a training set.

    Returns ``(c, G)`` with ``c[p, j] = k(Xc[p], X[j])`` and
    ``G[p, i, j] = kernel_grad_x(Xc[p], X[j])[i]``, in one fused pass.
    """
    Xc = np.ascontiguousarray(np.atleast_2d(Xc), dtype=np.float64)
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if Xc.shape[1] != hp.dim or X.shape[1] != hp.dim:
        raise ValueError("point stack dimension does not match hyperparameters")
    return rbf_cross_stack(Xc, X, np.ascontiguousarray(hp.inv_ls2), hp.outputscale)
