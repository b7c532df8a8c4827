"""Shared oracles and model builders for the test suite.

Everything here is deliberately independent of the library's internals:
dense linear algebra uses plain ``numpy.linalg`` solves, entropies come from
``scipy.integrate.quad`` over explicit densities, and GP sample paths are
drawn from explicitly assembled joint covariance matrices.
"""

import warnings

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm, qmc

from dgsm_lab.gp import Dataset, GpModel, posterior_deriv
from dgsm_lab.kernels import Hyperparams, kernel_matrix


def build_model(X, Y, lengthscales, outputscale, noise_var, mean_const=0.0):
    """Raw-scale model with hand-picked hyperparameters (no fitting)."""
    hp = Hyperparams(lengthscales=np.asarray(lengthscales, dtype=np.float64),
                     outputscale=outputscale, noise_var=noise_var,
                     mean_const=mean_const)
    return GpModel.build(hp, Dataset.from_arrays(X, Y), y_mean=0.0, y_std=1.0)


def sample_gp_dataset(d, t, lengthscales, outputscale, noise_var, seed):
    """Exact draw from the prior at quasi-uniform inputs, plus iid noise."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(t, d))
    hp = Hyperparams(lengthscales=np.asarray(lengthscales, dtype=np.float64),
                     outputscale=outputscale, noise_var=noise_var)
    K = kernel_matrix(X, X, hp) + 1e-12 * np.eye(t)
    L = np.linalg.cholesky(K)
    Y = L @ rng.standard_normal(t)
    if noise_var > 0:
        Y = Y + np.sqrt(noise_var) * rng.standard_normal(t)
    return X, Y


def dense_posterior_f(model, x):
    """Posterior mean/variance by full matrix inversion (no Cholesky reuse)."""
    hp, X = model.hp, model.data.X
    z = (model.data.Y - model.y_mean) / model.y_std - hp.mean_const
    K = kernel_matrix(X, X, hp) + (hp.noise_var + model.jitter) * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    kx = kernel_matrix(x[None, :], X, hp)[0]
    mu = float(kx @ Kinv @ z) + hp.mean_const
    var = float(hp.outputscale - kx @ Kinv @ kx)
    return model.y_mean + model.y_std * mu, model.y_std**2 * var


def pathwise_grad_samples(model, x, h, n, seed):
    """Gradient samples via joint draws of f on central-difference stencils.

    Returns an (n, d) array: each row is the finite-difference gradient of one
    posterior sample path at ``x``.
    """
    d = len(x)
    P = np.empty((2 * d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        P[2 * i] = x + e
        P[2 * i + 1] = x - e
    hp, X = model.hp, model.data.X
    Kpp = kernel_matrix(P, P, hp)
    Kpx = kernel_matrix(P, X, hp)
    Kxx = kernel_matrix(X, X, hp) + (hp.noise_var + model.jitter) * np.eye(len(X))
    Kinv = np.linalg.inv(Kxx)
    z = (model.data.Y - model.y_mean) / model.y_std - hp.mean_const
    mu = Kpx @ Kinv @ z + hp.mean_const
    S = Kpp - Kpx @ Kinv @ Kpx.T
    # The +/-h stencil points are almost perfectly correlated, so S is nearly
    # singular by construction and round-off can push eigenvalues slightly
    # negative; take a symmetric square root with those clipped to zero.
    S = 0.5 * (S + S.T)
    evals, evecs = np.linalg.eigh(S)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None))
    # scrambled low-discrepancy normals: every row is still an exact draw
    # from the joint posterior, but moment estimates converge much faster
    # than with pseudo-random sampling
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        U = qmc.Sobol(2 * d, scramble=True, seed=seed).random(n)
    Z = norm.ppf(np.clip(U, 1e-12, 1.0 - 1e-12))
    F = model.y_mean + model.y_std * (mu[None, :] + Z @ root.T)
    return (F[:, 0::2] - F[:, 1::2]) / (2.0 * h)


def sq_density(y, mu, sigma):
    """Density of (mu + sigma*Z)^2 for standard normal Z, y > 0."""
    sy = np.sqrt(y)
    return (norm.pdf((sy - mu) / sigma) + norm.pdf((sy + mu) / sigma)) / (2.0 * sigma * sy)


def quad_entropy_sq(mu, sigma):
    """Differential entropy of (mu + sigma*Z)^2 by adaptive quadrature."""
    def integrand(y):
        p = sq_density(y, mu, sigma)
        return -p * np.log(p) if p > 0.0 else 0.0

    s2 = sigma * sigma
    hi = (abs(mu) + 12.0 * sigma) ** 2
    pts = sorted({1e-14, s2 * 1e-6, s2 * 1e-3, s2 * 0.1, s2,
                  4.0 * max(mu * mu, s2), hi})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = quad(integrand, a, b, limit=400)
        total += val
    return total


def quad_expected_log_sq(mu, sigma):
    """E[log((mu + sigma*Z)^2)] by quadrature over the normal density."""
    def integrand(t):
        return np.log((mu + sigma * t) ** 2) * norm.pdf(t)

    n0 = -mu / sigma
    pts = [n0] if -30.0 < n0 < 30.0 else []
    val, _ = quad(integrand, -30.0, 30.0, points=pts, limit=400)
    return val


def zero_slope_point(model, lo=0.01, hi=0.99, n_grid=199):
    """A 1-D input where the posterior mean derivative crosses zero."""
    from scipy.optimize import brentq

    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([posterior_deriv(model, np.array([g])).mu_d[0] for g in grid])
    idx = np.flatnonzero(np.diff(np.sign(vals)) != 0)
    if idx.size == 0:
        raise AssertionError("posterior mean derivative has no zero crossing")
    i = idx[0]
    root = brentq(lambda x: posterior_deriv(model, np.array([x])).mu_d[0],
                  grid[i], grid[i + 1], xtol=1e-14)
    return np.array([root])


def observe_count_problem(problem):
    """Wrap a problem so its evaluation calls are counted."""
    from dataclasses import replace

    counter = {"n": 0}
    inner = problem.eval

    def counting_eval(x):
        counter["n"] += 1
        return inner(x)

    return replace(problem, eval=counting_eval), counter
