r"""GP regression with analytic derivative and look-ahead posteriors.

Everything downstream needs three posteriors from one fitted model:

* the function posterior :math:`f(x) \mid \mathcal D \sim \mathcal N(\mu_*,
  \sigma_*^2)`;
* the derivative posterior (the gradient of a GP is a GP): per dimension,

  .. math::

     \mu'_i = \nabla_i \mathcal K_{x,X} K_{\mathcal D}^{-1} (Y - m), \qquad
     \sigma'^2_i = \frac{s}{\ell_i^2}
        - \nabla_i \mathcal K_{x,X} K_{\mathcal D}^{-1} \nabla_i \mathcal K_{X,x},

  together with the f-derivative cross-covariance
  :math:`\tilde\sigma_i = -\nabla_i \mathcal K_{x,X} K_{\mathcal D}^{-1}
  \mathcal K_{X,x}` (the prior cross term vanishes for a stationary kernel);
* the look-ahead posterior after a hypothetical observation at ``x``:

  .. math::

     \sigma'^{2,\ell}_i = \sigma'^2_i -
        \tilde\sigma_i^2 / (\sigma_*^2 + \eta^2),

  which does not depend on the value observed — only on where.  The global
  variant conditions the derivative at one point ``x_plus`` on an observation
  at another point ``x_star``.

Observations are standardized internally for fitting (zero mean, unit
variance); every posterior is returned on the raw Y scale.  Models built
directly from explicit hyperparameters skip standardization, so closed-form
expectations hold literally in tests.

Fitting maximizes the log marginal likelihood with L-BFGS-B on
``(log lengthscales, log outputscale, log noise_var)`` from 8 quasirandom
multi-starts, using the analytic gradient
:math:`\partial L/\partial\theta = \tfrac12 \mathrm{tr}\bigl((\alpha\alpha^T
- K^{-1}) \partial K/\partial\theta\bigr)`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .kernels import Hyperparams, cross_stack, kernel_matrix
from .qmc import SobolStream

__all__ = [
    "Dataset",
    "GpModel",
    "FPosterior",
    "DerivPosterior",
    "LookAhead",
    "fit",
    "posterior_f",
    "posterior_deriv",
    "lookahead_local",
    "lookahead_global",
    "condition_on",
    "GlobalNodeCache",
]

JITTER_BASE = 1e-10
JITTER_MAX = 1e-4
NOISE_FLOOR = 1e-6

# Multi-start initialization boxes (natural scale) and optimizer bounds.
_INIT_LS = (0.05, 3.0)
_INIT_SCALE = (0.2, 5.0)
_INIT_NOISE = (1e-6, 0.1)
_BOUND_LS = (0.02, 5.0)
_BOUND_SCALE = (0.1, 10.0)
_BOUND_NOISE = (1e-6, 0.5)
_N_STARTS = 8
_MAXITER = 60


@dataclass(frozen=True)
class Dataset:
    """Observed inputs (unit-cube rows) and raw-scale outputs.

    ``y_mean``/``y_std`` hold the standardization constants used at fitting
    time; ``degenerate`` flags an (all-identical-Y) dataset whose standard
    deviation is not usable.
    """

    X: np.ndarray
    Y: np.ndarray
    y_mean: float
    y_std: float
    degenerate: bool = False

    @classmethod
    def from_arrays(cls, X, Y):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_1d(np.asarray(Y, dtype=np.float64))
        if X.shape[0] != Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise ValueError("dataset contains non-finite entries")
        if Y.size == 0:
            return cls(X=X, Y=Y, y_mean=0.0, y_std=1.0)
        mean = float(np.mean(Y))
        std = float(np.std(Y))
        degenerate = std <= 1e-12 * max(1.0, abs(mean))
        return cls(X=X, Y=Y, y_mean=mean, y_std=std if not degenerate else 1.0,
                   degenerate=degenerate)

    @classmethod
    def empty(cls, dim):
        return cls(X=np.zeros((0, dim)), Y=np.zeros(0), y_mean=0.0, y_std=1.0)

    @property
    def t(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class FPosterior:
    mu: float
    var: float


@dataclass(frozen=True)
class DerivPosterior:
    mu_d: np.ndarray
    var_d: np.ndarray
    cross: np.ndarray


@dataclass(frozen=True)
class LookAhead:
    var_l: np.ndarray
    mu_plugin: np.ndarray


def _chol_with_jitter(K):
    """Cholesky with escalating diagonal jitter; returns (L, jitter_used)."""
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(K if jitter == 0.0 else K + jitter * np.eye(K.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            if jitter == 0.0:
                jitter = JITTER_BASE
            elif jitter >= JITTER_MAX:
                raise RuntimeError(
                    f"numerical failure: Cholesky factorization failed at jitter {jitter:g}"
                )
            else:
                jitter *= 10.0


@dataclass(frozen=True)
class GpModel:
    """Immutable fitted model: hyperparameters plus cached factorization.

    ``hp`` lives on the model's internal scale (standardized when produced by
    :func:`fit`, raw when built directly); ``chol`` is the lower Cholesky
    factor of :math:`K_{\mathcal D} = \mathcal K_{X,X} + \eta^2 I` (+ jitter)
    and ``alpha`` is :math:`K_{\mathcal D}^{-1}(Y_{model} - m)`.
    """

    hp: Hyperparams
    data: Dataset
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    y_mean: float = 0.0
    y_std: float = 1.0
    degenerate: bool = False

    @classmethod
    def build(cls, hp, data, y_mean=0.0, y_std=1.0, degenerate=False):
        """Factor K and cache alpha for the given hyperparameters (no fitting)."""
        if data.dim != hp.dim:
            raise ValueError("dataset dimension does not match hyperparameters")
        t = data.t
        if t == 0:
            return cls(hp=hp, data=data, chol=np.zeros((0, 0)), alpha=np.zeros(0),
                       y_mean=y_mean, y_std=y_std, degenerate=degenerate)
        K = kernel_matrix(data.X, data.X, hp) + hp.noise_var * np.eye(t)
        L, jitter = _chol_with_jitter(K)
        z = (data.Y - y_mean) / y_std - hp.mean_const
        alpha = cho_solve((L, True), z)
        return cls(hp=hp, data=data, chol=L, alpha=alpha, jitter=jitter,
                   y_mean=y_mean, y_std=y_std, degenerate=degenerate)

    @property
    def noise_var_raw(self):
        return self.hp.noise_var * self.y_std**2

    def hyperparams_raw(self):
        """Hyperparameter snapshot on the raw Y scale (for records/reports)."""
        return {
            "lengthscales": [float(v) for v in self.hp.lengthscales],
            "outputscale": float(self.hp.outputscale * self.y_std**2),
            "noise_var": float(self.noise_var_raw),
            "mean_const": float(self.y_mean + self.y_std * self.hp.mean_const),
            "jitter": float(self.jitter),
            "degenerate": bool(self.degenerate),
        }


def _check_point(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.hp.dim,):
        raise ValueError(f"point shape {x.shape} does not match dimension {model.hp.dim}")
    return x


def posterior_f_batch(model, Xc):
    """Function posterior at a stack of points; returns (mu, var) raw scale."""
    hp = model.hp
    Xc = np.atleast_2d(np.asarray(Xc, dtype=np.float64))
    if model.data.t == 0:
        mu = np.full(Xc.shape[0], hp.mean_const)
        var = np.full(Xc.shape[0], hp.outputscale)
    else:
        c = kernel_matrix(Xc, model.data.X, hp)
        A = cho_solve((model.chol, True), c.T)
        mu = hp.mean_const + c @ model.alpha
        var = np.maximum(hp.outputscale - np.einsum("nt,tn->n", c, A), 0.0)
    return model.y_mean + model.y_std * mu, model.y_std**2 * var


def posterior_f(model, x):
    """Function posterior N(mu*, sigma*^2) at one point, raw Y scale."""
    x = _check_point(model, x)
    mu, var = posterior_f_batch(model, x[None, :])
    return FPosterior(mu=float(mu[0]), var=float(var[0]))


def posterior_deriv_batch(model, Xc, need_var=True, chunk=2048):
    """Derivative posterior at a stack of points.

    Returns ``(mu_d, var_d, cross)``, each of shape (n, d), on the raw Y
    scale; ``var_d`` and ``cross`` are None when ``need_var=False`` (the
    plug-in DGSM estimator only needs the mean).  Work is chunked to bound
    the (n, d, t) gradient-stack memory.
    """
    hp = model.hp
    Xc = np.atleast_2d(np.asarray(Xc, dtype=np.float64))
    n, d = Xc.shape[0], hp.dim
    t = model.data.t
    if t == 0:
        mu_d = np.zeros((n, d))
        var_d = np.tile(hp.outputscale * hp.inv_ls2, (n, 1))
        cross = np.zeros((n, d))
        return (model.y_std * mu_d,
                model.y_std**2 * var_d if need_var else None,
                model.y_std**2 * cross if need_var else None)
    mu_parts, var_parts, cross_parts = [], [], []
    prior_var = hp.outputscale * hp.inv_ls2
    for lo in range(0, n, chunk):
        Xb = Xc[lo:lo + chunk]
        nb = Xb.shape[0]
        c, G = cross_stack(Xb, model.data.X, hp)
        mu_parts.append(G @ model.alpha)
        if need_var:
            A = cho_solve((model.chol, True), c.T)                  # (t, nb)
            B = cho_solve((model.chol, True), G.reshape(nb * d, t).T)
            quad = np.einsum("nit,tni->ni", G, B.reshape(t, nb, d))
            var_parts.append(np.maximum(prior_var[None, :] - quad, 0.0))
            cross_parts.append(-np.einsum("nit,tn->ni", G, A))
    mu_d = np.concatenate(mu_parts, axis=0)
    if not need_var:
        return model.y_std * mu_d, None, None
    var_d = np.concatenate(var_parts, axis=0)
    cross = np.concatenate(cross_parts, axis=0)
    return model.y_std * mu_d, model.y_std**2 * var_d, model.y_std**2 * cross


def posterior_deriv(model, x):
    """Derivative posterior (mean, variance diagonal, f-cross) at one point."""
    x = _check_point(model, x)
    mu_d, var_d, cross = posterior_deriv_batch(model, x[None, :])
    return DerivPosterior(mu_d=mu_d[0], var_d=var_d[0], cross=cross[0])


def lookahead_local(model, x):
    """Derivative posterior after a hypothetical observation at x itself.

    The variance drop per dimension is cross^2 / (sigma*^2 + eta^2); the
    observed value never enters.  The plug-in mean (y fixed to the posterior
    mean) equals the current derivative mean.
    """
    x = _check_point(model, x)
    fp = posterior_f(model, x)
    dp = posterior_deriv(model, x)
    denom = fp.var + model.noise_var_raw
    if not denom > 0:
        raise RuntimeError("numerical failure: degenerate look-ahead denominator")
    var_l = np.clip(dp.var_d - dp.cross**2 / denom, 0.0, dp.var_d)
    return LookAhead(var_l=var_l, mu_plugin=dp.mu_d.copy())


def lookahead_global(model, x_star, x_plus):
    """Derivative posterior at x_plus after observing f at x_star."""
    x_star = _check_point(model, x_star)
    x_plus = _check_point(model, x_plus)
    cache = GlobalNodeCache(model, x_plus[None, :])
    var_l = cache.lookahead_var(x_star[None, :])[0, 0]
    return LookAhead(var_l=var_l, mu_plugin=cache.mu_d[0].copy())


class GlobalNodeCache:
    """Per-iteration cache for global look-ahead against a fixed node set.

    Precomputes the node derivative posteriors and the solve
    :math:`K_{\mathcal D}^{-1} \nabla\mathcal K_{X,nodes}` once, so that
    evaluating the look-ahead variances of all nodes for a batch of candidate
    observation sites costs one kernel block and one matrix product per
    batch.
    """

    def __init__(self, model, nodes):
        self.model = model
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=np.float64))
        mu_d, var_d, _ = posterior_deriv_batch(model, self.nodes)
        self.mu_d = mu_d          # (M, d) raw scale
        self.var_d = var_d        # (M, d) raw scale
        t = model.data.t
        M, d = self.nodes.shape[0], model.hp.dim
        if t > 0:
            _, G = cross_stack(self.nodes, model.data.X, model.hp)   # (M, d, t)
            self._W = cho_solve((model.chol, True), G.reshape(M * d, t).T)  # (t, M*d)
        else:
            self._W = None

    def lookahead_var(self, Xstar):
        """Look-ahead node variances (n, M, d) for candidate sites Xstar (n, d)."""
        model = self.model
        hp = model.hp
        Xstar = np.atleast_2d(np.asarray(Xstar, dtype=np.float64))
        n = Xstar.shape[0]
        M, d = self.nodes.shape[0], hp.dim
        _, var_f = posterior_f_batch(model, Xstar)
        denom = var_f + model.noise_var_raw                          # (n,)
        if np.any(denom <= 0):
            raise RuntimeError("numerical failure: degenerate look-ahead denominator")
        k_sn = kernel_matrix(Xstar, self.nodes, hp)                  # (n, M)
        diff = Xstar[:, None, :] - self.nodes[None, :, :]            # (n, M, d)
        prior = diff * hp.inv_ls2[None, None, :] * k_sn[:, :, None]
        if self._W is not None:
            c_star = kernel_matrix(Xstar, model.data.X, hp)          # (n, t)
            data_term = (c_star @ self._W).reshape(n, M, d)
        else:
            data_term = 0.0
        cross = model.y_std**2 * (prior - data_term)
        var_l = self.var_d[None, :, :] - cross**2 / denom[:, None, None]
        return np.clip(var_l, 0.0, self.var_d[None, :, :])


def condition_on(model, x_new, y_new):
    """Model with one extra observation appended, hyperparameters unchanged."""
    x_new = _check_point(model, x_new)
    X = np.vstack([model.data.X, x_new[None, :]])
    Y = np.append(model.data.Y, y_new)
    data = Dataset(X=X, Y=Y, y_mean=model.data.y_mean, y_std=model.data.y_std,
                   degenerate=model.data.degenerate)
    return GpModel.build(model.hp, data, y_mean=model.y_mean, y_std=model.y_std,
                         degenerate=model.degenerate)


def _neg_lml_and_grad(theta, D2, z, t, d):
    """Negative log marginal likelihood and gradient in log-parameters."""
    ls = np.exp(theta[:d])
    s = math.exp(theta[d])
    noise = math.exp(theta[d + 1])
    Q = np.tensordot(1.0 / (ls * ls), D2, axes=(0, 0))
    Kf = s * np.exp(-0.5 * Q)
    K = Kf + (noise + JITTER_BASE) * np.eye(t)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((L, True), z)
    lml = (-0.5 * float(z @ alpha)
           - float(np.sum(np.log(np.diag(L))))
           - 0.5 * t * math.log(2.0 * math.pi))
    Kinv = cho_solve((L, True), np.eye(t))
    A = np.outer(alpha, alpha) - Kinv
    AKf = A * Kf
    grad = np.empty_like(theta)
    inv_ls2 = 1.0 / (ls * ls)
    for i in range(d):
        grad[i] = 0.5 * float(np.sum(AKf * D2[i])) * inv_ls2[i]
    grad[d] = 0.5 * float(np.sum(AKf))
    grad[d + 1] = 0.5 * noise * float(np.trace(A))
    return -lml, -grad


def _degenerate_model(data):
    hp = Hyperparams(lengthscales=np.ones(data.dim), outputscale=1e-6,
                     noise_var=1.0, mean_const=0.0)
    return GpModel.build(hp, data, y_mean=data.y_mean, y_std=1.0, degenerate=True)


def fit(data, seed, warm_start=None):
    """Maximize the standardized-data marginal likelihood; deterministic per seed.

    ``warm_start`` (a standardized-scale :class:`Hyperparams`, e.g. from the
    previous iteration's model) replaces the last of the 8 quasirandom
    multi-start initializations.
    """
    if data.t < 2:
        raise ValueError("fitting requires at least 2 observations")
    if data.degenerate:
        return _degenerate_model(data)
    d = data.dim
    t = data.t
    z = (data.Y - data.y_mean) / data.y_std
    diff = data.X[:, None, :] - data.X[None, :, :]
    D2 = np.transpose(diff * diff, (2, 0, 1)).copy()      # (d, t, t)

    lo = np.log(np.array([_INIT_LS[0]] * d + [_INIT_SCALE[0], _INIT_NOISE[0]]))
    hi = np.log(np.array([_INIT_LS[1]] * d + [_INIT_SCALE[1], _INIT_NOISE[1]]))
    u = SobolStream(d + 2, seed=int(seed), scramble=True).next(_N_STARTS)
    starts = lo[None, :] + u * (hi - lo)[None, :]
    if warm_start is not None:
        starts[-1] = np.log(np.concatenate([
            warm_start.lengthscales,
            [warm_start.outputscale, max(warm_start.noise_var, NOISE_FLOOR)],
        ]))
    bounds = ([(math.log(_BOUND_LS[0]), math.log(_BOUND_LS[1]))] * d
              + [(math.log(_BOUND_SCALE[0]), math.log(_BOUND_SCALE[1])),
                 (math.log(_BOUND_NOISE[0]), math.log(_BOUND_NOISE[1]))])
    starts = np.clip(starts, [b[0] for b in bounds], [b[1] for b in bounds])

    best = None
    for theta0 in starts:
        res = minimize(_neg_lml_and_grad, theta0, args=(D2, z, t, d),
                       method="L-BFGS-B", jac=True, bounds=bounds,
                       options={"maxiter": _MAXITER})
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    hp = Hyperparams(lengthscales=np.exp(theta[:d]),
                     outputscale=float(math.exp(theta[d])),
                     noise_var=float(max(math.exp(theta[d + 1]), NOISE_FLOOR)),
                     mean_const=0.0)
    return GpModel.build(hp, data, y_mean=data.y_mean, y_std=data.y_std)
