"""Synthetic benchmark functions with analytic gradients.

Constants (coefficient vectors, bounds, matrices) live in the versioned
catalog file ``data/problem_catalog.json``; this module holds only the
functional forms.  Every function is vectorized over row-stacks of points
and returns per-row values; gradients return (n, d) stacks.

The active-learning loop works in normalized unit-cube coordinates:
``observe`` maps a normalized point into the problem box before evaluating,
and ``grad_unit`` applies the chain rule (multiply by box width) so that
sensitivity integrals are taken over the unit cube.
"""

import functools
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

__all__ = ["BenchProblem", "make_problem", "observe", "list_problems",
           "from_unit", "grad_unit"]


@functools.lru_cache(maxsize=1)
def _catalog():
    text = resources.files("dgsm_lab.data").joinpath("problem_catalog.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class BenchProblem:
    name: str
    dim: int
    box: np.ndarray              # (d, 2) lower/upper bounds
    eval: callable               # (n, d) -> (n,)
    grad: callable = None        # (n, d) -> (n, d), original coordinates
    noise_sd: float = 0.0

    @property
    def widths(self):
        return self.box[:, 1] - self.box[:, 0]


def _ishigami(a, b):
    def f(X):
        return (np.sin(X[:, 0]) + a * np.sin(X[:, 1]) ** 2
                + b * X[:, 2] ** 4 * np.sin(X[:, 0]))

    def g(X):
        out = np.empty_like(X)
        out[:, 0] = np.cos(X[:, 0]) * (1.0 + b * X[:, 2] ** 4)
        out[:, 1] = a * np.sin(2.0 * X[:, 1])
        out[:, 2] = 4.0 * b * X[:, 2] ** 3 * np.sin(X[:, 0])
        return out

    return f, g


def _gsobol(a):
    a = np.asarray(a, dtype=np.float64)

    def f(X):
        return np.prod((np.abs(4.0 * X - 2.0) + a) / (1.0 + a), axis=1)

    def g(X):
        factors = (np.abs(4.0 * X - 2.0) + a) / (1.0 + a)
        out = np.empty_like(X)
        for k in range(X.shape[1]):
            others = np.prod(np.delete(factors, k, axis=1), axis=1)
            out[:, k] = 4.0 * np.sign(4.0 * X[:, k] - 2.0) / (1.0 + a[k]) * others
        return out

    return f, g


def _afunction():
    # Alternating cumulative-product function: sum_i (-1)^i prod_{j<=i} x_j.
    def f(X):
        P = np.cumprod(X, axis=1)
        signs = (-1.0) ** np.arange(1, X.shape[1] + 1)
        return P @ signs

    def g(X):
        n, d = X.shape
        out = np.zeros_like(X)
        P = np.cumprod(X, axis=1)
        prefix = np.hstack([np.ones((n, 1)), P[:, :-1]])   # prod of x_1..x_{k-1}
        for k in range(d):
            partial = prefix[:, k].copy()                  # prod excluding x_k, up to i=k
            for i in range(k, d):
                if i > k:
                    partial = partial * X[:, i]
                out[:, k] += (-1.0) ** (i + 1) * partial
        return out

    return f, g


def _morris(params):
    warped = [i - 1 for i in params["warped_dims"]]
    beta1 = np.asarray(params["beta1"], dtype=np.float64)
    d = beta1.shape[0]
    pair_limit = params["beta2_block"]["limit"]
    pair_value = params["beta2_block"]["value"]
    B = np.zeros((d, d))
    for p in range(d):
        for q in range(p + 1, d):
            if q < pair_limit:                  # 1-based i < j <= limit
                B[p, q] = pair_value
            else:
                B[p, q] = (-1.0) ** ((p + 1) + (q + 1))
    B = B + B.T
    tri_limit = params["beta3_block"]["limit"]
    tri_value = params["beta3_block"]["value"]
    triples = [(i, j, l) for i in range(tri_limit)
               for j in range(i + 1, tri_limit) for l in range(j + 1, tri_limit)]
    quad_limit = params["beta4_block"]["limit"]
    quad_value = params["beta4_block"]["value"]

    def _w(X):
        W = 2.0 * (X - 0.5)
        dW = np.full_like(X, 2.0)
        for i in warped:
            W[:, i] = 2.0 * (1.1 * X[:, i] / (X[:, i] + 0.1) - 0.5)
            dW[:, i] = 0.22 / (X[:, i] + 0.1) ** 2
        return W, dW

    def f(X):
        W, _ = _w(X)
        y = W @ beta1 + 0.5 * np.einsum("ni,ij,nj->n", W, B, W)
        for (i, j, l) in triples:
            y += tri_value * W[:, i] * W[:, j] * W[:, l]
        y += quad_value * np.prod(W[:, :quad_limit], axis=1)
        return y

    def g(X):
        W, dW = _w(X)
        inner = beta1[None, :] + W @ B                      # d y / d w_k, 1st+2nd order
        for (i, j, l) in triples:
            inner[:, i] += tri_value * W[:, j] * W[:, l]
            inner[:, j] += tri_value * W[:, i] * W[:, l]
            inner[:, l] += tri_value * W[:, i] * W[:, j]
        quad = np.prod(W[:, :quad_limit], axis=1)
        for k in range(quad_limit):
            others = np.prod(np.delete(W[:, :quad_limit], k, axis=1), axis=1)
            inner[:, k] += quad_value * others
        return inner * dW

    return f, g


def _branin(p):
    a, b, c, r, s, t = p["a"], p["b"], p["c"], p["r"], p["s"], p["t"]

    def f(X):
        inner = X[:, 1] - b * X[:, 0] ** 2 + c * X[:, 0] - r
        return a * inner**2 + s * (1.0 - t) * np.cos(X[:, 0]) + s

    def g(X):
        inner = X[:, 1] - b * X[:, 0] ** 2 + c * X[:, 0] - r
        out = np.empty_like(X)
        out[:, 0] = 2.0 * a * inner * (-2.0 * b * X[:, 0] + c) - s * (1.0 - t) * np.sin(X[:, 0])
        out[:, 1] = 2.0 * a * inner
        return out

    return f, g


def _hartmann(p):
    alpha = np.asarray(p["alpha"])
    A = np.asarray(p["A"])
    P = np.asarray(p["P"])
    shifted = p.get("outer") == "shifted"
    shift = p.get("outer_shift", 0.0)
    scale = p.get("outer_scale", 1.0)

    def _raw(X):
        diff = X[:, None, :] - P[None, :, :]
        e = np.exp(-np.einsum("nij,ij->ni", diff * diff, A))
        return e @ alpha, diff, e

    def f(X):
        raw, _, _ = _raw(X)
        return (shift - raw) / scale if shifted else -raw

    def g(X):
        _, diff, e = _raw(X)
        inner = 2.0 * np.einsum("ni,ij,nij->nj", e * alpha[None, :], A, diff)
        return inner / scale if shifted else inner

    return f, g


def _forrester():
    def f(X):
        u = 6.0 * X[:, 0] - 2.0
        return u**2 * np.sin(12.0 * X[:, 0] - 4.0)

    def g(X):
        u = 6.0 * X[:, 0] - 2.0
        v = 12.0 * X[:, 0] - 4.0
        return (12.0 * u * (np.sin(v) + u * np.cos(v)))[:, None]

    return f, g


_FAMILIES = {
    "ishigami": lambda p: _ishigami(p["a"], p["b"]),
    "gsobol": lambda p: _gsobol(p["a"]),
    "afunction": lambda p: _afunction(),
    "morris": lambda p: _morris(p),
    "branin": lambda p: _branin(p),
    "hartmann": lambda p: _hartmann(p),
    "forrester": lambda p: _forrester(),
}


def list_problems():
    """Catalog problem names, sorted."""
    return sorted(_catalog()["problems"])


def make_problem(name, noise_sd=0.0):
    """Instantiate a catalog problem by name."""
    problems = _catalog()["problems"]
    if name not in problems:
        raise ValueError(
            f"unknown problem {name!r}; valid names: {', '.join(sorted(problems))}"
        )
    entry = problems[name]
    f, g = _FAMILIES[entry["family"]](entry["params"])
    return BenchProblem(name=name, dim=entry["dim"],
                        box=np.asarray(entry["box"], dtype=np.float64),
                        eval=f, grad=g, noise_sd=float(noise_sd))


def from_unit(problem, U):
    """Map unit-cube rows into the problem box."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    lo = problem.box[:, 0]
    return lo[None, :] + U * problem.widths[None, :]


def grad_unit(problem, U, fd_step=1e-6):
    """Gradient with respect to normalized coordinates at unit-cube rows.

    Uses the analytic gradient when the problem has one, otherwise central
    finite differences in normalized coordinates.
    """
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    if problem.grad is not None:
        return problem.grad(from_unit(problem, U)) * problem.widths[None, :]
    out = np.empty_like(U)
    for i in range(problem.dim):
        up = U.copy()
        dn = U.copy()
        up[:, i] = np.minimum(U[:, i] + fd_step, 1.0)
        dn[:, i] = np.maximum(U[:, i] - fd_step, 0.0)
        span = (up[:, i] - dn[:, i]) * problem.widths[i]
        out[:, i] = (problem.eval(from_unit(problem, up))
                     - problem.eval(from_unit(problem, dn))) / span * problem.widths[i]
    return out


def observe(problem, x_normalized, rng=None):
    """Evaluate the black box at a normalized point, adding noise if configured."""
    x = np.asarray(x_normalized, dtype=np.float64)
    if x.shape != (problem.dim,):
        raise ValueError(f"point shape {x.shape} does not match dimension {problem.dim}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("normalized point outside the unit cube")
    value = float(problem.eval(from_unit(problem, x[None, :]))[0])
    if problem.noise_sd > 0.0:
        if rng is None:
            raise ValueError("noisy observation requires an rng")
        value += problem.noise_sd * float(rng.standard_normal())
    return value
