r"""Acquisition functions: where to evaluate the black box next.

Local family (everything is a sum over input dimensions of per-dimension
marginal quantities of the derivative posterior):

========  ==============================================================
Var       function-posterior variance :math:`\sigma_*^2`
fIG       information gain about f: :math:`\tfrac12\log(1+\sigma_*^2/\eta^2)`
DV        total derivative variance :math:`\sum_i \sigma'^2_i`
DVr       look-ahead derivative-variance reduction
DIG       derivative information gain :math:`\tfrac12\sum_i\log(\sigma'^2_i/\sigma'^{2,\ell}_i)`
DAbV      total folded-normal (absolute-derivative) variance
DAbVr     folded-normal variance reduction (plug-in mean)
DSqV      total noncentral-:math:`\chi^2` (squared-derivative) variance
DSqVr     squared-derivative variance reduction
DSqIG     squared-derivative entropy-index reduction
========  ==============================================================

Global variants (GDVr, GDIG, GDAbVr, GDSqVr, GDSqIG) average the same
integrands over a fixed QMC node set, with the look-ahead taken at each node
given a hypothetical observation at the candidate.  QR (quasirandom
selection) carries no utility surface and is handled by the driver.

All utilities are deterministic functions of (model, point, nodes), floored
at zero; variances are floored at 1e-12 before any ratio, logarithm, or
square-root so that noiseless interpolation cannot produce -inf or NaN.
"""

from dataclasses import dataclass

import numpy as np

from ._accel import entropy_term, folded_mean_var
from .gp import GlobalNodeCache, posterior_deriv_batch, posterior_f_batch

__all__ = [
    "TAGS",
    "GLOBAL_TAGS",
    "AcquisitionKind",
    "acq_var_f",
    "acq_ig_f",
    "acq_dv",
    "acq_dvr",
    "acq_dig",
    "acq_dabv",
    "acq_dabvr",
    "acq_dsqv",
    "acq_dsqvr",
    "acq_dsqig",
    "acq_global",
    "evaluate_batch",
]

TAGS = ("QR", "Var", "fIG", "DV", "DVr", "DIG", "DAbV", "DAbVr",
        "DSqV", "DSqVr", "DSqIG", "GDVr", "GDIG", "GDAbVr", "GDSqVr", "GDSqIG")
GLOBAL_TAGS = frozenset(t for t in TAGS if t.startswith("G") and t != "QR")
_LOCAL_OF_GLOBAL = {"GDVr": "DVr", "GDIG": "DIG", "GDAbVr": "DAbVr",
                    "GDSqVr": "DSqVr", "GDSqIG": "DSqIG"}

VAR_FLOOR = 1e-12
NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class AcquisitionKind:
    """An acquisition tag plus, for global variants, the node count M."""

    tag: str
    global_nodes: int = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown acquisition tag {self.tag!r}; valid: {', '.join(TAGS)}")
        if self.tag in GLOBAL_TAGS:
            if not (self.global_nodes and self.global_nodes >= 1):
                raise ValueError(f"{self.tag} requires a positive global_nodes")
        elif self.global_nodes is not None:
            raise ValueError(f"{self.tag} does not take global_nodes")

    @classmethod
    def from_name(cls, name, global_nodes=128):
        """Build from a CLI-style name: case and -/_ separators are ignored."""
        key = name.replace("-", "").replace("_", "").casefold()
        for tag in TAGS:
            if key == tag.casefold():
                return cls(tag, global_nodes if tag in GLOBAL_TAGS else None)
        raise ValueError(f"unknown acquisition {name!r}; valid: {', '.join(TAGS)}")

    @property
    def is_global(self):
        return self.tag in GLOBAL_TAGS


def _eff_noise_raw(model):
    return max(model.hp.noise_var, NOISE_FLOOR) * model.y_std**2


def _local_integrand(tag, mu_d, var_d, var_l):
    """Per-point value of a look-ahead acquisition given its three inputs.

    Shapes broadcast: ``var_l`` may carry extra leading axes (global node
    sets); the sum is over the trailing dimension axis.
    """
    var_d = np.maximum(var_d, VAR_FLOOR)
    var_l = np.maximum(var_l, VAR_FLOOR)
    if tag == "DVr":
        return np.sum(var_d - var_l, axis=-1)
    if tag == "DIG":
        return 0.5 * np.sum(np.log(var_d / var_l), axis=-1)
    if tag == "DAbVr":
        _, fv_d = folded_mean_var(mu_d, np.sqrt(var_d))
        _, fv_l = folded_mean_var(mu_d, np.sqrt(var_l))
        return np.sum(fv_d - fv_l, axis=-1)
    if tag == "DSqVr":
        mu2 = mu_d * mu_d
        return np.sum(4.0 * mu2 * (var_d - var_l) + 2.0 * (var_d**2 - var_l**2), axis=-1)
    if tag == "DSqIG":
        term_d = entropy_term(mu_d / np.sqrt(var_d))
        term_l = entropy_term(mu_d / np.sqrt(var_l))
        return np.sum(np.log(var_d / var_l) - term_d + term_l, axis=-1)
    raise ValueError(f"not a look-ahead integrand: {tag}")


def evaluate_batch(kind, model, Xc, node_cache=None):
    """Acquisition values for a row-stack of candidate points.

    Global kinds need a :class:`GlobalNodeCache` built from the node set that
    is shared across the whole optimization round.
    """
    tag = kind.tag if isinstance(kind, AcquisitionKind) else str(kind)
    Xc = np.atleast_2d(np.asarray(Xc, dtype=np.float64))
    if tag == "QR":
        raise ValueError("QR is not an optimizable acquisition")

    if tag in ("Var", "fIG"):
        _, var_f = posterior_f_batch(model, Xc)
        if tag == "Var":
            return var_f
        return 0.5 * np.log1p(var_f / _eff_noise_raw(model))

    if tag in GLOBAL_TAGS:
        if node_cache is None:
            raise ValueError(f"{tag} requires a node cache")
        var_l = node_cache.lookahead_var(Xc)                # (n, M, d)
        mu_d = node_cache.mu_d[None, :, :]
        var_d = node_cache.var_d[None, :, :]
        vals = _local_integrand(_LOCAL_OF_GLOBAL[tag], mu_d, var_d, var_l)
        return np.maximum(np.mean(vals, axis=1), 0.0)

    mu_d, var_d, cross = posterior_deriv_batch(model, Xc)
    if tag == "DV":
        return np.sum(var_d, axis=1)
    if tag == "DAbV":
        _, fv = folded_mean_var(mu_d, np.sqrt(np.maximum(var_d, VAR_FLOOR)))
        return np.sum(fv, axis=1)
    if tag == "DSqV":
        return np.sum(4.0 * var_d * mu_d**2 + 2.0 * var_d**2, axis=1)

    # Look-ahead family: conditioning on a hypothetical observation at the
    # candidate itself.
    _, var_f = posterior_f_batch(model, Xc)
    denom = var_f + model.noise_var_raw
    if np.any(denom <= 0):
        raise RuntimeError("numerical failure: degenerate look-ahead denominator")
    if tag == "DVr":
        return np.maximum(np.sum(cross**2 / denom[:, None], axis=1), 0.0)
    var_l = np.clip(var_d - cross**2 / denom[:, None], 0.0, var_d)
    return np.maximum(_local_integrand(tag, mu_d, var_d, var_l), 0.0)


def _scalar(kind_tag, model, x, node_cache=None):
    x = np.asarray(x, dtype=np.float64)
    return float(evaluate_batch(kind_tag, model, x[None, :], node_cache)[0])


def acq_var_f(model, x):
    """Function-posterior variance at x."""
    return _scalar("Var", model, x)


def acq_ig_f(model, x):
    """Information gain about f(x) from one noisy observation (BALD)."""
    return _scalar("fIG", model, x)


def acq_dv(model, x):
    """Total derivative variance at x."""
    return _scalar("DV", model, x)


def acq_dvr(model, x):
    """Total look-ahead derivative-variance reduction at x."""
    return _scalar("DVr", model, x)


def acq_dig(model, x):
    """Derivative information gain at x."""
    return _scalar("DIG", model, x)


def acq_dabv(model, x):
    """Total absolute-derivative (folded-normal) variance at x."""
    return _scalar("DAbV", model, x)


def acq_dabvr(model, x):
    """Folded-normal variance reduction at x (plug-in look-ahead mean)."""
    return _scalar("DAbVr", model, x)


def acq_dsqv(model, x):
    """Total squared-derivative (noncentral chi-square) variance at x."""
    return _scalar("DSqV", model, x)


def acq_dsqvr(model, x):
    """Squared-derivative variance reduction at x."""
    return _scalar("DSqVr", model, x)


def acq_dsqig(model, x):
    """Squared-derivative entropy-index reduction at x."""
    return _scalar("DSqIG", model, x)


def acq_global(kind, model, x_star, nodes):
    """Global acquisition: node-averaged look-ahead utility of observing x_star."""
    if isinstance(kind, str):
        kind = AcquisitionKind(kind, global_nodes=len(np.atleast_2d(nodes)))
    if kind.tag not in GLOBAL_TAGS:
        raise ValueError(f"{kind.tag} is not a global acquisition")
    nodes = np.atleast_2d(np.asarray(nodes, dtype=np.float64))
    if nodes.shape[0] < 1:
        raise ValueError("global acquisition needs at least one node")
    x_star = np.asarray(x_star, dtype=np.float64)
    cache = GlobalNodeCache(model, nodes)
    return float(evaluate_batch(kind, model, x_star[None, :], node_cache=cache)[0])
