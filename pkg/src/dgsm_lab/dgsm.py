r"""Derivative-based global sensitivity measures.

For each input dimension the three measures are unit-cube integrals of the
partial derivative :math:`g_i(u) = \partial f / \partial u_i`:

* raw:      :math:`S^R_i   = \int g_i(u)\, du` (sign cancellation possible),
* absolute: :math:`S^{Ab}_i = \int |g_i(u)|\, du`,
* squared:  :math:`S^{Sq}_i = \int g_i(u)^2\, du`.

Surrogate estimates substitute the posterior mean gradient for the true
gradient (plug-in estimator); ground truth uses the problem's own gradient.
Both integrate with scrambled-Sobol QMC over normalized coordinates, so the
two are directly comparable.  Ground-truth vectors are cached on disk as one
JSON document per (problem, node count).
"""

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gp import posterior_deriv_batch
from .problems import grad_unit
from .qmc import SobolStream

__all__ = ["DgsmEstimate", "estimate_dgsm", "ground_truth_dgsm", "rescale_to_box"]

GROUND_TRUTH_SEED = 202406
_CACHE_ENV = "DGSM_LAB_CACHE"


@dataclass(frozen=True)
class DgsmEstimate:
    """Per-dimension raw/absolute/squared sensitivities and the node count."""

    raw: np.ndarray
    abs: np.ndarray
    sq: np.ndarray
    nodes_used: int

    def to_dict(self):
        return {
            "raw": [float(v) for v in self.raw],
            "abs": [float(v) for v in self.abs],
            "sq": [float(v) for v in self.sq],
            "nodes_used": int(self.nodes_used),
        }


def _from_gradients(G, M):
    return DgsmEstimate(
        raw=np.mean(G, axis=0),
        abs=np.mean(np.abs(G), axis=0),
        sq=np.mean(G * G, axis=0),
        nodes_used=int(M),
    )


def estimate_dgsm(model, M, stream):
    """Plug-in DGSM estimate from the posterior mean gradient at M QMC nodes."""
    if not M >= 1:
        raise ValueError("M must be >= 1")
    nodes = stream.next(int(M))
    mu_d, _, _ = posterior_deriv_batch(model, nodes, need_var=False)
    return _from_gradients(mu_d, M)


def default_cache_dir():
    env = os.environ.get(_CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "dgsm-lab"


def _cache_path(cache_dir, problem, M):
    return Path(cache_dir) / f"groundtruth-{problem.name}-{M}.json"


def ground_truth_dgsm(problem, M, cache_dir=None, use_cache=True):
    """True-gradient DGSMs at M scrambled-Sobol nodes, cached per (problem, M).

    The node set is a fixed-seed scrambled stream, so repeated calls (and the
    cache) are reproducible.  Cache writes go through a temp file and an
    atomic rename.
    """
    if not M >= 1:
        raise ValueError("M must be >= 1")
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = _cache_path(cache_dir, problem, M)
    if use_cache and path.exists():
        doc = json.loads(path.read_text())
        return DgsmEstimate(raw=np.asarray(doc["raw"]), abs=np.asarray(doc["abs"]),
                            sq=np.asarray(doc["sq"]), nodes_used=int(doc["nodes_used"]))
    stream = SobolStream(problem.dim, seed=GROUND_TRUTH_SEED, scramble=True)
    nodes = stream.next(int(M))
    est = _from_gradients(grad_unit(problem, nodes), M)
    if use_cache:
        cache_dir.mkdir(parents=True, exist_ok=True)
        doc = est.to_dict()
        doc["generator"] = {
            "problem": problem.name,
            "scramble_seed": GROUND_TRUTH_SEED,
            "gradient": "analytic" if problem.grad is not None else "finite-difference",
            "coordinates": "normalized",
            "version": 1,
        }
        fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(doc, fh, indent=2)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return est


def rescale_to_box(estimate, box):
    """Convert normalized-coordinate DGSMs to original units.

    Chain rule: raw and absolute divide by the box width per dimension,
    squared divides by the width squared.
    """
    widths = np.asarray(box, dtype=np.float64)[:, 1] - np.asarray(box)[:, 0]
    return DgsmEstimate(raw=estimate.raw / widths, abs=estimate.abs / widths,
                        sq=estimate.sq / widths**2, nodes_used=estimate.nodes_used)
