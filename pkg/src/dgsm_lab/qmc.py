"""Scrambled Sobol sequences from Joe-Kuo direction numbers.

The direction-number table ships as a data file in the published text format:
one line per dimension holding ``d s a m_1 ... m_s`` — the dimension index,
polynomial degree, encoded primitive-polynomial coefficients, and the initial
direction integers.  The file bundled here carries the first 128 dimensions of
the D(6) table; a larger file in the same format can be swapped in unchanged.
Dimension 1 (not present in the published files) uses the van der Corput
direction numbers.

Points are produced in Gray-code order at 32-bit resolution, starting with
the zero point (no skipping).  Scrambling is Owen's nested uniform digit
scrambling driven by a counter-based hash (SplitMix64), so streams are fully
reproducible from ``(dim, seed)`` on any platform and never need to store
permutation trees.
"""

import functools
from importlib import resources

import numpy as np

from ._accel import owen_scramble, sobol_raw, splitmix64

__all__ = ["SobolStream", "sobol_next", "integrate_mean", "load_direction_table"]

N_BITS = 32
_SCALE = float(2**N_BITS)


def load_direction_table(path=None):
    """Parse a Joe-Kuo style direction-number file.

    Returns a dict mapping dimension index (>= 2) to ``(s, a, m)`` tuples.
    Lines that do not start with an integer (e.g. the conventional header
    ``d s a m_i``) are skipped.
    """
    if path is None:
        text = resources.files("dgsm_lab.data").joinpath(
            "new-joe-kuo-6-first128.txt"
        ).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    table = {}
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        try:
            values = [int(p) for p in parts]
        except ValueError:
            continue
        d, s, a, m = values[0], values[1], values[2], values[3:]
        if len(m) != s:
            raise ValueError(f"direction-number line for d={d} has {len(m)} m_i, expected {s}")
        table[d] = (s, a, m)
    return table


@functools.lru_cache(maxsize=1)
def _default_table():
    return load_direction_table()


def _direction_matrix(dim, table):
    """Per-dimension direction integers as a (dim, 32) uint64 matrix."""
    V = np.zeros((dim, N_BITS), dtype=np.uint64)
    V[0] = [1 << (N_BITS - 1 - k) for k in range(N_BITS)]  # van der Corput
    for j in range(2, dim + 1):
        if j not in table:
            raise ValueError(
                f"dimension {dim} unsupported by direction-number table "
                f"(max {max(table)})"
            )
        s, a, m = table[j]
        row = np.zeros(N_BITS, dtype=np.uint64)
        for i in range(min(s, N_BITS)):
            row[i] = m[i] << (N_BITS - 1 - i)
        for i in range(s, N_BITS):
            v = row[i - s] ^ (row[i - s] >> np.uint64(s))
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    v ^= row[i - k]
            row[i] = v
        V[j - 1] = row
    return V


class SobolStream:
    """Stateful Sobol point generator for one (dim, seed) pair.

    ``next(n)`` yields the next ``n`` points of the sequence in [0, 1)^dim;
    the stream's ``index`` advances so successive calls continue the same
    sequence.  With ``scramble=False`` the raw (deterministic, seed-free)
    sequence is produced, which is what reference-comparison tests use.
    """

    def __init__(self, dim, seed=0, scramble=True, table=None):
        if not (isinstance(dim, (int, np.integer)) and dim >= 1):
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self.index = 0
        self.scramble = bool(scramble)
        self.scramble_seed = int(seed) if seed is not None else 0
        self._V = _direction_matrix(self.dim, table if table is not None else _default_table())
        base = splitmix64(np.uint64(self.scramble_seed & 0xFFFFFFFFFFFFFFFF))
        self._keys = splitmix64(base ^ np.arange(1, self.dim + 1, dtype=np.uint64))

    def next(self, n):
        """Next n points, shape (n, dim), advancing the stream."""
        if not n >= 1:
            raise ValueError("n must be >= 1")
        raw = sobol_raw(self._V, self.index, int(n))
        self.index += int(n)
        if not self.scramble:
            return raw.astype(np.float64) / _SCALE
        scrambled = owen_scramble(raw, self._keys)
        return (scrambled.astype(np.float64) + 0.5) / _SCALE


def sobol_next(stream, n):
    """Functional form of :meth:`SobolStream.next`."""
    return stream.next(n)


def integrate_mean(fvals):
    """QMC estimate of the unit-cube integral: the plain arithmetic mean."""
    fvals = np.asarray(fvals, dtype=np.float64)
    if fvals.size == 0:
        raise ValueError("cannot integrate an empty value vector")
    return float(np.mean(fvals))
