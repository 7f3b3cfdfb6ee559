"""Multiindices in graded lexicographic order."""

from itertools import combinations_with_replacement
from math import comb

import numpy as np


def multiindices_of_degree(r, k):
    """All alpha in N^r with |alpha| = k, lexicographically descending."""
    out = []
    for combo in combinations_with_replacement(range(r), k):
        alpha = [0] * r
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return out


def enumerate_multiindices(r, p):
    """All alpha with |alpha| <= p: by degree, then lexicographically descending.

    For r = 3, p = 2 this starts (0,0,0), (1,0,0), (0,1,0), (0,0,1), (2,0,0),
    (1,1,0), ...
    """
    if r < 1 or p < 0:
        raise ValueError("need r >= 1 and p >= 0")
    return [a for k in range(p + 1) for a in multiindices_of_degree(r, k)]


def count_multiindices(r, p):
    return sum(comb(r + k - 1, k) for k in range(p + 1))


def exponent_table(indices):
    return np.array(indices, dtype=np.int64).reshape(len(indices), -1)
