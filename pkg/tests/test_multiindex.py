from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from paesdre.multiindex import count_multiindices, enumerate_multiindices, multiindices_of_degree


@pytest.mark.parametrize("r,p,total", [(10, 1, 11), (5, 1, 6), (5, 2, 21), (5, 3, 56)])
def test_reference_counts(r, p, total):
    assert len(enumerate_multiindices(r, p)) == total
    assert count_multiindices(r, p) == total


def test_degree_two_count_r5():
    assert len(multiindices_of_degree(5, 2)) == 15


def test_graded_lex_order():
    idx = enumerate_multiindices(3, 2)
    assert idx[:4] == [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert idx[4:] == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_multiindices(0, 1)
    with pytest.raises(ValueError):
        enumerate_multiindices(2, -1)


@given(st.integers(1, 6), st.integers(0, 4))
def test_enumeration_properties(r, p):
    idx = enumerate_multiindices(r, p)
    assert len(set(idx)) == len(idx)
    degrees = [sum(a) for a in idx]
    assert degrees == sorted(degrees)
    for k in range(p + 1):
        block = [a for a in idx if sum(a) == k]
        assert len(block) == comb(r + k - 1, k)
        assert block == sorted(block, reverse=True)
    assert all(len(a) == r and min(a) >= 0 for a in idx)
