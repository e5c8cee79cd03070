import numpy as np
import pytest
from hypothesis import given, strategies as st

from taubisim.lattice import (FixpointBudgetExceeded, LatticeError, MonotoneOp, Rel, Universe,
                              check_monotone, closure_star, gfp, identity, lfp, random_rel)


@st.composite
def matrices(draw, n):
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    return np.array(bits, dtype=bool).reshape(n, n)


@st.composite
def lattice_case(draw):
    """A universe, an affine-ish monotone operator and a relation."""
    n = draw(st.integers(1, 6))
    u = Universe(range(n))
    a, b, c, m = (Rel(u, draw(matrices(n))) for _ in range(4))
    op = MonotoneOp("affine", u, lambda x: a | b.compose(x).compose(c) | (x & m))
    return u, op, Rel(u, draw(matrices(n)))


def test_universe_rejects_bad_input():
    with pytest.raises(LatticeError):
        Universe([])
    with pytest.raises(LatticeError):
        Universe(["a", "a"])
    with pytest.raises(LatticeError):
        Universe(range(5), cap=4)


def test_relation_algebra_small():
    u = Universe("abc")
    r = u.rel([(0, 1), (1, 2)])
    assert r.compose(r) == u.rel([(0, 2)])
    assert r.transpose() == u.rel([(1, 0), (2, 1)])
    assert (r | u.diagonal()) >= r
    assert len(u.top()) == 9 and not u.bottom()
    assert r.first_missing(u.rel([(0, 1)])) == (1, 2)
    assert r.first_missing(u.top()) is None


def test_reachability_as_lfp():
    u = Universe(range(4))
    edge = u.rel([(0, 1), (1, 2), (2, 3)])
    reach = lfp(MonotoneOp("reach", u, lambda x: edge | x.compose(edge)))
    assert set(reach.pairs()) == {(i, j) for i in range(4) for j in range(i + 1, 4)}


def test_non_monotone_operator_exhausts_budget():
    u = Universe(range(2))
    flip = MonotoneOp("flip", u, lambda x: ~x)
    with pytest.raises(FixpointBudgetExceeded):
        gfp(flip)
    assert not check_monotone(flip, samples=20).ok


@given(lattice_case())
def test_fixpoints_are_fixed(case):
    u, op, _ = case
    lo, hi = lfp(op), gfp(op)
    assert op(lo) == lo and op(hi) == hi
    assert lo <= hi


@given(lattice_case())
def test_kleene_chains_are_monotone(case):
    u, op, _ = case
    x = u.bottom()
    for _ in range(u.size ** 2 + 1):
        y = op(x)
        assert x <= y
        x = y
    x = u.top()
    for _ in range(u.size ** 2 + 1):
        y = op(x)
        assert y <= x
        x = y


@given(lattice_case(), st.integers(0, 2**32 - 1))
def test_gfp_is_greatest_postfixed_point(case, seed):
    u, op, _ = case
    hi = gfp(op)
    rng = np.random.default_rng(seed)
    for _ in range(200):
        r = random_rel(u, rng, 0.3)
        # shrink r into a postfixed point: r & op(r) & op(r & op(r)) ...
        while not r <= op(r):
            r = r & op(r)
        assert r <= hi


@given(lattice_case())
def test_closure_star_laws(case):
    u, op, x = case
    clo = MonotoneOp("clo", u, lambda y: y.compose(y) | op(y) & y.transpose())
    cx = closure_star(clo, x)
    assert x <= cx
    assert closure_star(clo, cx) == cx
    assert clo(cx) <= cx
    assert cx <= closure_star(clo, x | u.diagonal())
    assert closure_star(identity(u), x) == x


@given(lattice_case())
def test_affine_operators_pass_the_sampler(case):
    _, op, _ = case
    assert check_monotone(op, samples=30).ok


def test_mismatched_universes_are_rejected():
    u, v = Universe(range(2)), Universe(range(2))
    with pytest.raises(LatticeError):
        identity(u)(v.top())
    with pytest.raises(LatticeError):
        u.top() | v.top()
