from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from carnot_kit.symbolic import MultiPoly

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

small_ints = st.integers(min_value=-6, max_value=6)
rationals = st.builds(Fraction, st.integers(-30, 30), st.integers(1, 12))
nonzero_rationals = rationals.filter(lambda q: q != 0)


@st.composite
def polys(draw, nvars, max_degree=2, max_terms=4):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        exps = [0] * nvars
        for _ in range(draw(st.integers(0, max_degree))):
            exps[draw(st.integers(0, nvars - 1))] += 1
        terms[tuple(exps)] = terms.get(tuple(exps), 0) + draw(rationals)
    return MultiPoly(nvars, terms)


@st.composite
def rational_vectors(draw, n):
    return tuple(draw(rationals) for _ in range(n))


@pytest.fixture(scope="session")
def g8():
    from carnot_kit.catalog import make_g8

    return make_g8()


@pytest.fixture(scope="session")
def h1():
    from carnot_kit.catalog import make_heisenberg

    return make_heisenberg(1)


@pytest.fixture(scope="session")
def h2():
    from carnot_kit.catalog import make_heisenberg

    return make_heisenberg(2)
