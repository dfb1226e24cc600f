from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from polyrep.core import Signature, validate_game

small_rationals = st.builds(Fraction, st.integers(-6, 6), st.sampled_from([1, 2, 3, 4]))


@st.composite
def signatures(draw, max_groups=3, max_part=3):
    parts = draw(st.lists(st.integers(1, max_part), min_size=1, max_size=max_groups))
    return Signature(tuple(parts))


@st.composite
def matrices(draw, n, m=None, elements=small_rationals):
    m = n if m is None else m
    rows = draw(st.lists(st.lists(elements, min_size=m, max_size=m), min_size=n, max_size=n))
    return np.array(rows, dtype=object).reshape(n, m)


@st.composite
def games(draw, sig=None):
    sig = draw(signatures()) if sig is None else sig
    return validate_game(sig, draw(matrices(sig.n)))


@st.composite
def skew_games(draw, sig=None):
    sig = draw(signatures()) if sig is None else sig
    M = draw(matrices(sig.n))
    return validate_game(sig, M - M.T)


@st.composite
def prism_points(draw, sig, interior=True):
    """Exact rational point of the prism; ``interior=False`` allows zero weights."""
    lo = 1 if interior else 0
    x = []
    for na in sig.parts:
        w = draw(st.lists(st.integers(lo, 9), min_size=na, max_size=na))
        if sum(w) == 0:
            w[draw(st.integers(0, na - 1))] = 1
        x += [Fraction(v, sum(w)) for v in w]
    return np.array(x, dtype=object)


@st.composite
def faces(draw, sig):
    """Index set meeting every group."""
    idx = []
    for s in sig.slices:
        members = list(range(s.start, s.stop))
        keep = draw(st.lists(st.sampled_from(members), min_size=1, max_size=len(members), unique=True))
        idx += sorted(keep)
    return tuple(sorted(idx))
