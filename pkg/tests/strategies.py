"""Hypothesis strategies shared by the test modules."""
from hypothesis import strategies as st


@st.composite
def polyomino(draw, d=2, max_size=8, spread=3, contain_origin=True):
    """A connected vertex set grown from the origin by random lattice steps."""
    size = draw(st.integers(1, max_size))
    pts = [(0,) * d]
    seen = set(pts)
    while len(pts) < size:
        base = pts[draw(st.integers(0, len(pts) - 1))]
        axis = draw(st.integers(0, d - 1))
        step = draw(st.sampled_from((-1, 1)))
        new = list(base)
        new[axis] += step
        new = tuple(new)
        if max(abs(c) for c in new) > spread or new in seen:
            continue
        seen.add(new)
        pts.append(new)
    return sorted(pts)
