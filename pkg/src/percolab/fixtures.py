"""Small named instances for exhaustive checks.

Every fixture has at most 24 edges, so all of its configurations can be
enumerated.  ``tuples`` lists the (o, x, S) choices used by the boundary
decomposition checks; ``events`` lists pairs of increasing connection events.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .events import ConnectionEvent, EdgeOpenEvent
from .lattice import LatticeSpec, Region, graph_of

P_GRID = (0.2, 0.5, 0.8)


@dataclass
class Fixture:
    name: str
    spec: LatticeSpec
    Lam: Region
    tuples: list
    events: list = field(default_factory=list)

    @property
    def graph(self):
        return graph_of(self.spec, self.Lam)


def _set(*pts, d=2) -> Region:
    return Region.explicit(pts, d=d)


def _build() -> dict:
    out = {}
    d1 = LatticeSpec(1)
    d2 = LatticeSpec(2)

    path = Region.box(1, d=1)
    out["path3"] = Fixture("path3", d1, path, [
        ((0,), (1,), _set((0,), d=1)),
        ((0,), (-1,), _set((0,), (1,), d=1)),
        ((0,), (0,), _set((0,), d=1)),
    ], [(ConnectionEvent((-1,), (1,)), ConnectionEvent((-1,), (1,))),
        (ConnectionEvent((-1,), (0,)), ConnectionEvent((0,), (1,)))])

    chain = Region.box(3, d=1)
    out["chain7"] = Fixture("chain7", d1, chain, [
        ((0,), (3,), Region.box(1, d=1)),
        ((0,), (-3,), _set((0,), (1,), (2,), d=1)),
        ((1,), (2,), _set((0,), (1,), d=1)),
    ], [(ConnectionEvent((-3,), (3,)), ConnectionEvent((0,), (2,)))])

    square = _set((0, 0), (1, 0), (0, 1), (1, 1))
    out["square"] = Fixture("square", d2, square, [
        ((0, 0), (1, 1), _set((0, 0), (1, 0))),
        ((0, 0), (0, 1), _set((0, 0))),
        ((0, 0), (1, 1), square),
        ((0, 0), (0, 0), _set((0, 0), (1, 0))),
    ], [(ConnectionEvent((0, 0), (1, 1)), ConnectionEvent((0, 0), (1, 1))),
        (ConnectionEvent((0, 0), (1, 1)), EdgeOpenEvent((0, 0), (1, 0))),
        (ConnectionEvent((0, 0), (1, 0)), ConnectionEvent((0, 1), (1, 1)))])

    strip = Region.explicit([(i, j) for i in range(4) for j in range(2)], d=2)
    out["strip2x4"] = Fixture("strip2x4", d2, strip, [
        ((0, 0), (3, 1), _set((0, 0), (1, 0), (0, 1))),
        ((1, 0), (3, 0), _set((0, 0), (1, 0), (1, 1))),
        ((0, 0), (2, 1), _set((0, 0))),
    ], [(ConnectionEvent((0, 0), (3, 1)), ConnectionEvent((0, 1), (3, 0))),
        (ConnectionEvent((0, 0), (3, 0)), ConnectionEvent((0, 0), (3, 0)))])

    box1 = Region.box(1, d=2)
    out["box1"] = Fixture("box1", d2, box1, [
        ((0, 0), (1, 1), _set((0, 0), (1, 0))),
        ((0, 0), (-1, 1), _set((0, 0))),
        ((0, 0), (1, -1), _set((0, 0), (0, -1), (1, 0))),
        ((0, 0), (0, 1), _set((0, 0), (0, 1))),
    ], [(ConnectionEvent((-1, -1), (1, 1)), ConnectionEvent((-1, 1), (1, -1))),
        (ConnectionEvent((0, 0), (1, 1)), ConnectionEvent((0, 0), (1, 1)))])

    # 3x4 grid with one corner removed: 11 vertices, 15 edges
    notch = Region.explicit([(i, j) for i in range(-1, 3) for j in range(-1, 2) if (i, j) != (2, 1)], d=2)
    out["notch"] = Fixture("notch", d2, notch, [
        ((0, 0), (2, 0), _set((0, 0), (1, 0), (0, 1))),
        ((0, 0), (-1, -1), _set((0, 0), (-1, 0))),
    ], [(ConnectionEvent((-1, -1), (2, 0)), ConnectionEvent((-1, 1), (2, -1)))])

    # 3x5 rectangle with two tips on the horizontal axis: 17 vertices, 24 edges
    plus = Region.explicit([(i, j) for i in (-1, 0, 1) for j in range(-2, 3)] + [(-2, 0), (2, 0)], d=2)
    out["plus"] = Fixture("plus", d2, plus, [
        ((0, 0), (1, 2), box1),
        ((0, 0), (-2, 0), _set((0, 0), (-1, 0))),
    ])

    # spread-out range 2 on a short chain
    so = LatticeSpec(1, 2)
    out["spread1d"] = Fixture("spread1d", so, Region.box(2, d=1), [
        ((0,), (2,), _set((0,), d=1)),
        ((0,), (-2,), _set((0,), (1,), (-1,), d=1)),
    ], [(ConnectionEvent((-2,), (2,)), ConnectionEvent((-1,), (1,)))])
    return out


FIXTURES = _build()


def get(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(sorted(FIXTURES))}") from None
