"""Disjoint-set forest over the integers ``0..n-1``."""
from __future__ import annotations


class UnionFind:
    """Union by size with full path compression.

    >>> uf = UnionFind(4)
    >>> uf.union(0, 1); uf.union(2, 3)
    True
    True
    >>> uf.connected(0, 1), uf.connected(1, 2)
    (True, False)
    """

    __slots__ = ("parent", "size", "n_components")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.n_components = n

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_components -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def component_size(self, x: int) -> int:
        return self.size[self.find(x)]

    def labels(self) -> list:
        return [self.find(x) for x in range(len(self.parent))]
