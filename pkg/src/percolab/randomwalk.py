"""Green functions of the random walk killed on leaving a finite set."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .estimators import cluster_moments
from .lattice import GeometryError, LatticeSpec, graph_of


class ConvergenceError(RuntimeError):
    pass


@dataclass
class GreenSolution:
    vertices: tuple
    source: tuple
    values: np.ndarray
    residual: float

    def __getitem__(self, x) -> float:
        return float(self.values[self._index[tuple(x)]])

    @property
    def _index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    def table(self) -> list:
        return [(v, float(g)) for v, g in zip(self.vertices, self.values)]

    def write_csv(self, fh) -> None:
        d = len(self.source)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(d)] + ["green"])
        for v, g in self.table():
            w.writerow(list(v) + [repr(g)])


def killed_operator(spec: LatticeSpec, S):
    """(I - P_S) as a sparse matrix over the vertices of S, and the graph."""
    g = graph_of(spec, S)
    V = g.n_vertices
    a, b = g.edges[:, 0], g.edges[:, 1]
    step = 1.0 / spec.degree
    P = sp.coo_matrix((np.full(2 * len(a), step), (np.r_[a, b], np.r_[b, a])), shape=(V, V))
    return (sp.identity(V, format="csr") - P.tocsr()).tocsr(), g


def green_killed(spec: LatticeSpec, S, source, tol: float = 1e-10,
                 maxiter: int = 1_000_000) -> GreenSolution:
    """G_S(source, .) from (I - P_S) g = delta_source by conjugate gradients.

    The operator is symmetric positive definite with unit diagonal, so
    diagonal preconditioning is the identity.
    """
    A, g = killed_operator(spec, S)
    source = tuple(source)
    if not g.has(source):
        raise GeometryError(f"{source} is not in S")
    b = np.zeros(g.n_vertices)
    b[g.idx(source)] = 1.0
    x, info = cg(A, b, rtol=0.0, atol=tol * 0.1, maxiter=maxiter)
    res = float(np.linalg.norm(A @ x - b))
    if info != 0 or res > tol:
        raise ConvergenceError(f"CG stopped with info={info}, residual {res:.3g}")
    return GreenSolution(g.vertices, source, x, res)


def phi_rw(spec: LatticeSpec, S, tol: float = 1e-10) -> float:
    """sum over exiting pairs (u, v) of G_S(0, u) P_0[X_1 = v - u]; equals 1 for finite S."""
    origin = (0,) * spec.d
    sol = green_killed(spec, S, origin, tol)
    g = graph_of(spec, S)
    indptr, _, _ = g.csr
    exits = spec.degree - np.diff(indptr)
    return float(sol.values @ exits / spec.degree)


@dataclass
class Comparison:
    rows: list
    min_ratio: float
    max_ratio: float


def compare_tau_green(spec: LatticeSpec, S, p: float, n: int = 10_000, seed: int = 0) -> Comparison:
    """Side-by-side tau_{S,p}(0, x) estimates and G_S(0, x); descriptive only."""
    origin = (0,) * spec.d
    sol = green_killed(spec, S, origin)
    g = graph_of(spec, S)
    m = cluster_moments(spec, S, origin, np.eye(g.n_vertices), p, n, seed)
    rows, ratios = [], []
    for i, v in enumerate(g.vertices):
        t, G = float(m.mean[i]), float(sol.values[i])
        r = t / G if G > 0 else math.nan
        if t > 0:
            ratios.append(r)
        rows.append({"x": list(v), "tau": t, "tau_stderr": float(m.stderr[i]), "green": G, "ratio": r})
    return Comparison(rows, min(ratios, default=math.nan), max(ratios, default=math.nan))
