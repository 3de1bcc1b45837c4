"""Exact and Monte Carlo estimators of the scalar percolation quantities.

All Monte Carlo estimators draw sample ``i`` of the stream ``derive_key(seed)``
and explore only the open cluster of the relevant source vertex.  Because edge
uniforms depend on the edge and the sample index alone, estimates at
different ``p`` or on nested regions with the same seed are coupled sample by
sample.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mc
from .config import ENUMERATION_CAP
from .exact import EdgePoly, connection_polys, expectation_poly, frontier_two_point
from .lattice import (GeometryError, LatticeSpec, Region, as_region, boundary_edge_pairs,
                      facet, graph_of, inner_boundary, sup_norm)
from .records import Estimate
from .rng import derive_key


def _origin(spec: LatticeSpec) -> tuple:
    return (0,) * spec.d


def _check_p(p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def _region_name(S) -> str:
    return S.describe() if isinstance(S, Region) else as_region(S).describe()


def _params(spec, S, p, **extra) -> dict:
    out = {"d": spec.d, "L": spec.range, "region": _region_name(S) if S is not None else "", "p": p}
    out.update(extra)
    return out


def _require(g, *vertices):
    for v in vertices:
        if not g.has(v):
            raise GeometryError(f"{tuple(v)} is not in the region")


def cluster_moments(spec: LatticeSpec, S, source, weights, p: float, n: int, seed: int = 0,
                    workers: int = 1, post=None, stream: tuple = ()) -> mc.Moments:
    """Moments of per-sample weight sums over the open cluster of ``source`` in ``S``."""
    _check_p(p)
    g = graph_of(spec, S)
    _require(g, source)
    task = mc.ClusterTask(g, g.idx(source), weights, p, derive_key(seed, *stream), post=post)
    return mc.run(task, n, workers)


def cluster_values(spec: LatticeSpec, S, source, weights, p: float, n: int, seed: int = 0,
                   post=None, stream: tuple = ()) -> np.ndarray:
    """Per-sample values behind :func:`cluster_moments` (for coupling checks)."""
    g = graph_of(spec, S)
    _require(g, source)
    task = mc.ClusterTask(g, g.idx(source), weights, p, derive_key(seed, *stream), post=post)
    return mc.collect(task.values, n)


def _mc_estimate(m: mc.Moments, seed, column=0, **kw) -> Estimate:
    return Estimate(float(m.mean[column]), float(m.stderr[column]), m.n, seed, "mc", **kw)


# --------------------------------------------------------------------------
# two-point functions


def tau_weights(spec, S, y) -> np.ndarray:
    g = graph_of(spec, S)
    w = np.zeros(g.n_vertices)
    w[g.idx(y)] = 1.0
    return w


def tau(spec: LatticeSpec, S, p: float, x, y, n: int = 100_000, seed: int = 0,
        workers: int = 1) -> Estimate:
    """Monte Carlo tau_{S,p}(x, y): indicator mean of {x <-> y in S}."""
    g = graph_of(spec, S)
    _require(g, x, y)
    m = cluster_moments(spec, S, tuple(x), tau_weights(spec, S, y), p, n, seed, workers)
    return _mc_estimate(m, seed, quantity="tau",
                        params=_params(spec, S, p, x=list(x), y=list(y)))


def tau_poly(spec: LatticeSpec, S, x, y, cap: int = ENUMERATION_CAP,
             method: str = "enumerate") -> EdgePoly:
    g = graph_of(spec, S)
    _require(g, x, y)
    a, b = g.idx(x), g.idx(y)
    if method == "frontier":
        return frontier_two_point(g, a, b)
    if method == "auto" and g.n_edges > cap:
        return frontier_two_point(g, a, b)
    return connection_polys(g, [(a, b)], cap)[0]


def tau_exact(spec: LatticeSpec, S, p: float, x, y, cap: int = ENUMERATION_CAP,
              method: str = "enumerate") -> Estimate:
    """Exact tau_{S,p}(x, y).

    ``method="enumerate"`` sums over all configurations (raises
    :class:`CapExceeded` above ``cap`` edges); ``"frontier"`` uses the
    transfer-matrix sweep; ``"auto"`` picks enumeration under the cap.
    """
    _check_p(p)
    poly = tau_poly(spec, S, x, y, cap, method)
    val = 1.0 if tuple(x) == tuple(y) else poly(p)
    return Estimate(val, 0.0, 2 ** poly.n_edges, None, "exact", quantity="tau",
                    params=_params(spec, S, p, x=list(x), y=list(y), method=method))


def tau_values_exact(spec, S, p, pairs, cap=ENUMERATION_CAP, method="enumerate") -> list:
    """Exact tau values for many pairs from one enumeration; 0 if an endpoint is outside S."""
    g = graph_of(spec, S)
    idx = []
    for x, y in pairs:
        idx.append((g.idx(x), g.idx(y)) if g.has(x) and g.has(y) else None)
    inside = [ij for ij in idx if ij is not None]
    if method == "frontier" or (method == "auto" and g.n_edges > cap):
        polys = [frontier_two_point(g, a, b) for a, b in inside]
    else:
        polys = connection_polys(g, inside, cap)
    it = iter(polys)
    out = []
    for ij in idx:
        if ij is None:
            out.append(0.0)
        else:
            val = next(it)(p)
            out.append(1.0 if ij[0] == ij[1] else val)
    return out


# --------------------------------------------------------------------------
# phi, pioneers


def exit_multiplicity(spec: LatticeSpec, S, Lam=None) -> dict:
    """u -> number of pairs (u, v) with v in Lam \\ S, u ~ v."""
    counts: dict = {}
    for u, _ in boundary_edge_pairs(spec, S, Lam):
        counts[u] = counts.get(u, 0) + 1
    return counts


def _require_origin(spec, S):
    g = graph_of(spec, S)
    if not g.has(_origin(spec)):
        raise GeometryError("the origin must belong to S")
    return g


def phi_exact_value(spec: LatticeSpec, S, p: float, Lam=None, cap: int = ENUMERATION_CAP,
                    method: str = "enumerate") -> float:
    g = _require_origin(spec, S)
    mult = exit_multiplicity(spec, S, Lam)
    if not mult:
        return 0.0
    us = sorted(mult)
    vals = tau_values_exact(spec, S, p, [(_origin(spec), u) for u in us], cap, method)
    return p * sum(mult[u] * t for u, t in zip(us, vals))


def phi(spec: LatticeSpec, S, p: float, n: int = 100_000, seed: int = 0, Lam=None,
        mode: str = "mc", workers: int = 1) -> Estimate:
    """phi_p(S) = sum over exiting pairs (u, v) of tau_{S,p}(0, u) * p.

    ``Lam`` (default: the whole lattice) restricts the outer endpoints v.
    """
    _check_p(p)
    g = _require_origin(spec, S)
    params = _params(spec, S, p, Lam=_region_name(Lam) if Lam is not None else "Z^d")
    if mode == "exact":
        val = phi_exact_value(spec, S, p, Lam)
        return Estimate(val, 0.0, 2 ** g.n_edges, None, "exact", quantity="phi", params=params)
    w = np.zeros(g.n_vertices)
    for u, c in exit_multiplicity(spec, S, Lam).items():
        w[g.idx(u)] = c * p
    m = cluster_moments(spec, S, _origin(spec), w, p, n, seed, workers)
    return _mc_estimate(m, seed, quantity="phi", params=params)


def pioneers(spec: LatticeSpec, S, p: float, n: int = 100_000, seed: int = 0,
             mode: str = "mc", workers: int = 1) -> Estimate:
    """E_p[P_S], P_S = #{u in the inner boundary of S : 0 <-> u in S}."""
    _check_p(p)
    g = _require_origin(spec, S)
    bd = inner_boundary(spec, S)
    params = _params(spec, S, p)
    if mode == "exact":
        vals = tau_values_exact(spec, S, p, [(_origin(spec), u) for u in bd])
        return Estimate(float(sum(vals)), 0.0, 2 ** g.n_edges, None, "exact",
                        quantity="pioneers", params=params)
    w = np.zeros(g.n_vertices)
    for u in bd:
        w[g.idx(u)] = 1.0
    m = cluster_moments(spec, S, _origin(spec), w, p, n, seed, workers)
    return _mc_estimate(m, seed, quantity="pioneers", params=params)


# --------------------------------------------------------------------------
# one-arm, susceptibility, correlation lengths


def _any_positive(sums: np.ndarray) -> np.ndarray:
    return (sums > 0).astype(np.float64)


def _theta_setup(spec, n_radius):
    if n_radius < 1:
        raise ValueError("theta needs n >= 1")
    box = Region.box(n_radius, d=spec.d)
    g = graph_of(spec, box)
    bd = np.zeros(g.n_vertices, dtype=bool)
    for u in inner_boundary(spec, box):
        bd[g.idx(u)] = True
    return box, g, bd


def theta_poly(spec: LatticeSpec, n_radius: int, cap: int = ENUMERATION_CAP) -> EdgePoly:
    """Exact theta_n as a polynomial, enumerating only edges with an interior endpoint.

    Edges joining two boundary vertices never matter: a path reaching one of
    them has already reached the boundary.
    """
    box, g, bd = _theta_setup(spec, n_radius)
    o = g.idx(_origin(spec))
    mask = ~(bd[g.edges[:, 0]] & bd[g.edges[:, 1]])
    if bd[o]:
        return EdgePoly.constant(int(mask.sum()))
    cols = np.nonzero(bd)[0]

    def hit(_flags, labels):
        return (labels[:, cols] == labels[:, [o]]).any(axis=1)

    return expectation_poly(g, hit, cap, edge_mask=mask)


def theta(spec: LatticeSpec, n_radius: int, p: float, n: int = 100_000, seed: int = 0,
          mode: str = "mc", workers: int = 1) -> Estimate:
    """theta_n(p) = P_p[0 <-> boundary of Lambda_n], evaluated with edges inside Lambda_n."""
    _check_p(p)
    box, g, bd = _theta_setup(spec, n_radius)
    params = _params(spec, box, p, n_radius=n_radius)
    if mode == "exact":
        poly = theta_poly(spec, n_radius)
        return Estimate(poly(p), 0.0, 2 ** poly.n_edges, None, "exact", quantity="theta", params=params)
    m = cluster_moments(spec, box, _origin(spec), bd.astype(float), p, n, seed, workers,
                        post=_any_positive)
    return _mc_estimate(m, seed, quantity="theta", params=params)


def _size_and_touch(sums: np.ndarray) -> np.ndarray:
    out = sums.copy()
    out[:, -1] = sums[:, -1] > 0
    return out


def _box_weights(spec, radius, extra=None):
    box = Region.box(radius, d=spec.d)
    g = graph_of(spec, box)
    bd = np.zeros(g.n_vertices)
    for u in inner_boundary(spec, box):
        bd[g.idx(u)] = 1.0
    cols = ([extra(g)] if extra is not None else []) + [np.ones(g.n_vertices), bd]
    return box, np.stack(cols, axis=1)


def chi(spec: LatticeSpec, p: float, box_radius: int, n: int = 10_000, seed: int = 0,
        p_c: float | None = None, workers: int = 1) -> Estimate:
    """E_p|C(0)| within Lambda_box; diagnostics give the fraction of samples
    whose cluster reaches the box boundary (truncation indicator)."""
    if p_c is not None and p >= p_c:
        warnings.warn(f"p={p} is not below the supplied p_c={p_c}; chi is a truncated quantity",
                      stacklevel=2)
    box, w = _box_weights(spec, box_radius)
    m = cluster_moments(spec, box, _origin(spec), w, p, n, seed, workers, post=_size_and_touch)
    return _mc_estimate(
        m, seed, quantity="chi", params=_params(spec, box, p, box_radius=box_radius),
        diagnostics={"touch_fraction": float(m.mean[1]), "touch_fraction_stderr": float(m.stderr[1])},
    )


@dataclass
class DecayFit:
    xi: float
    stderr: float
    slope: float
    intercept: float
    residuals: list
    used: list
    dropped: list = field(default_factory=list)


def fit_decay_length(n_list, tau_values, stderrs=None) -> DecayFit:
    """Weighted least squares of -log tau against n; xi = 1 / slope.

    Zero estimates are dropped with a warning.
    """
    n_arr = np.asarray(n_list, dtype=float)
    t = np.asarray(tau_values, dtype=float)
    se = np.zeros_like(t) if stderrs is None else np.asarray(stderrs, dtype=float)
    keep = t > 0
    dropped = [float(v) for v in n_arr[~keep]]
    if dropped:
        warnings.warn(f"dropping n={dropped}: zero two-point estimate", stacklevel=2)
    if keep.sum() < 2:
        raise ValueError("fewer than two usable points for the decay fit")
    x, y = n_arr[keep], -np.log(t[keep])
    sy = se[keep] / t[keep]
    if np.all(sy > 0):
        wts = 1.0 / sy**2
    else:
        wts = np.ones_like(y)
    X = np.stack([np.ones_like(x), x], axis=1)
    WX = X * wts[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    resid = y - X @ beta
    if not np.all(sy > 0):
        dof = max(len(y) - 2, 1)
        cov = cov * float(resid @ resid) / dof
    slope, intercept = float(beta[1]), float(beta[0])
    se_slope = float(math.sqrt(max(cov[1, 1], 0.0)))
    xi = 1.0 / slope if slope > 0 else math.inf
    xi_se = se_slope / slope**2 if slope > 0 else math.inf
    return DecayFit(xi, xi_se, slope, intercept, [float(r) for r in resid],
                    [float(v) for v in x], dropped)


def xi_directional(spec: LatticeSpec, direction, p: float, n_list, samples: int = 100_000,
                   seed: int = 0, box_radius: int | None = None, workers: int = 1) -> DecayFit:
    """Correlation length along ``direction`` from tau_p(0, floor(n u)), n in ``n_list``."""
    u = np.asarray(direction, dtype=float)
    if u.shape != (spec.d,):
        raise ValueError("direction must have d components")
    u = u / np.linalg.norm(u)
    n_list = [int(k) for k in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    targets = [tuple(int(c) for c in np.floor(k * u + 1e-12)) for k in n_list]
    R = box_radius if box_radius is not None else 2 * max(sup_norm(t) for t in targets) + 2
    box = Region.box(R, d=spec.d)
    g = graph_of(spec, box)
    w = np.zeros((g.n_vertices, len(targets)))
    for j, t in enumerate(targets):
        w[g.idx(t), j] = 1.0
    m = cluster_moments(spec, box, _origin(spec), w, p, samples, seed, workers)
    return fit_decay_length(n_list, m.mean, m.stderr)


def xi_phi_from_moments(weighted: float, size: float, phi_order: float) -> float:
    """(sum |x|^phi tau / sum tau)^(1/phi)."""
    if size <= 0:
        return math.nan
    return (weighted / size) ** (1.0 / phi_order)


def xi_phi(spec: LatticeSpec, phi_order: float, p: float, box_radius: int, n: int = 10_000,
           seed: int = 0, workers: int = 1) -> Estimate:
    """Correlation length of order phi via the ratio estimator, l-infinity norm."""
    if phi_order <= 0:
        raise ValueError("phi_order must be > 0")

    def norms(g):
        return np.abs(g.coords).max(axis=1).astype(float) ** phi_order

    box, w = _box_weights(spec, box_radius, extra=norms)
    m = cluster_moments(spec, box, _origin(spec), w, p, n, seed, workers, post=_size_and_touch)
    r, r_se = mc.ratio_stats(m, 0, 1)
    val = xi_phi_from_moments(m.mean[0], m.mean[1], phi_order)
    if r > 0:
        se = (1.0 / phi_order) * r ** (1.0 / phi_order - 1.0) * r_se
    else:
        se = 0.0
    return Estimate(
        float(val), float(se), m.n, seed, "mc", quantity="xi_phi",
        params=_params(spec, box, p, phi=phi_order, box_radius=box_radius),
        diagnostics={"touch_fraction": float(m.mean[2]), "chi": float(m.mean[1])},
    )


# --------------------------------------------------------------------------
# sharp length


@dataclass
class SharpLength:
    value: float
    table: list
    proxy: str = "boxes Lambda_0..Lambda_k"

    def to_json(self) -> dict:
        return {"value": self.value, "table": self.table, "proxy": self.proxy}


def sharp_length(spec: LatticeSpec, p: float, k_max: int, n: int = 10_000, seed: int = 0,
                 z: float = 1.96, workers: int = 1) -> SharpLength:
    """Box-family proxy for L(p).

    L = min{k >= 1 : min_{0<=j<=k} upper CI of phi(Lambda_j) < 1/2}; the scan
    stops at the first qualifying box.  ``math.inf`` when none up to ``k_max``.
    """
    if p >= 1:
        raise ValueError("sharp length needs p < 1")
    table = []
    for j in range(0, k_max + 1):
        est = phi(spec, Region.box(j, d=spec.d), p, n=n, seed=seed, workers=workers)
        upper = est.mean + z * est.stderr
        table.append({"k": j, "phi": est.mean, "stderr": est.stderr, "upper": upper})
        if upper < 0.5:
            return SharpLength(float(max(j, 1)), table)
    return SharpLength(math.inf, table)


# --------------------------------------------------------------------------
# error term, facet sums


def error_term(spec: LatticeSpec, w, x, A, Lam, p: float, mode: str = "exact", n: int = 100_000,
               seed: int = 0, workers: int = 1) -> Estimate:
    """sum_{z in A} tau_{Lam,p}(w, z) tau_{Lam,p}(z, x)."""
    _check_p(p)
    g = graph_of(spec, Lam)
    _require(g, w, x)
    A = sorted({tuple(z) for z in A})
    _require(g, *A)
    params = _params(spec, Lam, p, w=list(w), x=list(x), A=[list(z) for z in A])
    if not A:
        return Estimate(0.0, 0.0, 1, seed, mode if mode == "mc" else "exact",
                        quantity="error_term", params=params)
    if mode == "exact":
        left = tau_values_exact(spec, Lam, p, [(w, z) for z in A])
        right = tau_values_exact(spec, Lam, p, [(z, x) for z in A])
        val = float(sum(a * b for a, b in zip(left, right)))
        return Estimate(val, 0.0, 2 ** g.n_edges, None, "exact", quantity="error_term", params=params)
    cols = np.zeros((g.n_vertices, len(A)))
    for j, z in enumerate(A):
        cols[g.idx(z), j] = 1.0
    mw = cluster_moments(spec, Lam, tuple(w), cols, p, n, seed, workers, stream=("error", "w"))
    mx = cluster_moments(spec, Lam, tuple(x), cols, p, n, seed, workers, stream=("error", "x"))
    a, b = mw.mean, mx.mean
    val = float(a @ b)
    var = float(b @ mw.cov @ b / mw.n + a @ mx.cov @ a / mx.n)
    return Estimate(val, math.sqrt(max(var, 0.0)), n, seed, "mc", quantity="error_term", params=params)


def facet_sum(spec: LatticeSpec, Q, F, p: float, n: int = 100_000, seed: int = 0,
              mode: str = "mc", workers: int = 1) -> Estimate:
    """sum_{y in F} tau_{Q,p}(0, y)."""
    _check_p(p)
    g = _require_origin(spec, Q)
    F = sorted({tuple(y) for y in F})
    if any(not g.has(y) for y in F):
        raise GeometryError("F must be a subset of Q")
    params = _params(spec, Q, p, F=[list(y) for y in F])
    if mode == "exact":
        vals = tau_values_exact(spec, Q, p, [(_origin(spec), y) for y in F], method="auto")
        return Estimate(float(sum(vals)), 0.0, 2 ** g.n_edges, None, "exact",
                        quantity="facet_sum", params=params)
    w = np.zeros(g.n_vertices)
    for y in F:
        w[g.idx(y)] = 1.0
    m = cluster_moments(spec, Q, _origin(spec), w, p, n, seed, workers)
    return _mc_estimate(m, seed, quantity="facet_sum", params=params)


def tube_facet_sums(spec: LatticeSpec, k: int, dirs, p: float, n: int = 100_000, seed: int = 0,
                    axis: int | None = None, sign: int = 1, workers: int = 1) -> list:
    """Facet sums for the tubes built from the first N-1 steps of ``dirs``, N = 1..len(dirs)+1.

    The facet is ``F_axis^sign`` of the last block; ``axis`` defaults to the
    direction of the final step (axis 1 for a single block).
    """
    out = []
    dirs = list(dirs)
    for N in range(1, len(dirs) + 2):
        steps = dirs[: N - 1]
        Q = Region.tube(k, steps, spec.d)
        last = Q.block_centers[-1]
        ax = axis if axis is not None else (steps[-1] if steps else 1)
        F = facet(spec, k, ax, sign, center=last)
        est = facet_sum(spec, Q, F, p, n=n, seed=seed, workers=workers)
        est.params.update({"N": N, "k": k, "axis": ax, "sign": sign})
        out.append(est)
    return out


# --------------------------------------------------------------------------
# critical point


@dataclass
class PcEstimate:
    p_c: float
    lo: float
    hi: float
    steps: list

    @property
    def width(self) -> float:
        return self.hi - self.lo


def decays(spec: LatticeSpec, p: float, k: int, n: int, seed: int = 0, workers: int = 1) -> bool:
    """True when phi_p(Lambda_2k) < phi_p(Lambda_k) (common random numbers).

    A zero estimate on the larger box also counts as decay.
    """
    small = phi(spec, Region.box(k, d=spec.d), p, n=n, seed=seed, workers=workers)
    big = phi(spec, Region.box(2 * k, d=spec.d), p, n=n, seed=seed, workers=workers)
    return big.mean < small.mean or big.mean == 0.0


def estimate_pc(spec: LatticeSpec, k: int, n: int, p_bracket=(0.0, 1.0), tol: float = 0.01,
                seed: int = 0, workers: int = 1) -> PcEstimate:
    """Bisection on the decay indicator of phi over the boxes Lambda_k, Lambda_2k."""
    lo, hi = map(float, p_bracket)
    d_lo = decays(spec, lo, k, n, seed, workers)
    d_hi = decays(spec, hi, k, n, seed, workers)
    if not d_lo or d_hi:
        raise ValueError(f"no sign change of the decay indicator in [{lo}, {hi}]")
    steps = []
    while hi - lo > tol:
        mid = (lo + hi) / 2
        dec = decays(spec, mid, k, n, seed, workers)
        steps.append((mid, dec))
        if dec:
            lo = mid
        else:
            hi = mid
    return PcEstimate((lo + hi) / 2, lo, hi, steps)
