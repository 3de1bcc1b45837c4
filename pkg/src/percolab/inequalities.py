"""Both sides of the correlation inequalities and identities, exact or sampled.

Every check returns a :class:`CheckReport` whose ``gap`` is oriented so that
``gap >= -tolerance`` means the inequality holds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .config import CapExceeded, Configuration, check_cap, cluster_of, connected
from .estimators import (cluster_moments, cluster_values, exit_multiplicity, phi_exact_value,
                         tau_values_exact, theta_poly)
from .events import INCREASING_CAP, disjoint_occurrence, is_increasing
from .exact import CHUNK, EdgePoly, iter_enumeration, sub_labels, two_point_poly
from .lattice import (GeometryError, LatticeSpec, Region, _vset, boundary_edge_pairs, graph_of,
                      inner_boundary)
from .mc import Moments, chunks
from .records import _jsonable, dumps
from .regularity import RegularityParams, classify_pioneers
from .rng import derive_key, sample_keys

EXACT_TOL = 1e-12
NESTED_OUTER_CAP = 24


@dataclass
class CheckReport:
    name: str
    instance: str
    lhs: float
    rhs: float
    gap: float
    tolerance: float
    mode: str
    stderr: float = 0.0
    asserted: bool = True
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError("mode must be 'exact' or 'mc'")
        if self.mode == "exact" and self.tolerance > 1e-9:
            raise ValueError("exact checks use a tolerance of at most 1e-9")

    @property
    def passed(self) -> bool:
        return bool(self.gap >= -self.tolerance)

    @property
    def verdict(self) -> str:
        if not self.asserted:
            return "reported"
        return "pass" if self.passed else "FAIL"

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["verdict"] = self.verdict
        return _jsonable(rec)


def append_jsonl(reports, path) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for r in reports:
            fh.write(dumps(r.to_record()) + "\n")


def summary_table(reports) -> str:
    groups: dict = {}
    for r in reports:
        groups.setdefault(r.name, []).append(r)
    lines = [f"{'name':<28} {'instances':>9} {'worst gap':>14}  verdict"]
    for name, rs in groups.items():
        worst = min(r.gap for r in rs)
        if any(r.asserted and not r.passed for r in rs):
            verdict = "FAIL"
        elif all(not r.asserted for r in rs):
            verdict = "reported"
        else:
            verdict = "pass"
        lines.append(f"{name:<28} {len(rs):>9} {worst:>14.6g}  {verdict}")
    return "\n".join(lines)


def _mc_tol(stderr: float) -> float:
    return 2.0 * stderr


def _desc(spec: LatticeSpec, **kw) -> str:
    parts = [f"d={spec.d}", f"L={spec.range}"]
    for k, v in kw.items():
        if isinstance(v, Region):
            v = v.describe()
        parts.append(f"{k}={v}")
    return " ".join(parts)


# --------------------------------------------------------------------------
# FKG and BK


def _edge_poly(graph, values: np.ndarray, n_open: np.ndarray) -> EdgePoly:
    return EdgePoly(np.bincount(n_open, weights=values.astype(float), minlength=graph.n_edges + 1))


def _enumerated(graph, cap):
    check_cap(graph.n_edges, cap)
    for flags, k, _ in iter_enumeration(graph, cap):
        yield flags, k


def check_fkg(graph, evA, evB, p: float, mode: str = "exact", n: int = 100_000, seed: int = 0,
              verify_increasing: bool = True) -> CheckReport:
    """P[A and B] - P[A] P[B] >= 0 for increasing events on ``graph``."""
    if verify_increasing and graph.n_edges <= INCREASING_CAP:
        for ev in (evA, evB):
            if not is_increasing(ev, graph):
                raise ValueError(f"{ev} is not increasing")
    if mode == "exact":
        polys = [np.zeros(graph.n_edges + 1) for _ in range(3)]
        for flags, k in _enumerated(graph, 25):
            a = evA.evaluate(graph, flags)
            b = evB.evaluate(graph, flags)
            for j, v in enumerate((a & b, a, b)):
                polys[j] += np.bincount(k, weights=v.astype(float), minlength=graph.n_edges + 1)
        pab, pa, pb = (EdgePoly(c)(p) for c in polys)
        return CheckReport("fkg", f"{evA} {evB} p={p}", pab, pa * pb, pab - pa * pb,
                           EXACT_TOL, "exact")
    key = derive_key(seed, "fkg")
    m = None
    for start, count in chunks(n):
        flags = kernels.open_from_keys(graph.edge_keys, sample_keys(key, start, count), float(p))
        a = evA.evaluate(graph, flags)
        b = evB.evaluate(graph, flags)
        part = Moments.from_values(np.stack([a & b, a, b], axis=1))
        m = part if m is None else m.merge(part)
    pab, pa, pb = m.mean
    grad = np.array([1.0, -pb, -pa])
    se = math.sqrt(max(grad @ m.cov @ grad, 0.0) / m.n)
    return CheckReport("fkg", f"{evA} {evB} p={p}", pab, pa * pb, pab - pa * pb, _mc_tol(se),
                       "mc", stderr=se)


_BK_CACHE: dict = {}


def bk_counts(graph, evA, evB, cap: int = 16):
    """Counts by open-edge number of A o B, A and B over all configurations (cached)."""
    key = (graph.spec, graph.vertices, evA, evB)
    if key in _BK_CACHE:
        return _BK_CACHE[key]
    check_cap(graph.n_edges, cap)
    E = graph.n_edges
    acc = np.zeros((3, E + 1))
    modes = set()
    bits = np.arange(E)
    for c in range(1 << E):
        flags = ((c >> bits) & 1).astype(bool)
        k = int(flags.sum())
        cfg = Configuration(graph, flags, 0.5)
        res = disjoint_occurrence(cfg, evA, evB, return_mode=True)
        modes.add(res.mode)
        acc[0, k] += res.value
    flags = kernels.enumerate_open(E, 0, 1 << E)
    k = flags.sum(axis=1)
    acc[1] = np.bincount(k, weights=evA.evaluate(graph, flags), minlength=E + 1)
    acc[2] = np.bincount(k, weights=evB.evaluate(graph, flags), minlength=E + 1)
    _BK_CACHE[key] = (acc, sorted(modes))
    return _BK_CACHE[key]


def check_bk(graph, evA, evB, p: float, cap: int = 16) -> CheckReport:
    """P[A o B] <= P[A] P[B] by exhaustive enumeration (exact only)."""
    acc, modes = bk_counts(graph, evA, evB, cap)
    pab, pa, pb = (EdgePoly(c)(p) for c in acc)
    return CheckReport("bk", f"{evA} {evB} p={p}", pab, pa * pb, pa * pb - pab, EXACT_TOL,
                       "exact", details={"modes": modes})


# --------------------------------------------------------------------------
# Simon-Lieb and its partial reverse


def _sl_geometry(spec, o, x, S, Lam):
    o, x = tuple(o), tuple(x)
    S_set, L_set = _vset(S), _vset(Lam)
    if not S_set <= L_set:
        raise GeometryError("S must be a subset of Lambda")
    if o not in S_set:
        raise GeometryError("o must lie in S")
    if x not in L_set:
        raise GeometryError("x must lie in Lambda")
    pairs = boundary_edge_pairs(spec, S_set, L_set)
    return o, x, S_set, L_set, pairs


def check_simon_lieb(spec: LatticeSpec, o, x, S, Lam, p: float, mode: str = "exact",
                     n: int = 100_000, seed: int = 0, method: str = "auto") -> CheckReport:
    """tau_Lam(o,x) <= tau_S(o,x) + sum_{u~v} tau_S(o,u) p tau_Lam(v,x)."""
    o, x, S_set, L_set, pairs = _sl_geometry(spec, o, x, S, Lam)
    inst = _desc(spec, o=o, x=x, S=_name(S), Lam=_name(Lam), p=p)
    if mode == "exact":
        t_l = tau_values_exact(spec, L_set, p, [(o, x)] + [(v, x) for _, v in pairs], method=method)
        t_s = tau_values_exact(spec, S_set, p, [(o, x)] + [(o, u) for u, _ in pairs], method=method)
        lhs = t_l[0]
        rhs = t_s[0] + p * sum(a * b for a, b in zip(t_s[1:], t_l[1:]))
        return CheckReport("simon_lieb", inst, lhs, rhs, rhs - lhs, EXACT_TOL, "exact")
    gS, gL = graph_of(spec, S_set), graph_of(spec, L_set)
    xs = x if x in S_set else None
    colsS = np.zeros((gS.n_vertices, 1 + len(pairs)))
    if xs is not None:
        colsS[gS.idx(x), 0] = 1.0
    colsL = np.zeros((gL.n_vertices, 1 + len(pairs)))
    colsL[gL.idx(o), 0] = 1.0
    for j, (u, v) in enumerate(pairs):
        colsS[gS.idx(u), j + 1] = 1.0
        colsL[gL.idx(v), j + 1] = 1.0
    mS = cluster_moments(spec, S_set, o, colsS, p, n, seed, stream=("sl", "S"))
    mL = cluster_moments(spec, L_set, x, colsL, p, n, seed, stream=("sl", "Lam"))
    a, b = mS.mean, mL.mean
    lhs = b[0]
    rhs = a[0] + p * float(a[1:] @ b[1:])
    ga = np.r_[1.0, p * b[1:]]
    gb = np.r_[-1.0, p * a[1:]]
    se = math.sqrt(max(ga @ mS.cov @ ga / mS.n + gb @ mL.cov @ gb / mL.n, 0.0))
    return CheckReport("simon_lieb", inst, float(lhs), float(rhs), float(rhs - lhs), _mc_tol(se),
                       "mc", stderr=se)


def check_far_reversed_sl(spec: LatticeSpec, o, x, S, Lam, p: float, eps: float = 0.5,
                          mode: str = "exact", n: int = 100_000, seed: int = 0) -> CheckReport:
    """tau_Lam(o,x) against the sum over pairs u~v with |x-u| >= eps |x| of tau_S(o,u) p tau_Lam(v,x).

    The comparison holds only up to an unknown constant, so the report is
    descriptive and carries the ratio LHS / RHS.  Distances use the sup norm
    measured from ``o``.
    """
    o, x, S_set, L_set, pairs = _sl_geometry(spec, o, x, S, Lam)
    if eps < 0:
        raise ValueError("eps must be >= 0")
    scale = max(abs(a - b) for a, b in zip(x, o))
    far = [(u, v) for u, v in pairs if max(abs(a - b) for a, b in zip(x, u)) >= eps * scale]
    inst = _desc(spec, o=o, x=x, S=_name(S), Lam=_name(Lam), p=p, eps=eps)
    se = 0.0
    if mode == "exact":
        t_l = tau_values_exact(spec, L_set, p, [(o, x)] + [(v, x) for _, v in far], method="auto")
        t_s = tau_values_exact(spec, S_set, p, [(o, u) for u, _ in far], method="auto")
        lhs = t_l[0]
        rhs = p * sum(a * b for a, b in zip(t_s, t_l[1:]))
    else:
        gS, gL = graph_of(spec, S_set), graph_of(spec, L_set)
        colsS = np.zeros((gS.n_vertices, max(len(far), 1)))
        colsL = np.zeros((gL.n_vertices, 1 + len(far)))
        colsL[gL.idx(o), 0] = 1.0
        for j, (u, v) in enumerate(far):
            colsS[gS.idx(u), j] = 1.0
            colsL[gL.idx(v), j + 1] = 1.0
        mS = cluster_moments(spec, S_set, o, colsS, p, n, seed, stream=("far", "S"))
        mL = cluster_moments(spec, L_set, x, colsL, p, n, seed, stream=("far", "Lam"))
        a, b = mS.mean[: len(far)], mL.mean
        lhs = float(b[0])
        rhs = p * float(a @ b[1:])
        ga = np.zeros(mS.cov.shape[0])
        ga[: len(far)] = p * b[1:]
        gb = np.r_[0.0, p * a]
        se = math.sqrt(max(ga @ mS.cov @ ga / mS.n + gb @ mL.cov @ gb / mL.n, 0.0))
    ratio = lhs / rhs if rhs > 0 else math.inf
    return CheckReport("far_reversed_sl", inst, float(lhs), float(rhs), float(lhs - rhs),
                       EXACT_TOL if mode == "exact" else _mc_tol(se), mode, stderr=se,
                       asserted=False, details={"ratio": float(ratio), "n_pairs": len(far)})


def _name(S) -> str:
    return S.describe() if isinstance(S, Region) else f"set[{len(_vset(S))}]"


def _rows_to_keys(mask: np.ndarray) -> np.ndarray:
    packed = np.packbits(mask, axis=1)
    return np.ascontiguousarray(packed).view(np.dtype((np.void, packed.shape[1]))).ravel()


_NESTED_CACHE: dict = {}


def _reversed_sl_counts(spec, o, x, S_set, L_set, pairs, cap):
    key = (spec, o, x, S_set, L_set)
    if key not in _NESTED_CACHE:
        nested_counts(spec, L_set, [(o, x, S_set)], cap)
    return _NESTED_CACHE[key]


def nested_counts(spec, Lam, tuples, cap: int = NESTED_OUTER_CAP):
    """p-free counts behind the nested enumeration, for several (o, x, S) on one Lambda.

    For each u of a boundary pair, keeps the arrays (cluster code, number of
    open edges, multiplicity) over outer configurations with o <-> u in S;
    the cluster C(u; Lam) is encoded as a vertex bitmask.  Results are cached
    per instance.
    """
    L_set = _vset(Lam)
    g = graph_of(spec, L_set)
    check_cap(g.n_edges, cap)
    V, E = g.n_vertices, g.n_edges
    if V > 62:
        raise CapExceeded("nested enumeration packs clusters into 62-bit masks")
    eu = np.ascontiguousarray(g.edges[:, 0])
    ev = np.ascontiguousarray(g.edges[:, 1])
    pow2 = (np.int64(1) << np.arange(V, dtype=np.int64))
    jobs = []
    for o, x, S in tuples:
        o, x, S_set, _, pairs = _sl_geometry(spec, o, x, S, L_set)
        in_S = g.vertex_mask(sorted(S_set))
        jobs.append({
            "key": (spec, o, x, S_set, L_set), "io": g.idx(o), "ix": g.idx(x),
            "x_in_S": x in S_set, "in_sub": in_S[eu] & in_S[ev],
            "us": {u: g.idx(u) for u in sorted({u for u, _ in pairs})},
            "lhs": np.zeros(E + 1), "ts": np.zeros(E + 1),
        })
        jobs[-1]["parts"] = {u: [] for u in jobs[-1]["us"]}
    in_subs = np.ascontiguousarray(np.stack([j["in_sub"] for j in jobs]))
    total = 1 << E
    for start in range(0, total, CHUNK):
        count = min(CHUNK, total - start)
        labels, subs, k = kernels.labels_multi_enumerated(eu, ev, V, in_subs, start, count)
        for jb, slab in zip(jobs, subs):
            io, ix = jb["io"], jb["ix"]
            jb["lhs"] += np.bincount(k[labels[:, io] == labels[:, ix]], minlength=E + 1)
            if jb["x_in_S"]:
                jb["ts"] += np.bincount(k[slab[:, io] == slab[:, ix]], minlength=E + 1)
            for u, iu in jb["us"].items():
                rows = np.nonzero(slab[:, io] == slab[:, iu])[0]
                if len(rows) == 0:
                    continue
                codes = (labels[rows] == labels[rows, iu][:, None]).astype(np.int64) @ pow2
                comb, cnt = np.unique(codes * (E + 1) + k[rows], return_counts=True)
                jb["parts"][u].append((comb, cnt))
    for jb in jobs:
        grouped = {}
        for u, chunks_u in jb["parts"].items():
            if not chunks_u:
                grouped[u] = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
                continue
            comb = np.concatenate([c for c, _ in chunks_u])
            cnt = np.concatenate([n for _, n in chunks_u])
            uq, inv = np.unique(comb, return_inverse=True)
            grouped[u] = (uq // (E + 1), uq % (E + 1), np.bincount(inv, weights=cnt))
        _NESTED_CACHE[jb["key"]] = (g, jb["lhs"], jb["ts"], grouped)


def reversed_sl_exact(spec: LatticeSpec, o, x, S, Lam, p: float, cap: int = NESTED_OUTER_CAP):
    """(tau_Lam(o,x), tau_S(o,x), per-pair terms) by nested enumeration.

    Each pair term is E[1{o <-> u in S} p tau_{Lam \\ C(u;Lam)}(v, x)]; the
    inner two-point function is computed exactly on the edges of Lam that
    avoid the cluster.
    """
    o, x, S_set, L_set, pairs = _sl_geometry(spec, o, x, S, Lam)
    g, lhs, ts, grouped = _reversed_sl_counts(spec, o, x, S_set, L_set, pairs, cap)
    E, V = g.n_edges, g.n_vertices
    weights = np.array([p**kk * (1 - p) ** (E - kk) for kk in range(E + 1)])
    bits = np.arange(V, dtype=np.int64)
    terms = []
    for u, v in pairs:
        codes, ks, cnt = grouped[u]
        mass = cnt * weights[ks]
        uniq, inv = np.unique(codes, return_inverse=True)
        per_code = np.bincount(inv, weights=mass, minlength=len(uniq))
        total = 0.0
        for code, m in zip(uniq, per_code):
            A = ((int(code) >> bits) & 1).astype(bool)
            poly = _inner_tau(g, A, v, x)
            if poly is not None:
                total += m * poly(p)
        terms.append(p * total)
    return float(lhs @ weights), float(ts @ weights), terms


_INNER_CACHE: dict = {}


def _inner_tau(g, A_mask, v, x):
    """Two-point polynomial of v, x on the edges of g avoiding A (None if v or x in A)."""
    iv, ix = g.idx(v), g.idx(x)
    if A_mask[iv] or A_mask[ix]:
        return None
    keep = ~(A_mask[g.edges[:, 0]] | A_mask[g.edges[:, 1]])
    key = (g.spec, g.vertices, keep.tobytes(), iv, ix)
    poly = _INNER_CACHE.get(key)
    if poly is None:
        poly = two_point_poly(g.edges[keep], g.n_vertices, iv, ix)
        _INNER_CACHE[key] = poly
    return poly


def check_reversed_sl(spec: LatticeSpec, o, x, S, Lam, p: float, mode: str = "exact",
                      n_outer: int = 20_000, n_inner: int = 1, seed: int = 0) -> CheckReport:
    """tau_Lam(o,x) >= tau_S(o,x) + sum_{u~v} E[1{o <-> u in S} p tau_{Lam \\ C(u;Lam)}(v,x)].

    Monte Carlo mode draws the outer configuration, fixes C(u; Lam) and
    estimates the inner two-point function from ``n_inner`` fresh independent
    configurations; the per-sample gap is unbiased.
    """
    inst = _desc(spec, o=tuple(o), x=tuple(x), S=_name(S), Lam=_name(Lam), p=p)
    if mode == "exact":
        lhs, ts, terms = reversed_sl_exact(spec, o, x, S, Lam, p)
        rhs = ts + sum(terms)
        return CheckReport("reversed_sl", inst, lhs, rhs, lhs - rhs, EXACT_TOL, "exact",
                           details={"tau_S": ts, "terms": terms})
    vals = reversed_sl_samples(spec, o, x, S, Lam, p, n_outer, n_inner, seed)
    m = Moments.from_values(vals)
    lhs, ts, extra = m.mean
    gap_vals = vals[:, 0] - vals[:, 1] - vals[:, 2]
    gap = float(gap_vals.mean())
    se = float(gap_vals.std() / math.sqrt(len(gap_vals)))
    return CheckReport("reversed_sl", inst, float(lhs), float(ts + extra), gap, _mc_tol(se), "mc",
                       stderr=se, details={"tau_S": float(ts), "sum": float(extra)})


def reversed_sl_samples(spec, o, x, S, Lam, p, n_outer, n_inner=1, seed=0) -> np.ndarray:
    """Per outer sample: [1{o<->x in Lam}, 1{o<->x in S}, sum of inner-sampled terms]."""
    o, x, S_set, L_set, pairs = _sl_geometry(spec, o, x, S, Lam)
    g = graph_of(spec, L_set)
    sub, parent = g.subgraph(sorted(S_set))
    indptr, nbr, eid = g.csr
    outer_key = derive_key(seed, "reversed", "outer")
    inner_key = derive_key(seed, "reversed", "inner")
    io, ix = g.idx(o), g.idx(x)
    so = sub.idx(o)
    sx = sub.idx(x) if x in S_set else -1
    out = np.zeros((n_outer, 3))
    eu, ev = np.ascontiguousarray(g.edges[:, 0]), np.ascontiguousarray(g.edges[:, 1])
    for start, count in chunks(n_outer):
        flags = kernels.open_from_keys(g.edge_keys, sample_keys(outer_key, start, count), float(p))
        labels = kernels.labels_from_open(eu, ev, g.n_vertices, flags)
        slab = sub_labels(g, flags, sub, parent)
        out[start:start + count, 0] = labels[:, io] == labels[:, ix]
        if sx >= 0:
            out[start:start + count, 1] = slab[:, so] == slab[:, sx]
        for b in range(count):
            total = 0.0
            ikeys = sample_keys(inner_key, (start + b) * len(pairs) * n_inner, len(pairs) * n_inner)
            for j, (u, v) in enumerate(pairs):
                if slab[b, so] != slab[b, sub.idx(u)]:
                    continue
                A = labels[b] == labels[b, g.idx(u)]
                iv = g.idx(v)
                if A[iv] or A[ix]:
                    continue
                keys = ikeys[j * n_inner:(j + 1) * n_inner]
                masks = kernels.cluster_masks(indptr, nbr, eid, g.edge_keys, keys, float(p), iv, A)
                total += p * masks[:, ix].mean()
            out[start + b, 2] = total
    return out


# --------------------------------------------------------------------------
# effective version


def _two_point_table(g, p, n, seed) -> np.ndarray:
    """Monte Carlo matrix of tau_Lam(a, b) over all vertex pairs."""
    key = derive_key(seed, "effective", "table")
    eu, ev = np.ascontiguousarray(g.edges[:, 0]), np.ascontiguousarray(g.edges[:, 1])
    T = np.zeros((g.n_vertices, g.n_vertices))
    for start, count in chunks(n):
        flags = kernels.open_from_keys(g.edge_keys, sample_keys(key, start, count), float(p))
        labels = kernels.labels_from_open(eu, ev, g.n_vertices, flags)
        for row in labels:
            T += row[:, None] == row[None, :]
    return T / n


def check_effective_reversed_sl(spec: LatticeSpec, o, x, S, Lam, p: float,
                                params: RegularityParams | None = None, n: int = 2000, seed: int = 0,
                                n_table: int = 2000) -> CheckReport:
    """Measured tau_Lam - tau_S against the X^K-restricted sums (constant c taken as 1).

    ``params`` defaults to K = 2, T = 20.  Reports the ratio LHS / RHS; the inequality holds only up to an
    unspecified constant, so the report is descriptive.
    """
    if params is None:
        params = RegularityParams(K=2, T=20.0)
    o, x, S_set, L_set, _ = _sl_geometry(spec, o, x, S, Lam)
    g = graph_of(spec, L_set)
    indptr, nbr, eid = g.csr
    okey = derive_key(seed, "effective", "outer")
    ikey = derive_key(seed, "effective", "inner")
    T = _two_point_table(g, p, n_table, seed)
    ix = g.idx(x)
    lhs = np.zeros(n)
    rhs1 = np.zeros(n)
    rhs2 = np.zeros(n)
    n_X = 0
    for i in range(n):
        flags = kernels.open_from_keys(g.edge_keys, sample_keys(okey, i, 1), float(p))[0]
        cfg = Configuration(g, flags, p)
        lhs[i] = float(connected(cfg, o, x, L_set)) - float(x in S_set and connected(cfg, o, x, S_set))
        cls = classify_pioneers(cfg, S_set, L_set, params)
        n_X += len(cls.X)
        for j, u in enumerate(cls.X):
            w = cls.triplets[u].w
            A_set = cluster_of(cfg, u, L_set)
            A = np.zeros(g.n_vertices, dtype=bool)
            for z in A_set:
                A[g.idx(z)] = True
            iw = g.idx(w)
            if not A[ix]:
                keys = sample_keys(ikey, i * g.n_vertices + j, 1)
                masks = kernels.cluster_masks(indptr, nbr, eid, g.edge_keys, keys, float(p), iw, A)
                rhs1[i] += masks[0, ix]
            err = float(T[iw, A] @ T[A, ix])
            rhs2[i] += T[iw, ix] - err
    L, R1, R2 = lhs.mean(), rhs1.mean(), rhs2.mean()
    ratio = L / R1 if R1 > 0 else math.inf
    se = float((lhs - rhs1).std() / math.sqrt(n))
    inst = _desc(spec, o=o, x=x, S=_name(S), Lam=_name(Lam), p=p, K=params.K, T=params.T)
    return CheckReport("effective_reversed_sl", inst, float(L), float(R1), float(L - R1), _mc_tol(se),
                       "mc", stderr=se, asserted=False,
                       details={"ratio": float(ratio), "rhs_error_variant": float(R2),
                                "ratio_error_variant": (L / R2 if R2 > 0 else math.inf),
                                "mean_X": n_X / n})


# --------------------------------------------------------------------------
# pioneers, derivative, monotonicity


def check_pioneer_sandwich(spec: LatticeSpec, S, p: float, mode: str = "exact", n: int = 100_000,
                           seed: int = 0) -> CheckReport:
    """phi / (deg p) <= E[P_S] <= phi / p, plus E[P_S] = sum_u tau_S(0,u) in exact mode."""
    origin = (0,) * spec.d
    S_set = _vset(S)
    if origin not in S_set:
        raise GeometryError("S must contain the origin")
    g = graph_of(spec, S_set)
    bd = inner_boundary(spec, S_set)
    inst = _desc(spec, S=_name(S), p=p)
    if mode == "exact":
        io = g.idx(origin)
        cols = np.array([g.idx(u) for u in bd], dtype=np.int64)
        counts = np.zeros(g.n_edges + 1)
        for _, k, labels in iter_enumeration(g, with_flags=False):
            hits = (labels[:, cols] == labels[:, [io]]).sum(axis=1)
            counts += np.bincount(k, weights=hits, minlength=g.n_edges + 1)
        EP = EdgePoly(counts)(p)
        via_tau = float(sum(tau_values_exact(spec, S_set, p, [(origin, u) for u in bd])))
        phi = phi_exact_value(spec, S_set, p)
        eq_gap = -abs(EP - via_tau)
        if p == 0:
            gap = eq_gap
        else:
            gap = min(EP - phi / (spec.degree * p), phi / p - EP, eq_gap)
        return CheckReport("pioneer_sandwich", inst, EP, phi, gap, 1e-10, "exact",
                           details={"E_pioneers": EP, "phi": phi, "sum_tau": via_tau})
    w = np.zeros((g.n_vertices, 2))
    for u in bd:
        w[g.idx(u), 0] = 1.0
    for u, c in exit_multiplicity(spec, S_set).items():
        w[g.idx(u), 1] = c * p
    m = cluster_moments(spec, S_set, origin, w, p, n, seed)
    EP, phi = m.mean
    if p == 0:
        raise ValueError("Monte Carlo sandwich needs p > 0")
    lo_vec = np.array([1.0, -1.0 / (spec.degree * p)])
    hi_vec = np.array([-1.0, 1.0 / p])
    g_lo, g_hi = float(lo_vec @ m.mean), float(hi_vec @ m.mean)
    if g_lo <= g_hi:
        gap, vec = g_lo, lo_vec
    else:
        gap, vec = g_hi, hi_vec
    se = math.sqrt(max(vec @ m.cov @ vec, 0.0) / m.n)
    return CheckReport("pioneer_sandwich", inst, float(EP), float(phi), gap, _mc_tol(se), "mc",
                       stderr=se, details={"E_pioneers": float(EP), "phi": float(phi)})


def derivative_sides(spec: LatticeSpec, n_radius: int, p: float, cap: int = 25) -> tuple:
    """(d theta_n / dp, (p(1-p))^-1 E[phi_p(S_n) 1{0 in S_n}]) exactly."""
    if not 0 < p < 1:
        raise ValueError("the derivative identity needs 0 < p < 1")
    lhs = theta_poly(spec, n_radius, cap).derivative(p)
    box = Region.box(n_radius, d=spec.d)
    g = graph_of(spec, box)
    bd = np.zeros(g.n_vertices, dtype=bool)
    for u in inner_boundary(spec, box):
        bd[g.idx(u)] = True
    mask = ~(bd[g.edges[:, 0]] & bd[g.edges[:, 1]])
    E = int(mask.sum())
    io = g.idx((0,) * spec.d)
    bcols = np.nonzero(bd)[0]
    acc: dict = {}
    for _, k, labels in iter_enumeration(g, cap, with_flags=False, edge_mask=mask):
        # S_n: vertices whose cluster avoids the boundary
        touched = np.zeros_like(labels, dtype=bool)
        for c in bcols:
            touched |= labels == labels[:, [c]]
        Sn = ~touched
        rows = np.nonzero(Sn[:, io])[0]
        if len(rows) == 0:
            continue
        keys = _rows_to_keys(Sn[rows])
        uniq, inv = np.unique(keys, return_inverse=True)
        for q, key in enumerate(uniq):
            sel = rows[inv == q]
            kk = key.tobytes()
            if kk not in acc:
                acc[kk] = [Sn[sel[0]].copy(), np.zeros(E + 1)]
            acc[kk][1] += np.bincount(k[sel], minlength=E + 1)
    weights = np.array([p**j * (1 - p) ** (E - j) for j in range(E + 1)])
    total = 0.0
    for Sn_mask, counts in acc.values():
        verts = [g.vertices[i] for i in np.nonzero(Sn_mask)[0]]
        phi = phi_exact_value(spec, Region.explicit(verts, d=spec.d), p)
        total += float(counts @ weights) * phi
    return lhs, total / (p * (1 - p))


def check_derivative_identity(spec: LatticeSpec, n_radius: int, p: float) -> CheckReport:
    lhs, rhs = derivative_sides(spec, n_radius, p)
    return CheckReport("derivative_identity", _desc(spec, n=n_radius, p=p), lhs, rhs,
                       -abs(lhs - rhs), 1e-9, "exact")


def check_partial_monotonicity(spec: LatticeSpec, S, Lam_list, p: float, n: int = 20_000,
                               seed: int = 0) -> list:
    """Ratios phi(Lam) / phi(S) with delta-method errors (common random numbers); descriptive."""
    origin = (0,) * spec.d
    S_set = _vset(S)

    def phi_samples(R):
        gR = graph_of(spec, R)
        w = np.zeros(gR.n_vertices)
        for u, c in exit_multiplicity(spec, R).items():
            w[gR.idx(u)] = c * p
        return cluster_values(spec, R, origin, w, p, n, seed)[:, 0]

    base = phi_samples(S_set)
    out = []
    for Lam in Lam_list:
        L_set = _vset(Lam)
        if not S_set <= L_set:
            raise GeometryError("S must be a subset of every Lambda")
        vals = phi_samples(L_set)
        m = Moments.from_values(np.stack([vals, base], axis=1))
        a, b = m.mean
        if b > 0:
            r = a / b
            grad = np.array([1 / b, -a / b**2])
            se = math.sqrt(max(grad @ m.cov @ grad, 0.0) / m.n)
        else:
            r, se = math.nan, math.nan
        out.append(CheckReport("partial_monotonicity", _desc(spec, S=_name(S), Lam=_name(Lam), p=p),
                               float(a), float(b), 0.0, 0.0, "mc", stderr=0.0, asserted=False,
                               details={"ratio": float(r), "ratio_stderr": float(se),
                                        "phi_Lam_stderr": float(m.stderr[0]),
                                        "phi_S_stderr": float(m.stderr[1])}))
    return out


# --------------------------------------------------------------------------
# exponents


@dataclass
class ExponentFit:
    exponent: float
    stderr: float
    intercept: float
    residuals: list
    poor_fit: bool


def fit_exponent(scales, values, stderrs=None) -> ExponentFit:
    """Least squares of log value on log scale (weighted when standard errors are given).

    ``poor_fit`` flags a reduced chi-square above 4 (weighted) or a largest
    absolute log residual above 0.05 (unweighted).
    """
    x = np.log(np.asarray(scales, dtype=float))
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise ValueError("need at least three points")
    if np.any(v <= 0):
        raise ValueError("values must be positive")
    y = np.log(v)
    weighted = stderrs is not None and np.all(np.asarray(stderrs, dtype=float) > 0)
    w = (v / np.asarray(stderrs, dtype=float)) ** 2 if weighted else np.ones_like(y)
    X = np.stack([np.ones_like(x), x], axis=1)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    resid = y - X @ beta
    dof = max(len(y) - 2, 1)
    if weighted:
        chi2 = float((resid**2 * w).sum()) / dof
        poor = chi2 > 4
    else:
        cov = cov * float(resid @ resid) / dof
        poor = bool(np.abs(resid).max() > 0.05)
    return ExponentFit(float(beta[1]), float(math.sqrt(max(cov[1, 1], 0.0))), float(beta[0]),
                       [float(r) for r in resid], bool(poor))


# --------------------------------------------------------------------------
# fixture suite


def euv_tables(graph, o, x, S, Lam=None) -> tuple:
    """Batch E_uv over all configurations of ``graph``.

    Returns (pairs, literal, identity): boolean arrays of shape (2^E, pairs)
    for the four-clause definition and for the cluster form.
    """
    from .events import boundary_pairs

    E, V = graph.n_edges, graph.n_vertices
    check_cap(E, 20)
    S_set = _vset(S)
    L_set = _vset(Lam) if Lam is not None else frozenset(graph.vertices)
    eu = np.ascontiguousarray(graph.edges[:, 0])
    ev = np.ascontiguousarray(graph.edges[:, 1])
    in_S = graph.vertex_mask(sorted(S_set))
    in_L = graph.vertex_mask(sorted(L_set))
    flags = kernels.enumerate_open(E, 0, 1 << E)

    def labels(f):
        return kernels.labels_from_open(eu, ev, V, np.ascontiguousarray(f))

    fL = flags & (in_L[eu] & in_L[ev])
    lab_L = labels(fL)
    lab_S = labels(flags & (in_S[eu] & in_S[ev]))
    io, ix = graph.idx(o), graph.idx(x)
    pairs = [(u, v) for u, v in boundary_pairs(Configuration(graph, np.zeros(E, bool), 0.5), S_set, L_set)]
    lit = np.zeros((len(flags), len(pairs)), dtype=bool)
    ident = np.zeros_like(lit)
    for j, (u, v) in enumerate(pairs):
        iu, iv = graph.idx(u), graph.idx(v)
        e = graph.edge_id(u, v)
        c1 = lab_S[:, io] == lab_S[:, iu]
        c2 = flags[:, e]
        c3 = lab_L[:, iv] == lab_L[:, ix]
        cut = fL.copy()
        cut[:, e] = False
        lab_cut = labels(cut)
        c4 = lab_cut[:, io] != lab_cut[:, ix]
        lit[:, j] = c1 & c2 & c3 & c4
        # cluster form: remove C^[uv](u; Lam) and ask v <-> x off it
        C = lab_cut == lab_cut[:, [iu]]
        off = fL & ~(C[:, eu] | C[:, ev])
        lab_off = labels(off)
        reach = (~C[:, iv]) & (~C[:, ix]) & (lab_off[:, iv] == lab_off[:, ix])
        ident[:, j] = c1 & c2 & reach
    return pairs, lit, ident


def check_euv(fixture, o, x, S) -> list:
    """Incompatibility and the cluster identity of the E_uv events on every configuration."""
    _, lit, ident = euv_tables(fixture.graph, o, x, S, fixture.Lam)
    worst = int(lit.sum(axis=1).max()) if lit.size else 0
    mismatches = int((lit != ident).sum())
    inst = f"o={o} x={x} S={_name(S)}"
    return [CheckReport("euv_incompatibility", inst, float(worst), 1.0, 1.0 - worst, 0.0, "exact"),
            CheckReport("euv_identity", inst, float(mismatches), 0.0, -float(mismatches), 0.0, "exact")]


def exact_core_suite(fixtures=None, p_grid=None, euv_cap: int = 16, bk_cap: int = 16) -> list:
    """Every exact check over the shipped fixture matrix."""
    from .events import ConnectionEvent
    from .fixtures import FIXTURES, P_GRID

    fixtures = list(FIXTURES.values()) if fixtures is None else fixtures
    p_grid = P_GRID if p_grid is None else p_grid
    out = []
    for fx in fixtures:
        E = fx.graph.n_edges
        start = len(out)
        _prewarm(fx)
        for o, x, S in fx.tuples:
            for p in p_grid:
                out.append(check_simon_lieb(fx.spec, o, x, S, fx.Lam, p))
                out.append(check_reversed_sl(fx.spec, o, x, S, fx.Lam, p))
            if E <= euv_cap:
                out.extend(check_euv(fx, o, x, S))
        for evA, evB in fx.events:
            for p in p_grid:
                out.append(check_fkg(fx.graph, evA, evB, p))
                if E <= bk_cap and isinstance(evA, ConnectionEvent) and isinstance(evB, ConnectionEvent):
                    out.append(check_bk(fx.graph, evA, evB, p))
        for r in out[start:]:
            r.instance = f"[{fx.name}] {r.instance}"
    return out


def _prewarm(fx):
    """One enumeration of Lambda for every two-point pair the Simon-Lieb checks need."""
    from .exact import connection_polys

    g = fx.graph
    if g.n_edges > 25:
        return
    pairs = set()
    for o, x, S in fx.tuples:
        pairs.add((g.idx(o), g.idx(x)))
        for _, v in boundary_edge_pairs(fx.spec, _vset(S), _vset(fx.Lam)):
            pairs.add((g.idx(v), g.idx(x)))
    connection_polys(g, sorted(pairs))
    nested_counts(fx.spec, fx.Lam, fx.tuples)
