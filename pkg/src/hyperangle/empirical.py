"""Empirical pair-correlation statistics over orbit datasets.

The central count is over ordered pairs of distinct orbit points whose
angular separation at the base point is strictly below 2 k xi / Q^2;
dividing by the number of points gives the empirical pair-correlation
function R_{2,Q}(xi).  Pairs involving the base point are excluded by
default (the angle there is a convention, and the count is O(1) against a
numerator of order N) and reported separately.

Counting is exact integer arithmetic throughout.  The fixed-angular-radius
neighbor searches are exact as well:

* n = 2: directions live on a circle; a sorted-angle array answers window
  queries by binary search.
* n = 3: a latitude-band / longitude-cell grid over the sphere shortlists
  candidates; an exact angle test finishes.
* n >= 4: a hierarchical cap tree (balls of directions with angular radius
  bounds) prunes by the triangle inequality; an exact test finishes.

A brute-force O(N^2) evaluation of the same predicate is kept alongside as
the oracle; indexed and brute counts must agree exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, UsageError
from .lattice import OrbitDataset

__all__ = [
    "DistancePairCounts",
    "G2Histogram",
    "NeighborIndex",
    "PairCorrCurve",
    "empirical_g2",
    "neighbor_index",
    "pair_correlation",
    "pair_correlation_brute",
    "pairs_by_distance",
    "save_curve",
]


@dataclass(frozen=True)
class PairCorrCurve:
    """Empirical R_{2,Q} along a xi grid, with the run's normalization."""

    xi_grid: np.ndarray
    r2q: np.ndarray
    Q: float
    k: float
    point_count: int
    mode: str = "full"
    base_pair_count: int = 0
    warning: str | None = None

    def __post_init__(self):
        xg = np.asarray(self.xi_grid, dtype=float)
        r = np.asarray(self.r2q, dtype=float)
        if xg.shape != r.shape or xg.ndim != 1:
            raise UsageError("xi grid and values must be aligned 1-d arrays")
        if np.any(np.diff(xg) <= 0) or np.any(xg <= 0):
            raise UsageError("xi grid must be positive and increasing")
        if np.any(np.diff(r) < 0) or np.any(r < 0):
            raise UsageError("R_{2,Q} must be nonnegative and nondecreasing")
        object.__setattr__(self, "xi_grid", xg)
        object.__setattr__(self, "r2q", r)


@dataclass(frozen=True)
class G2Histogram:
    """Bin-wise difference quotient of R_{2,Q}: the empirical density."""

    edges: np.ndarray
    values: np.ndarray
    Q: float
    k: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


@dataclass(frozen=True)
class DistancePairCounts:
    """Qualifying ordered pairs partitioned by the pair distance."""

    ts: np.ndarray
    counts: np.ndarray
    overflow: int
    Q: float
    xi: float
    k: float

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow


# --- neighbor indexes ---------------------------------------------------------


class _CircleIndex:
    """Sorted direction angles on S^1; window queries by binary search."""

    def __init__(self, dirs: np.ndarray, ids: np.ndarray):
        psi = np.arctan2(dirs[:, 1], dirs[:, 0])
        order = np.argsort(psi, kind="stable")
        self.psi = psi[order]
        self.ids = ids[order]
        self.ext = np.concatenate(
            [self.psi - 2.0 * math.pi, self.psi, self.psi + 2.0 * math.pi]
        )

    def window_bounds(self, centers: np.ndarray, radius: float):
        lo = np.searchsorted(self.ext, centers - radius, side="right")
        hi = np.searchsorted(self.ext, centers + radius, side="left")
        return lo, hi

    def query(self, direction: np.ndarray, radius: float) -> np.ndarray:
        if radius > math.pi:  # angular distance never exceeds pi
            return np.sort(self.ids)
        c = math.atan2(direction[1], direction[0])
        lo, hi = self.window_bounds(np.array([c]), radius)
        idx = np.arange(lo[0], hi[0]) % self.psi.size
        return np.sort(self.ids[idx])


class _SphereGridIndex:
    """Latitude bands x longitude cells on S^2, exact final angle test."""

    def __init__(self, dirs: np.ndarray, ids: np.ndarray, max_radius: float):
        self.dirs = dirs
        self.ids = ids
        self.max_radius = max_radius
        self.band_h = max(2.0 * max_radius, 0.05)
        self.nbands = max(1, int(math.ceil(math.pi / self.band_h)))
        self.band_h = math.pi / self.nbands
        polar = np.arccos(np.clip(dirs[:, 2], -1.0, 1.0))
        azim = np.arctan2(dirs[:, 1], dirs[:, 0])  # in (-pi, pi]
        self.cells: dict[tuple[int, int], np.ndarray] = {}
        self.ncols = np.empty(self.nbands, dtype=np.int64)
        band = np.minimum((polar / self.band_h).astype(np.int64), self.nbands - 1)
        for b in range(self.nbands):
            # keep longitude cells no narrower (in arc length) than a band
            width = max(math.sin(min((b + 1) * self.band_h, math.pi / 2.0)), 1e-9)
            self.ncols[b] = max(1, int(math.floor(2.0 * math.pi * width / self.band_h)))
        col = ((azim + math.pi) / (2.0 * math.pi) * self.ncols[band]).astype(np.int64)
        col = np.minimum(col, self.ncols[band] - 1)
        order = np.lexsort((col, band))
        for key, grp in _group_runs(band[order], col[order], order):
            self.cells[key] = grp

    def query(self, direction: np.ndarray, radius: float) -> np.ndarray:
        if radius > self.max_radius:
            raise PreconditionError(
                f"query radius {radius!r} exceeds the index design maximum "
                f"{self.max_radius!r}"
            )
        polar = math.acos(max(-1.0, min(1.0, direction[2])))
        azim = math.atan2(direction[1], direction[0])
        b_lo = max(0, int((polar - radius) / self.band_h))
        b_hi = min(self.nbands - 1, int((polar + radius) / self.band_h))
        keys: set[tuple[int, int]] = set()
        for b in range(b_lo, b_hi + 1):
            ncol = int(self.ncols[b])
            # narrowest latitude circle the cap touches within this band
            s_min = min(math.sin(b * self.band_h), math.sin((b + 1) * self.band_h))
            if b * self.band_h <= math.pi / 2.0 <= (b + 1) * self.band_h:
                s_min = min(s_min, 1.0)
            if s_min * math.pi <= radius:
                keys.update((b, c) for c in range(ncol))
                continue
            span = int(math.ceil(radius * ncol / (2.0 * math.pi * s_min))) + 1
            c0 = int((azim + math.pi) / (2.0 * math.pi) * ncol) % ncol
            keys.update((b, (c0 + dc) % ncol) for dc in range(-span, span + 1))
        cand = [self.cells[key] for key in keys if key in self.cells]
        if not cand:
            return np.empty(0, dtype=np.int64)
        idx = np.concatenate(cand)
        cosang = self.dirs[idx] @ direction
        keep = np.arccos(np.clip(cosang, -1.0, 1.0)) < radius
        return np.sort(self.ids[idx[keep]])


def _group_runs(band: np.ndarray, col: np.ndarray, order: np.ndarray):
    if band.size == 0:
        return
    start = 0
    for i in range(1, band.size + 1):
        if i == band.size or band[i] != band[start] or col[i] != col[start]:
            yield (int(band[start]), int(col[start])), order[start:i]
            start = i


class _CapTreeIndex:
    """Ball tree over unit directions for n >= 4, pruned by angular bounds."""

    _LEAF = 32

    def __init__(self, dirs: np.ndarray, ids: np.ndarray):
        self.dirs = dirs
        self.ids = ids
        self.root = self._build(np.arange(dirs.shape[0]))

    def _build(self, idx: np.ndarray):
        pts = self.dirs[idx]
        center = pts.mean(axis=0)
        norm = np.linalg.norm(center)
        center = pts[0] if norm < 1e-12 else center / norm
        cosmin = float(np.min(pts @ center))
        radius = math.acos(max(-1.0, min(1.0, cosmin)))
        if idx.size <= self._LEAF:
            return (center, radius, idx, None, None)
        spread = pts.max(axis=0) - pts.min(axis=0)
        axis = int(np.argmax(spread))
        half = np.argsort(pts[:, axis], kind="stable")
        mid = idx.size // 2
        left = self._build(idx[half[:mid]])
        right = self._build(idx[half[mid:]])
        return (center, radius, None, left, right)

    def query(self, direction: np.ndarray, radius: float) -> np.ndarray:
        out: list[np.ndarray] = []
        stack = [self.root]
        while stack:
            center, rad, leaf, left, right = stack.pop()
            d = math.acos(max(-1.0, min(1.0, float(center @ direction))))
            if d - rad >= radius:
                continue
            if leaf is not None:
                cosang = self.dirs[leaf] @ direction
                keep = np.arccos(np.clip(cosang, -1.0, 1.0)) < radius
                out.append(self.ids[leaf[keep]])
            else:
                stack.append(left)
                stack.append(right)
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(out))


@dataclass
class NeighborIndex:
    """Exact fixed-angular-radius retrieval over a dataset's directions.

    ``query(direction, radius)`` returns the dataset indices of all non-base
    points with angular distance strictly below ``radius``.
    """

    ds: OrbitDataset
    max_radius: float = math.pi
    on_radius_overflow: str = "rebuild"
    _impl: object = field(init=False, repr=False)
    _ids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nb = np.ones(self.ds.size, dtype=bool)
        if self.ds.base_index is not None:
            nb[self.ds.base_index] = False
        self._ids = np.nonzero(nb)[0].astype(np.int64)
        dirs = self.ds.dirs[self._ids]
        if self.ds.n == 2:
            self._impl = _CircleIndex(dirs, self._ids)
        elif self.ds.n == 3:
            self._impl = _SphereGridIndex(dirs, self._ids, self.max_radius)
        else:
            self._impl = _CapTreeIndex(dirs, self._ids)

    def query(self, direction, radius: float) -> np.ndarray:
        d = np.asarray(direction, dtype=float)
        if d.size != self.ds.n:
            raise UsageError("query direction has the wrong dimension")
        d = d / np.linalg.norm(d)
        if radius > self.max_radius and self.ds.n == 3:
            if self.on_radius_overflow == "rebuild":
                object.__setattr__(
                    self, "_impl",
                    _SphereGridIndex(self.ds.dirs[self._ids], self._ids, radius),
                )
                self.max_radius = radius
            else:
                raise PreconditionError(
                    f"radius {radius!r} exceeds index maximum {self.max_radius!r}"
                )
        return self._impl.query(d, radius)


def neighbor_index(ds: OrbitDataset, max_radius: float = math.pi) -> NeighborIndex:
    return NeighborIndex(ds, max_radius=max_radius)


# --- pair counting -------------------------------------------------------------


def _wrapped_angle(psi_a: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    d = np.abs(psi_a - psi_b)
    return np.minimum(d, 2.0 * math.pi - d)


def _ordered_pair_count_n2(circle: _CircleIndex, tau: float, threads: int = 1) -> int:
    """#ordered pairs (i != j) with wrapped angle difference < tau, exactly."""
    psi = circle.psi

    def count_chunk(span):
        a, b = span
        lo, hi = circle.window_bounds(psi[a:b], tau)
        # each window contains the source point itself; for thresholds below
        # the float resolution of psi the window can degenerate, so clamp
        return int(np.sum(np.maximum(hi - lo - 1, 0)))

    if threads <= 1 or psi.size < 4096:
        return count_chunk((0, psi.size))
    bounds = np.linspace(0, psi.size, threads + 1).astype(int)
    spans = list(zip(bounds[:-1], bounds[1:]))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(count_chunk, spans))


def _ordered_pair_count_general(
    ds: OrbitDataset, index: NeighborIndex, tau: float
) -> int:
    total = 0
    for i in index._ids:
        hits = index.query(ds.dirs[i], tau)
        total += hits.size - int(np.any(hits == i))
    return total


def _pair_count(ds, index, tau, threads):
    if ds.n == 2:
        return _ordered_pair_count_n2(index._impl, tau, threads)
    return _ordered_pair_count_general(ds, index, tau)


def _base_pair_count(ds: OrbitDataset, index: NeighborIndex, tau: float) -> int:
    """Ordered pairs with the base point as one endpoint, under the
    reference-direction convention for the base (reported, not counted)."""
    if ds.base_index is None:
        return 0
    ref = np.zeros(ds.n)
    ref[0] = 1.0
    hits = index.query(ref, tau)
    return 2 * int(hits.size)


def pair_correlation(
    ds: OrbitDataset,
    xi_grid,
    k: float,
    threads: int = 1,
    index: NeighborIndex | None = None,
) -> PairCorrCurve:
    """Empirical R_{2,Q} over a xi grid: ordered-pair counts / point count.

    The angle threshold for each xi is 2 k xi / Q^2, compared strictly.
    Base-point pairs are excluded and their (convention-dependent) count is
    reported on the curve.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if k <= 0:
        raise UsageError("normalization constant k must be positive")
    mode = "full" if ds.cone is None else f"cone(theta={ds.cone.theta:.6g})"
    if ds.size < 2:
        return PairCorrCurve(
            xi_grid, np.zeros_like(xi_grid), ds.Q, k, ds.size, mode,
            warning="fewer than 2 points; counts are vacuous",
        )
    idx = index if index is not None else neighbor_index(ds)
    counts = np.empty(xi_grid.size, dtype=np.int64)
    for j, xi in enumerate(xi_grid):
        tau = 2.0 * k * xi / (ds.Q * ds.Q)
        counts[j] = _pair_count(ds, idx, tau, threads)
    tau_max = 2.0 * k * float(xi_grid[-1]) / (ds.Q * ds.Q)
    return PairCorrCurve(
        xi_grid,
        counts.astype(float) / ds.size,
        ds.Q,
        k,
        ds.size,
        mode,
        base_pair_count=_base_pair_count(ds, idx, tau_max),
    )


def pair_correlation_brute(ds: OrbitDataset, xi_grid, k: float) -> PairCorrCurve:
    """O(N^2) oracle evaluating the same predicate as pair_correlation."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    nb = np.ones(ds.size, dtype=bool)
    if ds.base_index is not None:
        nb[ds.base_index] = False
    mode = "full" if ds.cone is None else f"cone(theta={ds.cone.theta:.6g})"
    if np.count_nonzero(nb) < 2:
        return PairCorrCurve(
            xi_grid, np.zeros_like(xi_grid), ds.Q, k, ds.size, mode,
            warning="fewer than 2 points; counts are vacuous",
        )
    taus = 2.0 * k * xi_grid / (ds.Q * ds.Q)
    counts = np.zeros(xi_grid.size, dtype=np.int64)
    if ds.n == 2:
        dirs = ds.dirs[nb]
        psi = np.arctan2(dirs[:, 1], dirs[:, 0])
        for a in range(0, psi.size, 1024):
            block = _wrapped_angle(psi[a : a + 1024, None], psi[None, :])
            np.fill_diagonal(block[:, a : a + 1024], np.inf)
            for j, tau in enumerate(taus):
                counts[j] += int(np.count_nonzero(block < tau))
    else:
        dirs = ds.dirs[nb]
        for a in range(0, dirs.shape[0], 1024):
            cosang = np.clip(dirs[a : a + 1024] @ dirs.T, -1.0, 1.0)
            ang = np.arccos(cosang)
            np.fill_diagonal(ang[:, a : a + 1024], np.inf)
            for j, tau in enumerate(taus):
                counts[j] += int(np.count_nonzero(ang < tau))
    return PairCorrCurve(
        xi_grid, counts.astype(float) / ds.size, ds.Q, k, ds.size, mode
    )


def empirical_g2(ds: OrbitDataset, xi_bins, k: float, threads: int = 1) -> G2Histogram:
    """Empirical density: difference quotients of R_{2,Q} over the bins."""
    edges = np.asarray(xi_bins, dtype=float)
    if edges.size < 2:
        raise UsageError("need at least two bin edges")
    curve = pair_correlation(ds, edges, k, threads=threads)
    vals = np.diff(curve.r2q) / np.diff(edges)
    return G2Histogram(edges, vals, ds.Q, k)


def save_curve(
    curve: PairCorrCurve, path: str, histogram: G2Histogram | None = None
) -> None:
    """Write a curve (optionally with the density histogram) as CSV.

    Header row is ``xi,r2q`` or ``xi,r2q,g2_emp``; metadata rides in ``#``
    comment lines; values carry 17 significant digits.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# Q={curve.Q:.17g}\n# k={curve.k:.17g}\n")
        fh.write(f"# point_count={curve.point_count}\n# mode={curve.mode}\n")
        if curve.warning:
            fh.write(f"# warning={curve.warning}\n")
        if histogram is None:
            fh.write("xi,r2q\n")
            for x, r in zip(curve.xi_grid, curve.r2q):
                fh.write(f"{x:.17g},{r:.17g}\n")
            return
        fh.write("xi,r2q,g2_emp\n")
        for j, (x, r) in enumerate(zip(curve.xi_grid, curve.r2q)):
            g = histogram.values[min(j, histogram.values.size - 1)]
            fh.write(f"{x:.17g},{r:.17g},{g:.17g}\n")


# --- per-distance decomposition ---------------------------------------------------


def _pair_indices_n2(circle: _CircleIndex, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """All ordered qualifying pairs as (source, neighbor) dataset indices."""
    psi, ids, ext = circle.psi, circle.ids, circle.ext
    lo, hi = circle.window_bounds(psi, tau)
    widths = np.maximum(hi - lo, 0)
    total = int(widths.sum())
    src = np.repeat(np.arange(psi.size), widths)
    flat = np.arange(total) - np.repeat(np.cumsum(widths) - widths, widths) + lo[src]
    nbr = flat % psi.size
    keep = nbr != src
    return ids[src[keep]], ids[nbr[keep]]


def pairs_by_distance(
    ds: OrbitDataset, xi: float, k: float, t_list
) -> DistancePairCounts:
    """Partition qualifying ordered pairs by the pair distance d(p, p').

    Pair distances always belong to the lattice distance spectrum; entries
    are matched against t_list (exactly for integer-backed data, within 1e-9
    otherwise) and anything else lands in the overflow bucket.
    """
    t_list = np.asarray(t_list, dtype=float)
    if np.any(np.diff(t_list) <= 0):
        raise UsageError("t_list must be strictly increasing")
    tau = 2.0 * k * xi / (ds.Q * ds.Q)
    idx = neighbor_index(ds)
    if ds.n == 2:
        src, nbr = _pair_indices_n2(idx._impl, tau)
    else:
        s_list, n_list = [], []
        for i in idx._ids:
            hits = idx.query(ds.dirs[i], tau)
            hits = hits[hits != i]
            s_list.append(np.full(hits.size, i, dtype=np.int64))
            n_list.append(hits)
        src = np.concatenate(s_list) if s_list else np.empty(0, dtype=np.int64)
        nbr = np.concatenate(n_list) if n_list else np.empty(0, dtype=np.int64)

    cosh_d = _pair_cosh_distances(ds, src, nbr)
    counts = np.zeros(t_list.size, dtype=np.int64)
    cosh_targets = np.cosh(t_list)
    matched = np.zeros(cosh_d.size, dtype=bool)
    if ds.exact_ints is not None:
        # integer levels: exact equality after rounding
        levels = np.rint(cosh_d).astype(np.int64)
        for j, target in enumerate(np.rint(cosh_targets).astype(np.int64)):
            hit = ~matched & (levels == target)
            counts[j] = int(np.count_nonzero(hit))
            matched |= hit
    else:
        # 1e-9 tolerance in t maps to sinh(t) * 1e-9 on cosh t, plus a few
        # ulps for the cosh/arccosh round trip
        atol = 1e-9 * np.maximum(np.sinh(t_list), 1.0) + 16 * np.spacing(cosh_targets)
        for j in range(t_list.size):
            hit = ~matched & (np.abs(cosh_d - cosh_targets[j]) <= atol[j])
            counts[j] = int(np.count_nonzero(hit))
            matched |= hit
    overflow = int(np.count_nonzero(~matched))
    return DistancePairCounts(t_list, counts, overflow, ds.Q, xi, k)


def _pair_cosh_distances(ds: OrbitDataset, src: np.ndarray, nbr: np.ndarray) -> np.ndarray:
    """cosh d(p, p') per pair; exact integer arithmetic where available."""
    if ds.exact_ints is not None:
        a = ds.exact_ints[src].astype(object)
        b = ds.exact_ints[nbr].astype(object)
        vals = a[:, -1] * b[:, -1] - np.sum(a[:, :-1] * b[:, :-1], axis=1)
        return vals.astype(float)
    if ds.psl2z_rq is not None and src.size:
        # cosh d = ((r^2+1) q'^2 + (r'^2+1) q^2 - 2 q q' r r') / (2 q q'),
        # evaluated in exact big-int arithmetic (the float route loses ~1e-6
        # here because the products reach 1e21 before cancelling)
        r1 = ds.psl2z_rq[src, 0].tolist()
        q1 = ds.psl2z_rq[src, 1].tolist()
        r2 = ds.psl2z_rq[nbr, 0].tolist()
        q2 = ds.psl2z_rq[nbr, 1].tolist()
        out = np.empty(src.size, dtype=float)
        for i, (ra, qa, rb, qb) in enumerate(zip(r1, q1, r2, q2)):
            num = (ra * ra + 1) * qb * qb + (rb * rb + 1) * qa * qa - 2 * qa * qb * ra * rb
            out[i] = num / (2 * qa * qb)
        return out
    a = ds.coords[src]
    b = ds.coords[nbr]
    return a[:, -1] * b[:, -1] - np.sum(a[:, :-1] * b[:, :-1], axis=1)
