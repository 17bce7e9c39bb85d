"""Orbit datasets: concrete point sets on the hyperboloid.

Two backends produce orbits of the base point e_{n+1}:

* ``lorentz``: all integer vectors on the quadric x_1^2+...+x_n^2 =
  x_{n+1}^2 - 1 up to the norm cutoff (levels m = x_{n+1} are independent,
  and the representation counts per level come from fast sum-of-squares
  routines).  The base-point stabilizer in the integer orthogonal group is
  the signed permutations of the first n coordinates, of order 2^n n!.

* ``psl2z``: the modular-group orbit of i in the upper half-plane, found by
  breadth-first search over the generators z -> z+1, z -> z-1, z -> -1/z.
  Orbit points have the exact form z = (r + i)/q with integers r, q; the
  norm condition reads r^2 + 1 + q^2 <= Q^2 q and the three generators act
  on (r, q) by integer arithmetic, so the BFS is exact.  Reducing any orbit
  point toward the fundamental domain never increases its distance from i
  (horizontal shifts toward Re = 0 decrease it, the inversion fixes it), so
  searching only inside the ball reaches every in-ball point: pruning at the
  ball boundary loses nothing.  Points embed into the hyperboloid via
  X = ((r^2+1-q^2)/2q, r, (r^2+1+q^2)/2q), which satisfies <X,X> = -1
  identically.

Since both backends have nontrivial base-point stabilizers (order w), all
statistics downstream are defined on the orbit point set and normalized by
the effective covolume V_eff = w * vol(Gamma\\G), calibrated empirically from
the counting law count(Q) ~ vol(B_Q) / V_eff.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from math import isqrt
import numpy as np

from .density.kernel import DistanceSpectrum
from .density.volumes import vol_ball
from .errors import (
    InvariantViolationError,
    ParseError,
    PreconditionError,
    ResourceError,
    UsageError,
)

__all__ = [
    "Cone",
    "LevelCountProfile",
    "OrbitDataset",
    "OrbitPoint",
    "cone_filter",
    "distance_spectrum",
    "effective_covolume",
    "effective_covolume_from_profile",
    "enumerate_lorentz",
    "load_orbit",
    "lorentz_count_profile",
    "lorentz_distance_spectrum",
    "psl2z_orbit",
    "save_orbit",
]

DEFAULT_MAX_POINTS = 5_000_000


@dataclass(frozen=True)
class Cone:
    """Hyperbolic cone at the base point: axis direction and opening angle."""

    axis: np.ndarray
    theta: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        norm = float(np.linalg.norm(a))
        if abs(norm - 1.0) > 1e-12:
            raise InvariantViolationError("cone axis must be a unit vector")
        if not (0.0 < self.theta < math.pi):
            raise InvariantViolationError("cone opening angle must lie in (0, pi)")
        object.__setattr__(self, "axis", a)


@dataclass(frozen=True)
class OrbitPoint:
    """One orbit point: coordinates, cached distance, unit direction.

    ``dir`` is None for the base point, whose direction is undefined.
    """

    coords: tuple
    t: float
    dir: np.ndarray | None


@dataclass
class OrbitDataset:
    """A finite orbit sample {gamma e_{n+1} : |gamma| <= Q}, array-backed.

    ``coords`` rows are hyperboloid points; ``t`` and ``dirs`` cache the
    per-point distance and unit direction (the base-point row of ``dirs`` is
    zero and flagged by ``base_index``).  ``exact_ints`` (lorentz) or
    ``psl2z_rq`` carry exact integer payloads where available.  All fields
    except the calibration outputs (``v_eff``, ``calibration``) are treated
    as immutable after construction.
    """

    n: int
    Q: float
    coords: np.ndarray
    w: int
    source: str
    v_eff: float | None = None
    cone: Cone | None = None
    exact_ints: np.ndarray | None = None
    psl2z_rq: np.ndarray | None = None
    calibration: dict | None = None
    t: np.ndarray = field(init=False)
    dirs: np.ndarray = field(init=False)
    base_index: int | None = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.n + 1:
            raise UsageError("coords must be an (N, n+1) array")
        self.coords = c
        cosh_t = c[:, -1]
        self.t = np.arccosh(np.maximum(cosh_t, 1.0))
        u = c[:, :-1]
        norms = np.linalg.norm(u, axis=1)
        base = norms <= 1e-12
        idx = np.nonzero(base)[0]
        self.base_index = int(idx[0]) if idx.size else None
        safe = np.where(base, 1.0, norms)
        self.dirs = u / safe[:, None]
        self.dirs[base] = 0.0

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    def point(self, i: int) -> OrbitPoint:
        if self.exact_ints is not None:
            coords = tuple(int(v) for v in self.exact_ints[i])
        else:
            coords = tuple(float(v) for v in self.coords[i])
        d = None if i == self.base_index else self.dirs[i].copy()
        return OrbitPoint(coords, float(self.t[i]), d)

    def cosh_values(self) -> np.ndarray:
        return self.coords[:, -1]

    def count_within(self, Qp: float) -> int:
        """#points with norm at most Qp (2 cosh t <= Qp^2)."""
        return int(np.count_nonzero(self.cosh_values() <= Qp * Qp / 2.0 + 1e-9))

    def validate(self) -> None:
        """Check the dataset invariants (quadric residual, dedup, dirs)."""
        q = np.sum(self.coords[:, :-1] ** 2, axis=1) - self.coords[:, -1] ** 2
        scale = np.maximum(1.0, self.coords[:, -1] ** 2)
        worst = float(np.max(np.abs(q + 1.0) / scale)) if self.size else 0.0
        if worst > 1e-9:
            raise InvariantViolationError(
                f"point off the quadric (worst residual {worst:.3e})"
            )
        if self.size != np.unique(np.round(self.coords, 9), axis=0).shape[0]:
            raise InvariantViolationError("duplicate points in dataset")
        nb = np.arange(self.size) != (self.base_index if self.base_index is not None else -1)
        if self.size and not np.allclose(
            np.linalg.norm(self.dirs[nb], axis=1), 1.0, atol=1e-12
        ):
            raise InvariantViolationError("non-unit direction cached")


# --- sum-of-squares machinery --------------------------------------------------

def _isqrt_array(v: np.ndarray) -> np.ndarray:
    """Exact floor-sqrt for nonnegative int64 input (float sqrt + correction)."""
    s = np.sqrt(v.astype(np.float64)).astype(np.int64)
    s = np.where((s + 1) * (s + 1) <= v, s + 1, s)
    s = np.where(s * s > v, s - 1, s)
    return s


def _pairs_summing_to(N: int) -> np.ndarray:
    """All signed integer pairs (a, b) with a^2 + b^2 = N, as an (k,2) array."""
    if N < 0:
        return np.empty((0, 2), dtype=np.int64)
    if N == 0:
        return np.zeros((1, 2), dtype=np.int64)
    a = np.arange(isqrt(N) + 1, dtype=np.int64)
    rem = N - a * a
    s = _isqrt_array(rem)
    ok = s * s == rem
    a, s = a[ok], s[ok]
    out = []
    for sa in (1, -1):
        for sb in (1, -1):
            out.append(np.stack([sa * a, sb * s], axis=1))
    pairs = np.concatenate(out, axis=0)
    return np.unique(pairs, axis=0)


def _tuples_summing_to(n: int, N: int) -> np.ndarray:
    """All signed integer n-tuples with squares summing to N."""
    if n == 1:
        s = isqrt(max(N, 0))
        if N < 0 or s * s != N:
            return np.empty((0, 1), dtype=np.int64)
        vals = [[0]] if s == 0 else [[s], [-s]]
        return np.array(vals, dtype=np.int64)
    if n == 2:
        return _pairs_summing_to(N)
    blocks = []
    for x in range(-isqrt(max(N, 0)), isqrt(max(N, 0)) + 1):
        sub = _tuples_summing_to(n - 1, N - x * x)
        if sub.size:
            lead = np.full((sub.shape[0], 1), x, dtype=np.int64)
            blocks.append(np.concatenate([lead, sub], axis=1))
    if not blocks:
        return np.empty((0, n), dtype=np.int64)
    return np.concatenate(blocks, axis=0)


def _r2_table(nmax: int) -> np.ndarray:
    """r2[k] = #{(a,b) : a^2+b^2 = k} for 0 <= k <= nmax, by lattice scan."""
    table = np.zeros(nmax + 1, dtype=np.int64)
    for a in range(isqrt(nmax) + 1):
        wa = 1 if a == 0 else 2
        b = np.arange(isqrt(nmax - a * a) + 1, dtype=np.int64)
        wgt = np.full(b.size, 2 * wa, dtype=np.int64)
        wgt[0] = wa
        np.add.at(table, a * a + b * b, wgt)
    return table


@dataclass(frozen=True)
class LevelCountProfile:
    """Per-level representation counts for the integer quadric orbit.

    counts[m] is the number of points with x_{n+1} = m (m = 1 is the base
    point); cumulative sums give count(Q) without materializing points.
    """

    n: int
    counts: np.ndarray

    @property
    def m_max(self) -> int:
        return self.counts.size - 1

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)

    def count_within(self, Q: float) -> int:
        m = min(int(Q * Q / 2.0 + 1e-9), self.m_max)
        return int(self.counts[1 : m + 1].sum())


def lorentz_count_profile(n: int, m_max: int) -> LevelCountProfile:
    """Representation counts of m^2 - 1 as a sum of n squares, m = 1..m_max."""
    if n < 2 or m_max < 1:
        raise UsageError("need n >= 2 and m_max >= 1")
    counts = np.zeros(m_max + 1, dtype=np.int64)
    counts[1] = 1
    if n == 2:
        for m in range(2, m_max + 1):
            N = m * m - 1
            a = np.arange(isqrt(N) + 1, dtype=np.int64)
            rem = N - a * a
            s = _isqrt_array(rem)
            ok = s * s == rem
            wa = np.where(a[ok] == 0, 1, 2)
            wb = np.where(s[ok] == 0, 1, 2)
            counts[m] = int(np.sum(wa * wb))
    elif n == 3:
        r2 = _r2_table(m_max * m_max - 1)
        for m in range(2, m_max + 1):
            N = m * m - 1
            c = np.arange(isqrt(N) + 1, dtype=np.int64)
            w = np.full(c.size, 2, dtype=np.int64)
            w[0] = 1
            counts[m] = int(np.dot(w, r2[N - c * c]))
    else:
        for m in range(2, m_max + 1):
            counts[m] = _tuples_summing_to(n, m * m - 1).shape[0]
    return LevelCountProfile(n, counts)


def lorentz_distance_spectrum(n: int, m_max: int) -> DistanceSpectrum:
    """Distance spectrum of the integer orbit up to cosh t = m_max, exact."""
    prof = lorentz_count_profile(n, m_max)
    ms = np.nonzero(prof.counts[2:])[0] + 2
    ts = np.arccosh(ms.astype(float))
    return DistanceSpectrum(ts, prof.counts[ms], source=f"lorentz n={n}")


def _stabilizer_order(n: int) -> int:
    return 2 ** n * math.factorial(n)


def enumerate_lorentz(
    n: int, Q: float, max_points: int = DEFAULT_MAX_POINTS
) -> OrbitDataset:
    """All integer quadric points with 2 x_{n+1} <= Q^2, level by level.

    Fails fast when the estimated count (from the asymptotic representation
    density) exceeds max_points, and re-checks the cap while accumulating.
    """
    if n < 2:
        raise UsageError("dimension n must be >= 2")
    if Q * Q < 2.0:
        raise UsageError("need Q^2 >= 2")
    m_max = int(Q * Q / 2.0 + 1e-9)
    from .density.kernel import sphere_volume

    estimate = sphere_volume(n) / 2.0 * m_max ** (n - 1) / (n - 1) + m_max
    if estimate > 4 * max_points:
        raise ResourceError(
            f"estimated ~{estimate:.3g} points exceeds max_points={max_points}; "
            "raise the cap or lower Q"
        )
    rows = []
    total = 0
    for m in range(1, m_max + 1):
        sols = _tuples_summing_to(n, m * m - 1)
        if not sols.size:
            continue
        block = np.concatenate(
            [sols, np.full((sols.shape[0], 1), m, dtype=np.int64)], axis=1
        )
        total += block.shape[0]
        if total > max_points:
            raise ResourceError(
                f"enumeration passed max_points={max_points} at level {m}"
            )
        rows.append(block)
    ints = np.concatenate(rows, axis=0)
    # sort by level then lexicographic
    order = np.lexsort(tuple(ints[:, j] for j in range(n - 1, -1, -1)) + (ints[:, n],))
    ints = ints[order]
    return OrbitDataset(
        n=n,
        Q=Q,
        coords=ints.astype(float),
        w=_stabilizer_order(n),
        source="lorentz",
        exact_ints=ints,
    )


# --- modular-group orbit --------------------------------------------------------

def psl2z_orbit(Q: float, max_points: int = DEFAULT_MAX_POINTS) -> OrbitDataset:
    """BFS enumeration of the modular orbit of i with |gamma| <= Q.

    States are the exact integer pairs (r, q) with z = (r + i)/q; the three
    generators act by (r, q) -> (r +- q, q) and (r, q) -> (-r, (r^2+1)/q)
    (the division is exact on orbit states).  See the module docstring for
    why in-ball pruning is lossless.
    """
    if Q * Q < 2.0:
        raise UsageError("need Q^2 >= 2")
    Q2 = Q * Q
    cap_states = max_points

    def inside(r: int, q: int) -> bool:
        return r * r + 1 + q * q <= Q2 * q

    start = (0, 1)
    seen = {start}
    frontier = deque([start])
    while frontier:
        r, q = frontier.popleft()
        for s in ((r + q, q), (r - q, q), (-r, (r * r + 1) // q)):
            if s not in seen and inside(*s):
                seen.add(s)
                if len(seen) > cap_states:
                    raise ResourceError(
                        f"modular BFS exceeded max_points={max_points}"
                    )
                frontier.append(s)

    rq = np.array(sorted(seen), dtype=np.int64)
    r = rq[:, 0].astype(float)
    q = rq[:, 1].astype(float)
    coords = np.stack(
        [(r * r + 1.0 - q * q) / (2.0 * q), r, (r * r + 1.0 + q * q) / (2.0 * q)],
        axis=1,
    )
    return OrbitDataset(
        n=2, Q=Q, coords=coords, w=2, source="psl2z", psl2z_rq=rq
    )


# --- orbit file format -----------------------------------------------------------

_HEADER_RE = re.compile(
    r"^#hyperangle orbit v1 n=(\d+) q=(\S+) veff=(\S+) w=(\d+) source=(\S+)\s*$"
)


def save_orbit(ds: OrbitDataset, path: str) -> None:
    """Write the v1 orbit CSV: header comment line, then one point per row."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        veff = "na" if ds.v_eff is None else f"{ds.v_eff:.17g}"
        fh.write(
            f"#hyperangle orbit v1 n={ds.n} q={ds.Q:.17g} veff={veff} "
            f"w={ds.w} source={ds.source}\n"
        )
        if ds.exact_ints is not None:
            for row in ds.exact_ints:
                fh.write(",".join(str(int(v)) for v in row) + "\n")
        else:
            for row in ds.coords:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_orbit(path: str) -> OrbitDataset:
    """Read a v1 orbit CSV, validating the quadric residual per row."""
    header = None
    rows: list[list[float]] = []
    all_int = True
    int_re = re.compile(r"^-?\d+$")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if header is None:
                    m = _HEADER_RE.match(line)
                    if m:
                        header = m
                continue
            if header is None:
                raise ParseError(f"{path}:{lineno}: data before the v1 header")
            toks = line.split(",")
            n = int(header.group(1))
            if len(toks) != n + 1:
                raise ParseError(
                    f"{path}:{lineno}: expected {n + 1} columns, found {len(toks)}"
                )
            if all_int and not all(int_re.match(t) for t in toks):
                all_int = False
            try:
                rows.append([float(t) for t in toks])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if header is None:
        raise ParseError(f"{path}: missing '#hyperangle orbit v1' header")
    n = int(header.group(1))
    Qs = float(header.group(2))
    veff = None if header.group(3) == "na" else float(header.group(3))
    w = int(header.group(4))
    source = header.group(5)
    coords = np.array(rows, dtype=float).reshape(-1, n + 1)
    quadric = np.sum(coords[:, :-1] ** 2, axis=1) - coords[:, -1] ** 2
    bad = np.nonzero(np.abs(quadric + 1.0) > 1e-6 * np.maximum(1.0, coords[:, -1] ** 2))[0]
    if bad.size:
        raise InvariantViolationError(
            f"{path}: row {int(bad[0]) + 1} fails the quadric "
            f"(residual {quadric[bad[0]] + 1.0:.3e})"
        )
    exact = coords.astype(np.int64) if all_int else None
    ds = OrbitDataset(
        n=n, Q=Qs, coords=coords, w=w, source=source, v_eff=veff, exact_ints=exact
    )
    ds.validate()
    return ds


# --- filtering and calibration ----------------------------------------------------

def cone_filter(ds: OrbitDataset, cone: Cone) -> OrbitDataset:
    """Restrict to points whose direction lies within the cone (base excluded)."""
    if cone.axis.size != ds.n:
        raise UsageError("cone axis dimension does not match the dataset")
    cos_angles = ds.dirs @ cone.axis
    keep = np.arccos(np.clip(cos_angles, -1.0, 1.0)) < cone.theta
    if ds.base_index is not None:
        keep[ds.base_index] = False
    out = OrbitDataset(
        n=ds.n,
        Q=ds.Q,
        coords=ds.coords[keep],
        w=ds.w,
        source=ds.source,
        v_eff=ds.v_eff,
        cone=cone,
        exact_ints=None if ds.exact_ints is None else ds.exact_ints[keep],
        psl2z_rq=None if ds.psl2z_rq is None else ds.psl2z_rq[keep],
    )
    return out


def _fit_covolume(counts: np.ndarray, vols: np.ndarray) -> tuple[float, float]:
    """Least squares count ~ vol/V over the sample grid; returns (V, rel RMS)."""
    x = float(np.dot(counts, vols) / np.dot(vols, vols))
    V = 1.0 / x
    resid = math.sqrt(float(np.mean((counts - vols / V) ** 2 / counts ** 2)))
    return V, resid


def effective_covolume(
    ds: OrbitDataset,
    fit_range: tuple[float, float],
    samples: int = 24,
) -> float:
    """Calibrate V_eff from the counting law count(Q') ~ vol(B_Q')/V_eff.

    Fits on a geometric Q' grid inside fit_range, stores the result and the
    residual diagnostics on the dataset, and returns V_eff.
    """
    q_lo, q_hi = fit_range
    if not (math.sqrt(2.0) < q_lo < q_hi):
        raise UsageError("fit range must satisfy sqrt(2) < Q_lo < Q_hi")
    if ds.Q < q_hi * (1.0 - 1e-12):
        raise PreconditionError(f"dataset only covers Q={ds.Q!r} < Q_hi={q_hi!r}")
    if ds.count_within(q_lo) < 100:
        raise PreconditionError(
            f"only {ds.count_within(q_lo)} points inside Q_lo={q_lo!r}; need >= 100"
        )
    cosh_sorted = np.sort(ds.cosh_values())
    Qs = np.geomspace(q_lo, q_hi, samples)
    counts = np.searchsorted(cosh_sorted, Qs * Qs / 2.0 + 1e-9, side="right").astype(
        float
    )
    vols = np.array([vol_ball(u, ds.n) for u in Qs])
    V, resid = _fit_covolume(counts, vols)
    ds.v_eff = V
    ds.calibration = {
        "fit_range": (q_lo, q_hi),
        "samples": samples,
        "rel_rms_residual": resid,
    }
    return V


def effective_covolume_from_profile(
    profile: LevelCountProfile,
    fit_range: tuple[float, float],
    samples: int = 24,
) -> tuple[float, float]:
    """Covolume calibration from per-level counts alone; returns (V, residual)."""
    q_lo, q_hi = fit_range
    if not (math.sqrt(2.0) < q_lo < q_hi):
        raise UsageError("fit range must satisfy sqrt(2) < Q_lo < Q_hi")
    if profile.m_max < q_hi * q_hi / 2.0 - 1:
        raise PreconditionError("profile does not cover Q_hi")
    if profile.count_within(q_lo) < 100:
        raise PreconditionError("fewer than 100 points inside Q_lo")
    Qs = np.geomspace(q_lo, q_hi, samples)
    counts = np.array([profile.count_within(u) for u in Qs], dtype=float)
    vols = np.array([vol_ball(u, profile.n) for u in Qs])
    return _fit_covolume(counts, vols)


# --- distance spectrum -------------------------------------------------------------

def distance_spectrum(ds: OrbitDataset, t_max: float) -> DistanceSpectrum:
    """Distances of non-base points up to t_max, grouped with multiplicities.

    Integer-backed datasets group exactly by level; the modular backend
    groups by the exact rational cosh t = (r^2+1+q^2)/(2q); float datasets
    group within 1e-9 in t.
    """
    t_cap = math.acosh(ds.Q * ds.Q / 2.0) + 1e-12
    if t_max > t_cap:
        raise PreconditionError(
            f"t_max={t_max!r} exceeds the dataset's reach arccosh(Q^2/2)={t_cap!r}"
        )
    cosh_cap = math.cosh(t_max)
    nb = np.ones(ds.size, dtype=bool)
    if ds.base_index is not None:
        nb[ds.base_index] = False

    if ds.exact_ints is not None:
        levels = ds.exact_ints[nb, -1]
        levels = levels[levels <= int(cosh_cap + 1e-9)]
        uniq, mult = np.unique(levels, return_counts=True)
        return DistanceSpectrum(
            np.arccosh(uniq.astype(float)), mult, source=ds.source
        )
    if ds.psl2z_rq is not None:
        rq = ds.psl2z_rq[nb]
        keep = ds.coords[nb, -1] <= cosh_cap + 1e-12
        rq = rq[keep]
        groups: dict[tuple[int, int], int] = {}
        for r, q in rq:
            num = int(r) * int(r) + 1 + int(q) * int(q)
            den = 2 * int(q)
            g = math.gcd(num, den)
            key = (num // g, den // g)
            groups[key] = groups.get(key, 0) + 1
        entries = sorted(
            (math.acosh(num / den), cnt) for (num, den), cnt in groups.items()
        )
        return DistanceSpectrum.from_entries(entries, source=ds.source)

    ts = np.sort(ds.t[nb])
    ts = ts[ts <= t_max + 1e-12]
    entries: list[tuple[float, int]] = []
    for t in ts:
        if entries and t - entries[-1][0] <= 1e-9:
            entries[-1] = (entries[-1][0], entries[-1][1] + 1)
        else:
            entries.append((float(t), 1))
    return DistanceSpectrum.from_entries(entries, source=ds.source)
