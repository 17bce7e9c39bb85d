import math
import os

import numpy as np
import pytest

from hyperangle import density as dens
from hyperangle import geometry as geo
from hyperangle import lattice
from hyperangle.errors import (
    InvariantViolationError,
    ParseError,
    PreconditionError,
    ResourceError,
)

from conftest import synthetic_dataset


# --- integer quadric enumeration --------------------------------------------------


def test_enumerate_lorentz_n2_small():
    ds = lattice.enumerate_lorentz(2, math.sqrt(6.0))  # levels x3 <= 3
    pts = {tuple(p) for p in ds.exact_ints.tolist()}
    assert pts == {(0, 0, 1), (2, 2, 3), (2, -2, 3), (-2, 2, 3), (-2, -2, 3)}
    assert ds.w == 8
    ds.validate()


def test_enumerate_lorentz_n3_small():
    ds = lattice.enumerate_lorentz(3, 2.0)  # levels x4 <= 2
    assert ds.size == 9
    assert ds.w == 48
    levels = ds.exact_ints[:, -1]
    assert list(np.unique(levels)) == [1, 2]
    ds.validate()


def test_enumerate_lorentz_quadric_exact():
    ds = lattice.enumerate_lorentz(2, 6.0)
    x = ds.exact_ints
    lhs = x[:, 0] ** 2 + x[:, 1] ** 2
    rhs = x[:, 2] ** 2 - 1
    assert np.array_equal(lhs, rhs)


def test_enumerate_lorentz_brute_force_oracle():
    # independent nested-loop enumeration over a box
    Q = 5.0
    m_max = int(Q * Q / 2)
    expected = set()
    for x3 in range(1, m_max + 1):
        for x1 in range(-x3, x3 + 1):
            for x2 in range(-x3, x3 + 1):
                if x1 * x1 + x2 * x2 == x3 * x3 - 1:
                    expected.add((x1, x2, x3))
    ds = lattice.enumerate_lorentz(2, Q)
    assert {tuple(p) for p in ds.exact_ints.tolist()} == expected


def test_enumerate_lorentz_sign_permutation_symmetry():
    ds = lattice.enumerate_lorentz(3, 4.0)
    pts = {tuple(p) for p in ds.exact_ints.tolist()}
    for sx in (1, -1):
        for sy in (1, -1):
            mapped = {(sy * b, sx * a, c, m) for a, b, c, m in pts}
            assert mapped == pts


def test_enumerate_lorentz_resource_cap():
    with pytest.raises(ResourceError):
        lattice.enumerate_lorentz(3, 60.0, max_points=1000)


def test_level_counts_match_enumeration():
    for n in (2, 3, 4):
        ds = lattice.enumerate_lorentz(n, 4.5)
        prof = lattice.lorentz_count_profile(n, int(4.5 ** 2 / 2))
        levels, counts = np.unique(ds.exact_ints[:, -1], return_counts=True)
        for m, c in zip(levels, counts):
            assert prof.counts[m] == c
        assert prof.count_within(4.5) == ds.size


def test_lorentz_distance_spectrum_matches_counts():
    spec = lattice.lorentz_distance_spectrum(3, 10)
    prof = lattice.lorentz_count_profile(3, 10)
    for t, m in spec:
        level = round(math.cosh(t))
        assert prof.counts[level] == m


# --- modular orbit ------------------------------------------------------------------


def test_psl2z_contains_base_and_neighbors():
    ds = lattice.psl2z_orbit(5.0)
    pts = {tuple(p) for p in ds.psl2z_rq.tolist()}
    assert (0, 1) in pts          # z = i
    assert (1, 1) in pts          # z = 1 + i -> (1/2, 1, 3/2)
    i11 = [i for i, p in enumerate(ds.psl2z_rq.tolist()) if tuple(p) == (1, 1)][0]
    assert np.allclose(ds.coords[i11], [0.5, 1.0, 1.5])
    assert geo.minkowski_inner(ds.coords[i11], ds.coords[i11]) == pytest.approx(-1.0)
    assert ds.w == 2


def _psl2z_by_coprime_pairs(Q):
    """Independent enumeration: orbit points indexed by canonical (c, d) rows
    of modular matrices plus the translation offset."""
    Q2 = Q * Q
    pts = set()
    cd_max = int(math.isqrt(int(Q2)))
    for c in range(1, cd_max + 1):
        for d in range(0, cd_max + 1):
            if math.gcd(c, d) != 1 or c * c + d * d > Q2:
                continue
            # one solution (a0, b0) of a d - b c = 1, then a = a0 + t c etc.
            g, a0, b0 = _ext_gcd(d, c)
            b0 = -b0
            # z = ((ac + bd) + i) / (c^2 + d^2); a^2+b^2+c^2+d^2 <= Q^2
            q = c * c + d * d
            t = 0
            while True:  # scan both directions of the t-line
                hit = False
                for tt in (t, -t - 1):
                    a, b = a0 + tt * c, b0 + tt * d
                    if a * a + b * b + q <= Q2:
                        pts.add((a * c + b * d, q))
                        hit = True
                if not hit and t > 2 * int(Q):
                    break
                t += 1
    pts.add((0, 1))
    return pts


def _ext_gcd(x, y):
    if y == 0:
        return x, 1, 0
    g, u, v = _ext_gcd(y, x % y)
    return g, v, u - (x // y) * v


def test_psl2z_matches_coprime_pair_oracle():
    Q = 12.0
    ds = lattice.psl2z_orbit(Q)
    bfs = {tuple(p) for p in ds.psl2z_rq.tolist()}
    oracle = _psl2z_by_coprime_pairs(Q)
    assert bfs == oracle


def test_psl2z_embedding_is_isometric(rng):
    ds = lattice.psl2z_orbit(20.0)
    rq = ds.psl2z_rq
    for _ in range(100):
        i, j = rng.integers(0, ds.size, size=2)
        ri, qi = rq[i]
        rj, qj = rq[j]
        zi = complex(ri / qi, 1.0 / qi)
        zj = complex(rj / qj, 1.0 / qj)
        cosh_plane = 1 + abs(zi - zj) ** 2 / (2 * zi.imag * zj.imag)
        d_plane = math.acosh(max(1.0, cosh_plane))
        d_model = geo.hyperbolic_distance(ds.coords[i], ds.coords[j])
        assert d_model == pytest.approx(d_plane, abs=1e-9)


def test_psl2z_embedding_preserves_base_angles(rng):
    # the hyperbolic angle at i between geodesics to z and w equals the model
    # angle at the base point; in the half-plane the direction of the
    # geodesic from i to z is computed via the Cayley map to the disk
    ds = lattice.psl2z_orbit(15.0)
    rq = ds.psl2z_rq

    def direction_at_i(z):
        w = (z - 1j) / (z + 1j)  # Cayley: i -> 0; geodesics through i -> rays
        return np.array([w.real, w.imag]) / abs(w)

    pairs = 0
    while pairs < 100:
        i, j = rng.integers(0, ds.size, size=2)
        if ds.base_index in (i, j) or i == j:
            continue
        zi = complex(rq[i][0] / rq[i][1], 1.0 / rq[i][1])
        zj = complex(rq[j][0] / rq[j][1], 1.0 / rq[j][1])
        ui, uj = direction_at_i(zi), direction_at_i(zj)
        cos_plane = min(1.0, max(-1.0, float(np.dot(ui, uj))))
        plane_angle = math.acos(cos_plane)
        model_angle = float(geo.angle_at_base(ds.coords[i], ds.coords[j]))
        assert math.cos(model_angle) == pytest.approx(cos_plane, abs=1e-10)
        if abs(cos_plane) < 1.0 - 1e-6:  # arccos is well conditioned here
            assert model_angle == pytest.approx(plane_angle, abs=1e-8)
        pairs += 1


def test_psl2z_count_follows_counting_law(psl2z_q500):
    v = psl2z_q500.count_within(500.0) * (2 * math.pi / 3) / dens.vol_ball(500.0, 2)
    assert abs(v - 1) < 0.02


# --- calibration --------------------------------------------------------------------


def test_effective_covolume_psl2z(psl2z_q500):
    V = lattice.effective_covolume(psl2z_q500, (100.0, 500.0))
    assert V == pytest.approx(2 * math.pi / 3, rel=0.02)
    assert psl2z_q500.v_eff == V
    assert psl2z_q500.calibration["rel_rms_residual"] < 0.02


def test_effective_covolume_planted_density(rng):
    # draw points with count(Q') = vol(Q')/V exactly in expectation:
    # for n = 2 the ball volume is linear in cosh t, so cosh t is uniform
    V = 1.7
    Qmax = 200.0
    n_points = int(dens.vol_ball(Qmax, 2) / V)
    cosh = rng.uniform(1.0, Qmax ** 2 / 2.0, size=n_points)
    t = np.arccosh(cosh)
    phi = rng.uniform(-np.pi, np.pi, size=n_points)
    coords = np.stack(
        [np.sinh(t) * np.cos(phi), np.sinh(t) * np.sin(phi), cosh], axis=1
    )
    ds = lattice.OrbitDataset(n=2, Q=Qmax, coords=coords, w=1, source="planted")
    fitted = lattice.effective_covolume(ds, (40.0, 200.0))
    assert fitted == pytest.approx(V, rel=0.01)


def test_effective_covolume_preconditions():
    tiny = lattice.enumerate_lorentz(2, 2.0)
    with pytest.raises(PreconditionError):
        lattice.effective_covolume(tiny, (1.9, 2.0))


def test_effective_covolume_from_profile(lorentz3_profile):
    V, resid = lattice.effective_covolume_from_profile(lorentz3_profile, (30.0, 100.0))
    assert resid < 0.03
    assert 1.0 < V < 10.0


# --- distance spectrum ---------------------------------------------------------------


def test_distance_spectrum_integer_backend():
    ds = lattice.enumerate_lorentz(2, math.sqrt(6.0))
    spec = lattice.distance_spectrum(ds, math.acosh(3.0))
    assert list(spec) == [(math.acosh(3.0), 4)]


def test_distance_spectrum_excludes_base_and_partitions(psl2z_q150):
    t_cap = math.acosh(150.0 ** 2 / 2.0)
    spec = lattice.distance_spectrum(psl2z_q150, t_cap)
    assert spec.ts[0] > 1e-9
    assert int(spec.multiplicities.sum()) == psl2z_q150.size - 1


def test_distance_spectrum_respects_t_max():
    ds = lattice.psl2z_orbit(30.0)
    spec = lattice.distance_spectrum(ds, 2.0)
    assert np.all(spec.ts <= 2.0 + 1e-12)
    with pytest.raises(PreconditionError):
        lattice.distance_spectrum(ds, 100.0)


def test_distance_spectrum_float_grouping(rng):
    ds = synthetic_dataset(2, 50, rng)
    spec = lattice.distance_spectrum(ds, math.acosh(ds.Q ** 2 / 2.0))
    assert int(spec.multiplicities.sum()) == 50


# --- cones ---------------------------------------------------------------------------


def test_cone_filter_wide_cone_keeps_all_non_base():
    ds = lattice.psl2z_orbit(20.0)
    cone = lattice.Cone(np.array([1.0, 0.0]), math.pi - 1e-9)
    out = lattice.cone_filter(ds, cone)
    assert out.size == ds.size - 1
    assert out.cone is cone


def test_cone_filter_halfplane_matches_brute_force():
    ds = lattice.enumerate_lorentz(2, 6.0)
    cone = lattice.Cone(np.array([1.0, 0.0]), math.pi / 2)
    out = lattice.cone_filter(ds, cone)
    expected = {
        tuple(p) for p in ds.exact_ints.tolist() if p[2] > 1 and p[0] > 0
    }
    assert {tuple(p) for p in out.exact_ints.tolist()} == expected


def test_cone_filter_empty_result_is_fine():
    ds = lattice.enumerate_lorentz(2, math.sqrt(6.0))
    cone = lattice.Cone(np.array([math.cos(0.3), math.sin(0.3)]), 1e-6)
    out = lattice.cone_filter(ds, cone)
    assert out.size == 0


# --- orbit files ---------------------------------------------------------------------


def test_orbit_roundtrip_integer(tmp_path):
    ds = lattice.enumerate_lorentz(2, 6.0)
    path = os.fspath(tmp_path / "orbit.csv")
    lattice.save_orbit(ds, path)
    back = lattice.load_orbit(path)
    assert np.array_equal(back.exact_ints, ds.exact_ints)
    assert back.n == 2 and back.w == 8 and back.source == "lorentz"


def test_orbit_roundtrip_float(tmp_path):
    ds = lattice.psl2z_orbit(40.0)
    lattice.effective_covolume(ds, (15.0, 40.0))
    path = os.fspath(tmp_path / "orbit.csv")
    lattice.save_orbit(ds, path)
    back = lattice.load_orbit(path)
    assert np.array_equal(back.coords, ds.coords)  # 17 digits round-trips
    assert back.v_eff == pytest.approx(ds.v_eff, rel=1e-15)


def test_orbit_load_rejects_off_quadric(tmp_path):
    path = os.fspath(tmp_path / "bad.csv")
    with open(path, "w") as fh:
        fh.write("#hyperangle orbit v1 n=2 q=5 veff=na w=8 source=test\n")
        fh.write("0,0,1\n")
        fh.write("1,1,2\n")  # 1+1 != 4-1
    with pytest.raises(InvariantViolationError) as err:
        lattice.load_orbit(path)
    assert "row 2" in str(err.value)


def test_orbit_load_rejects_width_mismatch(tmp_path):
    path = os.fspath(tmp_path / "bad.csv")
    with open(path, "w") as fh:
        fh.write("#hyperangle orbit v1 n=3 q=5 veff=na w=48 source=test\n")
        fh.write("0,0,1\n")
    with pytest.raises(ParseError):
        lattice.load_orbit(path)


def test_orbit_load_requires_header(tmp_path):
    path = os.fspath(tmp_path / "bad.csv")
    with open(path, "w") as fh:
        fh.write("0,0,1\n")
    with pytest.raises(ParseError):
        lattice.load_orbit(path)


def test_orbit_load_tolerates_comments_and_blanks(tmp_path):
    path = os.fspath(tmp_path / "ok.csv")
    with open(path, "w") as fh:
        fh.write("# a leading remark\n")
        fh.write("#hyperangle orbit v1 n=2 q=5 veff=na w=8 source=test\n")
        fh.write("\n0,0,1\n# interior remark\n2,2,3\n\n")
    ds = lattice.load_orbit(path)
    assert ds.size == 2 and ds.source == "test"
