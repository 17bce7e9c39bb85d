import math
import os

import pytest

from hyperangle import cli


def run(argv):
    return cli.main(argv)


def test_orbit_gen_lorentz_row_count(tmp_path):
    out = os.fspath(tmp_path / "o.csv")
    assert run(["orbit", "gen", "--backend", "lorentz", "--n", "2",
                "--q", str(math.sqrt(6.0)), "--out", out]) == 0
    lines = open(out).read().strip().splitlines()
    assert len(lines) == 6  # header + 5 rows
    assert lines[0].startswith("#hyperangle orbit v1 n=2 ")


def test_orbit_gen_psl2z_header(tmp_path):
    out = os.fspath(tmp_path / "o.csv")
    assert run(["orbit", "gen", "--backend", "psl2z", "--q", "20", "--out", out]) == 0
    head = open(out).readline()
    assert "veff=na" in head and "w=2" in head and "source=psl2z" in head


def test_orbit_gen_invalid_dimension_exit_2(tmp_path, capsys):
    out = os.fspath(tmp_path / "o.csv")
    code = run(["orbit", "gen", "--backend", "lorentz", "--n", "1", "--q", "3",
                "--out", out])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_orbit_gen_resource_cap_exit_3(tmp_path):
    out = os.fspath(tmp_path / "o.csv")
    code = run(["orbit", "gen", "--backend", "psl2z", "--q", "200",
                "--max-points", "100", "--out", out])
    assert code == 3


def test_paircorr_missing_veff_exit_2(tmp_path):
    orbit = os.fspath(tmp_path / "o.csv")
    run(["orbit", "gen", "--backend", "psl2z", "--q", "20", "--out", orbit])
    assert run(["paircorr", "--orbit", orbit, "--xi-grid", "1,2"]) == 2


def test_paircorr_csv_columns_and_determinism(tmp_path):
    orbit = os.fspath(tmp_path / "o.csv")
    run(["orbit", "gen", "--backend", "psl2z", "--q", "40", "--out", orbit])
    out1 = os.fspath(tmp_path / "a.csv")
    out2 = os.fspath(tmp_path / "b.csv")
    args = ["paircorr", "--orbit", orbit, "--veff", str(2 * math.pi / 3),
            "--xi-grid", "0.5,1,2", "--t-norm", "25"]
    assert run(args + ["--out", out1]) == 0
    assert run(args + ["--out", out2, "--threads", "4"]) == 0
    a, b = open(out1).read(), open(out2).read()
    header = [l for l in a.splitlines() if not l.startswith("#")][0]
    assert header == "xi,r2q_empirical,r2_theory,g2_theory,g2_empirical,rel_err"
    data = lambda s: [l for l in s.splitlines() if not l.startswith("#")]
    assert data(a) == data(b)  # byte-identical data regardless of threads


def test_paircorr_cone_mode(tmp_path):
    orbit = os.fspath(tmp_path / "o.csv")
    run(["orbit", "gen", "--backend", "psl2z", "--q", "40", "--out", orbit])
    out = os.fspath(tmp_path / "cone.csv")
    assert run(["paircorr", "--orbit", orbit, "--veff", str(2 * math.pi / 3),
                "--xi-grid", "1,2", "--t-norm", "25",
                "--cone", "axis=1,0;theta=1.0472", "--out", out]) == 0
    meta = [l for l in open(out) if l.startswith("# mode=")]
    assert meta and "cone" in meta[0]


def test_volume_check_ratios(tmp_path):
    out = os.fspath(tmp_path / "v.csv")
    assert run(["volume-check", "--n", "2", "--q", "60", "--t-grid", "1,2",
                "--xi-grid", "0.5", "--out", out]) == 0
    rows = [l for l in open(out) if not l.startswith("#")][1:]
    for row in rows:
        ratio = float(row.split(",")[6])
        assert 0.99 <= ratio <= 1.01


def test_paircorr_lorentz_n3_end_to_end(tmp_path):
    # wiring check for the n = 3 empirical path (sphere-grid index, quadrature
    # cumulative integrals); tolerances loose because Q = 8 is tiny
    orbit = os.fspath(tmp_path / "l3.csv")
    run(["orbit", "gen", "--backend", "lorentz", "--n", "3", "--q", "8",
         "--out", orbit])
    out = os.fspath(tmp_path / "cmp.csv")
    assert run(["paircorr", "--orbit", orbit, "--calibrate",
                "--xi-grid", "2,4", "--t-norm", "8", "--out", out]) == 0
    rows = [l for l in open(out) if not l.startswith(("#", "xi"))]
    assert all(float(r.split(",")[5]) < 0.25 for r in rows)


def test_asymptotics_levels_backend(tmp_path):
    # n = 3 sweep from per-level counts: final ratio within 5% of 1
    out = os.fspath(tmp_path / "a.csv")
    assert run(["asymptotics", "--backend", "lorentz", "--n", "3",
                "--levels", "2500", "--xi-grid", "10,50", "--out", out]) == 0
    rows = [l for l in open(out) if not l.startswith("#")][1:]
    final_ratio = float(rows[-1].split(",")[3])
    assert abs(final_ratio - 1.0) <= 0.05


def test_spectrum_recover_synthetic(tmp_path):
    out = os.fspath(tmp_path / "r.csv")
    assert run(["spectrum-recover", "--n", "2", "--veff", "2.0", "--depth", "2",
                "--synthetic", "1.2,1.9", "--out", out]) == 0
    rows = [l for l in open(out) if not l.startswith("#")][1:]
    ts = [float(r.split(",")[0]) for r in rows]
    assert ts == pytest.approx([1.2, 1.9], abs=1e-3)


def test_density_plot_f_fixed_l(tmp_path):
    out = os.fspath(tmp_path / "f.csv")
    assert run(["density", "plot-f", "--n", "2", "--fix", "l=2",
                "--grid", "0.5,1,5", "--out", out]) == 0
    rows = [l for l in open(out) if not l.startswith("#")]
    assert rows[0].strip() == "xi,f"
    # the tabulated kernel at xi=5 > sinh 2 equals 2 l / xi^2
    assert float(rows[3].split(",")[1]) == pytest.approx(2 * 2 / 25.0, rel=1e-12)


def test_numerical_failure_exit_4(tmp_path, monkeypatch):
    from hyperangle import density
    from hyperangle.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("quadrature failed", achieved=1e-3)

    monkeypatch.setattr(density, "vol_RM_numeric", boom)
    code = run(["volume-check", "--n", "2", "--q", "60", "--t-grid", "1",
                "--xi-grid", "1", "--out", os.fspath(tmp_path / "v.csv")])
    assert code == 4


def test_config_toml_overrides_flags(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('xi_grid = "1,2"\n[quad]\nabs_tol = 1e-10\n')
    out = os.fspath(tmp_path / "v.csv")
    # flag says one xi value, config overrides to two
    assert run(["volume-check", "--n", "2", "--q", "60", "--t-grid", "1",
                "--xi-grid", "0.7", "--config", os.fspath(cfg), "--out", out]) == 0
    rows = [l for l in open(out) if not l.startswith("#")][1:]
    assert len(rows) == 2


def test_paircorr_empty_orbit_exit_2(tmp_path):
    orbit = os.fspath(tmp_path / "empty.csv")
    with open(orbit, "w") as fh:
        fh.write("#hyperangle orbit v1 n=2 q=5 veff=2.0 w=2 source=test\n")
    assert run(["paircorr", "--orbit", orbit, "--xi-grid", "1"]) == 2


def test_paircorr_cone_theory_side_unchanged(tmp_path):
    # restricting to a cone changes the empirical side only: the limit is
    # cone-independent, so the theory columns must match the full run
    orbit = os.fspath(tmp_path / "o.csv")
    run(["orbit", "gen", "--backend", "psl2z", "--q", "40", "--out", orbit])
    full = os.fspath(tmp_path / "full.csv")
    coned = os.fspath(tmp_path / "cone.csv")
    base = ["paircorr", "--orbit", orbit, "--veff", str(2 * math.pi / 3),
            "--xi-grid", "1,2", "--t-norm", "25"]
    run(base + ["--out", full])
    run(base + ["--cone", "axis=0,1;theta=0.8", "--out", coned])
    take = lambda p: [l.split(",")[2:4] for l in open(p) if not l.startswith(("#", "xi"))]
    assert take(full) == take(coned)


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPERANGLE_THREADS", "3")
    orbit = os.fspath(tmp_path / "o.csv")
    run(["orbit", "gen", "--backend", "psl2z", "--q", "30", "--out", orbit])
    out = os.fspath(tmp_path / "p.csv")
    assert run(["paircorr", "--orbit", orbit, "--veff", str(2 * math.pi / 3),
                "--xi-grid", "1", "--t-norm", "20", "--out", out]) == 0


def test_orbit_info_roundtrip(tmp_path, capsys):
    orbit = os.fspath(tmp_path / "o.csv")
    run(["orbit", "gen", "--backend", "lorentz", "--n", "3", "--q", "2",
        "--out", orbit])
    assert run(["orbit", "info", orbit]) == 0
    out = capsys.readouterr().out
    assert "points=9" in out and "w=48" in out
