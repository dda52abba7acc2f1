import json

import pytest

from covbracket import cli


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    return tmp_path


def test_verify_default_passes(outdir, capsys):
    assert cli.main(["verify"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pass"] and all("paper_anchor" in c for c in doc["checks"])
    assert (outdir / "verify.json").exists()


def test_verify_a1_fails_normalization(outdir, capsys):
    assert cli.main(["verify", "--set", "constants.a=1", "--set", 'suites=["gupta-bleuler"]']) == 1
    doc = json.loads(capsys.readouterr().out)
    failed = [c["name"] for c in doc["checks"] if not c["pass"]]
    assert failed == ["standard_normalization"]


def test_verify_parallel_matches_serial(outdir, capsys):
    cli.main(["verify", "--set", 'suites=["brackets","pauli-jordan"]'])
    serial = capsys.readouterr().out
    cli.main(["verify", "--parallel", "--set", 'suites=["brackets","pauli-jordan"]'])
    assert capsys.readouterr().out == serial


@pytest.mark.parametrize("argv", [
    ["verify", "--set", "bogus=1"],
    ["verify", "--set", "lattice.n_max=0"],
    ["verify", "--set", "noequals"],
    ["pauli-jordan", "--set", "pauli_jordan.r=[2,0,5]"],
    ["nonsense"],
])
def test_config_errors_exit_2(outdir, capsys, argv):
    assert cli.main(argv) == 2
    assert capsys.readouterr().out == ""
    assert list(outdir.iterdir()) == []


def test_malformed_config_file(outdir, tmp_path, capsys):
    bad = tmp_path / "cfg.json"
    bad.write_text("{not json")
    assert cli.main(["verify", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"lattice": {"delta_k": 1.0, "extra": 2}}))
    assert cli.main(["verify", "--config", str(bad)]) == 2


def test_pauli_jordan_csv(outdir, capsys):
    assert cli.main(["pauli-jordan", "--refine", "--set", "pauli_jordan.x0=[-1,1,3]"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert "max_row_change" in summary
    lines = (outdir / "pauli_jordan.csv").read_text().splitlines()
    assert lines[0] == "#schema=1" and lines[1] == "x0,r,delta_lat,d0_delta_lat"
    rows = [list(map(float, line.split(","))) for line in lines[2:]]
    by = {(r[0], r[1]): r[2] for r in rows}
    for (t, r), d in by.items():
        if t == 0:
            assert d == 0
        assert by[(-t, r)] == pytest.approx(-d, abs=1e-15)


def test_evolve_free_particle_and_determinism(outdir, capsys):
    args = ["evolve", "--set", "dynamics.velocity=[0.2,0,0]", "--set", "dynamics.steps=20"]
    assert cli.main(args) == 0
    first = (outdir / "trajectory.csv").read_text()
    assert cli.main(args) == 0
    assert (outdir / "trajectory.csv").read_text() == first
    rows = [list(map(float, line.split(","))) for line in first.splitlines()[2:]]
    # columns: t, x0..x3, ...; x^0 = c t and x^1 = v t with c = 1
    assert all(r[3] == 0 and r[4] == 0 for r in rows)
    assert rows[-1][1] == pytest.approx(rows[-1][0], rel=1e-12)
    assert rows[-1][2] == pytest.approx(0.2 * rows[-1][0], rel=1e-12)


def test_evolve_coupled_bit_identical(outdir, capsys):
    args = ["evolve", "--set", "dynamics.coupling=coupled", "--set", "dynamics.e=0.05",
            "--set", "dynamics.steps=10", "--set", "dynamics.field_scale=0.01", "--set", "dynamics.velocity=[0.1,0,0]"]
    cli.main(args)
    a = (outdir / "trajectory.csv").read_bytes()
    cli.main(args)
    assert (outdir / "trajectory.csv").read_bytes() == a


def test_symplectic_flag(outdir, capsys):
    assert cli.main(["evolve", "--symplectic", "--set", "dynamics.steps=10", "--set", "dynamics.dt=0.1",
                     "--set", "dynamics.velocity=[0.1,0.2,0]"]) == 0
    m = json.loads(capsys.readouterr().out)["symplectic"]
    eta = [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]]
    assert max(abs(m[i][j] - eta[i][j]) for i in range(4) for j in range(4)) < 1e-9


def test_bracket_table_and_reduce(outdir, capsys):
    assert cli.main(["bracket-table"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert len(rows) == 26 * 4
    assert cli.main(["reduce"]) == 0


def test_boost_check_reports_study(outdir, capsys):
    code = cli.main(["boost-check", "--set", "boost.n_max=[1,2]"])
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["study"]) == 2
    assert code == (0 if doc["monotone"] else 1)
