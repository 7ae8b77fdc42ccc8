import json

import pytest

from bec_polaron import cli
from bec_polaron.tables import Table

FAST = ["--samples", "4096", "--batches", "8"]


def run_capture(capsys, argv):
    code = cli.run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def data_lines(text):
    return [ln for ln in text.splitlines()[1:] if ln and not ln.startswith("#")]


def test_diagrams_row(capsys):
    code, out, _ = run_capture(capsys, ["diagrams", "--order", "3"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,L,D,R"
    assert lines[1].startswith("# provenance: ")
    assert data_lines(out) == ["3,90,15,10"]


def test_diagrams_list_as_comments(capsys):
    code, out, _ = run_capture(capsys, ["diagrams", "--order", "2", "--list"])
    assert code == 0
    pairings = [ln for ln in out.splitlines() if ln.startswith("# pairing")]
    assert len(pairings) == 3
    assert sum("irreducible" in ln for ln in pairings) == 2


def test_rate_below_threshold_is_zero(capsys):
    code, out, _ = run_capture(capsys, ["rate", "--p-min", "0", "--p-max", "0.9pc", "--steps", "10"])
    assert code == 0
    rows = data_lines(out)
    assert len(rows) == 10
    assert all(r.split(",")[1] == "0" for r in rows)


def test_selfenergy_defaults_to_on_shell(capsys):
    code, out, _ = run_capture(capsys, ["selfenergy", "--order", "1", "--p", "0.4"])
    assert code == 0
    p, omega, re, im, *_ = (float(x) for x in data_lines(out)[0].split(","))
    assert omega == pytest.approx(0.08) and re < 0 and im == 0


def test_spectrum_order2_runs(capsys):
    code, out, _ = run_capture(capsys, ["spectrum", "--order", "2", "--p-min", "0", "--p-max", "0.5pc", "--steps", "3", *FAST])
    assert code == 0
    assert len(data_lines(out)) == 3
    assert "# monotonic below p_c: 1" in out


def test_i0_mu_b(capsys):
    code, out, _ = run_capture(capsys, ["i0", "--mu-b"])
    assert code == 0
    header = out.splitlines()[0].split(",")
    row = dict(zip(header, (float(x) for x in data_lines(out)[0].split(","))))
    assert row["ratio"] == pytest.approx(1.0, abs=1e-10)


def test_missing_params_file(capsys, tmp_path):
    missing = tmp_path / "nope.txt"
    code, _, err = run_capture(capsys, ["rate", "--params", str(missing), "--p-min", "0", "--p-max", "1", "--steps", "2"])
    assert code == 1
    assert str(missing) in err


def test_unknown_flag(capsys):
    code, _, err = run_capture(capsys, ["diagrams", "--order", "2", "--bogus"])
    assert code == 1 and err.startswith("error:")


def test_bad_order(capsys):
    assert run_capture(capsys, ["diagrams", "--order", "0"])[0] == 1


def test_unwritable_output(capsys, tmp_path):
    target = tmp_path / "missing_dir" / "out.csv"
    code, _, err = run_capture(capsys, ["diagrams", "--order", "2", "--output", str(target)])
    assert code == 1 and "cannot write" in err


def test_params_file(capsys, tmp_path):
    f = tmp_path / "p.txt"
    f.write_text("unit_system = natural\nboson_mass = 1\nimpurity_mass = 2\ndensity = 2.2448\nscattering_length_ib = 0.0354\nboson_interaction = 0.4455\n")
    code, out, _ = run_capture(capsys, ["rate", "--params", str(f), "--p-min", "0", "--p-max", "3", "--steps", "4"])
    assert code == 0
    prov = json.loads(out.splitlines()[1][len("# provenance: "):])
    assert prov["params"]["impurity_mass"] == 2


def test_empty_table_has_header_and_provenance():
    text = cli.csv_text(Table(("a", "b")), {"x": 1})
    assert text == 'a,b\n# provenance: {"x": 1}\n'


def test_table_lines_and_round_trip(tmp_path):
    t = Table(("a", "b"), [(1.0, 1 / 3), (2.5e-17, -7.0), (123456789.123, 0.1)])
    path = tmp_path / "t.csv"
    cli.emit_csv(t, {"argv": []}, path)
    text = path.read_text()
    assert len([ln for ln in text.splitlines() if not ln.startswith("#")]) == 4
    cols, prov, rows = cli.read_csv(path)
    assert cols == ("a", "b") and prov == {"argv": []}
    for got, want in zip(rows, t.rows):
        for x, y in zip(got, want):
            assert x == pytest.approx(y, rel=1e-11)


def test_output_is_deterministic_and_replayable(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    argv = ["selfenergy", "--order", "2", "--p", "0.2", *FAST]
    assert cli.run([*argv, "--output", str(a)]) == 0
    assert cli.run([*argv, "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert cli.run(["replay", str(a), "--output", str(c)]) == 0
    assert c.read_bytes() == a.read_bytes()


def test_replay_missing_file(capsys, tmp_path):
    assert run_capture(capsys, ["replay", str(tmp_path / "x.csv")])[0] == 1


@pytest.mark.filterwarnings("ignore::bec_polaron.model.DilutenessWarning")
def test_convergence_error_writes_partial(capsys):
    # sqrt(a^3 n) = 3 drives M/M_ef below zero at first order
    code, out, err = run_capture(capsys, ["effmass", "--order", "1", "--gas-parameter", "3"])
    assert code == 2
    assert "convergence error: M/M_ef" in err
    # no usable estimate exists, so only a status header precedes the error comment
    assert out.splitlines()[0] == "status"
    assert "# error:" in out


def test_format_value():
    assert cli.format_value(True) == "1"
    assert cli.format_value(3) == "3"
    assert cli.format_value(1 / 3) == "0.333333333333"
