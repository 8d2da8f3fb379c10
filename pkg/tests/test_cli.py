import json
from pathlib import Path

import pytest

from lcushell.cli import (
    INCOMPLETE_MARKER,
    TRACE_HEADER,
    build_target,
    compare_traces,
    execute,
    main,
    read_trace,
    trace_csv,
)
from lcushell.config import ConfigError, load_config, parse_config
from lcushell.pauli import PauliSum
from lcushell.presets import builtin_names, load_builtin, load_presets
from lcushell.solver import IterationTrace, StepRecord

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# -- fixtures and presets ----------------------------------------------------------------


def test_load_builtin_deuteron():
    h = load_builtin("deuteron-n2")
    expected = PauliSum.from_terms(
        [(5.906709, "II"), (0.218291, "ZI"), (-6.125, "IZ"), (-2.143304, "XX"), (-2.143304, "YY")]
    )
    assert h == expected
    assert len(h) == 5  # X0X1 + Y0Y1 count as two of the five strings
    assert h.is_hermitian()
    assert all(t.coefficient.imag == 0 for t in h.terms)


def test_load_builtin_unknown_lists_available():
    with pytest.raises(KeyError) as info:
        load_builtin("tritium-n7")
    assert all(name in str(info.value) for name in builtin_names())


def test_preset_table_columns():
    table = {
        "2H": (4, 4, -48.0), "3H": (4, 4, -45.4), "3He": (4, 4, -45.4), "4He": (4, 4, -42.9),
        "6Li": (6, 6, -40.6), "7Li": (6, 6, -40.6), "12C": (8, 8, -38.9), "14N": (8, 8, -38.9),
        "16O": (10, 10, -38.9), "17O": (12, 12, -38.4), "23Na": (14, 14, -37.5), "40Ca": (22, 22, -37.6),
    }
    presets = load_presets()
    assert set(presets) == set(table)
    for symbol, (n_p, n_n, u0) in table.items():
        p = presets[symbol]
        assert (p.n_proton_orbits, p.n_neutron_orbits, p.U0) == (n_p, n_n, u0)


# -- configuration errors ------------------------------------------------------------------


def test_unknown_key_rejected_with_line(tmp_path, capsys):
    path = write(tmp_path, "bad.ini", "[nucleus]\npreset = 2H\n\n[solver]\ngama = 0.1\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.line == 5
    assert str(info.value).startswith(f"{path}:5:")
    assert main(["solve", str(path)]) == 2
    assert ":5:" in capsys.readouterr().err


def test_config_errors_are_line_precise(tmp_path):
    cases = {
        "[bogus]\nx = 1\n": 1,
        "[nucleus]\nZ = one\nA = 2\n": 2,
        "preset = 2H\n": 1,
        "[nucleus]\npreset = 2H\n[hamiltonian]\nbuiltin = deuteron-n2\n": None,
    }
    for text, line in cases.items():
        with pytest.raises(ConfigError) as info:
            parse_config(text, "c.ini")
        if line is not None:
            assert info.value.line == line, (text, str(info.value))
        assert str(info.value).startswith("c.ini")


def test_preset_fields_can_be_overridden():
    target = build_target(parse_config("[nucleus]\npreset = 6Li\nproton_orbits = 4\nneutron_orbits = 4\n"))
    assert target.nucleus.catalog.n_proton_orbits == 4 and target.U0 == -40.6
    assert target.pauli.n_qubits == 8


def test_unknown_preset_exits_2(tmp_path):
    path = write(tmp_path, "p.ini", "[nucleus]\npreset = 99Xx\n")
    assert main(["solve", str(path)]) == 2


def test_bad_initial_state_is_config_error(tmp_path):
    path = write(tmp_path, "i.ini", "[nucleus]\npreset = 3H\n[initial]\nreference = 1010 1100\nadmixtures = none\n")
    assert main(["solve", str(path), "--outdir", str(tmp_path)]) == 2


# -- runs ----------------------------------------------------------------------------------


def test_deuteron_preset_matches_oracle(tmp_path):
    cfg = load_config(CONFIGS / "2H.ini")
    result = execute(cfg, tmp_path)
    s = result.summary
    assert result.ok and s["converged"] and s["status"] == "complete"
    assert abs(s["difference_MeV"]) <= 1e-6
    assert s["representation"] == "sector"
    assert s["resources"]["total_qubits"] == 8 + s["resources"]["m"]
    rows, incomplete = read_trace(tmp_path / "2H_trace.csv")
    assert not incomplete and len(rows) == s["iterations"] + 1
    assert json.loads((tmp_path / "2H_summary.json").read_text())["final_energy_MeV"] == s["final_energy_MeV"]


def test_reruns_are_byte_identical(tmp_path):
    text = (
        "[nucleus]\npreset = 3H\n[solver]\ngamma = 0.0185\nmax_iter = 30\n"
        "[noise]\nkind = gaussian\ntargets = both\n[run]\nseed = 12345\n"
        "[output]\ntrace = t.csv\nsummary = s.json\npauli = h.txt\n"
    )
    path = write(tmp_path, "n.ini", text)
    for d in ("a", "b"):
        assert main(["solve", str(path), "--outdir", str(tmp_path / d)]) == 0
    for name in ("t.csv", "s.json", "h.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    other = write(tmp_path, "m.ini", text.replace("12345", "54321"))
    assert main(["solve", str(other), "--outdir", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "t.csv").read_bytes() != (tmp_path / "a" / "t.csv").read_bytes()
    assert main(["trace-compare", str(tmp_path / "a" / "t.csv"), str(tmp_path / "b" / "t.csv")]) == 0
    assert main(["trace-compare", str(tmp_path / "a" / "t.csv"), str(tmp_path / "c" / "t.csv")]) == 1


def test_divergent_run_flushes_incomplete_trace(tmp_path):
    write(tmp_path, "z.txt", "1.0 Z\n")
    path = write(
        tmp_path, "z.ini",
        "[hamiltonian]\nfile = z.txt\n[solver]\ngamma = 0.5\n[initial]\nreference = 0\nadmixtures = none\n"
        "[output]\ntrace = z_trace.csv\nsummary = z_summary.json\n",
    )
    assert main(["solve", str(path), "--outdir", str(tmp_path / "out")]) == 1
    text = (tmp_path / "out" / "z_trace.csv").read_text()
    assert text.splitlines()[-1].startswith(INCOMPLETE_MARKER)
    rows, incomplete = read_trace(tmp_path / "out" / "z_trace.csv")
    assert incomplete and len(rows) == 1
    summary = json.loads((tmp_path / "out" / "z_summary.json").read_text())
    assert summary["status"] == "incomplete" and "error" in summary


def test_trace_csv_format():
    trace = IterationTrace([StepRecord(0, -1.0, 1.0, 1.0, 0.1), StepRecord(1, -1.5, 0.25, 0.9, 0.1)], complete=True)
    text = trace_csv(trace)
    assert text.splitlines()[0] == ",".join(TRACE_HEADER)
    assert text.splitlines()[2] == "1,-1.5,0.25,0.9,0.1"
    trace.complete = False
    assert trace_csv(trace).splitlines()[-1].startswith(INCOMPLETE_MARKER)


def test_compare_traces_tolerance(tmp_path):
    a = write(tmp_path, "a.csv", "step,energy_MeV,success_prob,norm,gamma\n0,-1.0,1.0,1.0,0.1\n")
    b = write(tmp_path, "b.csv", "step,energy_MeV,success_prob,norm,gamma\n0,-1.0000001,1.0,1.0,0.1\n")
    assert compare_traces(a, b, tol=1e-9)
    assert compare_traces(a, b, tol=1e-6) == []
    c = write(tmp_path, "c.csv", "step,energy_MeV,success_prob,norm,gamma\n0,-1.0,1.0,1.0,0.1\n# incomplete: x\n")
    assert any("completeness" in p for p in compare_traces(a, c))
    bad = write(tmp_path, "bad.csv", "a,b\n")
    with pytest.raises(ValueError):
        read_trace(bad)


def test_build_and_diag(tmp_path, capsys):
    out = tmp_path / "h.txt"
    assert main(["build", str(CONFIGS / "deuteron_n2.ini"), "--out", str(out)]) == 0
    assert PauliSum.from_text(out.read_text()) == load_builtin("deuteron-n2")
    capsys.readouterr()
    assert main(["diag", str(CONFIGS / "deuteron_n2.ini")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["oracle_energy_MeV"] == pytest.approx(-1.749161222, abs=1e-8)
    assert main(["diag", str(CONFIGS / "4He.ini")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["dimension"] == 36
    assert report["oracle_energy_MeV"] == pytest.approx(-28.61282036980828, abs=1e-8)


def test_resources_subcommand(tmp_path, capsys):
    assert main(["resources", str(CONFIGS / "2H.ini")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("nucleus,work_qubits,M,m,total_qubits")
    assert lines[1].startswith("2H,8,")
    out = tmp_path / "c.csv"
    assert main(["resources", str(CONFIGS / "4He.ini"), "--complexity", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0].endswith("classical_proxy,full_dimension")


def test_fit_rank_deficiency_needs_min_norm(tmp_path, capsys):
    path = write(tmp_path, "f.ini", "[fit]\nnuclei = 2H, 3H, 3He, 4He, 6Li\n")
    assert main(["fit", str(path)]) == 1
    out = capsys.readouterr().out
    assert "rank 4" in out and "--min-norm" in out
    assert main(["fit", str(path), "--min-norm"]) == 0
    assert "minimum-norm" in capsys.readouterr().out


def test_batch_with_jobs(tmp_path, capsys):
    path = write(
        tmp_path, "b.ini",
        "[batch]\npresets = 2H, 3He\njobs = 2\n[solver]\ngamma = tuned\nrepresentation = sector\ntol_keV = 0.001\n"
        "max_iter = 2000\n",
    )
    assert main(["batch", str(path), "--outdir", str(tmp_path / "runs")]) == 0
    out = capsys.readouterr().out
    assert "2H" in out and "3He" in out
    for symbol in ("2H", "3He"):
        summary = json.loads((tmp_path / "runs" / f"{symbol}_summary.json").read_text())
        assert abs(summary["difference_MeV"]) <= 1e-6
