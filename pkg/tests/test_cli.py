import csv as csv_module
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tdmie.cli as cli
from tdmie.cli import SimulationConfig, UsageError, main
from tdmie.fdmie import BandSpec, band_compare, td_to_fd
from tdmie.mot import CoefficientSeries, NumericalFailure
from tdmie.svgplot import CsvFormatError, PlotKind, read_csv, render
from tdmie.vsh import ModeIndex


def _coeffs(path):
    header, data = read_csv(path)
    assert header == ["step", "t_start", "order", "re", "im"]
    return data


# -- configuration ---------------------------------------------------------------


def test_defaults_reproduce_reference_setup():
    cfg = SimulationConfig()
    assert (cfg.a, cfg.f0, cfg.B, cfg.Nt, cfg.Np) == (1.0, 0.4e9, 0.3e9, 100_000, 1)
    assert cfg.step == pytest.approx(1.0 / (20 * 0.7e9))
    assert cfg.n_max == 30


def test_mode_degree_guard(capsys):
    assert main(["simulate", "--mode", "45,1,psi", "--nt", "10"]) == 1
    assert "N_m=30" in capsys.readouterr().err
    with pytest.raises(UsageError, match="N_m=30"):
        SimulationConfig(modes=[ModeIndex(31, 1)])


@pytest.mark.parametrize("mode", ["0,0,psi", "3,4,phi", "3,1", "3,1,tm", "a,1,psi"])
def test_invalid_modes_are_usage_errors(mode, tmp_path, capsys):
    assert main(["simulate", "--mode", mode, "--outdir", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err


def test_other_usage_errors(tmp_path):
    assert main([]) == 1
    assert main(["simulate", "--kernel", "5"]) == 1
    assert main(["simulate", "--set", "nonsense=1"]) == 1
    assert main(["simulate", "--set", "Nt"]) == 1
    assert main(["simulate", str(tmp_path / "missing.cfg")]) == 1
    assert main(["simulate", "--mode", "3,1,phi", "--kernel", "1"]) == 1  # kernel 1 tests psi only


def test_config_file_and_overrides(tmp_path):
    text = "# sphere\na = 1.0\nNt = 50  # short\nmodes = 3,1,psi;4,-1,phi\nkernels = 1,2\n"
    (tmp_path / "run.cfg").write_text(text)
    args = cli._build_parser().parse_args(["simulate", str(tmp_path / "run.cfg"), "--np", "2", "--set", "band_count=5"])
    cfg = cli.config_from_args(args)
    assert cfg.Nt == 50 and cfg.Np == 2 and cfg.band_count == 5
    assert [(m.n, m.m, m.family.value) for m in cfg.modes] == [(3, 1, "psi"), (4, -1, "phi")]
    assert [(str(m), int(e)) for m, e in cfg.jobs()] == [("psi_3_1", 1), ("phi_4_-1", 2)]
    with pytest.raises(UsageError, match="line 2"):
        SimulationConfig.parse("a=1\nbroken\n")


def test_config_round_trip():
    cfg = SimulationConfig(dt=1.5e-10, Nt=77, modes=[ModeIndex(2, -1, "phi")], kernels=[2, 4], np_sweep=[1, 2])
    text = cfg.serialize()
    again = SimulationConfig.parse(text)
    assert again == cfg
    assert again.serialize() == text
    assert SimulationConfig.parse(SimulationConfig().serialize()).dt is None


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0.05, 3.0),
    f0=st.floats(0.05e9, 1e9),
    Np=st.integers(0, 6),
    Nt=st.integers(1, 10**6),
    amp=st.floats(-10, 10, allow_nan=False),
)
def test_config_round_trip_property(a, f0, Np, Nt, amp):
    cfg = SimulationConfig(a=a, f0=f0, Np=Np, Nt=Nt, amplitude=amp, modes=[ModeIndex(1, 1)])
    text = cfg.serialize()
    assert SimulationConfig.parse(text).serialize() == text


# -- simulate / stability / compare ---------------------------------------------------


def test_zero_amplitude_gives_zero_csvs(tmp_path):
    out = tmp_path / "zero"
    assert main(["simulate", "--nt", "10", "--set", "amplitude=0", "--outdir", str(out)]) == 0
    for name in ("coeff_psi_3_1_k1.csv", "coeff_psi_3_1_k3.csv"):
        data = _coeffs(out / name)
        assert data.shape == (20, 5)
        assert np.all(data[:, 3:] == 0.0)


def test_simulate_efie_mfie_agree_and_manifest_is_deterministic(tmp_path):
    out = tmp_path / "sim"
    argv = ["simulate", "--nt", "4000", "--outdir", str(out)]
    assert main(argv) == 0
    cfg = SimulationConfig(Nt=4000, outdir=str(out))
    spectra = []
    for k in (1, 3):
        data = _coeffs(out / f"coeff_psi_3_1_k{k}.csv")
        vals = (data[:, 3] + 1j * data[:, 4]).reshape(-1, 2)
        with pytest.warns(RuntimeWarning):
            spectra.append(td_to_fd(CoefficientSeries(None, None, vals, cfg.step), BandSpec()))
    assert band_compare(spectra[0], spectra[1]) <= 1e-3
    trace = read_csv(out / "trace_psi_3_1_k1.csv")
    assert trace[0] == ["t", "re", "im"] and trace[1].shape == (4000 * 4, 3)
    first = json.loads((out / "manifest_simulate.json").read_text())
    assert first["config_sha256"] == cfg.digest()
    files = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(argv) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == files
    assert set(first["files"]) == {"coeff_psi_3_1_k1.csv", "coeff_psi_3_1_k3.csv", "trace_psi_3_1_k1.csv", "trace_psi_3_1_k3.csv"}


def test_stability_command(tmp_path, capsys):
    out = tmp_path / "stab"
    argv = ["stability", "--mode", "3,1,psi", "--mode", "3,1,phi"] + sum((["--kernel", k] for k in "1234"), [])
    assert main(argv + ["--outdir", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert sorted(line.split()[0] for line in lines) == [f"kernel={k}" for k in "1234"]
    assert all(" n=3 Np=1 rho=" in line and " on_circle=" in line for line in lines)
    assert read_csv(out / "eig_k2_n3_np1.csv")[0] == ["re", "im", "abs"]
    assert (out / "stability_summary.txt").read_text().splitlines() == lines
    for line in lines:
        if line.startswith("kernel=1"):
            continue
        assert float(line.split("rho=")[1].split()[0]) <= 1.0 + 1e-8


def test_compare_np_sweep_and_reuse(tmp_path, capsys):
    out = tmp_path / "cmp"
    dt = 1.0 / (5 * 0.7e9)
    common = ["--mode", "3,1,phi", "--kernel", "2", "--dt", repr(dt), "--nt", "1050", "--outdir", str(out)]
    assert main(["compare", *common, "--set", "np_sweep=1,2,3,4,5,6"]) == 0
    with open(out / "band_errors.csv", newline="") as fh:
        rows = list(csv_module.DictReader(fh))
    assert [int(r["Np"]) for r in rows] == [1, 2, 3, 4, 5, 6]
    errs = np.array([float(r["band_error"]) for r in rows])
    assert np.all(np.diff(errs) < 0) and errs[-1] <= 1e-8
    # a prior simulate run with the same configuration is reused
    assert main(["simulate", *common]) == 0
    capsys.readouterr()
    assert main(["compare", *common]) == 0
    reused = float(capsys.readouterr().out.split(",")[3])
    assert reused == pytest.approx(errs[0], rel=1e-9)


def test_compare_logs_mode_hierarchy(tmp_path):
    out = tmp_path / "hier"
    assert main(["compare", "--mode", "3,1,psi", "--mode", "30,1,psi", "--kernel", "3", "--nt", "4000", "--outdir", str(out)]) == 0
    ratio = float((out / "peak_ratio.txt").read_text().split("ratio=")[1])
    assert ratio >= 100.0


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalFailure("singular Z_0 for K2 n=3")

    monkeypatch.setattr(cli, "solve_mode", boom)
    assert main(["simulate", "--nt", "5", "--outdir", str(tmp_path)]) == 2
    assert "singular" in capsys.readouterr().err


# -- plots -------------------------------------------------------------------------------


def test_eigenmap_plot_has_unit_circle_and_is_deterministic(tmp_path):
    csv = tmp_path / "eig.csv"
    csv.write_text("re,im,abs\n0.5,0.5,0.7071\n1,0,1\n0.2,-0.1,0.2236\n")
    assert main(["plot", str(csv), "--kind", "eigenmap"]) == 0
    svg = (tmp_path / "eig.svg").read_bytes()
    assert b'class="unit-circle"' in svg and svg.count(b"<circle") == 3
    assert main(["plot", str(csv), "--kind", "eigenmap", "--out", str(tmp_path / "b.svg")]) == 0
    assert (tmp_path / "b.svg").read_bytes() == svg


@pytest.mark.parametrize("kind,header", [("timeseries", "t,re,im"), ("spectrum", "f_hz,td_re,td_im,fd_re,fd_im,abs_err"), ("eigenmap", "re,im,abs")])
def test_empty_data_gives_axes_only(tmp_path, kind, header):
    csv = tmp_path / "empty.csv"
    csv.write_text(header + "\n")
    assert main(["plot", str(csv), "--kind", kind]) == 0
    svg = (tmp_path / "empty.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "<rect" in svg and "<polyline" not in svg


def test_timeseries_and_spectrum_render():
    header = ["step", "t_start", "order", "re", "im"]
    data = np.array([[0, 0.0, 0, 1.0, 0], [0, 0.0, 1, 0.5, 0], [1, 1e-9, 0, -1.0, 0], [1, 1e-9, 1, 0.0, 0]])
    svg = render(header, data, PlotKind.TIMESERIES)
    assert svg.count("<polyline") == 1
    spec = render(["f_hz", "td_re", "td_im", "fd_re", "fd_im", "abs_err"], np.array([[1e8, 1, 0, 1, 0, 0], [2e8, 2, 0, 2, 0, 0]]), "spectrum")
    assert spec.count("<polyline") == 2 and ">TD<" in spec and ">FD<" in spec


def test_malformed_csv_reports_line(tmp_path, capsys):
    csv = tmp_path / "bad.csv"
    csv.write_text("# comment\nre,im,abs\n1,2,3\n1,x,3\n")
    with pytest.raises(CsvFormatError, match=":4:"):
        read_csv(csv)
    assert main(["plot", str(csv), "--kind", "eigenmap"]) == 1
    assert ":4:" in capsys.readouterr().err
    csv.write_text("re,im,abs\n1,2\n")
    with pytest.raises(CsvFormatError, match=":2: expected 3 fields"):
        read_csv(csv)
    with pytest.raises(CsvFormatError, match="columns"):
        render(["a", "b"], np.zeros((1, 2)), PlotKind.EIGENMAP)
    assert main(["plot", str(tmp_path / "nope.csv"), "--kind", "spectrum"]) == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tdmie", "plot", str(tmp_path / "x.csv"), "--kind", "eigenmap"], capture_output=True, text=True)
    assert res.returncode == 1
    assert "error:" in res.stderr
