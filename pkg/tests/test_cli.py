import subprocess
import sys

import pytest

from bilgamma.cli import main

DAX_INI = """\
alpha_plus = 1.55
lambda_plus = 133.96
alpha_minus = 0.94
lambda_minus = 88.92
r = {r}
q = 0
s0 = 5000
[sim]
n_samples = 20000
seed = 42
[surface]
time_scale = 252
"""


@pytest.fixture
def dax(tmp_path):
    path = tmp_path / "dax.ini"
    path.write_text(DAX_INI.format(r=0))
    return str(path)


@pytest.fixture
def dax_rate(tmp_path):
    path = tmp_path / "rate.ini"
    path.write_text(DAX_INI.format(r=0.0012))
    return str(path)


@pytest.fixture
def no_esscher(tmp_path):
    path = tmp_path / "wide.ini"
    path.write_text("alpha_plus = 1\nlambda_plus = 0.4\nalpha_minus = 1\nlambda_minus = 0.5\n"
                    "[sim]\nn_samples = 20000\n")
    return str(path)


def _fields(text):
    return dict(part.split("=", 1) for line in text.splitlines() for part in line.split() if "=" in part)


def test_solve_esscher(dax, capsys):
    assert main(["solve", "--config", dax, "--kind", "esscher"]) == 0
    out = _fields(capsys.readouterr().out)
    assert float(out["theta"]) == pytest.approx(-5.280172469502389, rel=1e-9)


def test_solve_reports_missing_measure(dax, no_esscher, capsys):
    assert main(["solve", "--config", dax, "--kind", "mmm"]) == 2
    assert "no solution" in capsys.readouterr().err
    assert main(["solve", "--config", no_esscher, "--kind", "esscher"]) == 2
    assert "lambda_plus + lambda_minus > 1" in capsys.readouterr().err


def test_price(dax, capsys):
    assert main(["price", "--config", dax, "--strike", "5000", "--maturity", "20"]) == 0
    assert float(_fields(capsys.readouterr().out)["price"]) > 0
    assert main(["price", "--config", dax, "--kind", "memm", "--strike", "5000", "--maturity", "20"]) == 2
    assert "not supported" in capsys.readouterr().err


def test_surface_is_reproducible(dax, tmp_path, capsys):
    args = ["surface", "--config", dax, "--strikes", "4800,5000,5200", "--maturities", "0.25,1"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--workers", "3"]) == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    rows = a.splitlines()
    assert rows[0] == "maturity,strike,price,implied_vol"
    assert len(rows) == 7
    capsys.readouterr()
    assert main(["surface", "--config", dax, "--strikes", "5000", "--maturities", "1"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_hedge(dax_rate, dax, capsys):
    assert main(["hedge", "--config", dax_rate, "--strike", "5000", "--maturity", "0.5"]) == 0
    delta = float(_fields(capsys.readouterr().out)["delta"])
    assert 0 < delta < 1
    assert main(["hedge", "--config", dax, "--strike", "5000", "--maturity", "0.5"]) == 2


def test_input_errors(tmp_path, dax, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("alpha_plus = 1.55\nlambda_plus = x\n")
    assert main(["validate", "--config", str(bad)]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "nope.ini"), "--kind", "esscher"]) == 1
    assert main(["price", "--config", dax, "--strike", "-1", "--maturity", "1"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["surface", "--config", dax, "--strikes", "1:0:-1"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_validate_dax_config(dax, capsys):
    assert main(["validate", "--config", dax]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "PASS  esscher" in out and "PASS  skew" in out


def test_validate_skips_missing_esscher_measure(no_esscher, capsys):
    main(["validate", "--config", no_esscher])
    lines = capsys.readouterr().out.splitlines()
    esscher = next(line for line in lines if line.split()[1] == "esscher")
    assert esscher.startswith("SKIP") and "lambda_plus + lambda_minus > 1" in esscher


def test_module_entry_point(dax):
    run = subprocess.run([sys.executable, "-m", "bilgamma.cli", "solve", "--config", dax, "--kind", "bilateral"],
                         capture_output=True, text=True, check=False)
    assert run.returncode == 0
    assert "theta_plus=" in run.stdout
