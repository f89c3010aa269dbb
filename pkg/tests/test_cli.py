import csv
import io

import pytest

from hhflow.cli import (
    EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, ConfigError, RunConfig, load_config, main, parse_config, potential,
    potential_saddles, serialize_config,
)

SMALL_DYNAMICS = ["-s", "dynamics.order=2", "-s", "dynamics.energy_order=2", "-s", "dynamics.t_count=3",
                  "-s", "dynamics.t_max=10", "-s", "dynamics.lambdas=-0.1", "-s", "baseline.n1=10",
                  "-s", "baseline.n2=10", "-s", "dynamics.finals=1,0;0,0"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_config_round_trip():
    cfg = RunConfig(physics_w="3/2", physics_lambda=-0.25, spectrum_method="cutoff-3", dynamics_oracle=False)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert parse_config(serialize_config(RunConfig())) == RunConfig()


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[physics]\nlambda = -0.2\n[spectrum]\ncount = 4\n")
    cfg = load_config(str(path), ["spectrum.count=5"])
    assert cfg.physics_lambda == -0.2 and cfg.spectrum_count == 5


@pytest.mark.parametrize("text", ["[physics]\nbogus = 1\n", "[spectrum]\ncount = two\n", "no section\n",
                                  "[physics]\nconvention = other\n", "[spectrum]\nmethod = iter-0\n",
                                  "[physics]\nw = 0\n", "[dynamics]\ninitial = 1,0;0,1\n"])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text).validate()


def test_dump_config(capsys):
    code, out, _ = run(capsys, "spectrum", "--dump-config", "-s", "physics.lambda=-0.3")
    assert code == EXIT_OK
    assert "[physics]" in out and "lambda = -0.3" in out
    assert parse_config(out).physics_lambda == -0.3


def test_exit_codes(capsys, tmp_path):
    code, out, err = run(capsys, "spectrum", "-s", "physics.nope=1")
    assert code == EXIT_INVALID and out == "" and err.startswith("error: config:")
    assert run(capsys, "spectrum", "-s", "broken")[0] == EXIT_INVALID
    assert run(capsys, "spectrum", "-c", str(tmp_path / "missing.ini"))[0] == EXIT_INVALID
    code, _, err = run(capsys, "spectrum", "-s", "physics.lambda=-1.0", "-s", "spectrum.method=cutoff-4",
                       "-s", "spectrum.count=3")
    assert code == EXIT_NUMERICAL and err.startswith("error: numerical:") and len(err.splitlines()) == 1


def test_potential_values():
    from hhflow.algebra import FlowParameters
    p = FlowParameters.make()
    assert potential(p, 1.0, 0.0) == pytest.approx(0.65)
    assert potential(p, 0.0, 1.0) == pytest.approx(0.35 - 0.1 * 0.1)
    saddles = potential_saddles(p)
    assert len(saddles) == 2
    for (q1, q2, v), sign in zip(saddles, (-1, 1)):
        assert q1 == pytest.approx(sign * 5.72931, abs=1e-5)
        assert q2 == pytest.approx(6.5) and v == pytest.approx(12.04125)
    assert potential_saddles(p.with_lambda(0.0)) == []


def test_potential_command(capsys):
    code, out, _ = run(capsys, "potential", "-s", "potential.points=3")
    table = rows(out)
    assert code == EXIT_OK and table[0] == ["q1", "q2", "V"] and len(table) == 10
    code, out, _ = run(capsys, "potential", "-s", "potential.saddles=yes")
    assert rows(out)[1][1:] == ["6.5", "12.04125"]


def test_spectrum_command_is_deterministic(capsys, tmp_path):
    argv = ["spectrum", "-s", "spectrum.method=iter-4", "-s", "spectrum.count=4", "-s", "baseline.n1=20",
            "-s", "baseline.n2=20"]
    first = run(capsys, *argv)[1]
    assert run(capsys, *argv)[1] == first
    table = rows(first)
    assert table[0] == ["n", "n1", "n2", "method", "energy", "numerical", "e_free", "delta"]
    assert [r[1:3] for r in table[1:]] == [["0", "0"], ["0", "1"], ["1", "0"], ["0", "2"]]
    out = tmp_path / "s.csv"
    assert main(argv + ["-o", str(out)]) == EXIT_OK
    assert out.read_text() == first


def test_sweep_command(capsys):
    code, out, _ = run(capsys, "sweep", "-s", "sweep.count=2", "-s", "sweep.levels=3", "-s", "baseline.n1=12",
                       "-s", "baseline.n2=12")
    table = rows(out)
    assert code == EXIT_OK and table[0] == ["lambda", "level", "n1", "n2", "E", "status"] and len(table) == 7
    code, out, _ = run(capsys, "sweep", "-s", "sweep.method=cutoff", "-s", "sweep.count=2", "-s", "sweep.levels=2",
                       "-s", "sweep.lambda_min=-1.0", "-s", "sweep.lambda_max=-0.1")
    status = [r[-1] for r in rows(out)[1:]]
    assert code == EXIT_OK and status == ["diverged", "diverged", "ok", "ok"]


def test_dynamics_command(capsys):
    code, out, _ = run(capsys, "dynamics", *SMALL_DYNAMICS)
    table = rows(out)
    assert code == EXIT_OK
    assert table[0] == ["kind", "lambda", "initial", "final", "t", "re", "im", "abs2", "oracle_abs2"]
    kinds = [r[0] for r in table[1:]]
    assert kinds == ["amplitude"] * 6 + ["residual"] * 3 + ["family"] * 3
    first = table[1]
    assert first[3:] == ["1,0", "0", "1", "0", "1", "1"]
    # parity-forbidden amplitude is exactly zero; the oracle's is zero to roundoff
    for r in table[4:7]:
        assert r[5:8] == ["0", "0", "0"] and float(r[8]) < 1e-30
    for r in table[7:10]:
        assert r[3] == "all" and r[6:] == ["", "", ""]
        float(r[5])
