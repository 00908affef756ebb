import csv
import io
import json

import pytest

from gtpac.cli import EXIT_OK, EXIT_UNSAT, EXIT_USAGE, main, parse_var
from gtpac.cli import UsageError
from gtpac.figures import REGISTRY, build_figure, resolve_params
from gtpac.montecarlo import parse_curve_csv
from gtpac.core import InvalidParameter


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bound_coma_reference(capsys):
    code, out, _ = run(capsys, "bound", "--algo", "coma", "--n", "2500", "--k", "50", "--eps", "0", "--delta", "0.09", "--p", "0.02")
    assert code == EXIT_OK
    data = json.loads(out)
    assert abs(data["m_s"] - 1400) <= 14
    assert data["intermediates"]["g_eps"] == 0
    assert data["intermediates"]["saturated"] is False


def test_bound_intermediate_names(capsys):
    _, out, _ = run(capsys, "bound", "--algo", "cbp", "--n", "2500", "--k", "50", "--eps", "0.01", "--delta", "0.1")
    inter = json.loads(out)["intermediates"]
    assert {"g_eps", "chi", "C", "eta", "c", "s_star", "saturated"} <= set(inter)
    _, out, _ = run(capsys, "bound", "--algo", "dd", "--n", "2500", "--k", "50", "--eps", "0", "--delta", "1e-3", "--p", "0.02")
    data = json.loads(out)
    assert {"d_eps", "g_bar", "g_tilde"} <= set(data["intermediates"])
    _, out, _ = run(capsys, "bound", "--algo", "coma", "--n", "2500", "--k", "50", "--eps", "0.01", "--delta", "0.1", "--optimize-p")
    assert "p_opt" in json.loads(out)["intermediates"]


def test_dd_bound_matches_library_and_figure(capsys):
    from gtpac import pacbounds as pb
    from gtpac.core import PacTarget

    _, out, _ = run(capsys, "bound", "--algo", "dd", "--n", "2500", "--k", "50", "--eps", "0", "--delta", "1e-3", "--p", "0.02")
    m_cli = json.loads(out)["m_s"]
    assert m_cli == pb.dd_sufficient_tests(2500, 50, 0.02, PacTarget(0.0, 1e-3)).m_s
    fig = build_figure("dd", {"trials": 0, "log_inv_delta_min": 6.907755278982137, "log_inv_delta_max": 6.907755278982137, "points": 1, "budgets": [0]})
    bound_rows = [r for r in fig.rows if r[1] == "bound"]
    assert bound_rows[0][4] == pytest.approx(m_cli / 2500)


def test_bound_missing_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "bound", "--algo", "coma", "--k", "50", "--eps", "0", "--delta", "0.1")
    assert code == EXIT_USAGE
    assert "--n" in err


def test_bound_invalid_value(capsys):
    code, _, _ = run(capsys, "bound", "--algo", "coma", "--n", "2500", "--k", "50", "--eps", "0", "--delta", "1.5")
    assert code == EXIT_USAGE


def test_bound_unsatisfiable_exit_code(capsys, monkeypatch):
    from gtpac import pacbounds as pb
    from gtpac.core import Unsatisfiable

    def boom(*a, **k):
        raise Unsatisfiable("no m")

    monkeypatch.setattr(pb, "dd_sufficient_tests", boom)
    code, _, _ = run(capsys, "bound", "--algo", "dd", "--n", "100", "--k", "5", "--eps", "0", "--delta", "0.1")
    assert code == EXIT_UNSAT


def test_no_command(capsys):
    assert run(capsys)[0] == EXIT_USAGE
    assert run(capsys, "bogus")[0] == EXIT_USAGE


SIM = ["simulate", "--n", "200", "--k", "5", "--decoder", "coma", "--m", "60", "--trials", "150", "--seed", "7"]


def test_simulate_threads_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *SIM, "--threads", "1", "--out", str(a))[0] == EXIT_OK
    assert run(capsys, *SIM, "--threads", "8", "--out", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_simulate_grid_csv_roundtrip(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "200", "--k", "5", "--decoder", "dd", "--m-grid", "20,60", "--trials", "40")
    assert code == EXIT_OK
    rows = parse_curve_csv(out)
    assert [r["m"] for r in rows] == [20, 60]
    assert all(r["budget_kind"].value == "fn" and r["trials"] == 40 for r in rows)


def test_simulate_default_trials(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "30", "--k", "2", "--decoder", "cbp", "--m", "3")
    assert code == EXIT_OK
    assert parse_curve_csv(out)[0]["trials"] == 1000


def test_simulate_budget_direction_mismatch(capsys):
    code, _, _ = run(capsys, "simulate", "--n", "200", "--k", "5", "--decoder", "dd", "--m", "10", "--budget-kind", "fp")
    assert code == EXIT_USAGE


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 2500, "k": 50, "eps": 0, "delta": 0.27, "p": 0.02, "algo": "coma"}))
    _, out, _ = run(capsys, "bound", "--config", str(cfg))
    from_config = json.loads(out)["m_s"]
    _, out, _ = run(capsys, "bound", "--config", str(cfg), "--delta", "0.09")
    from_flag = json.loads(out)["m_s"]
    assert abs(from_config - 1250) <= 13 and abs(from_flag - 1400) <= 14
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nope": 1}))
    assert run(capsys, "bound", "--config", str(bad))[0] == EXIT_USAGE


def test_threads_env_variable(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("GTPAC_THREADS", "1")
    run(capsys, *SIM, "--out", str(a))
    monkeypatch.setenv("GTPAC_THREADS", "4")
    run(capsys, *SIM, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("GTPAC_THREADS", "-2")
    assert run(capsys, *SIM)[0] == EXIT_USAGE


SMALL_COMA = ["--set", "trials=30", "--set", "points=5", "--set", "m_points=4", "--set", "n=300", "--set", "k=6"]


def test_figure_reruns_byte_identical(tmp_path, capsys):
    d1, d2 = tmp_path / "one", tmp_path / "two"
    assert run(capsys, "figure", "coma", "--out", str(d1), "--threads", "1", *SMALL_COMA)[0] == EXIT_OK
    assert run(capsys, "figure", "coma", "--out", str(d2), "--threads", "3", *SMALL_COMA)[0] == EXIT_OK
    for name in ("fig3.csv", "fig3.svg"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    svg = (d1 / "fig3.svg").read_text()
    assert "log(1/delta)" in svg and "testing rate" in svg


def test_figure_list_and_unknown(capsys):
    code, out, _ = run(capsys, "figure", "--list")
    assert code == EXIT_OK and "minlp\tfig1" in out
    assert run(capsys, "figure", "nope")[0] == EXIT_USAGE
    assert run(capsys, "figure", "coma", "--set", "trials=abc")[0] == EXIT_USAGE
    assert run(capsys, "figure", "coma", "--set", "unknown=1")[0] == EXIT_USAGE


def test_figure_dropped_points_exit_code(tmp_path, capsys, monkeypatch):
    from gtpac import pacbounds as pb
    from gtpac.core import Unsatisfiable

    real = pb.sufficient_tests

    def flaky(algorithm, n, k, target, **kw):
        if target.delta < 0.01:
            raise Unsatisfiable("capped")
        return real(algorithm, n, k, target, **kw)

    monkeypatch.setattr(pb, "sufficient_tests", flaky)
    code, _, err = run(capsys, "figure", "cbp", "--out", str(tmp_path), "--set", "trials=0", "--set", "points=6")
    assert code == EXIT_UNSAT
    assert "dropped" in err
    assert (tmp_path / "fig4.csv").exists()


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--var", "delta=0.01:0.1:3:log", "--algo", "coma", "--algo", "dd", "--n", "2500", "--k", "50", "--output", "m_s", "--output", "rho_r")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3 * 2 * 2
    assert set(rows[0]) == {"delta", "algorithm", "quantity", "value"}


def test_sweep_beta(capsys):
    code, out, _ = run(capsys, "sweep", "--var", "beta=0.2:0.5:3", "--var", "n=1000:100000:3:log", "--algo", "dd", "--delta", "1e-3")
    assert code == EXIT_OK
    assert len(out.strip().splitlines()) == 1 + 9


def test_sweep_empty_and_malformed(capsys):
    code, out, _ = run(capsys, "sweep", "--var", "n=100:200:0", "--k", "5")
    assert code == EXIT_OK and out == "n,algorithm,quantity,value\n"
    assert run(capsys, "sweep", "--var", "n=100:200")[0] == EXIT_USAGE
    assert run(capsys, "sweep", "--var", "zeta=1:2:3")[0] == EXIT_USAGE
    assert run(capsys, "sweep", "--var", "n=a:b:3")[0] == EXIT_USAGE


def test_parse_var():
    assert parse_var("n=10:30:3") == ("n", [10, 20, 30])
    name, vals = parse_var("delta=0.001:0.1:3:log")
    assert vals == pytest.approx([0.001, 0.01, 0.1])
    with pytest.raises(UsageError):
        parse_var("delta=0:1:3:log")


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == EXIT_OK
    assert "FAIL" not in out and out.count("PASS") == 5


def test_figure_override_type_checks():
    assert resolve_params("coma", {"trials": 5})["trials"] == 5
    assert resolve_params("minlp", {"delta": 1})["delta"] == 1.0
    with pytest.raises(InvalidParameter):
        resolve_params("coma", {"trials": 1.5})
    with pytest.raises(InvalidParameter):
        resolve_params("coma", {"budgets": ["a"]})
    with pytest.raises(InvalidParameter):
        resolve_params("coma", {"trials": True})


def test_every_figure_registered_with_number():
    numbers = {fid: f.number for fid, f in REGISTRY.items()}
    assert numbers == {
        "minlp": 1, "cbp_eta_approx": 2, "coma": 3, "cbp": 4, "dd": 5, "approx_error": 6,
        "delta_eps": 7, "eta_vs_p": 8, "eta_surface": 9, "eta_vs_n": 10, "gtilde": 11,
        "surfaces": 12, "rate_vs_n": 15,
    }
