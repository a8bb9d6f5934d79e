import csv
import io
import json
import math

import pytest

from fblmac import PcModel, Protocol, make_channel, optimize_k
from fblmac.cli import OPTIMIZE_COLUMNS, fmt, run
from fblmac.scenario import Scenario, ScenarioError, parse_scenario
from fblmac.throughput import RelayArm

TRIPLE_B = "snr_sd=0.2\nsnr_sr=0.5\nsnr_rd=1\nn=1000\n"


# --------------------------------------------------------------------------
# scenario parsing


def test_parse_defaults():
    sc = parse_scenario("protocol=cc\nsnr_sd=0.2\nsnr_sr=0.5\nsnr_rd=1\nn=1000")
    assert sc.protocol is Protocol.CC
    assert sc.omega_a == 0.5 and sc.lambda_a == 0.0 and sc.model is PcModel.SECOND
    assert sc.relay_arm is RelayArm.PUBLISHED and sc.sim is None and sc.l_max == 8


def test_parse_operating_point():
    sc = parse_scenario("protocol=baf_relay\nL=2\nk=227\n" + TRIPLE_B)
    assert (sc.k, sc.L, sc.n) == (227, 2, 1000)
    assert sc.links().snrs == (0.2, 0.5, 1.0)


def test_parse_comments_db_and_sim():
    sc = parse_scenario("# header\nprotocol = nc   # trailing\nsnr_sd_db=0\nn=100\n\n"
                        "slots=20000\nseed=7\n")
    assert sc.snr_sd == 1.0
    assert sc.sim.slots == 20000 and sc.sim.seed == 7 and sc.sim.warmup == 0.1
    # NC does not need relay links
    assert sc.links().sr.snr == 1.0


@pytest.mark.parametrize("text,needle", [
    ("snr_sd=-1", "snr_sd"),
    ("protocol=nc\nsnr_sd=1\nn=10\nbogus=3", "bogus"),
    ("protocol=nc\nsnr_sd=1\nsnr_sd_db=3\nn=10", "duplicate"),
    ("protocol=nc\nn=10", "snr_sd"),
    ("protocol=cc\nsnr_sd=1\nn=10", "snr_sr"),
    ("protocol=nc\nsnr_sd=1\nn=10\nlambda_a=1", "lambda_a"),
    ("protocol=nc\nsnr_sd=1\nn=10.5", "n"),
    ("protocol=nc\nsnr_sd=1\nn=10\nseed=4", "slots"),
    ("protocol=nc\nsnr_sd=1\nn=10\nslots=100", "slots"),
    ("protocol=tdma\nsnr_sd=1\nn=10", "protocol"),
    ("protocol=nc\nsnr_sd=1\nn", "key=value"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ScenarioError, match=needle):
        parse_scenario(text)


def test_parse_error_names_line():
    with pytest.raises(ScenarioError, match="line 3"):
        parse_scenario("protocol=nc\nsnr_sd=1\nsnr_sd=2\nn=5")


def test_scenario_sim_config():
    sc = parse_scenario("protocol=cc\n" + TRIPLE_B + "lambda_a=0.2\nslots=20000\nseed=3")
    cfg = sc.sim_config(100, 1, seed=9)
    assert cfg.seed == 9 and cfg.slots == 20000 and cfg.traffic.lambda_a == 0.2
    with pytest.raises(ScenarioError):
        Scenario(Protocol.NC, 1.0, 100).sim_config(10, 1)


# --------------------------------------------------------------------------
# command line


@pytest.fixture
def write_cfg(tmp_path):
    def _write(text, name="s.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return _write


def invoke(argv, capsys):
    code = run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fmt():
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(7) == "7" and fmt(True) == "1" and fmt(Protocol.CC) == "cc"
    assert fmt(1e-20) == "1e-20"


def test_optimize_nc_matches_core(write_cfg, capsys):
    code, out, _ = invoke(["optimize", "--config", write_cfg("protocol=nc\nsnr_sd=1\nn=1000\n")],
                          capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == OPTIMIZE_COLUMNS
    assert len(rows) == 1 + 1000 + 1
    best = rows[-1]
    assert best[-1] == "*"
    assert int(best[2]) == optimize_k(1000, make_channel(1))[0]
    assert sum(r[-1] == "*" for r in rows) == 1


@pytest.mark.parametrize("snrs,k", [("snr_sd=0.2\nsnr_sr=0.35\nsnr_rd=1\n", 182),
                                    ("snr_sd=0.2\nsnr_sr=0.5\nsnr_rd=1\n", 227)])
def test_optimize_baf_relay_operating_points(write_cfg, capsys, snrs, k):
    path = write_cfg("protocol=baf_relay\nn=1000\n" + snrs)
    code, out, _ = invoke(["optimize", "--config", path, "--best-only"], capsys)
    assert code == 0
    best = out.splitlines()[-1].split(",")
    assert (int(best[2]), int(best[3])) == (k, 2)


def test_csv_format(write_cfg, capsys):
    path = write_cfg("protocol=cc\nn=200\n" + TRIPLE_B.replace("n=1000\n", ""))
    _, out, _ = invoke(["optimize", "--config", path], capsys)
    assert "\r" not in out and out.endswith("\n")
    for line in out.splitlines():
        assert line == line.rstrip()
        assert ";" not in line
    value = out.splitlines()[50].split(",")[8]
    assert value == f"{float(value):.10g}"


def test_output_file_is_byte_identical(write_cfg, tmp_path, capsys):
    path = write_cfg("protocol=baf_source\nl_max=3\n" + TRIPLE_B)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["optimize", "--config", path, "--out", str(a)]) == 0
    assert run(["optimize", "--config", path, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_throughput_command(write_cfg, capsys):
    code, out, _ = invoke(["throughput", "--config",
                           write_cfg("protocol=baf_relay\nk=227\nL=2\n" + TRIPLE_B)], capsys)
    assert code == 0
    row = out.splitlines()[1].split(",")
    assert row[0] == "baf_relay" and row[9] == "relay"
    assert float(row[8]) == pytest.approx(0.220851, rel=1e-5)
    code, _, err = invoke(["throughput", "--config", write_cfg("protocol=cc\n" + TRIPLE_B)], capsys)
    assert code == 1 and "k" in err


def test_stability_command(write_cfg, capsys):
    path = write_cfg("protocol=baf_relay\nk=182\nL=2\nsnr_sd=0.2\nsnr_sr=0.35\nsnr_rd=1\n"
                     "n=1000\nlambda_a=0.4\nlambda_b=0.4\n")
    code, out, _ = invoke(["stability", "--config", path], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["disagree"] is True
    assert d["published"]["stable"] is True and d["rederived"]["stable"] is False
    assert out == json.dumps(d, sort_keys=True, indent=2) + "\n"


def test_simulate_nc_stable_and_deterministic(write_cfg, capsys):
    pc = 0.9380939  # success probability at k=457, n=1000, snr=1
    lam = 0.95 * pc / 2
    path = write_cfg(f"protocol=nc\nsnr_sd=1\nn=1000\nk=457\nlambda_a={lam}\nlambda_b={lam}\n"
                     "slots=1000000\nseed=4\n")
    code, out, _ = invoke(["simulate", "--config", path], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["stable"] is True and d["verdict"]["stable"] is True and d["agree"] is True
    assert d["report"]["conservation"]["arrived"] == (d["report"]["conservation"]["delivered"]
                                                      + d["report"]["conservation"]["backlogged"])
    _, again, _ = invoke(["simulate", "--config", path], capsys)
    assert again == out


def test_simulate_seed_override(write_cfg, capsys):
    path = write_cfg("protocol=nc\nsnr_sd=1\nn=1000\nk=457\nlambda_a=0.2\nslots=20000\n")
    _, a, _ = invoke(["simulate", "--config", path, "--seed", "1"], capsys)
    _, b, _ = invoke(["simulate", "--config", path, "--seed", "2"], capsys)
    assert json.loads(a)["seed"] == 1 and a != b


def test_simulate_dead_relay_unstable(write_cfg, capsys):
    path = write_cfg("protocol=cc\nsnr_sd=0.2\nsnr_sr=0.5\nsnr_rd=1e-9\nn=1000\nk=260\n"
                     "lambda_a=0.15\nlambda_b=0.15\nslots=300000\n")
    code, out, _ = invoke(["simulate", "--config", path], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["classification"] == "unstable" and d["verdict"]["stable"] is False


def test_simulate_indeterminate_exit_code(write_cfg, capsys):
    # load exactly at the boundary with a short horizon lands in the grey zone
    pc = 0.9380939
    codes = set()
    for seed in range(1, 8):
        path = write_cfg(f"protocol=nc\nsnr_sd=1\nn=1000\nk=457\nlambda_a={pc / 2}\n"
                         f"lambda_b={pc / 2}\nslots=100000\nseed={seed}\n")
        code, out, _ = invoke(["simulate", "--config", path], capsys)
        codes.add(code)
        if code == 3:
            assert json.loads(out)["classification"] == "indeterminate"
    assert 3 in codes and codes <= {0, 3}


def test_exit_code_input_errors(write_cfg, capsys):
    code, _, err = invoke(["optimize", "--config", write_cfg("snr_sd=-1\n")], capsys)
    assert code == 1 and "snr_sd" in err
    code, _, _ = invoke(["optimize", "--config", "/nonexistent/file.cfg"], capsys)
    assert code == 1
    code, _, _ = invoke(["simulate", "--config", write_cfg("protocol=nc\nsnr_sd=1\nn=100\n")],
                        capsys)
    assert code == 1


def test_exit_code_numerical_error(monkeypatch, capsys):
    from fblmac import cli
    from fblmac.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("did not converge")
    monkeypatch.setattr(cli, "fit_constants", boom)
    code, _, err = invoke(["fit"], capsys)
    assert code == 2 and "converge" in err


def test_fit_command(capsys):
    code, out, _ = invoke(["fit"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["linear"]["delta1"] == pytest.approx(1.545, abs=0.01)
    assert d["quadratic"]["theta1"] == pytest.approx(2.35, abs=0.01)


def test_sweep_in_axis_order_any_jobs(write_cfg, capsys):
    path = write_cfg("protocol=cc\n" + TRIPLE_B)
    _, serial, _ = invoke(["sweep", "--config", path, "--axis", "n", "--range", "200:1000:200"],
                          capsys)
    _, parallel, _ = invoke(["sweep", "--config", path, "--axis", "n",
                             "--range", "200:1000:200", "--jobs", "3"], capsys)
    assert serial == parallel
    ns = [int(line.split(",")[1]) for line in serial.splitlines()[1:]]
    assert ns == [200, 400, 600, 800, 1000]


def test_sweep_lambda_and_validation(write_cfg, capsys):
    path = write_cfg("protocol=nc\nsnr_sd=1\nn=1000\nk=457\n")
    code, out, _ = invoke(["sweep", "--config", path, "--axis", "lambda",
                           "--values", "0.5,0.9,0.95"], capsys)
    assert code == 0
    stable = [line.split(",")[3] for line in out.splitlines()[1:]]
    assert stable == ["1", "1", "0"]
    code, _, _ = invoke(["sweep", "--config", path, "--axis", "lambda", "--values", "0.5,0.4"],
                        capsys)
    assert code == 1
    code, _, _ = invoke(["sweep", "--config", path, "--axis", "n"], capsys)
    assert code == 1


def test_sweep_snr_and_batch(write_cfg, capsys):
    path = write_cfg("protocol=baf_relay\nk=200\n" + TRIPLE_B)
    code, out, _ = invoke(["sweep", "--config", path, "--axis", "L", "--values", "1,2,3"], capsys)
    assert code == 0 and [r.split(",")[3] for r in out.splitlines()[1:]] == ["1", "2", "3"]
    code, out, _ = invoke(["sweep", "--config", path, "--axis", "snr_rd", "--values", "0.5,1,2"],
                          capsys)
    assert code == 0 and len(out.splitlines()) == 4


# --------------------------------------------------------------------------
# figure datasets


def _dataset(figure, capsys):
    code, out, _ = invoke(["reproduce", figure], capsys)
    assert code == 0
    lines = out.splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return comments, rows


def test_fig2_row_at_1000(capsys):
    comments, rows = _dataset("fig2", capsys)
    assert "# snr=1" in comments
    row = next(r for r in rows if r["n"] == "1000")
    k_star = int(row["k_exhaustive"])
    assert int(row["k_linear"]) == 457
    assert abs(int(row["k_quadratic"]) - k_star) / k_star <= 0.02
    assert abs(int(row["k_linear"]) - k_star) / k_star <= 0.05
    assert len(rows) == 40


def test_fig3_columns(capsys):
    _, rows = _dataset("fig3", capsys)
    assert list(rows[0]) == ["n", "u_exhaustive", "u_linear", "u_quadratic"]


def test_fig4b_cc_gain(capsys):
    comments, rows = _dataset("fig4b", capsys)
    assert "# snr_sr=0.5" in comments and "# n=1000" in comments
    cc = max(float(r["u_cc"]) for r in rows)
    nc = max(float(r["u_nc"]) for r in rows)
    assert cc / nc == pytest.approx(1.25, rel=0.1)
    assert len(rows) == 1000


def test_fig6a_baf_gain(capsys):
    _, rows = _dataset("fig6a", capsys)
    baf = max(float(r[f"u_baf_L{L}"]) for r in rows for L in (1, 2, 3, 4))
    cc = max(float(r["u_cc"]) for r in rows)
    assert baf / cc == pytest.approx(1.75, rel=0.1)
    # L=1 column reproduces CC exactly
    assert all(math.isclose(float(r["u_baf_L1"]), float(r["u_cc"]), rel_tol=1e-9, abs_tol=1e-12)
               for r in rows)


def test_reproduce_is_byte_identical(capsys):
    _, a, _ = invoke(["reproduce", "fig6b"], capsys)
    _, b, _ = invoke(["reproduce", "fig6b"], capsys)
    assert a == b


def test_reproduce_rejects_unknown_figure(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["reproduce", "fig9"])
    assert exc.value.code == 1
