import pytest

from pathfunc.cli import main
from pathfunc.config import (parse_config_text, serialize_config)
from pathfunc.errors import ConfigError

CONSTANT_CFG = """
model.kind = gbm
model.r = 0.0
model.sigma = 0.2
model.x0 = 1.0
scheme.kind = euler
scheme.h = 0.125
functional.payoff = constant
functional.strike = 2.5
run.n_paths = 64
run.seed = 3
run.workers = 1
output.format = csv
run.timing = off
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfigParsing:
    def test_number_forms(self):
        cfg = parse_config_text("scheme.h = 1/12288\nrun.h_grid = 2^-5, 2^-7\n")
        assert cfg.get("scheme", "h") == pytest.approx(1.0 / 12288)
        assert cfg.get("run", "h_grid") == [2**-5, 2**-7]

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("scheme.stepsize = 0.1\n")
        with pytest.raises(ConfigError):
            parse_config_text("grid.h = 0.1\n")

    def test_comments_and_blanks(self):
        cfg = parse_config_text("# comment\n\nmodel.kind = gbm  # trailing\n")
        assert cfg.get("model", "kind") == "gbm"

    def test_round_trip_identity(self):
        text = CONSTANT_CFG + "scheme.cap = 1/h\nrun.h_grid = 0.1,0.05,0.025\n"
        cfg = parse_config_text(text)
        again = parse_config_text(serialize_config(cfg))
        assert again.values == cfg.values
        assert serialize_config(again) == serialize_config(cfg)

    def test_missing_required_key(self):
        cfg = parse_config_text("model.kind = gbm\n")
        with pytest.raises(ConfigError):
            cfg.require("scheme", "h")

    def test_bad_number(self):
        with pytest.raises(ConfigError):
            parse_config_text("scheme.h = fast\n")


class TestCliPrice:
    def test_constant_payoff_exact(self, tmp_path, capsys):
        path = write(tmp_path, "c.cfg", CONSTANT_CFG)
        assert main(["price", path]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0] == "h,mean,stderr,ci_lo,ci_hi,n,elapsed"
        fields = out[1].split(",")
        assert float(fields[1]) == 2.5 and float(fields[2]) == 0.0

    def test_missing_h_is_config_error(self, tmp_path, capsys):
        path = write(tmp_path, "bad.cfg", "model.kind = gbm\nmodel.x0 = 1\nrun.n_paths = 16\n")
        assert main(["price", path]) == 64

    def test_unknown_key_is_config_error(self, tmp_path):
        path = write(tmp_path, "bad.cfg", "scheme.stepsize = 0.5\n")
        assert main(["price", path]) == 64

    def test_missing_file_is_config_error(self):
        assert main(["price", "/nonexistent/nowhere.cfg"]) == 64

    def test_deterministic_bytes_with_timing_off(self, tmp_path, capsys):
        path = write(tmp_path, "c.cfg", CONSTANT_CFG)
        main(["price", path])
        first = capsys.readouterr().out
        main(["price", path])
        second = capsys.readouterr().out
        assert first == second

    def test_seed_override_changes_result(self, tmp_path, capsys):
        cfg = CONSTANT_CFG.replace("functional.payoff = constant",
                                   "functional.payoff = terminal_call")
        cfg = cfg.replace("functional.strike = 2.5", "functional.strike = 0.9")
        cfg = cfg.replace("run.n_paths = 64", "run.n_paths = 512\nrun.allow_linear = true")
        path = write(tmp_path, "c.cfg", cfg)
        main(["price", path, "--seed", "1"])
        a = capsys.readouterr().out
        main(["price", path, "--seed", "2"])
        b = capsys.readouterr().out
        assert a != b

    def test_workers_env_override(self, tmp_path, capsys, monkeypatch):
        cfg = CONSTANT_CFG.replace("functional.payoff = constant",
                                   "functional.payoff = terminal_call")
        cfg = cfg.replace("run.n_paths = 64", "run.n_paths = 500\nrun.allow_linear = true")
        path = write(tmp_path, "c.cfg", cfg)
        main(["price", path])
        one = capsys.readouterr().out.splitlines()[-1].split(",")
        monkeypatch.setenv("PATHFUNC_WORKERS", "4")
        main(["price", path])
        four = capsys.readouterr().out.splitlines()[-1].split(",")
        assert abs(float(one[1]) - float(four[1])) <= 1e-12 * max(1.0, abs(float(one[1])))


class TestCliCheck:
    def test_gbm_all_schemes_pass(self, tmp_path, capsys):
        text = (
            "model.kind = gbm\nmodel.r = 0.1\nmodel.sigma = 0.3\nmodel.x0 = 0.8\n"
            "scheme.kind = euler\nscheme.h = 2^-6\n"
            "functional.payoff = terminal_identity\n"
            "check.kinds = all\ncheck.n_draws = 100000\nrun.seed = 5\n"
        )
        path = write(tmp_path, "check.cfg", text)
        assert main(["check", path]) == 0
        out = capsys.readouterr().out
        assert out.count("pass") >= 3

    def test_capped_reciprocal_bessel_fails_with_exit_2(self, tmp_path, capsys):
        text = (
            "model.kind = inverse_bessel3\nmodel.z0 = 1.0\n"
            "scheme.kind = euler\nscheme.h = 2^-6\nscheme.cap = 1/h\n"
            "functional.payoff = terminal_identity\n"
            "check.kinds = config\nrun.seed = 5\nrun.h_grid = 2^-4, 2^-6\n"
            "ui.n_paths = 5000\n"
        )
        path = write(tmp_path, "check.cfg", text)
        assert main(["check", path]) == 2
        assert "FAIL" in capsys.readouterr().out

    def test_band_violation_surfaces(self, tmp_path, capsys):
        text = (
            "model.kind = gbm\nmodel.r = 0.1\nmodel.sigma = 0.3\nmodel.x0 = 0.8\n"
            "scheme.kind = binomial_variable\nscheme.h = 2^-6\n"
            "functional.payoff = terminal_identity\n"
            "check.kinds = config\ncheck.probes_y = 0.01\ncheck.probes_t = 0.0\n"
            "run.seed = 5\n"
        )
        path = write(tmp_path, "check.cfg", text)
        assert main(["check", path]) == 2
        assert "band" in capsys.readouterr().out


class TestCliCounterexample:
    def test_tangency(self, capsys):
        assert main(["counterexample", "tangency"]) == 0
        out = capsys.readouterr().out
        assert "0.5" in out and "C4" in out

    def test_bessel(self, capsys):
        assert main(["counterexample", "bessel", "--paths", "40000", "--seed", "2"]) == 0
        out = capsys.readouterr().out
        assert "oracle" in out and "0.68" in out

    def test_strong_small(self, capsys):
        assert main(["counterexample", "strong", "--paths", "40"]) == 0
        assert "increasing: True" in capsys.readouterr().out


class TestCliConverge:
    def test_tangency_pseudo_scheme_flags_nonconvergence(self, tmp_path, capsys):
        text = "model.kind = tangency\nscheme.kind = euler\nscheme.h = 0.1\nrun.h_grid = 0.1, 0.01, 0.001\n"
        path = write(tmp_path, "t.cfg", text)
        assert main(["converge", path]) == 0
        out = capsys.readouterr().out
        assert "non_convergence_flag = True" in out

    def test_grid_minimum_enforced(self, tmp_path, capsys):
        text = (
            "model.kind = gbm\nmodel.r = 0.0\nmodel.sigma = 0.2\nmodel.x0 = 1.0\n"
            "scheme.kind = euler\nscheme.h = 0.1\n"
            "functional.payoff = constant\nfunctional.strike = 1.0\n"
            "run.n_paths = 16\nrun.h_grid = 0.1, 0.05\n"
        )
        path = write(tmp_path, "c.cfg", text)
        assert main(["converge", path]) == 1  # precondition error at runtime

    def test_small_convergence_run_with_oracle(self, tmp_path, capsys):
        text = (
            "model.kind = gbm\nmodel.r = 0.1\nmodel.sigma = 0.3\nmodel.x0 = 0.8\n"
            "scheme.kind = euler\nscheme.h = 2^-4\n"
            "functional.payoff = up_in_call\nfunctional.strike = 0.5\n"
            "functional.barrier_level = 1.0\n"
            "run.n_paths = 2000\nrun.seed = 4\nrun.h_grid = 2^-4, 2^-5, 2^-6\n"
            "run.oracle = auto\nrun.allow_linear = true\noutput.format = csv\n"
        )
        path = write(tmp_path, "c.cfg", text)
        assert main(["converge", path]) == 0
        out = capsys.readouterr().out
        assert "oracle = 0.2629996714" in out


class TestCliSkorohodDist:
    def test_distance_of_shifted_steps(self, tmp_path, capsys):
        a = write(tmp_path, "a.csv", "t,value\n0,0\n0.5,1\n1,1\n")
        b = write(tmp_path, "b.csv", "0,0\n0.51,1\n1,1\n")
        assert main(["skorohod-dist", a, b]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.01, abs=1e-12)
