import csv
import io
import json
import math

import numpy as np
import pytest

from poprec import __version__
from poprec.analysis import BoundRow, lossy_t_bounds, write_bound_table
from poprec.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, build_parser, main
from poprec.estimators import read_batch, write_batch
from poprec.minimax import FunctionalVector, delta_of_t, format_record, parse_record, record_of, synthesize_estimator, t_of_delta
from poprec.model import ChannelModel, HypercubeDistribution, build_phi_lossy, build_phi_noisy, read_distribution
from poprec.recovery import CachedEstimatorFactory, RecoveryConfig, recover_population
from poprec.simharness import ExperimentConfig, apply_channel, run_experiment, sample_hypercube


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.strip() == f"poprec {__version__}"

    @pytest.mark.parametrize(
        "sub,flags",
        [
            ("phi", ["--model", "--eps", "--d", "--exact", "--out"]),
            ("synthesize", ["--model", "--eps", "--d", "--n", "--exact", "--out"]),
            ("lp-value", ["--model", "--eps", "--d", "--delta", "--t", "--dual-tilde"]),
            ("bounds", ["--model", "--eps", "--delta", "--d"]),
            ("lecam", ["--eps", "--delta", "--d", "--out"]),
            ("simulate", ["--config", "--seed", "--out"]),
            ("recover", ["--samples", "--model", "--eps", "--delta", "--tau", "--estimator", "--out"]),
            ("selftest", []),
        ],
    )
    def test_help_lists_flags(self, capsys, sub, flags):
        with pytest.raises(SystemExit):
            main([sub, "--help"])
        text = capsys.readouterr().out
        for flag in flags:
            assert flag in text

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["phi", "--model", "lossy", "--eps", "0.5", "--d", "2", "--bogus"])
        assert exc.value.code == EXIT_USAGE
        assert "unrecognized" in capsys.readouterr().err

    def test_exclusive_budget_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["lp-value", "--model", "lossy", "--eps", "0.3", "--d", "5", "--delta", "0.1", "--t", "0.1"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE

    def test_parser_has_every_subcommand(self):
        text = build_parser().format_help()
        for sub in ("phi", "synthesize", "lp-value", "bounds", "lecam", "simulate", "recover", "selftest"):
            assert sub in text


class TestPhi:
    def test_example(self, capsys, tmp_path):
        path = tmp_path / "phi.csv"
        code, _, _ = run(capsys, "phi", "--model", "lossy", "--eps", "0.5", "--d", "2", "--out", str(path))
        assert code == EXIT_OK
        rows = [[float(v) for v in r] for r in csv.reader(open(path))]
        np.testing.assert_allclose(rows, [[1.0, 0.5, 0.25], [0.0, 0.5, 0.5], [0.0, 0.0, 0.25]], atol=1e-15)

    def test_exact(self, capsys):
        code, out, _ = run(capsys, "phi", "--model", "noisy", "--eps", "1/4", "--d", "1", "--exact")
        assert code == EXIT_OK
        assert out.splitlines() == ["3/4,1/4", "1/4,3/4"]

    def test_byte_identical(self, capsys):
        _, out, _ = run(capsys, "phi", "--model", "noisy", "--eps", "0.2", "--d", "4")
        buf = io.StringIO()
        w = csv.writer(buf)
        for row in build_phi_noisy(4, 0.2).entries:
            w.writerow([repr(float(v)) for v in row])
        assert out == buf.getvalue()

    def test_bad_epsilon(self, capsys):
        code, _, err = run(capsys, "phi", "--model", "lossy", "--eps", "1.5", "--d", "2")
        assert code == EXIT_USAGE and err


class TestSynthesize:
    def test_record_matches_library(self, capsys):
        code, out, err = run(capsys, "synthesize", "--model", "lossy", "--eps", "0.6", "--d", "5", "--n", "1000")
        assert code == EXIT_OK
        phi = build_phi_lossy(5, 0.6)
        want = format_record(record_of(synthesize_estimator(phi, FunctionalVector.e0(5), 1000), phi))
        assert out == want + "\n"
        assert "value" in err

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "g.txt"
        code, out, _ = run(capsys, "synthesize", "--model", "noisy", "--eps", "0.1", "--d", "3", "--n", "100", "--out", str(path))
        assert code == EXIT_OK and out == ""
        rec = parse_record(path.read_text().strip())
        assert rec.d == 3 and len(rec.vector) == 4

    def test_bad_n(self, capsys):
        code, _, _ = run(capsys, "synthesize", "--model", "lossy", "--eps", "0.6", "--d", "5", "--n", "0.5")
        assert code == EXIT_USAGE


class TestLpValue:
    def test_low_erasure_example(self, capsys):
        code, out, _ = run(capsys, "lp-value", "--model", "lossy", "--eps", "0.3", "--d", "5", "--delta", "0.1")
        assert code == EXIT_OK
        assert float(out) == pytest.approx(0.1, abs=1e-9)

    def test_modulus(self, capsys):
        _, out, _ = run(capsys, "lp-value", "--model", "noisy", "--eps", "0.2", "--d", "6", "--t", "0.01")
        assert out == f"{delta_of_t(build_phi_noisy(6, 0.2), FunctionalVector.e0(6), 0.01).value:.12g}\n"

    def test_dual_tilde_not_below_floor(self, capsys):
        _, out, _ = run(capsys, "lp-value", "--model", "lossy", "--eps", "0.7", "--d", "6", "--t", "0.05", "--dual-tilde")
        assert float(out) >= 0.5 * 0.05 - 1e-12

    def test_dual_tilde_with_delta(self, capsys):
        code, _, err = run(capsys, "lp-value", "--model", "lossy", "--eps", "0.3", "--d", "5", "--delta", "0.1", "--dual-tilde")
        assert code == EXIT_USAGE and "--dual-tilde" in err

    def test_infeasible_is_numeric_failure(self, capsys):
        code, _, err = run(capsys, "lp-value", "--model", "lossy", "--eps", "0.3", "--d", "2", "--delta", "2")
        assert code == EXIT_NUMERIC and "numerical failure" in err


class TestBounds:
    def test_lossy_with_lp(self, capsys):
        code, out, _ = run(capsys, "bounds", "--model", "lossy", "--eps", "0.75", "--delta", "0.1", "--d", "20")
        assert code == EXIT_OK
        b = lossy_t_bounds(0.1, 0.75)
        t = t_of_delta(build_phi_lossy(20, 0.75), 0.1).value
        buf = io.StringIO()
        write_bound_table([BoundRow("lossy", 0.75, 0.1, 20, t, b.lower, b.upper, b.trivial_cap)], stream=buf)
        assert out == buf.getvalue()

    def test_lossy_without_d(self, capsys):
        _, out, _ = run(capsys, "bounds", "--model", "lossy", "--eps", "0.3", "--delta", "0.1")
        row = next(csv.DictReader(io.StringIO(out)))
        assert math.isnan(float(row["lp_value"]))
        assert float(row["lower_bound"]) == pytest.approx(0.1)

    def test_noisy_requires_d(self, capsys):
        code, _, err = run(capsys, "bounds", "--model", "noisy", "--eps", "0.25", "--delta", "0.1")
        assert code == EXIT_USAGE and "--d" in err

    def test_noisy_degenerate(self, capsys):
        code, _, _ = run(capsys, "bounds", "--model", "noisy", "--eps", "0.5", "--delta", "0.1", "--d", "5")
        assert code == EXIT_USAGE


class TestLeCam:
    def test_pair_file(self, capsys, tmp_path):
        path = tmp_path / "pair.csv"
        code, _, _ = run(capsys, "lecam", "--eps", "0.7", "--delta", "0.05", "--d", "42", "--out", str(path))
        assert code == EXIT_OK
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# separation=")
        rows = list(csv.DictReader(lines[1:]))
        assert len(rows) == 43
        assert sum(float(r["pi"]) for r in rows) == pytest.approx(1.0)

    def test_precondition(self, capsys):
        code, _, err = run(capsys, "lecam", "--eps", "0.7", "--delta", "0.05", "--d", "10")
        assert code == EXIT_USAGE and "d >=" in err


class TestSimulate:
    DOC = {
        "model": "lossy",
        "epsilon": 0.25,
        "d": 4,
        "distribution": {"support": {"0000": 0.5, "1100": 0.5}},
        "n_grid": [100, 1000],
        "trials": 20,
        "estimator": "LP",
        "seed": 0,
    }

    def test_matches_library(self, capsys, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(self.DOC))
        out = tmp_path / "rows.csv"
        code, _, _ = run(capsys, "simulate", "--config", str(cfg_path), "--seed", "42", "--out", str(out))
        assert code == EXIT_OK
        res = run_experiment(ExperimentConfig.from_dict({**self.DOC, "seed": 42}))
        res.write_rows(tmp_path / "want.csv")
        res.write_summary(tmp_path / "want.summary.csv")
        assert out.read_bytes() == (tmp_path / "want.csv").read_bytes()
        assert (tmp_path / "rows.csv.summary.csv").read_bytes() == (tmp_path / "want.summary.csv").read_bytes()

    def test_stdout_summary(self, capsys, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(self.DOC))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg_path), "--seed", "1")
        assert code == EXIT_OK
        assert out.splitlines()[0] == "n,mse,stderr,certificate_upper"
        assert len(out.splitlines()) == 3

    def test_seed_required(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--config", "x.json"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_config(self, capsys, tmp_path):
        code, _, _ = run(capsys, "simulate", "--config", str(tmp_path / "none.json"), "--seed", "1")
        assert code == EXIT_USAGE


class TestRecover:
    def _samples(self, tmp_path):
        P = HypercubeDistribution(3, {"010": 0.7, "101": 0.3})
        ch = ChannelModel("lossy", 0.2)
        batch = apply_channel(sample_hypercube(P, 5000, 1), ch, 2)
        path = tmp_path / "samples.txt"
        write_batch(batch, path)
        return path, ch

    def test_matches_library(self, capsys, tmp_path):
        path, ch = self._samples(tmp_path)
        out = tmp_path / "p_hat.txt"
        code, _, _ = run(capsys, "recover", "--samples", str(path), "--model", "lossy", "--eps", "0.2",
                         "--delta", "0.05", "--out", str(out))
        assert code == EXIT_OK
        batch = read_batch(path)
        want = recover_population(batch, ch, RecoveryConfig(0.05), CachedEstimatorFactory(ch, batch.n))
        assert dict(read_distribution(out, check_mass=False).items()) == dict(want.estimate.items())
        assert set(want.survivors) == {"010", "101"}
        assert (tmp_path / "p_hat.txt.stats.csv").read_text().startswith("level,candidates,survivors,calls,overflow")

    def test_model_mismatch(self, capsys, tmp_path):
        path, _ = self._samples(tmp_path)
        code, _, err = run(capsys, "recover", "--samples", str(path), "--model", "noisy", "--eps", "0.2", "--delta", "0.05")
        assert code == EXIT_USAGE and "model" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "recover", "--samples", str(tmp_path / "none"), "--model", "lossy", "--eps", "0.2", "--delta", "0.05")
        assert code == EXIT_USAGE


class TestSelftest:
    def test_passes(self, capsys):
        code, out, _ = run(capsys, "selftest")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert len(lines) == 5 and all(line.startswith("PASS") for line in lines)
