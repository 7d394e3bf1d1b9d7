"""End-to-end tests of the ``swag`` command-line interface."""

import numpy as np
import pytest

from swagcov.cli import load_config, main
from swagcov.data import Group, GroupedDataset, read_draws, save_dataset
from swagcov.linalg import MatrixShape


def write_config(path, **kv):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    return str(path)


def toy_dataset(tmp_path, J=2, n=6, p1=1, p2=2, seed=0, name="toy", mus=None):
    rng = np.random.default_rng(seed)
    shape = MatrixShape(p1, p2)
    groups = []
    for j in range(J):
        mu = 0.0 if mus is None else mus[j]
        groups.append(Group(f"g{j}", mu + rng.standard_normal((n, shape.p))))
    return str(save_dataset(GroupedDataset(groups, shape), tmp_path, name=name))


class TestConfig:
    def test_parses_types(self, tmp_path):
        p = write_config(
            tmp_path / "c.cfg",
            iterations=50,
            burn_in=10,
            thin=2,
            alpha=0.25,
            keep_components="true",
        )
        cfg = load_config(p)
        assert cfg.iterations == 50 and cfg.burn_in == 10 and cfg.thin == 2
        assert cfg.alpha == 0.25
        assert cfg.keep_components is True

    def test_comments_and_blanks(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("# comment\n\niterations = 40  # trailing\n")
        assert load_config(f).iterations == 40

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("iterat = 40\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config(f)

    def test_none_path_gives_defaults(self):
        assert load_config(None).iterations == 28_000


class TestFit:
    def test_outputs_and_determinism(self, tmp_path):
        manifest = toy_dataset(tmp_path / "data")
        cfg = write_config(tmp_path / "c.cfg", iterations=60, burn_in=20, thin=4)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["fit", "--dataset", manifest, "--config", cfg, "--seed", "3",
                     "--out", str(out1)]) == 0
        assert main(["fit", "--dataset", manifest, "--config", cfg, "--seed", "3",
                     "--out", str(out2)]) == 0
        for name in ("draws.bin", "estimate_g0.csv", "estimate_g1.csv",
                     "acceptance.txt", "diagnostics.txt", "manifest.txt"):
            assert (out1 / name).exists()
        assert (out1 / "draws.bin").read_bytes() == (out2 / "draws.bin").read_bytes()
        assert (out1 / "estimate_g0.csv").read_text() == (out2 / "estimate_g0.csv").read_text()
        draws = read_draws(out1 / "draws.bin")
        assert draws.shape == (10, 2, 2, 2)

    def test_estimate_header_and_pd(self, tmp_path):
        manifest = toy_dataset(tmp_path / "data")
        cfg = write_config(tmp_path / "c.cfg", iterations=40, burn_in=10, thin=2)
        out = tmp_path / "o"
        main(["fit", "--dataset", manifest, "--config", cfg, "--seed", "1", "--out", str(out)])
        text = (out / "estimate_g0.csv").read_text()
        assert text.startswith("# label=g0 p=2 p1=1 p2=2")
        M = np.loadtxt(out / "estimate_g0.csv", delimiter=",")
        assert np.all(np.linalg.eigvalsh(M) > 0)

    def test_no_standardize_flag(self, tmp_path):
        manifest = toy_dataset(tmp_path / "data")
        cfg = write_config(tmp_path / "c.cfg", iterations=40, burn_in=10, thin=2)
        out = tmp_path / "o"
        assert main(["fit", "--dataset", manifest, "--config", cfg, "--seed", "1",
                     "--no-standardize", "--out", str(out)]) == 0
        assert "standardized = False" in (out / "manifest.txt").read_text()

    def test_manifest_echoes_schedule(self, tmp_path):
        manifest = toy_dataset(tmp_path / "data")
        cfg = write_config(tmp_path / "c.cfg", iterations=60, burn_in=20, thin=4)
        out = tmp_path / "o"
        main(["fit", "--dataset", manifest, "--config", cfg, "--seed", "1", "--out", str(out)])
        text = (out / "manifest.txt").read_text()
        assert "iterations = 60" in text
        assert "n_draws = 10" in text
        assert "sha256.draws = " in text


class TestSimulate:
    def test_single_rep_table(self, tmp_path):
        out = tmp_path / "o"
        assert main([
            "simulate", "--regime", "he-n", "--J", "2", "--p1", "1", "--p2", "2",
            "--n", "6", "--reps", "1", "--iterations", "60", "--burn-in", "20",
            "--thin", "4", "--seed", "2", "--out", str(out),
        ]) == 0
        lines = (out / "losses.csv").read_text().strip().splitlines()
        assert lines[0] == "estimator,mean_avg_stein_loss,rep0"
        names = [ln.split(",")[0] for ln in lines[1:]]
        assert names == ["swag", "sample", "pooled", "kron", "kron_pooled"]
        assert (out / "truth_g0.csv").exists()
        assert (out / "data" / "rep0.manifest").exists()

    def test_bit_reproducible(self, tmp_path):
        args = [
            "simulate", "--regime", "ho-k", "--J", "2", "--p1", "1", "--p2", "2",
            "--n", "6", "--reps", "2", "--iterations", "60", "--burn-in", "20",
            "--thin", "4", "--seed", "5",
        ]
        main(args + ["--out", str(tmp_path / "a")])
        main(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "losses.csv").read_bytes() == (
            tmp_path / "b" / "losses.csv"
        ).read_bytes()

    def test_invalid_regime_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["simulate", "--regime", "xx", "--J", "2", "--p1", "1", "--p2", "2",
                  "--n", "6", "--out", str(tmp_path / "o")])


class TestClassify:
    def separable(self, tmp_path, seed, name):
        mus = [np.zeros(2), np.full(2, 8.0)]
        return toy_dataset(tmp_path, J=2, n=40, p1=1, p2=2, seed=seed, name=name, mus=mus)

    def test_near_perfect_rates(self, tmp_path):
        train = self.separable(tmp_path / "tr", 1, "train")
        test = self.separable(tmp_path / "te", 2, "test")
        out = tmp_path / "o"
        assert main(["classify", "--train", train, "--test", test,
                     "--method", "mle", "--out", str(out)]) == 0
        lines = (out / "rates_mle.csv").read_text().strip().splitlines()
        assert lines[0] == "class,correct_rate"
        avg = float(lines[-1].split(",")[1])
        assert avg > 0.97
        cm = (out / "confusion_mle.csv").read_text().strip().splitlines()
        counts = np.array([[int(c) for c in row.split(",")[1:]] for row in cm[1:]])
        assert np.all(counts.sum(axis=1) == 40)

    def test_rates_within_unit_interval(self, tmp_path):
        train = toy_dataset(tmp_path / "tr", J=2, n=30, seed=3, name="train")
        test = toy_dataset(tmp_path / "te", J=2, n=30, seed=4, name="test")
        out = tmp_path / "o"
        main(["classify", "--train", train, "--test", test, "--method", "pooled",
              "--out", str(out)])
        lines = (out / "rates_pooled.csv").read_text().strip().splitlines()[1:]
        for ln in lines:
            assert 0.0 <= float(ln.split(",")[1]) <= 1.0

    def test_single_class_rejected(self, tmp_path):
        train = toy_dataset(tmp_path / "tr", J=1, name="train")
        test = toy_dataset(tmp_path / "te", J=1, name="test")
        with pytest.raises(SystemExit, match="two classes"):
            main(["classify", "--train", train, "--test", test, "--out",
                  str(tmp_path / "o")])

    def test_label_mismatch_rejected(self, tmp_path):
        train = toy_dataset(tmp_path / "tr", J=2, name="train")
        test = toy_dataset(tmp_path / "te", J=3, name="test")
        with pytest.raises(SystemExit, match="test classes"):
            main(["classify", "--train", train, "--test", test, "--out",
                  str(tmp_path / "o")])

    def test_default_method_is_mle(self, tmp_path):
        train = self.separable(tmp_path / "tr", 5, "train")
        test = self.separable(tmp_path / "te", 6, "test")
        out = tmp_path / "o"
        main(["classify", "--train", train, "--test", test, "--out", str(out)])
        assert (out / "rates_mle.csv").exists()


class TestDiagnose:
    def test_report_and_trace(self, tmp_path):
        from swagcov.data import write_draws

        rng = np.random.default_rng(7)
        draws = rng.standard_normal((100, 2, 2, 2))
        dpath = tmp_path / "d.bin"
        write_draws(dpath, draws)
        out = tmp_path / "o"
        assert main(["diagnose", "--draws", str(dpath), "--trace", "1,0,1",
                     "--out", str(out)]) == 0
        text = (out / "diagnostics.txt").read_text()
        assert "ess.mean = " in text
        trace = np.loadtxt(out / "trace_1_0_1.csv")
        assert np.allclose(trace, draws[:, 1, 0, 1])

    def test_constant_draws_ess_equals_count(self, tmp_path):
        from swagcov.data import write_draws

        draws = np.broadcast_to(np.eye(2), (50, 1, 2, 2)).copy()
        dpath = tmp_path / "d.bin"
        write_draws(dpath, draws)
        out = tmp_path / "o"
        main(["diagnose", "--draws", str(dpath), "--out", str(out)])
        text = (out / "diagnostics.txt").read_text()
        for line in text.splitlines():
            if line.startswith("ess.mean"):
                assert float(line.split("=")[1]) == 50.0

    def test_corrupt_draws_rejected(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOTSWAG123456789012345678901234567890")
        from swagcov.data import DrawsFormatError

        with pytest.raises(DrawsFormatError):
            main(["diagnose", "--draws", str(bad), "--out", str(tmp_path / "o")])

    def test_bad_trace_spec(self, tmp_path):
        from swagcov.data import write_draws

        dpath = tmp_path / "d.bin"
        write_draws(dpath, np.zeros((20, 1, 2, 2)))
        with pytest.raises(SystemExit):
            main(["diagnose", "--draws", str(dpath), "--trace", "9,9,9",
                  "--out", str(tmp_path / "o")])


class TestParser:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_requires_subcommand(self):
        with pytest.raises(SystemExit):
            main([])
