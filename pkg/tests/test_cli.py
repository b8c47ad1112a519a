import json
import os

import numpy as np
import pytest

from inhmm import cli, harness
from inhmm.config import ConfigError, RunConfig, config_from_dict, load_config
from inhmm.files import DataError, atomic_write_text, read_samples, read_table, write_table
from inhmm.prediction import DensityGrid
from inhmm.preprocess import accumulate_lag, derive_future_covariates, preprocess_covariates
from inhmm.sampler import NumericalDegeneracyError


def write_config(path, d):
    with open(path, "w") as fh:
        json.dump(d, fh)
    return str(path)


def toy_table(path, T=60, seed=0):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.normal(size=T)) * 0.3
    z = (x > np.median(x)).astype(float)
    y = np.where(z == 1, 2.0, -1.0) + 0.3 * rng.normal(size=T)
    write_table(path, np.arange(1, T + 1), x, y)
    return str(path)


FAST = {"mcmc": {"n_iter": 10, "n_burnin": 0, "thin": 1, "seed": 3, "dpmm_iters": 5}}


# ------------------------------------------------------------ preprocessing


def hand_preprocess(raw, window, lag, period):
    """Loop oracle: lagged rolling sums, leading gap filled by phase means."""
    T = len(raw)
    x = [np.nan] * T
    for t in range(T):
        end = t - lag
        if end - window + 1 >= 0:
            x[t] = sum(raw[end - window + 1 : end + 1])
    for t in range(T):
        if np.isnan(x[t]):
            same = [x[s] for s in range(t % period, T, period) if not np.isnan(x[s])]
            x[t] = sum(same) / len(same)
    return np.array(x)


class TestPreprocess:
    def test_first_rows_by_hand(self):
        rng = np.random.default_rng(0)
        raw = rng.gamma(2.0, 50.0, 231)
        x = preprocess_covariates(raw, window=5, lag=2, period=12)
        ref = hand_preprocess(list(raw), 5, 2, 12)
        assert x.shape == (231, 1)
        np.testing.assert_allclose(x[:12, 0], ref[:12], rtol=1e-13)
        np.testing.assert_allclose(x[:, 0], ref, rtol=1e-12)
        # row 6 (0-based) is the first with full history: raw[0..4]
        assert x[6, 0] == pytest.approx(raw[0:5].sum(), rel=1e-14)

    def test_accumulate_only(self):
        out = accumulate_lag(np.arange(1.0, 7.0), window=3)
        np.testing.assert_array_equal(out[2:, 0], [6, 9, 12, 15])
        assert np.isnan(out[:2]).all()

    def test_lag_only(self):
        out = accumulate_lag(np.arange(5.0), lag=2)
        np.testing.assert_array_equal(out[2:, 0], [0, 1, 2])

    def test_identity(self):
        raw = np.arange(5.0)
        np.testing.assert_array_equal(preprocess_covariates(raw)[:, 0], raw)
        assert derive_future_covariates(raw, 3) is None

    def test_future_uses_fit_data_only(self):
        raw = np.arange(1.0, 25.0)
        fut = derive_future_covariates(raw, 3, window=1, lag=1, period=12)
        # x_{T+1} = raw_T; later steps use the seasonal mean of the fit data
        assert fut[0, 0] == 24.0
        assert fut[1, 0] == pytest.approx((1 + 13) / 2)


# ------------------------------------------------------------------- files


class TestFiles:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "d.csv"
        write_table(p, [1, 2, 3], np.array([[0.5, 1.0], [1.5, 2.0], [2.5, 3.0]]), [1.0, 2.0, 3.0])
        t, X, y = read_table(p)
        np.testing.assert_array_equal(t, [1, 2, 3])
        assert X.shape == (3, 2)
        np.testing.assert_array_equal(y, [1, 2, 3])

    @pytest.mark.parametrize(
        "body, fragment",
        [
            ("t,x1,y\n1,0.5,1\n2,abc,2\n", "row 2"),
            ("t,x1,y\n1,0.5,1\n2,0.1,nan\n", "row 2"),
            ("t,x1,y\n1,0.5,1\n1,0.1,2\n", "row 2"),
            ("t,x1,y\n1,0.5,1\n2,0.1\n", "row 2"),
            ("t,x2,y\n1,0.5,1\n", "x1..xp"),
            ("time,x1,y\n1,0.5,1\n", "first column"),
        ],
    )
    def test_errors(self, tmp_path, body, fragment):
        p = tmp_path / "bad.csv"
        p.write_text(body)
        with pytest.raises(DataError, match=fragment):
            read_table(p)

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        p = tmp_path / "out.txt"
        atomic_write_text(p, "a")
        atomic_write_text(p, "b")
        assert p.read_text() == "b"
        assert os.listdir(tmp_path) == ["out.txt"]


# ------------------------------------------------------------------ config


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.model == "inhmm1" and cfg.slice_kappa == 0.5 and cfg.grid.n_points == 512

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict({"mcmc": {"n_iters": 5}})
        with pytest.raises(ConfigError, match="unknown"):
            config_from_dict({"colour": 1})

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            config_from_dict({"mcmc": {"n_iter": 10, "n_burnin": 10}})
        with pytest.raises(ConfigError):
            config_from_dict({"model": "hmm"})

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(ConfigError):
            load_config(p)


# --------------------------------------------------------------------- cli


class TestFitPredict:
    def test_fit_writes_samples(self, tmp_path):
        data = toy_table(tmp_path / "d.csv")
        cfg = write_config(tmp_path / "c.json", FAST)
        assert cli.main(["fit", "--data", data, "--config", cfg, "--out", str(tmp_path / "fit")]) == 0
        lines = (tmp_path / "fit" / "samples.jsonl").read_text().splitlines()
        assert len(lines) == 10
        assert {"iter", "z", "K", "alpha", "beta", "x_star", "emission", "seed"} <= set(json.loads(lines[0]))
        diag = json.loads((tmp_path / "fit" / "diagnostics.json").read_text())
        assert diag["status"] == "ok" and diag["n_retained"] == 10
        assert not (tmp_path / "fit" / "timing.json").exists()

    def test_ihmmp1_has_zero_beta(self, tmp_path):
        data = toy_table(tmp_path / "d.csv")
        cfg = write_config(tmp_path / "c.json", FAST)
        out = tmp_path / "fit"
        assert cli.main(["fit", "--data", data, "--config", cfg, "--model", "ihmmp1", "--out", str(out)]) == 0
        for s in read_samples(out / "samples.jsonl"):
            assert np.all(s.beta == 0.0)

    def test_timing_opt_in(self, tmp_path):
        data = toy_table(tmp_path / "d.csv")
        cfg = write_config(tmp_path / "c.json", FAST)
        out = tmp_path / "fit"
        assert cli.main(["fit", "--data", data, "--config", cfg, "--timing", "--out", str(out)]) == 0
        timing = json.loads((out / "timing.json").read_text())
        assert timing["total_seconds"] > 0

    def test_predict_three_horizons(self, tmp_path):
        data = toy_table(tmp_path / "d.csv")
        write_table(tmp_path / "fx.csv", [61, 62, 63], [0.1, 0.2, 0.3])
        cfg = write_config(tmp_path / "c.json", FAST)
        fit = str(tmp_path / "fit")
        assert cli.main(["fit", "--data", data, "--config", cfg, "--out", fit]) == 0
        out = tmp_path / "pred"
        rc = cli.main(["predict", "--fit", fit, "--config", cfg, "--future-x", str(tmp_path / "fx.csv"),
                       "--out", str(out)])
        assert rc == 0
        assert sorted(os.listdir(out)) == ["density_h1.csv", "density_h2.csv", "density_h3.csv"]
        for h in (1, 2, 3):
            d = DensityGrid.from_csv((out / f"density_h{h}.csv").read_text())
            assert d.points.size == 512
            assert d.mass() == pytest.approx(1.0, abs=0.02)

    def test_predict_missing_future_x(self, tmp_path, capsys):
        data = toy_table(tmp_path / "d.csv")
        cfg = write_config(tmp_path / "c.json", FAST)
        fit = str(tmp_path / "fit")
        cli.main(["fit", "--data", data, "--config", cfg, "--out", fit])
        write_table(tmp_path / "fx.csv", [61, 62], [0.1, 0.2])
        rc = cli.main(["predict", "--fit", fit, "--config", cfg, "--future-x", str(tmp_path / "fx.csv"),
                       "--out", str(tmp_path / "p")])
        assert rc == cli.EXIT_DATA
        assert "horizon 3" in capsys.readouterr().err
        rc = cli.main(["predict", "--fit", fit, "--config", cfg, "--out", str(tmp_path / "p")])
        assert rc == cli.EXIT_DATA

    def test_derived_future_x(self, tmp_path):
        data = toy_table(tmp_path / "d.csv")
        d = dict(FAST, preprocess={"accumulate_window": 2, "forward_lag": 1})
        cfg = write_config(tmp_path / "c.json", d)
        fit = str(tmp_path / "fit")
        assert cli.main(["fit", "--data", data, "--config", cfg, "--out", fit]) == 0
        assert cli.main(["predict", "--fit", fit, "--config", cfg, "--out", str(tmp_path / "p")]) == 0

    def test_exit_codes(self, tmp_path, monkeypatch):
        data = toy_table(tmp_path / "d.csv")
        bad_cfg = write_config(tmp_path / "bad.json", {"mcmc": {"bogus": 1}})
        assert cli.main(["fit", "--data", data, "--config", bad_cfg, "--out", str(tmp_path / "f")]) == cli.EXIT_CONFIG
        (tmp_path / "bad.csv").write_text("t,x1,y\n1,1,1\n2,x,2\n")
        cfg = write_config(tmp_path / "c.json", FAST)
        rc = cli.main(["fit", "--data", str(tmp_path / "bad.csv"), "--config", cfg, "--out", str(tmp_path / "f")])
        assert rc == cli.EXIT_DATA

        def boom(*a, **k):
            raise NumericalDegeneracyError("all paths vanish", iteration=4, state_dump={"K": 2})

        monkeypatch.setattr(harness, "run_mcmc", boom)
        out = tmp_path / "deg"
        rc = cli.main(["fit", "--data", data, "--config", cfg, "--out", str(out)])
        assert rc == cli.EXIT_DEGENERATE
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["status"] == "failed" and diag["iteration"] == 4 and diag["state"] == {"K": 2}


# -------------------------------------------------------------- evaluate


def constant_truth(path, name):
    """A one-state truth whose predictive density is N(0, 1) at every horizon."""
    truth = {
        "design": {}, "T": 2, "n_ahead": 1, "alpha": [[0.0], [0.0]], "beta": [1.0], "x_star": [[0.0]],
        "emission": {"variant": "normal", "mu": [0.0], "sigma2": [1.0]}, "z": [1, 1, 1], "x": [0.0, 0.0, 0.0],
        "y_heldout": [0.0], "z_T": 1,
    }
    os.makedirs(path / name, exist_ok=True)
    (path / name / "truth.json").write_text(json.dumps(truth))


class TestEvaluate:
    def _setup(self, tmp_path, offsets):
        from scipy import stats

        truth_dir, est_dir = tmp_path / "truth", tmp_path / "est"
        grid = np.linspace(-8, 8, 4001)
        for b, c in enumerate(offsets):
            name = f"rep_{b:03d}"
            constant_truth(truth_dir, name)
            os.makedirs(est_dir / "m" / name)
            vals = stats.norm.pdf(grid) + c
            (est_dir / "m" / name / "density_h1.csv").write_text(DensityGrid(grid, vals).to_csv())
        return str(est_dir), str(truth_dir)

    def test_identical_is_zero(self, tmp_path):
        est, truth = self._setup(tmp_path, [0.0, 0.0])
        (row,) = harness.evaluate(est, truth)
        assert row["mise_est"] < 1e-25 and row["p50"] < 1e-25

    def test_percentiles(self, tmp_path):
        # constant offsets c over width 16 give ISE = 16 c^2
        c1, c2 = np.sqrt(0.1 / 16), np.sqrt(0.3 / 16)
        est, truth = self._setup(tmp_path, [c1, c2])
        out = tmp_path / "report"
        assert cli.main(["evaluate", "--estimates", est, "--truth", truth, "--out", str(out)]) == 0
        (row,) = harness.evaluate(est, truth)
        assert row["mise_est"] == pytest.approx(0.2, rel=1e-9)
        assert row["p50"] == pytest.approx(0.2, rel=1e-9)
        assert row["p25"] == pytest.approx(0.15, rel=1e-9)
        assert (out / "mise.csv").read_text().startswith("model,horizon,n_reps,p25,p50,mise_est\nm,1,2,")

    def test_missing_pair(self, tmp_path):
        est, truth = self._setup(tmp_path, [0.0, 0.0])
        constant_truth(tmp_path / "truth", "rep_002")
        assert cli.main(["evaluate", "--estimates", est, "--truth", truth, "--out", str(tmp_path / "r")]) == 3


# -------------------------------------------------------------- simulate


class TestSimulate:
    def test_rows_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", {"simulate": {"B": 1, "T": 50, "seed": 11}})
        out = tmp_path / "sim"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        t, X, y = read_table(out / "rep_000" / "data.csv")
        assert t.size == 50 and X.shape == (50, 1)
        t, X, _ = read_table(out / "rep_000" / "future_x.csv", require_y=False)
        np.testing.assert_array_equal(t, [51, 52, 53])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["replicates"] == [{"name": "rep_000", "seed": 11}]

    def test_bad_design(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", {"simulate": {"design": "design9"}})
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "s")]) == cli.EXIT_CONFIG

    def test_replicate_small(self, tmp_path):
        d = dict(FAST, simulate={"B": 2, "T": 40}, models=["inhmm1", "ihmmp1"])
        cfg = write_config(tmp_path / "c.json", d)
        out = tmp_path / "study"
        assert cli.main(["replicate", "--config", cfg, "--workers", "1", "--out", str(out)]) == 0
        text = (out / "report" / "mise.csv").read_text().splitlines()
        assert len(text) == 1 + 2 * 3
        assert not (out / "estimates" / "inhmm1" / "rep_000" / "fit" / "samples.jsonl").exists()


def test_malformed_truth(tmp_path):
    os.makedirs(tmp_path / "truth" / "rep_000")
    (tmp_path / "truth" / "rep_000" / "truth.json").write_text("{}")
    os.makedirs(tmp_path / "est" / "m" / "rep_000")
    (tmp_path / "est" / "m" / "rep_000" / "density_h1.csv").write_text(DensityGrid(np.arange(3.0)).to_csv())
    with pytest.raises(DataError, match="malformed"):
        harness.evaluate(str(tmp_path / "est"), str(tmp_path / "truth"))


DEMO = os.path.join(os.path.dirname(__file__), os.pardir, "demo")


class TestDemo:
    def test_end_to_end(self, tmp_path):
        with open(os.path.join(DEMO, "config.json")) as fh:
            d = json.load(fh)
        d["mcmc"] = {"n_iter": 150, "n_burnin": 50, "thin": 2, "seed": 7, "dpmm_iters": 50}
        cfg = write_config(tmp_path / "c.json", d)
        data = os.path.join(DEMO, "malaria_synthetic.csv")
        fit, pred = str(tmp_path / "fit"), tmp_path / "pred"
        assert cli.main(["fit", "--data", data, "--config", cfg, "--out", fit]) == 0
        meta = json.loads((tmp_path / "fit" / "fit_meta.json").read_text())
        _, raw, _ = read_table(data)
        # with lag 2 the first two future predictors need no seasonal fill
        np.testing.assert_allclose(np.asarray(meta["derived_future_x"])[:, 0],
                                   [raw[-6:-1, 0].sum(), raw[-5:, 0].sum()], rtol=1e-12)
        assert cli.main(["predict", "--fit", fit, "--config", cfg, "--out", str(pred)]) == 0
        for h in (1, 2):
            dens = DensityGrid.from_csv((pred / f"density_h{h}.csv").read_text())
            assert dens.mass() == pytest.approx(1.0, abs=0.01)
            assert 3.0 < dens.points[np.argmax(dens.values)] < 7.5

    def test_t_range_subset(self, tmp_path):
        cfg = config_from_dict({"preprocess": {"accumulate_window": 5, "forward_lag": 2, "t_min": 13, "t_max": 120}})
        data, t, _ = harness.load_dataset(os.path.join(DEMO, "malaria_synthetic.csv"), cfg)
        assert data.T == 108 and t[0] == 13 and t[-1] == 120
