import numpy as np
import pytest

from matchreweight import cli, experiments, toydata, training


def strip_timestamp(path):
    return [l for l in open(path).read().splitlines() if not l.startswith("# generated")]


def tiny_spec(tmp_path, name="res.csv", **kw):
    defaults = dict(
        kind=experiments.KIND_SINGLE,
        out=str(tmp_path / name),
        methods=[training.METHOD_SOURCE_ONLY],
        reps=1,
        toy=toydata.ToyConfig(n_source=150, n_target=150),
        train=training.TrainConfig(method="SourceOnly", epochs=5, batch_size=32, hidden_units=32),
    )
    defaults.update(kw)
    return experiments.ExperimentSpec(**defaults)


class TestRunExperiment:
    def test_single_run_row_counts(self, tmp_path):
        spec = tiny_spec(tmp_path)
        rows = experiments.run_experiment(spec)
        assert len(rows) == 1
        raw = strip_timestamp(spec.out)
        assert raw[0] == experiments.RESULTS_SCHEMA
        assert raw[1].startswith("config_id,")
        assert len(raw) == 3
        agg = strip_timestamp(experiments.aggregate_path(spec.out))
        assert agg[0] == experiments.AGGREGATE_SCHEMA
        assert len(agg) == 3  # schema + header + one balanced-accuracy cell

    def test_byte_for_byte_determinism(self, tmp_path):
        spec1 = tiny_spec(tmp_path, name="a.csv", reps=2, methods=["SourceOnly", "MARSc"],
                          kind=experiments.KIND_SWEEP_IMBALANCE, majority_grid=(0.5, 0.8))
        spec2 = tiny_spec(tmp_path, name="b.csv", reps=2, methods=["SourceOnly", "MARSc"],
                          kind=experiments.KIND_SWEEP_IMBALANCE, majority_grid=(0.5, 0.8))
        experiments.run_experiment(spec1)
        experiments.run_experiment(spec2)
        assert strip_timestamp(spec1.out) == strip_timestamp(spec2.out)
        assert strip_timestamp(experiments.aggregate_path(spec1.out)) == strip_timestamp(
            experiments.aggregate_path(spec2.out))

    def test_aggregate_means_match_raw_rows(self, tmp_path):
        spec = tiny_spec(tmp_path, reps=3, kind=experiments.KIND_SWEEP_IMBALANCE,
                         majority_grid=(0.6,), methods=["SourceOnly"])
        rows = experiments.run_experiment(spec)
        agg_lines = strip_timestamp(experiments.aggregate_path(spec.out))[2:]
        bacc_line = next(l for l in agg_lines if ",balanced_accuracy," in l)
        mean = float(bacc_line.split(",")[3])
        expected = np.mean([r.balanced_accuracy for r in rows])
        assert mean == pytest.approx(expected, rel=1e-12)

    def test_estimate_kind_rows(self, tmp_path):
        spec = tiny_spec(tmp_path, kind=experiments.KIND_ESTIMATE,
                         methods=["MARSg", "MARSc"], reps=2,
                         toy=toydata.ToyConfig(p_target=np.array([0.6, 0.2, 0.2]),
                                               n_source=300, n_target=300))
        rows = experiments.run_experiment(spec)
        assert len(rows) == 4
        assert all(r.balanced_accuracy is None for r in rows)
        assert all(r.l1_error is not None and r.l1_error <= 0.1 for r in rows)

    def test_wd_beta_labelled_methods(self, tmp_path):
        spec = tiny_spec(tmp_path, methods=["WDBeta0", "WDBeta1"], reps=1)
        rows = experiments.run_experiment(spec)
        assert [r.method for r in rows] == ["WDBeta0", "WDBeta1"]

    def test_read_results_round_trip(self, tmp_path):
        spec = tiny_spec(tmp_path, reps=2)
        rows = experiments.run_experiment(spec)
        parsed = experiments.read_results(spec.out)
        assert parsed == rows


class TestGmmOtClassify:
    def test_single_class(self):
        rng = np.random.default_rng(0)
        pred, est = experiments.gmm_ot_classify(rng.random((10, 2)), np.zeros(10, dtype=int),
                                                rng.random((20, 2)), 1, seed=0)
        assert np.array_equal(pred, np.zeros(20, dtype=int))
        assert est.p_target.tolist() == [1.0]

    def test_easy_toy_high_accuracy(self):
        cfg = toydata.ToyConfig(p_target=np.array([0.8, 0.1, 0.1]), n_source=600,
                                n_target=1000, seed=1)
        src, tgt = toydata.gen_toy(cfg)
        pred, est = experiments.gmm_ot_classify(src.points, src.labels, tgt.points, 3, seed=1)
        bacc = training._balanced_accuracy(pred, tgt.labels, 3)
        assert bacc >= 0.95
        assert toydata.l1_proportion_error(est.p_target, np.bincount(tgt.labels) / 1000) <= 0.05

    def test_adversarial_geometry_swaps_classes(self):
        # Two target modes parked next to the wrong source classes.
        rng = np.random.default_rng(2)
        swapped_means = toydata.TRIANGLE_MEANS[[1, 0, 2]] + 0.2
        src_pts, src_lab, tgt_pts, tgt_lab = [], [], [], []
        for k in range(3):
            src_pts.append(rng.normal(toydata.TRIANGLE_MEANS[k], 0.4, size=(100, 2)))
            src_lab.append(np.full(100, k))
            tgt_pts.append(rng.normal(swapped_means[k], 0.4, size=(100, 2)))
            tgt_lab.append(np.full(100, k))
        pred, _ = experiments.gmm_ot_classify(np.vstack(src_pts), np.concatenate(src_lab),
                                              np.vstack(tgt_pts), 3, seed=2)
        truth = np.concatenate(tgt_lab)
        bacc = training._balanced_accuracy(pred, truth, 3)
        swap = np.array([1, 0, 2])
        bacc_swapped = training._balanced_accuracy(swap[pred], truth, 3)
        assert bacc <= 0.5
        assert bacc_swapped >= 0.9  # systematic class swap, not noise


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(
            "[experiment]\n"
            "regime = low\n"
            "methods = SourceOnly\n"
            "majority_grid = 0.5, 0.8\n"
            "epochs = 4\n"
            "batch_size = 32\n"
            "hidden_units = 32\n"
            "n_source = 120\n"
            "n_target = 120\n"
        )
        cfg = experiments.load_config_file(cfg_path)
        spec = experiments.spec_from_config(experiments.KIND_SWEEP_IMBALANCE, cfg,
                                            out=str(tmp_path / "o.csv"), reps=1)
        assert spec.majority_grid == (0.5, 0.8)
        assert spec.train.epochs == 4
        assert spec.methods == ["SourceOnly"]

    def test_missing_section(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[wrong]\nx = 1\n")
        with pytest.raises(ValueError):
            experiments.load_config_file(bad)


class TestCli:
    def test_gen_data(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text("[experiment]\nn_source = 60\nn_target = 50\n")
        rc = cli.main(["gen-data", "--config", str(cfg_path), "--out", str(tmp_path / "toy"), "--seed", "3"])
        assert rc == 0
        source = (tmp_path / "toy_source.csv").read_text().splitlines()
        assert source[0] == "x0,x1,label"
        assert len(source) == 61
        target = (tmp_path / "toy_target.csv").read_text().splitlines()
        assert len(target) == 51

    def test_estimate_proportions_stdout(self, tmp_path, capsys):
        cfg = toydata.ToyConfig(p_target=np.array([0.7, 0.2, 0.1]), n_source=240, n_target=300, seed=4)
        src, tgt = toydata.gen_toy(cfg)
        src_path, tgt_path = tmp_path / "s.csv", tmp_path / "t.csv"
        with open(src_path, "w") as fh:
            fh.write("x0,x1,label\n")
            for p, l in zip(src.points, src.labels):
                fh.write(f"{float(p[0])!r},{float(p[1])!r},{l}\n")
        with open(tgt_path, "w") as fh:
            fh.write("x0,x1\n")
            for p in tgt.points:
                fh.write(f"{float(p[0])!r},{float(p[1])!r}\n")
        rc = cli.main(["estimate-proportions", "--source", str(src_path), "--target", str(tgt_path)])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "method,quantity,class_0,class_1,class_2"
        gmm_p = next(l for l in out if l.startswith("gmm,p_target"))
        p_hat = np.array([float(v) for v in gmm_p.split(",")[2:]])
        assert np.abs(p_hat - [0.7, 0.2, 0.1]).sum() <= 0.1
        assert any(l.startswith("agglomerative,weights") for l in out)

    def test_solve_ot_from_csv(self, tmp_path, capsys):
        cost_path = tmp_path / "cost.csv"
        cost_path.write_text("0.0,1.0\n1.0,0.0\n")
        rc = cli.main(["solve-ot", "--cost", str(cost_path)])
        assert rc == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "objective,0.0"
        plan = np.array([[float(v) for v in line.split(",")] for line in out[1:]])
        assert np.allclose(plan, np.eye(2) / 2)

    def test_fit_mixture_dump(self, tmp_path, capsys):
        cfg = toydata.ToyConfig(n_source=60, n_target=150, seed=6)
        _, tgt = toydata.gen_toy(cfg)
        pts_path = tmp_path / "pts.csv"
        with open(pts_path, "w") as fh:
            fh.write("x0,x1\n")
            for p in tgt.points:
                fh.write(f"{float(p[0])!r},{float(p[1])!r}\n")
        out_path = tmp_path / "model.txt"
        rc = cli.main(["fit-mixture", "--input", str(pts_path), "--classes", "3",
                       "--method", "gmm", "--seed", "1", "--out", str(out_path)])
        assert rc == 0
        capsys.readouterr()  # drop the 'wrote ...' notice
        dump = out_path.read_text().splitlines()
        assert dump[0] == "mixture-model v1"
        assert dump[1] == "components 3 dim 2"
        props = [float(l.split()[-1]) for l in dump if l.startswith("component ")]
        assert sum(props) == pytest.approx(1.0, abs=1e-9)
        rc = cli.main(["fit-mixture", "--input", str(pts_path), "--classes", "3",
                       "--method", "agglomerative"])
        assert rc == 0
        assert capsys.readouterr().out.startswith("mixture-model v1")

    def test_sweep_cli_and_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(
            "[experiment]\n"
            "methods = SourceOnly\n"
            "majority_grid = 0.5, 0.8\n"
            "epochs = 3\nbatch_size = 32\nhidden_units = 32\n"
            "n_source = 100\nn_target = 100\n"
        )
        out = tmp_path / "sweep.csv"
        rc = cli.main(["sweep-imbalance", "--config", str(cfg_path), "--out", str(out),
                       "--seed", "0", "--reps", "1"])
        assert rc == 0
        rows = experiments.read_results(out)
        assert len(rows) == 2
        assert (tmp_path / "sweep_agg.csv").exists()
