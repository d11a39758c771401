import json
import os

import numpy as np
import pytest

from regionwalk import experiment, synth
from regionwalk.experiment import RunConfig

TINY = {
    "seed": 7, "t": 6, "k": 3, "folds": 5, "repeats": 5, "figures": False,
    "walk": {"walks_per_node": 2, "epochs": 1, "dim": 6},
    "vrn": {"epochs": 2, "latent_dim": 3, "enc_hidden": [8], "dec_hidden": [8]},
}


@pytest.fixture(scope="module")
def tiny_ds():
    return synth.corridor_dataset(10, 20, seed=2)


def test_derive_seed_stable_and_distinct():
    assert experiment.derive_seed(1, "train", 0, 0) == experiment.derive_seed(1, "train", 0, 0)
    seeds = {experiment.derive_seed(1, s, f, r) for s in ("a", "b") for f in range(3) for r in range(3)}
    assert len(seeds) == 18
    assert 0 <= experiment.derive_seed(2**40, "x") < 2**63


def test_config_round_trip(tmp_path):
    cfg = RunConfig.from_dict(TINY)
    assert cfg.vrn.enc_hidden == (8,) and cfg.walk.dim == 6
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert experiment.load_config(p) == cfg
    with pytest.raises(ValueError):
        RunConfig.from_dict({"bogus": 1})


def test_experiment_outputs_and_means(tmp_path, tiny_ds):
    cfg = RunConfig.from_dict(TINY)
    summary = experiment.run_experiment(tiny_ds, cfg, tmp_path)
    reports = sorted(os.listdir(tmp_path / "reports"))
    assert len(reports) == 25
    assert (tmp_path / "summary.json").exists() and (tmp_path / "results.txt").exists()
    runs = [json.loads((tmp_path / "reports" / f).read_text()) for f in reports]
    for method in ("regionwalk", "levy"):
        for kind in ("hausdorff", "dtw", "fde"):
            vals = [r[method]["metrics"][kind]["value"] for r in runs]
            covs = [r[method]["metrics"][kind]["coverage"] for r in runs]
            assert summary[method]["metrics"][kind]["value"] == pytest.approx(sum(vals) / 25, rel=1e-12)
            assert summary[method]["metrics"][kind]["coverage"] == pytest.approx(sum(covs) / 25, rel=1e-12)
        assert summary[method]["chi2"] == pytest.approx(np.mean([r[method]["chi2"] for r in runs]))
    folds = json.loads((tmp_path / "folds.json").read_text())
    assert sorted(i for f in folds for i in f["test"]) == sorted(tiny_ds.ids)


def test_experiment_bitwise_repeatable(tmp_path, tiny_ds):
    cfg = RunConfig.from_dict(dict(TINY, repeats=1))
    experiment.run_experiment(tiny_ds, cfg, tmp_path / "a")
    experiment.run_experiment(tiny_ds, cfg, tmp_path / "b")
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_figures_written(tmp_path, tiny_ds):
    cfg = RunConfig.from_dict(dict(TINY, repeats=1, folds=2, figures=True))
    experiment.run_experiment(tiny_ds, cfg, tmp_path)
    figs = sorted(os.listdir(tmp_path / "figures"))
    assert figs == ["coverage.png", "fold0_clusters.png", "fold0_trajectories.png"]
    assert all((tmp_path / "figures" / f).stat().st_size > 1000 for f in figs)
