"""Fit / generate / evaluate orchestration and the k-fold experiment."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines, graphembed, hng, metrics, pipeline, sampler, vrn
from .graphembed import WalkConfig
from .ingest import kfold
from .vrn import VrnConfig

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    seed: int = 0
    r: float = 1.0
    initial_zoom: int = 2
    max_zoom: int = 9
    dot_offset: int = 4
    top_y: int = 5
    t: int = 256
    k: int = 8
    folds: int = 5
    repeats: int = 5
    next_region_rule: str = "sample_top_y"
    levy_clamp: float = 10.0
    figures: bool = True
    walk: WalkConfig = field(default_factory=WalkConfig)
    vrn: VrnConfig = field(default_factory=VrnConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        walk = WalkConfig(**d.pop("walk", {}))
        v = VrnConfig(**d.pop("vrn", {}))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(walk=walk, vrn=v, **d)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def derive_seed(master: int, stage: str, fold: int = 0, repeat: int = 0) -> int:
    h = hashlib.sha256(f"{master}/{stage}/{fold}/{repeat}".encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


@dataclass
class FittedModel:
    network: hng.RegionNetwork
    sequences: list
    embeddings: graphembed.EmbeddingTable
    model: vrn.VrnModel
    dictionary: vrn.LatentDictionary
    heatmap: sampler.Heatmap


def fit(train_ds, cfg: RunConfig, fold: int = 0, repeat: int = 0) -> FittedModel:
    net, seqs = hng.regionalize(train_ds, cfg.r, cfg.initial_zoom, cfg.max_zoom)
    wcfg = dataclasses.replace(cfg.walk, seed=derive_seed(cfg.seed, "embed", fold, repeat))
    emb = graphembed.embed_network(net, wcfg, np.random.default_rng(wcfg.seed))
    vcfg = dataclasses.replace(cfg.vrn, top_y=cfg.top_y, seed=derive_seed(cfg.seed, "train", fold, repeat))
    model = vrn.train(net, seqs, emb, vcfg, m=train_ds.m)
    dictionary = vrn.build_latent_dictionary(model, net, seqs)
    heat = sampler.build_heatmap(net, cfg.dot_offset)
    return FittedModel(net, seqs, emb, model, dictionary, heat)


def generation_config(cfg: RunConfig, m: int, fold: int = 0, repeat: int = 0) -> pipeline.GenerationConfig:
    return pipeline.GenerationConfig(count=cfg.t, m=m, top_y=cfg.top_y,
                                     seed=derive_seed(cfg.seed, "generate", fold, repeat),
                                     next_region_rule=cfg.next_region_rule)


def run_fold(train_ds, test_ds, cfg: RunConfig, fold: int = 0, repeat: int = 0, location_embeddings=None):
    """Fit on ``train_ds``, generate, and score both the model and the Levy baseline.

    Returns ``(reports, artifacts)`` where ``reports`` maps method name to
    :class:`metrics.EvalReport`.
    """
    fitted = fit(train_ds, cfg, fold, repeat)
    gen = pipeline.generate(fitted.model, fitted.dictionary, fitted.heatmap,
                            generation_config(cfg, train_ds.m, fold, repeat))
    levy_params = baselines.fit_levy(train_ds)
    levy = baselines.levy_generate(levy_params, train_ds.m, cfg.t,
                                   np.random.default_rng(derive_seed(cfg.seed, "levy", fold, repeat)),
                                   clamp=cfg.levy_clamp)
    test = [t.coords for t in test_ds.trajectories]
    k_seed = derive_seed(cfg.seed, "kmeans", fold, repeat)
    reports = {
        "regionwalk": metrics.evaluate([g.coords for g in gen], test, cfg.k, k_seed, location_embeddings),
        "levy": metrics.evaluate(levy, test, cfg.k, k_seed, location_embeddings),
    }
    return reports, {"fitted": fitted, "generated": gen, "levy": levy, "test": test}


def summarize(runs) -> dict:
    """Arithmetic means over a list of ``{method: EvalReport}`` dicts."""
    out = {}
    methods = sorted({m for r in runs for m in r})
    for method in methods:
        reps = [r[method] for r in runs if method in r]
        kinds = sorted({k for rep in reps for k in rep.metrics})
        entry = {"runs": len(reps), "metrics": {}}
        for k in kinds:
            vals = [rep.metrics[k] for rep in reps if k in rep.metrics]
            entry["metrics"][k] = {
                "value": float(np.mean([v["value"] for v in vals])),
                "coverage": float(np.mean([v["coverage"] for v in vals])),
            }
        rs = [rep.r_coeff for rep in reps if rep.r_coeff is not None]
        entry["r_coeff"] = float(np.mean(rs)) if rs else None
        entry["r_coeff_runs"] = len(rs)
        entry["chi2"] = float(np.mean([rep.chi2 for rep in reps]))
        out[method] = entry
    return out


def summary_reports(summary) -> list:
    rows = []
    for method, e in summary.items():
        rows.append((method, metrics.EvalReport(metrics=e["metrics"], r_coeff=e["r_coeff"], chi2=e["chi2"])))
    return rows


def run_experiment(dataset, cfg: RunConfig, out_dir, location_embeddings=None) -> dict:
    """Full k-fold protocol, repeated ``cfg.repeats`` times with derived seeds.

    Writes ``reports/fold<f>_repeat<r>.json``, ``summary.json``,
    ``results.txt`` and (optionally) figures under ``out_dir``.
    """
    os.makedirs(os.path.join(out_dir, "reports"), exist_ok=True)
    splits = kfold(dataset, cfg.folds, derive_seed(cfg.seed, "kfold"))
    with open(os.path.join(out_dir, "folds.json"), "w") as fh:
        json.dump([asdict(s) for s in splits], fh, indent=1)
    runs = []
    for repeat in range(cfg.repeats):
        for split in splits:
            log.info("repeat %d fold %d", repeat, split.fold_index)
            reports, art = run_fold(dataset.subset(split.train), dataset.subset(split.test), cfg,
                                    split.fold_index, repeat, location_embeddings)
            runs.append(reports)
            path = os.path.join(out_dir, "reports", f"fold{split.fold_index}_repeat{repeat}.json")
            with open(path, "w") as fh:
                json.dump({m: rep.to_dict() for m, rep in reports.items()}, fh, indent=1, sort_keys=True)
            if cfg.figures and repeat == 0 and split.fold_index == 0:
                _figures(out_dir, art, reports)
    summary = summarize(runs)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump({"config": cfg.to_dict(), "summary": summary}, fh, indent=1, sort_keys=True)
    table = metrics.results_table(summary_reports(summary))
    with open(os.path.join(out_dir, "results.txt"), "w") as fh:
        fh.write(table + "\n")
    if cfg.figures:
        from . import plotting
        plotting.plot_summary(summary, os.path.join(out_dir, "figures", "coverage.png"))
    return summary


def _figures(out_dir, art, reports):
    from . import plotting
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    plotting.plot_trajectories(art["test"], [g.coords for g in art["generated"]],
                               os.path.join(fig_dir, "fold0_trajectories.png"),
                               network=art["fitted"].network, baseline=art["levy"])
    plotting.plot_histograms(reports, os.path.join(fig_dir, "fold0_clusters.png"))
