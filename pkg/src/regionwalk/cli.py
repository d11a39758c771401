"""Command-line entry point.

Stage commands share a work directory (``--out``) holding fixed file names,
so ``regionalize``, ``embed``, ``train``, ``generate`` and ``evaluate`` can
run one after the other.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import baselines, graphembed, hng, ingest, metrics, pipeline, sampler, synth, vrn
from .errors import RegionwalkError
from .experiment import RunConfig, derive_seed, generation_config, load_config, run_experiment

log = logging.getLogger("regionwalk")

DATASET = "dataset.json"
SPLIT = "split.json"
NETWORK = "network.json"
EMBEDDINGS = "embeddings.bin"
MODEL = "model.ckpt"
DICTIONARY = "latent_dictionary.json"
HEATMAP = "heatmap.json"
GENERATED = "generated.geojson"
BASELINE = "levy.geojson"
REPORT = "report.json"


class StageError(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"[{stage}] {cause}")


def _path(args, name):
    return os.path.join(args.out, name)


def build_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "seed": args.seed, "r": args.r, "top_y": args.top_y, "t": args.t, "folds": args.folds,
        "repeats": getattr(args, "repeats", None), "k": getattr(args, "k", None),
        "initial_zoom": getattr(args, "initial_zoom", None), "max_zoom": getattr(args, "max_zoom", None),
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "epochs", None) is not None:
        cfg.vrn = dataclasses.replace(cfg.vrn, epochs=args.epochs)
    if getattr(args, "no_figures", False):
        cfg.figures = False
    return cfg


def _load_dataset(args):
    path = args.dataset or _path(args, DATASET)
    return ingest.load_dataset(path)


def _train_split(args, ds):
    """Training subset (and test ids) recorded by ``regionalize``."""
    split_path = _path(args, SPLIT)
    if os.path.exists(split_path):
        with open(split_path) as fh:
            split = json.load(fh)
        return ds.subset(split["train"]), ds.subset(split["test"])
    return ds, ds


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


# -- commands -----------------------------------------------------------------

def cmd_synth(args, cfg):
    ds = synth.corridor_dataset(args.n, args.m, noise=args.noise, speed_jitter=args.speed_jitter,
                                route_spread=args.route_spread, seed=cfg.seed)
    path = args.dataset or _path(args, DATASET)
    ingest.save_dataset(ds, path)
    _write_json(os.path.splitext(path)[0] + ".geojson", ingest.dataset_geojson(ds))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(ingest.write_csv(synth.to_observations(ds)))
    print(f"wrote {len(ds.trajectories)} trajectories of {ds.m} days to {path}")


def cmd_ingest(args, cfg):
    with open(args.csv, "rb") as fh:
        raw = fh.read()
    cmap = json.loads(args.columns) if args.columns else None
    obs = ingest.parse_csv(raw, cmap, on_error="skip" if args.skip_bad_rows else "raise")
    start = tuple(int(x) for x in args.window_start.split("-"))
    end = tuple(int(x) for x in args.window_end.split("-"))
    ds = ingest.regularize(obs, (start, end), args.max_gap_days, args.min_coverage)
    path = args.dataset or _path(args, DATASET)
    ingest.save_dataset(ds, path)
    _write_json(os.path.splitext(path)[0] + ".geojson", ingest.dataset_geojson(ds))
    print(f"{len(obs)} observations -> {len(ds.trajectories)} trajectories of {ds.m} days ({path})")


def cmd_regionalize(args, cfg):
    ds = _load_dataset(args)
    if args.fold is not None:
        split = ingest.kfold(ds, cfg.folds, derive_seed(cfg.seed, "kfold"))[args.fold]
        _write_json(_path(args, SPLIT), dataclasses.asdict(split))
        train = ds.subset(split.train)
    else:
        if os.path.exists(_path(args, SPLIT)):
            os.remove(_path(args, SPLIT))
        train = ds
    net, seqs = hng.regionalize(train, cfg.r, cfg.initial_zoom, cfg.max_zoom)
    hng.save_network(net, _path(args, NETWORK), seqs)
    _write_json(_path(args, "network.geojson"), hng.network_geojson(net))
    print(f"{len(net.cells)} cells, {len(net.edges)} edges from {net.n_points} points")


def cmd_embed(args, cfg):
    net, _ = hng.load_network(_path(args, NETWORK))
    wcfg = dataclasses.replace(cfg.walk, seed=derive_seed(cfg.seed, "embed"))
    table = graphembed.embed_network(net, wcfg, np.random.default_rng(wcfg.seed))
    graphembed.save_embeddings(table, _path(args, EMBEDDINGS), wcfg)
    print(f"embedded {len(table.cells)} cells in {table.dim} dimensions")


def cmd_train(args, cfg):
    net, seqs = hng.load_network(_path(args, NETWORK))
    table = graphembed.load_embeddings(_path(args, EMBEDDINGS))
    ds = _load_dataset(args)
    vcfg = dataclasses.replace(cfg.vrn, top_y=cfg.top_y, seed=derive_seed(cfg.seed, "train"))
    model = vrn.train(net, seqs, table, vcfg, m=ds.m)
    vrn.save_model(model, _path(args, MODEL))
    vrn.save_dictionary(vrn.build_latent_dictionary(model, net, seqs), _path(args, DICTIONARY))
    sampler.save_heatmap(sampler.build_heatmap(net, cfg.dot_offset), _path(args, HEATMAP))
    if cfg.figures:
        from . import plotting
        plotting.plot_loss(model.loss_curve, _path(args, "training_loss.png"))
    print(f"trained {vcfg.epochs} epochs, loss {model.loss_curve[0]:.3f} -> {model.loss_curve[-1]:.3f}")


def cmd_generate(args, cfg):
    model = vrn.load_model(_path(args, MODEL))
    dictionary = vrn.load_dictionary(_path(args, DICTIONARY))
    heat = sampler.load_heatmap(_path(args, HEATMAP))
    gcfg = generation_config(cfg, args.m or model.m)
    if args.argmax:
        gcfg = dataclasses.replace(gcfg, next_region_rule="argmax")
    gen = pipeline.generate(model, dictionary, heat, gcfg)
    _write_json(_path(args, GENERATED), pipeline.to_geojson(gen))
    with open(_path(args, "generated.csv"), "w") as fh:
        fh.write(pipeline.to_csv(gen))
    print(f"generated {len(gen)} trajectories; duplicate rate {pipeline.duplicate_rate(gen):.4f}, "
          f"truncated {sum(g.truncated for g in gen)}")


def cmd_baseline(args, cfg):
    ds = _load_dataset(args)
    train, _ = _train_split(args, ds)
    params = baselines.fit_levy(train)
    paths = baselines.levy_generate(params, ds.m, cfg.t, np.random.default_rng(derive_seed(cfg.seed, "levy")),
                                    clamp=cfg.levy_clamp)
    _write_json(_path(args, BASELINE), pipeline.to_geojson(paths, {"method": "levy"}))
    with open(_path(args, "levy.csv"), "w") as fh:
        fh.write(pipeline.to_csv(paths))
    print(f"levy: step_scale={params.step_scale:.4f} deg, angle_sigma={params.angle_sigma:.4f} rad, "
          f"{len(paths)} trajectories")


def cmd_evaluate(args, cfg):
    ds = _load_dataset(args)
    _, test_ds = _train_split(args, ds)
    test = [t.coords for t in test_ds.trajectories]
    loc = None
    if args.location_embeddings:
        with open(args.location_embeddings) as fh:
            loc = metrics.LocationEmbeddings.from_csv(fh.read())
    rows = []
    sources = [("regionwalk", args.generated or _path(args, GENERATED))]
    if os.path.exists(_path(args, BASELINE)):
        sources.append(("levy", _path(args, BASELINE)))
    reports = {}
    for label, path in sources:
        with open(path) as fh:
            gen = pipeline.from_geojson(json.load(fh))
        rep = metrics.evaluate([g.coords for g in gen], test, cfg.k, derive_seed(cfg.seed, "kmeans"), loc)
        reports[label] = rep
        rows.append((label, rep))
    _write_json(_path(args, REPORT), {m: r.to_dict() for m, r in reports.items()})
    table = metrics.results_table(rows)
    with open(_path(args, "results.txt"), "w") as fh:
        fh.write(table + "\n")
    if cfg.figures:
        from . import plotting
        gen_paths = []
        with open(sources[0][1]) as fh:
            gen_paths = [g.coords for g in pipeline.from_geojson(json.load(fh))]
        plotting.plot_trajectories(test, gen_paths, _path(args, "trajectories.png"))
        plotting.plot_histograms(reports, _path(args, "clusters.png"))
    print(table)


def cmd_experiment(args, cfg):
    ds = _load_dataset(args)
    loc = None
    if args.location_embeddings:
        with open(args.location_embeddings) as fh:
            loc = metrics.LocationEmbeddings.from_csv(fh.read())
    summary = run_experiment(ds, cfg, args.out, loc)
    with open(_path(args, "results.txt")) as fh:
        print(fh.read(), end="")
    return summary


COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "regionalize": cmd_regionalize, "embed": cmd_embed,
    "train": cmd_train, "generate": cmd_generate, "evaluate": cmd_evaluate,
    "experiment": cmd_experiment, "baseline": cmd_baseline,
}


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", default=".", help="work/output directory")
    common.add_argument("--dataset", help="dataset JSON (default: <out>/dataset.json)")
    common.add_argument("--r", type=float, help="split threshold in degrees (default 1.0)")
    common.add_argument("--top-y", dest="top_y", type=int, help="top-y cells in the belief vector")
    common.add_argument("--t", type=int, help="number of generated trajectories")
    common.add_argument("--folds", type=int, help="cross-validation folds")
    common.add_argument("--k", type=int, help="k-means clusters for likeness")
    common.add_argument("--epochs", type=int, help="training epochs")
    common.add_argument("--initial-zoom", dest="initial_zoom", type=int)
    common.add_argument("--max-zoom", dest="max_zoom", type=int)
    common.add_argument("--no-figures", dest="no_figures", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="regionwalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic corridor dataset")
    s.add_argument("--n", type=int, default=60)
    s.add_argument("--m", type=int, default=60)
    s.add_argument("--noise", type=float, default=0.3)
    s.add_argument("--speed-jitter", dest="speed_jitter", type=float, default=0.15)
    s.add_argument("--route-spread", dest="route_spread", type=float, default=1.5)
    s.add_argument("--csv", help="also write the fixes as a Movebank-style CSV")

    s = sub.add_parser("ingest", parents=[common], help="CSV export -> regularised dataset")
    s.add_argument("csv")
    s.add_argument("--columns", help='JSON column map, e.g. {"id": "tag", "time": "t"}')
    s.add_argument("--window-start", default="3-1", help="clip window start as M-D")
    s.add_argument("--window-end", default="9-1", help="clip window end as M-D")
    s.add_argument("--max-gap-days", type=int, default=7)
    s.add_argument("--min-coverage", type=float, default=0.8)
    s.add_argument("--skip-bad-rows", action="store_true")

    s = sub.add_parser("regionalize", parents=[common], help="build the region network")
    s.add_argument("--fold", type=int, help="train on this fold's training split only")

    sub.add_parser("embed", parents=[common], help="node2vec embeddings of the network")
    sub.add_parser("train", parents=[common], help="train the model and build the latent dictionary")

    s = sub.add_parser("generate", parents=[common], help="generate trajectories")
    s.add_argument("--m", type=int, help="length (default: training length)")
    s.add_argument("--argmax", action="store_true", help="pick the most probable next cell")

    sub.add_parser("baseline", parents=[common], help="Levy-flight baseline trajectories")

    s = sub.add_parser("evaluate", parents=[common], help="score generated trajectories")
    s.add_argument("--generated", help="GeoJSON of generated trajectories")
    s.add_argument("--location-embeddings", help="CSV of lat, lon, v0..vd")

    s = sub.add_parser("experiment", parents=[common], help="full k-fold protocol")
    s.add_argument("--repeats", type=int)
    s.add_argument("--location-embeddings", help="CSV of lat, lon, v0..vd")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    os.makedirs(args.out, exist_ok=True)
    try:
        cfg = build_config(args)
    except (OSError, ValueError, TypeError) as e:
        print(f"error: [config] {e}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args, cfg)
    except (RegionwalkError, OSError, ValueError, KeyError) as e:
        print(f"error: [{args.command}] {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
