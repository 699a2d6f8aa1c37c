"""``radarseg`` command line: simulate, label, encode, train, eval, bench.

Commands share one working directory (``--out``); each stage reads the
previous stage's artifact from ``--in`` (default: the same directory).
Exit codes: 0 success, 2 config error, 3 data error, 4 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as rio
from . import pipeline
from .config import VARIANTS, ConfigError, RunConfig
from .eval import confusion, format_table, metrics, reports_to_csv
from .dataset import FeatureScaler
from .network import NetworkConfig, PointNetSegmenter
from .tensor.bench import CASES, CorrectnessError, bench_case

log = logging.getLogger("radarseg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ACCEPTANCE = 0, 2, 3, 4

RETURNS_FILE = "returns.jsonl"
TRACKS_FILE = "tracks.json"
LABELED_FILE = "labeled.jsonl"
SAMPLES_FILE = "samples.rsa"
CHECKPOINT_FILE = "model.ckpt"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.csv"


class AcceptanceError(RuntimeError):
    pass


# flag -> RunConfig field
_OVERRIDES = {
    "seed": "seed", "recipe": "recipe", "duration": "duration", "tf_ms": "tf_ms", "pc": "pc",
    "variant": "variant", "batch": "batch", "lr": "lr", "split": "split", "oversample_to": "oversample_to",
    "epsilon_m": "epsilon_m", "max_epochs": "max_epochs", "patience": "patience", "trees": "forest_trees",
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file (run.* keys)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--in", dest="inp", help="input directory (default: --out)")
    common.add_argument("--recipe", help="bundled recipe name or recipe file (default: campaign)")
    common.add_argument("--duration", type=float, help="override the recipe duration (s)")
    common.add_argument("--tf-ms", type=float, help="timeframe length in ms (default 200)")
    common.add_argument("--pc", type=int, help="points per sample (default 256)")
    common.add_argument("--variant", choices=VARIANTS)
    common.add_argument("--batch", type=int, help="batch size (default 32)")
    common.add_argument("--lr", type=float, help="learning rate (default 1e-3)")
    common.add_argument("--split", type=float, help="train share (default 0.75)")
    common.add_argument("--oversample-to", type=float, help="airplane point share target (default 0.02)")
    common.add_argument("--epsilon-m", type=float, help="matching tolerance in m (default 1.5)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="radarseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate a campaign to a return dataset")
    sub.add_parser("label", parents=[common], help="label returns from tracks and corridors")
    sub.add_parser("encode", parents=[common], help="cut labeled returns into fixed-size samples")
    p = sub.add_parser("train", parents=[common], help="train a segmentation network")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-seconds", type=float, help="wall-clock training budget")
    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint against the forest baseline")
    p.add_argument("--baseline", choices=("forest", "none"), default="forest")
    p.add_argument("--trees", type=int, help="forest size (default 100)")
    p.add_argument("--require-accuracy", type=float, help="exit 4 if network accuracy is lower")
    p = sub.add_parser("bench", parents=[common], help="time kernel implementations")
    p.add_argument("--op", default="conv1d", choices=sorted(CASES))
    p.add_argument("--reps", type=int, default=10)
    return parser


def resolve_config(args) -> RunConfig:
    overrides = {field: getattr(args, flag) for flag, field in _OVERRIDES.items()
                 if getattr(args, flag, None) is not None}
    return pipeline.load_config(args.config, **overrides)


def _announce(cfg: RunConfig, config_hash: str) -> None:
    print(cfg.dumps(), end="")
    print(f"# seed={cfg.seed} config_hash={config_hash}")
    sys.stdout.flush()


def _input_dir(args) -> Path:
    return Path(args.inp or args.out)


def _warn_hash(header: dict, config_hash: str, what: str) -> None:
    got = header.get("config_hash")
    if got is not None and got != config_hash:
        log.info("%s was produced under config %s; current config is %s", what, got, config_hash)


# -- commands -------------------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig, h: str) -> None:
    sim = pipeline.run_simulation(cfg)
    if len(sim.returns) == 0:
        warnings.warn("campaign produced no returns; writing an empty dataset", RuntimeWarning, stacklevel=2)
    out = Path(args.out)
    rio.write_returns(out / RETURNS_FILE, pipeline.manual_labels(sim.returns), h, cfg.seed, kind="raw")
    rio.write_tracks(out / TRACKS_FILE, sim.sensor_segments, sim.target_tracks, sim.corridors, h, cfg.seed)
    print(f"wrote {len(sim.returns)} returns over {sim.duration:.0f} s to {out / RETURNS_FILE}")


def cmd_label(args, cfg: RunConfig, h: str) -> None:
    src = _input_dir(args)
    returns, header = rio.read_returns(src / RETURNS_FILE)
    _warn_hash(header, h, RETURNS_FILE)
    sensors, targets, corridors, _ = rio.read_tracks(src / TRACKS_FILE)
    try:
        labeled, stats = pipeline.label_stream(returns, sensors, targets, corridors, pipeline.error_model(cfg))
    except ValueError as exc:
        raise rio.DataError(str(exc)) from exc
    rio.write_returns(Path(args.out) / LABELED_FILE, labeled, h, cfg.seed, kind="labeled")
    print(f"labeled {len(labeled)} returns (track matches {stats.matched}, corridor {stats.corridor}, "
          f"dropped {stats.dropped})")


def cmd_encode(args, cfg: RunConfig, h: str) -> None:
    returns, header = rio.read_returns(_input_dir(args) / LABELED_FILE)
    _warn_hash(header, h, LABELED_FILE)
    if len(returns) and (returns.label == 0).any():
        raise rio.DataError(f"{LABELED_FILE} still holds unlabeled returns; run the label stage")
    X, y, starts = pipeline.encode(returns, cfg)
    rio.write_samples(Path(args.out) / SAMPLES_FILE, X, y, starts, cfg.tf, h, cfg.seed)
    print(f"encoded {len(X)} samples of {cfg.pc} points")


def cmd_train(args, cfg: RunConfig, h: str) -> None:
    X, y, _, header = rio.read_samples(_input_dir(args) / SAMPLES_FILE)
    _warn_hash(header, h, SAMPLES_FILE)
    prep = _prepare(X, y, cfg)
    model = pipeline.train_network(prep, cfg, max_seconds=getattr(args, "max_seconds", None),
                                   verbose=int(args.verbose))
    out = Path(args.out)
    ck_header = {"config_hash": h, "seed": cfg.seed, "variant": cfg.variant,
                 "widths": {k: list(v) for k, v in model.config_.widths}, "scales": list(cfg.scales),
                 "train_idx": prep.split.train_idx.tolist(), "val_idx": prep.split.val_idx.tolist(),
                 "split_hash": prep.split_hash, "epochs": model.n_epochs_}
    rio.write_checkpoint(out / CHECKPOINT_FILE, model.params_, ck_header)
    (out / HISTORY_FILE).write_text(rio.history_to_csv(model.history_, h))
    last = model.history_[-1]
    print(f"trained {model.n_epochs_} epochs; best val loss {last['best_val_loss']:.5f}")


def _prepare(X, y, cfg):
    try:
        return pipeline.prepare(X, y, cfg)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise rio.DataError(str(exc)) from exc


def load_model(path) -> tuple[PointNetSegmenter, dict]:
    params, header = rio.read_checkpoint(path)
    try:
        if header["variant"] not in VARIANTS:
            raise ValueError(f"unknown variant {header['variant']!r}")
        # stored widths are the resolved (already scaled) layer sizes
        widths = tuple(sorted((k, tuple(int(w) for w in v)) for k, v in header["widths"].items()))
        model = PointNetSegmenter.from_params(params, NetworkConfig(header["variant"], widths))
    except (KeyError, TypeError, ValueError) as exc:
        raise rio.DataError(f"{path}: invalid checkpoint ({exc})") from exc
    model.split_hash_ = header.get("split_hash")
    return model, header


def cmd_eval(args, cfg: RunConfig, h: str) -> None:
    src = _input_dir(args)
    model, ck = load_model(src / CHECKPOINT_FILE)
    X, y, _, header = rio.read_samples(src / SAMPLES_FILE)
    _warn_hash(ck, h, CHECKPOINT_FILE)
    val_idx = np.asarray(ck.get("val_idx", range(len(X))), dtype=np.int64)
    train_idx = np.asarray(ck.get("train_idx", []), dtype=np.int64)
    if len(val_idx) == 0 or val_idx.max(initial=-1) >= len(X) or train_idx.max(initial=-1) >= len(X):
        raise rio.DataError("checkpoint split does not fit the sample archive")
    scaler = FeatureScaler(tuple(ck.get("scales", cfg.scales))).fit()
    cms = {"pointnet": confusion(model.predict(scaler.transform(X[val_idx])), y[val_idx])}
    if args.baseline == "forest":
        if len(train_idx) == 0:
            log.warning("checkpoint has no training indices; forest baseline skipped")
        else:
            Xt, yt = pipeline.oversample_training(X[train_idx], y[train_idx], cfg)
            forest = pipeline.make_forest(cfg).fit(Xt.reshape(-1, 5), yt.reshape(-1))
            fp = forest.predict(X[val_idx].reshape(-1, 5)).reshape(y[val_idx].shape)
            cms["forest"] = confusion(fp, y[val_idx])
    reports = {name: metrics(cm) for name, cm in cms.items()}
    out = Path(args.out)
    comment = rio.header_comment(h)
    (out / METRICS_FILE).write_text(reports_to_csv(reports, comment))
    for name, cm in cms.items():
        (out / f"confusion_{name}.csv").write_text(cm.to_csv(comment))
    print(format_table(reports))
    acc = reports["pointnet"].overall_accuracy
    if args.require_accuracy is not None and acc < args.require_accuracy:
        raise AcceptanceError(f"network accuracy {acc:.4f} below required {args.require_accuracy:.4f}")


def cmd_bench(args, cfg: RunConfig, h: str) -> None:
    try:
        report = bench_case(args.op, reps=args.reps, seed=cfg.seed)
    except CorrectnessError as exc:
        raise AcceptanceError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    text = report.to_csv(rio.header_comment(h))
    (Path(args.out) / f"bench_{args.op}.csv").write_text(text)
    print(text, end="")


COMMANDS = {"simulate": cmd_simulate, "label": cmd_label, "encode": cmd_encode, "train": cmd_train,
            "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        h = pipeline.fingerprint(cfg)
        _announce(cfg, h)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, h)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (rio.DataError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AcceptanceError as exc:
        print(f"acceptance check failed: {exc}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
