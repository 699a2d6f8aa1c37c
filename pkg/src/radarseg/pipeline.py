"""End-to-end stages shared by the command line and the tests.

simulate -> label -> encode -> split/oversample -> train (network, forest) -> evaluate.
Every stochastic stage is seeded from ``RunConfig.seed``.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_flat, parse_flat, text_hash
from .dataset import FeatureScaler, FrameEncoder, oversample_minority, split_train_val
from .eval import RandomForest, compare
from .labeling import SensorErrorModel, SensorTrack, TargetTrack, label_corridor, label_returns
from .network import PointNetSegmenter
from .returns import ClassLabel, Returns
from .simulator import Simulation, bundled_recipe_text, recipe_from_flat, simulate

log = logging.getLogger(__name__)

# classes whose labels come from GPS matching or corridors rather than manual annotation
TRACKED_CLASSES = (ClassLabel.M300, ClassLabel.AIRPLANE)


def recipe_text(cfg: RunConfig) -> str:
    """Recipe source: a file path when one exists, else a bundled recipe name."""
    path = Path(cfg.recipe)
    if path.is_file():
        return path.read_text()
    try:
        return bundled_recipe_text(cfg.recipe)
    except (FileNotFoundError, OSError) as exc:
        raise ConfigError(f"recipe {cfg.recipe!r} is neither a file nor a bundled recipe") from exc


def fingerprint(cfg: RunConfig) -> str:
    """Hash of the resolved configuration and the recipe it points at."""
    return text_hash(cfg.dumps() + "\n" + recipe_text(cfg))


def run_simulation(cfg: RunConfig) -> Simulation:
    values = parse_flat(recipe_text(cfg))
    return simulate(recipe_from_flat(values, duration=cfg.duration, seed=cfg.seed))


def manual_labels(returns: Returns) -> Returns:
    """Copy with GPS/corridor-labeled classes cleared, as a raw recording would be."""
    out = Returns(returns.t, returns.r, returns.az, returns.el, returns.doppler, returns.rcs,
                  returns.label.copy())
    out.label[np.isin(out.label, [int(c) for c in TRACKED_CLASSES])] = 0
    return out


def sensor_tracks(sim: Simulation):
    return [SensorTrack(t, p, y) for t, p, y in sim.sensor_segments]


def target_tracks(sim: Simulation):
    return [TargetTrack(tr.times, tr.positions, tr.spec) for tr in sim.target_tracks]


def sensor_poses(t, sensors):
    """Interpolated sensor position and yaw at each timestamp."""
    t = np.asarray(t, float)
    xyz = np.full((len(t), 3), np.nan)
    yaw = np.full(len(t), np.nan)
    for s in sensors:
        inside = (t >= s.times[0]) & (t <= s.times[-1]) & np.isnan(yaw)
        if inside.any():
            xyz[inside], yaw[inside] = s.pose_at(t[inside])
    if np.isnan(yaw).any():
        raise ValueError(f"{int(np.isnan(yaw).sum())} returns fall outside every sensor track")
    return xyz, yaw


@dataclass
class LabelStats:
    matched: int
    corridor: int
    manual: int
    dropped: int


def label_stream(returns: Returns, sensors, targets, corridors, err: SensorErrorModel):
    """Apply GPS matching, then corridors; drop returns left without a label.

    Returns ``(labeled Returns, LabelStats)``.
    """
    if len(returns) == 0:
        return returns, LabelStats(0, 0, 0, 0)
    xyz, yaw = sensor_poses(returns.t, sensors)
    labels = returns.label.copy()
    matched = label_returns(returns, xyz, yaw, targets, err)
    labels[matched > 0] = matched[matched > 0]
    n_corr = 0
    for corridor, t0, t1, cls in corridors:
        window = (returns.t >= t0) & (returns.t <= t1) & (matched == 0)
        if not window.any():
            continue
        idx = np.flatnonzero(window)
        sub = returns[idx]
        new = label_corridor(sub, xyz[idx], yaw[idx], corridor, cls, labels=labels[idx])
        n_corr += int(np.sum(new != labels[idx]))
        labels[idx] = new
    keep = labels > 0
    stats = LabelStats(int((matched > 0).sum()), n_corr, int(((returns.label > 0) & (matched == 0)).sum()),
                       int((~keep).sum()))
    out = Returns(returns.t, returns.r, returns.az, returns.el, returns.doppler, returns.rcs, labels)
    return out[keep], stats


def encode(returns: Returns, cfg: RunConfig):
    return FrameEncoder(cfg.tf, cfg.pc, cfg.seed).transform(returns)


@dataclass
class Prepared:
    split: object
    X_train: np.ndarray      # raw features, oversampled
    y_train: np.ndarray
    X_val: np.ndarray        # raw features
    y_val: np.ndarray
    scaler: FeatureScaler

    @property
    def split_hash(self) -> str:
        h = hashlib.sha256(np.asarray(self.split.train_idx, np.int64).tobytes())
        h.update(np.asarray(self.split.val_idx, np.int64).tobytes())
        return h.hexdigest()[:16]


def oversample_training(X, y, cfg: RunConfig):
    """Airplane oversampling of a training set; a no-op when no sample carries an airplane point."""
    if not (np.asarray(y) == int(ClassLabel.AIRPLANE)).any():
        return X, y
    return oversample_minority(X, y, ClassLabel.AIRPLANE, cfg.oversample_to)


def prepare(X, y, cfg: RunConfig) -> Prepared:
    split = split_train_val(y, cfg.split, cfg.seed)
    Xt, yt = oversample_training(X[split.train_idx], y[split.train_idx], cfg)
    return Prepared(split, Xt, yt, X[split.val_idx], y[split.val_idx], FeatureScaler(cfg.scales).fit())


def make_network(cfg: RunConfig, **kwargs) -> PointNetSegmenter:
    return PointNetSegmenter(variant=cfg.variant, widths=cfg.widths, learning_rate=cfg.lr, beta1=cfg.beta1,
                             beta2=cfg.beta2, adam_eps=cfg.adam_eps, batch_size=cfg.batch,
                             max_epochs=cfg.max_epochs, patience=cfg.patience, min_delta=cfg.min_delta,
                             reg_weight=cfg.reg_weight, random_state=cfg.seed, **kwargs)


def train_network(prep: Prepared, cfg: RunConfig, **kwargs) -> PointNetSegmenter:
    model = make_network(cfg, **kwargs)
    model.fit(prep.scaler.transform(prep.X_train), prep.y_train,
              prep.scaler.transform(prep.X_val), prep.y_val)
    model.split_hash_ = prep.split_hash
    return model


def make_forest(cfg: RunConfig) -> RandomForest:
    return RandomForest(n_trees=cfg.forest_trees, max_depth=cfg.forest_depth, min_leaf=cfg.forest_min_leaf,
                        max_features=cfg.forest_max_features, max_points=cfg.forest_max_points,
                        random_state=cfg.seed)


def train_forest(prep: Prepared, cfg: RunConfig) -> RandomForest:
    forest = make_forest(cfg).fit(prep.X_train.reshape(-1, 5), prep.y_train.reshape(-1))
    forest.split_hash_ = prep.split_hash
    return forest


def evaluate(model, forest, prep: Prepared):
    return compare(model, forest, prep.X_val, prep.y_val, scaler=prep.scaler)


def error_model(cfg: RunConfig) -> SensorErrorModel:
    values = parse_flat(recipe_text(cfg))
    return SensorErrorModel(
        range_err=float(values.get("noise.range_m", 0.5)),
        azimuth_err=math.radians(float(values.get("noise.azimuth_deg", 1.0))),
        elevation_err=math.radians(float(values.get("noise.elevation_deg", 1.0))),
        epsilon=cfg.epsilon_m,
    )


def build_samples(cfg: RunConfig):
    """Simulate, label and encode in memory: ``(X, y, frame_start, LabelStats)``."""
    sim = run_simulation(cfg)
    labeled, stats = label_stream(manual_labels(sim.returns), sensor_tracks(sim), target_tracks(sim),
                                  sim.corridors, error_model(cfg))
    X, y, starts = encode(labeled, cfg)
    return X, y, starts, stats


def load_config(path=None, **overrides) -> RunConfig:
    values = load_flat(path) if path else {}
    cfg = RunConfig.from_flat(values)
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()
