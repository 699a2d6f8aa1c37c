import json
import re
import warnings

import numpy as np
import pytest

from radarseg import io as rio
from radarseg.cli import main
from radarseg.config import SCHEMA_VERSION

SHORT = ["--duration", "40", "--seed", "7", "--variant", "no-tnet"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A short campaign pushed through every stage once."""
    d = tmp_path_factory.mktemp("run")
    common = SHORT + ["--out", str(d)]
    assert main(["simulate"] + common) == 0
    assert main(["label"] + common) == 0
    assert main(["encode"] + common) == 0
    assert main(["train", "--max-epochs", "3"] + common) == 0
    assert main(["eval", "--trees", "3"] + common) == 0
    return d


def test_pipeline_artifacts(workdir):
    names = {p.name for p in workdir.iterdir()}
    assert {"returns.jsonl", "returns.jsonl.manifest.json", "tracks.json", "labeled.jsonl", "samples.rsa",
            "model.ckpt", "history.csv", "metrics.csv", "confusion_pointnet.csv",
            "confusion_forest.csv"} <= names
    raw, header = rio.read_returns(workdir / "returns.jsonl")
    assert header["kind"] == "raw" and len(raw) > 0
    labeled, _ = rio.read_returns(workdir / "labeled.jsonl")
    assert (labeled.label > 0).all() and len(labeled) <= len(raw)
    X, y, _, sh = rio.read_samples(workdir / "samples.rsa")
    assert X.shape[1:] == (256, 5) and sh["config_hash"] == header["config_hash"]


def test_headers_embed_schema_and_hash(workdir):
    def first(name):
        return (workdir / name).read_text().splitlines()[0]

    h = json.loads(first("returns.jsonl"))["config_hash"]
    assert json.loads(first("labeled.jsonl"))["config_hash"] == h
    assert rio.read_samples(workdir / "samples.rsa")[3]["config_hash"] == h
    # train and eval carry extra flags, so their configs (and hashes) differ
    _, ck = rio.read_checkpoint(workdir / "model.ckpt")
    assert ck["schema"] == SCHEMA_VERSION and ck["seed"] == 7 and ck["config_hash"] != h
    assert first("history.csv") == f"# schema={SCHEMA_VERSION} config_hash={ck['config_hash']}"
    assert re.fullmatch(r"# schema=1 config_hash=[0-9a-f]{16}", first("metrics.csv"))
    assert first("confusion_forest.csv") == first("metrics.csv")


def test_history_best_val_loss_monotone(workdir):
    rows = rio.read_csv_rows(workdir / "history.csv")
    assert [int(r["epoch"]) for r in rows] == [1, 2, 3]
    best = [float(r["best_val_loss"]) for r in rows]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert best[-1] == min(float(r["val_loss"]) for r in rows)


def test_metrics_csv_rows(workdir):
    rows = rio.read_csv_rows(workdir / "metrics.csv")
    assert [r["method"] for r in rows] == ["pointnet"] * 6 + ["forest"] * 6
    assert rows[5]["class"] == "combined"


def test_config_echo(tmp_path, capsys):
    assert main(["bench", "--op", "conv1d", "--reps", "10", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "run.seed = 2024" in out and "# seed=2024 config_hash=" in out


def test_bench_checksums_equal(tmp_path):
    assert main(["bench", "--op", "conv1d", "--reps", "10", "--out", str(tmp_path)]) == 0
    rows = rio.read_csv_rows(tmp_path / "bench_conv1d.csv")
    assert len(rows) == 2 and len({r["checksum"] for r in rows}) == 1


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "--duration", "10", "--out", str(d)]) == 0
    for name in ("returns.jsonl", "tracks.json", "returns.jsonl.manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_zero_duration_gives_empty_dataset(tmp_path):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert main(["simulate", "--duration", "0", "--out", str(tmp_path)]) == 0
    assert any("no returns" in str(w.message) for w in caught)
    ret, header = rio.read_returns(tmp_path / "returns.jsonl")
    assert len(ret) == 0 and header["count"] == 0


@pytest.mark.slow
def test_default_campaign_volume(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "returns.jsonl.manifest.json").read_text())
    assert manifest["count"] >= 100_000


def oracle_checkpoint(d):
    """A hand-set no-tnet network whose logits are -|x - k| for class k."""
    widths = {"tnet_conv": [1], "tnet_fc": [], "mlp1": [1], "mlp2": [1], "seg": [10]}
    mlp1 = np.zeros((5, 1), np.float32)
    mlp1[0, 0] = 1.0
    seg = np.zeros((2, 10), np.float32)
    seg_b = np.zeros(10, np.float32)
    head = np.zeros((10, 5), np.float32)
    for k in range(1, 6):
        j = 2 * (k - 1)
        seg[0, j], seg_b[j] = 1.0, -k        # relu(x - k)
        seg[0, j + 1], seg_b[j + 1] = -1.0, k   # relu(k - x)
        head[j, k - 1] = head[j + 1, k - 1] = -1.0
    params = {"mlp1.0.W": mlp1, "mlp1.0.b": np.zeros(1, np.float32),
              "mlp2.0.W": np.zeros((1, 1), np.float32), "mlp2.0.b": np.zeros(1, np.float32),
              "seg.0.W": seg, "seg.0.b": seg_b, "head.W": head, "head.b": np.zeros(5, np.float32)}
    rng = np.random.default_rng(0)
    y = rng.integers(1, 6, (12, 16)).astype(np.uint8)
    X = np.zeros((12, 16, 5), np.float32)
    X[..., 0] = y
    rio.write_samples(d / "samples.rsa", X, y, np.arange(12) * 0.2, 0.2, "x", 0)
    rio.write_checkpoint(d / "model.ckpt", params, {
        "variant": "no-tnet", "widths": widths, "scales": [1.0] * 5, "seed": 0,
        "val_idx": list(range(12)), "train_idx": [], "split_hash": "oracle"})


def test_perfect_oracle_scores_one(tmp_path):
    oracle_checkpoint(tmp_path)
    assert main(["eval", "--baseline", "none", "--require-accuracy", "1.0", "--out", str(tmp_path)]) == 0
    rows = {r["class"]: r for r in rio.read_csv_rows(tmp_path / "metrics.csv")}
    assert float(rows["combined"]["accuracy"]) == 1.0
    assert all(float(rows[c]["f1"]) == 1.0 for c in ("ground", "m300", "airplane", "mini", "infrastructure"))


def test_require_accuracy_exit_code(tmp_path):
    oracle_checkpoint(tmp_path)
    X, y, s, _ = rio.read_samples(tmp_path / "samples.rsa")
    rio.write_samples(tmp_path / "samples.rsa", X, np.where(y == 5, 1, y + 1).astype(np.uint8), s, 0.2, "x", 0)
    assert main(["eval", "--baseline", "none", "--require-accuracy", "0.5", "--out", str(tmp_path)]) == 4


def test_exit_codes(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path)]) == 3
    assert "not found" in capsys.readouterr().err
    assert main(["simulate", "--recipe", "nope", "--out", str(tmp_path)]) == 2
    assert main(["bench", "--reps", "3", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--pc", "0", "--out", str(tmp_path)]) == 2
    (tmp_path / "samples.rsa").write_bytes(b"junk")
    assert main(["train", "--out", str(tmp_path)]) == 3
    (tmp_path / "labeled.jsonl").write_text("{not json\n")
    assert main(["encode", "--out", str(tmp_path)]) == 3


def test_encode_refuses_unlabeled(tmp_path):
    assert main(["simulate", "--duration", "5", "--out", str(tmp_path)]) == 0
    (tmp_path / "returns.jsonl").rename(tmp_path / "labeled.jsonl")
    assert main(["encode", "--duration", "5", "--out", str(tmp_path)]) == 3
