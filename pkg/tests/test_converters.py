"""Smoke tests for the dataset converter scripts."""

import json
import pickle
import subprocess
import sys
from pathlib import Path

import numpy as np

from ringres.data import load_dataset

SCRIPTS = Path(__file__).parents[1] / "scripts"


def run_script(name, *args):
    return subprocess.run(
        [sys.executable, str(SCRIPTS / name), *map(str, args)],
        capture_output=True,
        text=True,
        timeout=120,
    )


def write_keypoint_tree(root, n_videos=4, n_keypoints=5):
    rng = np.random.default_rng(0)
    rows = []
    for v in range(n_videos):
        sample_id = f"vid{v:02d}"
        label = "wave" if v % 2 else "point"
        rows.append(f"{sample_id},{label}")
        d = root / sample_id
        d.mkdir(parents=True)
        for f in range(3 + v):
            flat = rng.uniform(0, 100, size=n_keypoints * 3).round(2).tolist()
            payload = {"people": [{"pose_keypoints_2d": flat}]}
            (d / f"frame_{f:06d}_keypoints.json").write_text(json.dumps(payload))
    (root / "labels.csv").write_text("\n".join(rows) + "\n")


class TestKeypointConverter:
    def test_round_trip(self, tmp_path):
        root = tmp_path / "export"
        write_keypoint_tree(root)
        proc = run_script(
            "convert_chalearn_keypoints.py", root, "--out", tmp_path / "ds"
        )
        assert proc.returncode == 0, proc.stderr
        ds = load_dataset(tmp_path / "ds" / "manifest.json")
        assert ds.task.kind == "classification"
        assert ds.task.n_classes == 2
        assert ds.n_channels == 10  # 5 keypoints, x and y
        assert len(ds.samples) == 4
        assert [s.series.shape[0] for s in ds.samples] == [3, 4, 5, 6]
        assert "class 0: point" in proc.stdout

    def test_empty_frame_becomes_zeros(self, tmp_path):
        root = tmp_path / "export"
        write_keypoint_tree(root, n_videos=2, n_keypoints=3)
        empty = root / "vid00" / "frame_000099_keypoints.json"
        empty.write_text(json.dumps({"people": []}))
        proc = run_script(
            "convert_chalearn_keypoints.py", root, "--out", tmp_path / "ds"
        )
        assert proc.returncode == 0, proc.stderr
        ds = load_dataset(tmp_path / "ds" / "manifest.json")
        np.testing.assert_array_equal(ds.samples[0].series[-1], np.zeros(6))

    def test_missing_labels_file(self, tmp_path):
        root = tmp_path / "export"
        root.mkdir()
        proc = run_script(
            "convert_chalearn_keypoints.py", root, "--out", tmp_path / "ds"
        )
        assert proc.returncode != 0


class TestEpochConverter:
    def write_participant(self, path, trials=2, channels=6, timesteps=50, seed=1):
        rng = np.random.default_rng(seed)
        blob = {
            "data": rng.normal(size=(trials, channels, timesteps)),
            "labels": rng.uniform(1, 9, size=(trials, 4)),
        }
        with open(path, "wb") as fh:
            pickle.dump(blob, fh, protocol=2)
        return blob

    def test_round_trip(self, tmp_path):
        blob = self.write_participant(tmp_path / "s01.dat")
        proc = run_script(
            "convert_deap_epochs.py", tmp_path / "s01.dat",
            "--out", tmp_path / "ds", "--epoch-length", 20,
        )
        assert proc.returncode == 0, proc.stderr
        ds = load_dataset(tmp_path / "ds" / "manifest.json")
        assert ds.task.kind == "regression"
        assert ds.n_channels == 6
        # 50 timesteps -> two 20-step windows per trial, tail dropped
        assert len(ds.samples) == 4
        assert all(s.series.shape == (20, 6) for s in ds.samples)
        np.testing.assert_allclose(
            ds.samples[0].series, blob["data"][0, :, :20].T, atol=1e-12
        )
        np.testing.assert_allclose(
            ds.samples[0].target, [blob["labels"][0, 1]], atol=1e-12
        )

    def test_label_column_selects_target(self, tmp_path):
        blob = self.write_participant(tmp_path / "s02.dat", trials=1)
        proc = run_script(
            "convert_deap_epochs.py", tmp_path / "s02.dat",
            "--out", tmp_path / "ds", "--epoch-length", 25, "--label-column", 3,
        )
        assert proc.returncode == 0, proc.stderr
        ds = load_dataset(tmp_path / "ds" / "manifest.json")
        np.testing.assert_allclose(
            ds.samples[0].target, [blob["labels"][0, 3]], atol=1e-12
        )

    def test_epoch_longer_than_trial(self, tmp_path):
        self.write_participant(tmp_path / "s03.dat", timesteps=10)
        proc = run_script(
            "convert_deap_epochs.py", tmp_path / "s03.dat",
            "--out", tmp_path / "ds", "--epoch-length", 134,
        )
        assert proc.returncode != 0
        assert "shorter than" in proc.stderr
