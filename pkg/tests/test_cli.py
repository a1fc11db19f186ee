import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from forestnav.cli import main
from forestnav.config import ExperimentConfig, save_config
from forestnav.forest import ForestMap, load_map, save_map
from forestnav.ppo.checkpoint import save_checkpoint
from forestnav.ppo.networks import init_agent


def write_config(tmp_path, name="c.json", **sections):
    data = ExperimentConfig().to_dict()
    for key, value in sections.items():
        data[key].update(value)
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


@pytest.fixture
def tiny_cfg(tmp_path):
    return write_config(
        tmp_path, "tiny.json",
        forest={"trees_per_grid_range": [5, 10]},
        env={"max_steps": 20},
        ppo={"n_steps": 16, "n_envs": 2, "minibatch_size": 16, "n_epochs": 1, "total_steps": 64,
             "policy_hidden": [8], "value_hidden": [8], "checkpoint_every": 1},
    )


class TestGenMap:
    def test_byte_identical(self, tmp_path, capsys):
        assert main(["gen-map", "--seed", "42", "--out", str(tmp_path / "a")]) == 0
        assert main(["gen-map", "--seed", "42", "--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a/map_42.json").read_bytes()
        assert a == (tmp_path / "b/map_42.json").read_bytes()
        assert "count/target" in capsys.readouterr().out

    def test_empty_cells(self, tmp_path):
        cfg = write_config(tmp_path, forest={"trees_per_grid_range": [0, 0]})
        assert main(["gen-map", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "map_1.json").read_text())
        assert len(data["cells"]) == 49 and all(c == [] for c in data["cells"])

    def test_counts_bounded_by_target(self, tmp_path, capsys):
        main(["gen-map", "--seed", "9", "--out", str(tmp_path)])
        out = capsys.readouterr().out
        pairs = [tok.split("/") for line in out.splitlines()[2:] for tok in line.split()]
        assert len(pairs) == 49
        assert all(int(c) <= int(t) for c, t in pairs)
        fmap = load_map(tmp_path / "map_9.json")
        assert sorted(int(c) for c, _ in pairs) == sorted(fmap.cell_counts().tolist())


class TestScan:
    def test_writes_csv(self, tmp_path):
        fmap = ForestMap.from_trees(ExperimentConfig().forest, [(5.0, 0.0, 1.0)])
        save_map(fmap, tmp_path / "m.json")
        assert main(["scan", "--map", str(tmp_path / "m.json"), "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "scan.csv").read_text().splitlines()
        assert len(lines) == 1601
        assert lines[1] == "0.0,4.0"

    def test_naive_matches(self, tmp_path):
        main(["scan", "--seed", "3", "--x", "4.5", "--y", "-2", "--out", str(tmp_path / "a")])
        main(["scan", "--seed", "3", "--x", "4.5", "--y", "-2", "--naive", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a/scan.csv").read_bytes() == (tmp_path / "b/scan.csv").read_bytes()


class TestTrainEvalReplay:
    def test_train_zero_steps(self, tmp_path, tiny_cfg):
        assert main(["train", "--config", str(tiny_cfg), "--total-steps", "0", "--out", str(tmp_path / "r")]) == 0
        assert [p.name for p in (tmp_path / "r/checkpoints").iterdir()] == ["ckpt_000000.bin"]

    def test_train_deterministic(self, tmp_path, tiny_cfg):
        for run in ("a", "b"):
            assert main(["train", "--config", str(tiny_cfg), "--seed", "5", "--out", str(tmp_path / run)]) == 0
        for name in ("metrics.csv", "config.json", "checkpoints/ckpt_000002.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert len((tmp_path / "a/metrics.csv").read_text().splitlines()) == 1 + 64 // 32

    def test_eval_forward_empty_forest(self, tmp_path, capsys):
        cfg = write_config(tmp_path, forest={"trees_per_grid_range": [0, 0]})
        assert main(["eval", "--config", str(cfg), "--policy", "forward", "--episodes", "5", "--out", str(tmp_path)]) == 0
        assert "100.00%" in capsys.readouterr().out
        rows = (tmp_path / "eval.csv").read_text().splitlines()
        assert len(rows) == 6 and all(r.endswith(",true") for r in rows[1:])

    def test_eval_checkpoint_deterministic(self, tmp_path):
        ckpt = tmp_path / "p.bin"
        save_checkpoint(init_agent(1, 40, policy_out_gain=1.0), ckpt)
        for run in ("a", "b"):
            assert main(["eval", "--checkpoint", str(ckpt), "--episodes", "3", "--seed", "8",
                         "--out", str(tmp_path / run)]) == 0
        assert (tmp_path / "a/eval.csv").read_bytes() == (tmp_path / "b/eval.csv").read_bytes()

    def test_replay_and_plot(self, tmp_path, capsys):
        for run in ("a", "b"):
            assert main(["replay", "--policy", "forward", "--seed", "6", "--scans", "--out", str(tmp_path / run)]) == 0
        for name in ("trajectory.csv", "map.json", "scans/step_00003.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        n_rows = len((tmp_path / "a/trajectory.csv").read_text().splitlines()) - 1
        assert len(list((tmp_path / "a/scans").iterdir())) == n_rows

        assert main(["plot", "--trajectory", str(tmp_path / "a/trajectory.csv"), "--map", str(tmp_path / "a/map.json")]) == 0
        svg = (tmp_path / "a/plot.svg").read_text()
        assert svg.count("<circle") == load_map(tmp_path / "a/map.json").n_trees
        assert svg.count("<polyline") == 1

    def test_replay_collision_on_fixed_map(self, tmp_path):
        fmap = ForestMap.from_trees(ExperimentConfig().forest, [(2.0, y, 0.6) for y in np.arange(-3, 3.01, 0.5)])
        save_map(fmap, tmp_path / "wall.json")
        assert main(["replay", "--policy", "forward", "--map", str(tmp_path / "wall.json"), "--out", str(tmp_path)]) == 0
        header, *_, last = (tmp_path / "trajectory.csv").read_text().splitlines()
        row = dict(zip(header.split(","), last.split(",")))
        assert row["terminated"] == "true" and float(row["r_coll"]) == -1.5
        assert not (tmp_path / "map.json").exists()


class TestErrors:
    def test_bad_config_field(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"ppo": {"gamma": 3}}')
        assert main(["gen-map", "--config", str(cfg), "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("forestnav: error:") and "gamma" in err and "\n" not in err

    def test_checkpoint_shape_mismatch(self, tmp_path, capsys):
        ckpt = tmp_path / "p.bin"
        save_checkpoint(init_agent(1, 40), ckpt)
        cfg = write_config(tmp_path, env={"obs_bins": 1600})
        assert main(["eval", "--config", str(cfg), "--checkpoint", str(ckpt), "--out", str(tmp_path)]) == 1
        assert "shape mismatch" in capsys.readouterr().err

    def test_missing_checkpoint_flag(self, tmp_path, capsys):
        assert main(["eval", "--out", str(tmp_path)]) == 1
        assert "--checkpoint" in capsys.readouterr().err

    def test_malformed_trajectory(self, tmp_path, capsys):
        (tmp_path / "t.csv").write_text("step,x,y\n0,0,0\n1,zz,0\n")
        save_map(ForestMap.from_trees(ExperimentConfig().forest, []), tmp_path / "m.json")
        assert main(["plot", "--trajectory", str(tmp_path / "t.csv"), "--map", str(tmp_path / "m.json")]) == 1
        assert "t.csv:3:" in capsys.readouterr().err

    def test_negative_seed(self, tmp_path, capsys):
        assert main(["gen-map", "--seed", "-1", "--out", str(tmp_path)]) == 2
        assert "unsigned 64-bit" in capsys.readouterr().err

    def test_missing_map(self, tmp_path):
        assert main(["scan", "--map", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


@pytest.mark.skipif(shutil.which("forestnav") is None, reason="console script not installed")
class TestEntryPoint:
    def test_exit_codes(self, tmp_path):
        ok = subprocess.run(["forestnav", "gen-map", "--seed", "2", "--out", str(tmp_path)], capture_output=True, text=True)
        assert ok.returncode == 0
        bad = subprocess.run(["forestnav", "gen-map", "--config", str(tmp_path / "missing.json")],
                             capture_output=True, text=True)
        assert bad.returncode != 0
        assert len(bad.stderr.strip().splitlines()) == 1

    def test_module_invocation(self, tmp_path):
        cfg = tmp_path / "c.json"
        save_config(ExperimentConfig(), cfg)
        r = subprocess.run([sys.executable, "-m", "forestnav.cli", "gen-map", "--config", str(cfg), "--out", str(tmp_path)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
