import json
from dataclasses import replace

import pytest

from forestnav.config import ConfigError, ExperimentConfig, bundled_config, load_config, save_config
from forestnav.lidar import LidarConfig


class TestExperimentConfig:
    def test_defaults_round_trip(self, tmp_path):
        cfg = ExperimentConfig()
        save_config(cfg, tmp_path / "c.json")
        assert load_config(tmp_path / "c.json") == cfg

    def test_partial_document(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"forest": {"trees_per_grid_range": [0, 0]}, "seed": 3}))
        cfg = load_config(tmp_path / "c.json")
        assert cfg.forest.trees_per_grid_range == (0, 0)
        assert cfg.seed == 3
        assert cfg.ppo.n_steps == 2048

    def test_none_is_defaults(self):
        assert load_config(None) == ExperimentConfig()

    def test_published_constants(self):
        cfg = ExperimentConfig()
        assert (cfg.kinematics.dt, cfg.kinematics.max_acc, cfg.kinematics.v_max) == (0.1, 3.0, 2.0)
        assert cfg.forest.cell_side == 16.6
        assert cfg.forest.trees_per_grid_range == (30, 60)
        assert cfg.forest.tree_radius_range == (0.1, 0.6)
        assert cfg.forest.trees_min_distance == 1.5
        assert cfg.lidar.max_range == 16.0 and cfg.lidar.beam_count == 1600
        e = cfg.env
        assert (e.proximity_threshold, e.proximity_penalty, e.collision_penalty) == (0.15, -0.25, -1.5)
        assert (e.centerline_coeff, e.speed_coeff, e.wrong_direction_factor) == (0.1, 0.8, 3.0)
        assert e.goal_distance_x == 30.0

    @pytest.mark.parametrize("name", ["default", "smoke", "reference"])
    def test_bundled(self, name):
        assert isinstance(bundled_config(name), ExperimentConfig)


class TestErrors:
    def write(self, tmp_path, text):
        p = tmp_path / "c.json"
        p.write_text(text)
        return p

    def test_bad_json_reports_line(self, tmp_path):
        p = self.write(tmp_path, '{\n  "seed": 1,\n  oops\n}')
        with pytest.raises(ConfigError, match="line 3"):
            load_config(p)

    def test_unknown_top_level(self, tmp_path):
        with pytest.raises(ConfigError, match="bogus"):
            load_config(self.write(tmp_path, '{"bogus": 1}'))

    def test_unknown_nested(self, tmp_path):
        with pytest.raises(ConfigError, match="ppo.gama"):
            load_config(self.write(tmp_path, '{"ppo": {"gama": 0.9}}'))

    def test_invalid_value_names_field(self, tmp_path):
        with pytest.raises(ConfigError, match="gamma"):
            load_config(self.write(tmp_path, '{"ppo": {"gamma": 2.0}}'))

    def test_seed_type(self, tmp_path):
        with pytest.raises(ConfigError, match="seed"):
            load_config(self.write(tmp_path, '{"seed": "x"}'))

    def test_indivisible_bins(self):
        with pytest.raises(ConfigError, match="obs_bins"):
            ExperimentConfig(lidar=LidarConfig(beam_count=1000), env=replace(ExperimentConfig().env, obs_bins=3))

    def test_cell_too_small_for_range(self):
        with pytest.raises(ConfigError, match="cell_side"):
            ExperimentConfig(lidar=LidarConfig(max_range=20.0))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "nope.json")
