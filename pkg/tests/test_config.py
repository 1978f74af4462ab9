import unittest

import beamsweep
from tests.helpers import TestTempWorkingDirMixin, tiny_config


class ConfigTest(TestTempWorkingDirMixin, unittest.TestCase):
    def write_config(self, text):
        (self.working_dir / beamsweep.CONFIG_FILENAME).write_text(text)

    def test_defaults(self):
        config = beamsweep.ExperimentConfig.load()
        self.assertEqual(0, config.seed)
        self.assertEqual(500, config.snapshot_count)
        self.assertEqual(1024, config.num_pairs)
        self.assertEqual((16, 64), config.heatmap_shape)
        self.assertEqual(128, max(config.beam_pair_budgets))
        self.assertEqual((1, 2, 3), config.scenarios)
        self.assertEqual(beamsweep.ArraySpec(8, 8), config.scene.bs_array)
        self.assertEqual((10.0, -7.0, 190.0, 7.0), config.scene.region_of_interest)
        self.assertEqual(
            (self.working_dir / "results").resolve(), config.output_dir.resolve()
        )

    def test_smoke_profile(self):
        config = beamsweep.ExperimentConfig.load(smoke=True)
        self.assertEqual(20, config.snapshot_count)
        self.assertEqual(3, config.folds)
        self.assertEqual([50], config.grid["tree_count"])
        self.assertEqual([2], config.grid["max_depth"])
        self.assertEqual([2], config.grid["min_samples_leaf"])
        self.assertEqual((2, 4), config.cluster_counts)

    def test_user_file_is_merged_over_defaults(self):
        self.write_config("seed = 3\n\n[selection]\n  combiner_count = 4\n")
        config = beamsweep.ExperimentConfig.load()
        self.assertEqual(3, config.seed)
        self.assertEqual(4, config.combiner_count)
        self.assertEqual(12, config.cluster_count)

    def test_arguments_override_the_file(self):
        self.write_config("seed = 3\n")
        config = beamsweep.ExperimentConfig.load(seed=9, output_dir="elsewhere")
        self.assertEqual(9, config.seed)
        self.assertEqual("elsewhere", config.output_dir.name)

    def test_explicit_config_file(self):
        (self.working_dir / "other.toml").write_text("snapshot_count = 7\n")
        config = beamsweep.ExperimentConfig.load(config_file="other.toml")
        self.assertEqual(7, config.snapshot_count)

    def test_missing_explicit_config_file(self):
        with self.assertRaises(beamsweep.ConfigError):
            beamsweep.ExperimentConfig.load(config_file="missing.toml")

    def test_malformed_toml(self):
        self.write_config("seed = \n")
        with self.assertRaises(beamsweep.ConfigError):
            beamsweep.ExperimentConfig.load()

    def test_unsupported_schema_version(self):
        self.write_config("schema_version = 2\n")
        with self.assertRaises(beamsweep.ConfigError):
            beamsweep.ExperimentConfig.load()

    def test_invalid_values(self):
        for text in (
            "[selection]\n  beam_pair_budgets = [2000]\n",
            "[selection]\n  scenarios = [4]\n",
            "[selection]\n  combiner_count = 17\n",
            "[dataset]\n  folds = 1\n",
            "[dataset]\n  test_fraction = 1.5\n",
            "[training.grid]\n  budget_parameters = [10]\n",
            "[training.grid]\n  colour = [1]\n",
            "[scene]\n  colour = 1\n",
            "[scene]\n  bus_fraction = 2.0\n",
            "[evaluation]\n  heatmap_combiners = 17\n",
        ):
            with self.subTest(text=text):
                self.write_config(text)
                with self.assertRaises(beamsweep.ConfigError):
                    beamsweep.ExperimentConfig.load()

    def test_hash_ignores_where_results_go(self):
        first = tiny_config(output_dir="a", project_dir=self.working_dir)
        second = tiny_config(
            {"workers": 2}, output_dir="b", project_dir=self.working_dir
        )
        self.assertEqual(first.config_hash(), second.config_hash())
        self.assertNotEqual(first.config_hash(), tiny_config(seed=1).config_hash())
