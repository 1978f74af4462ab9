import contextlib
import io
import unittest

import beamsweep
from beamsweep.__main__ import build_parser, run
from tests.helpers import TINY_CONFIG, TestTempWorkingDirMixin


class CliTest(TestTempWorkingDirMixin, unittest.TestCase):
    def setUp(self):
        super().setUp()
        (self.working_dir / beamsweep.CONFIG_FILENAME).write_text(TINY_CONFIG)

    def test_pipeline(self):
        self.assertEqual(0, run(["scene", "gen", "--out", "scenes"]))
        self.assertTrue((self.working_dir / "scenes" / "scenes.bin").exists())
        self.assertTrue((self.working_dir / "scenes" / "scenes.csv").exists())

        self.assertEqual(
            0,
            run(["dataset", "build", "--scenes", "scenes", "--out", "data/rates.bin"]),
        )
        self.assertEqual(
            0, run(["dataset", "transform", "--rates", "data/rates.bin", "--out", "data"])
        )
        for name in ("train_ratios", "train_atr", "test_ratios", "test_atr"):
            self.assertTrue((self.working_dir / "data" / f"{name}.bin").exists(), name)

        self.assertEqual(
            0,
            run(
                [
                    "model",
                    "train",
                    "--dataset",
                    "data",
                    "--role",
                    "decoupled-w",
                    "--out",
                    "models/w.bin",
                ]
            ),
        )
        output = io.StringIO()
        with contextlib.redirect_stdout(output):
            self.assertEqual(0, run(["model", "inspect", "models/w.bin"]))
        self.assertIn("Role:              decoupled-w", output.getvalue())
        self.assertIn("of 64", output.getvalue())

        self.assertEqual(
            0,
            run(
                [
                    "plan",
                    "build",
                    "--dataset",
                    "data",
                    "--clusters",
                    "2",
                    "--beam-count",
                    "3",
                    "--out",
                    "plans/plan.bin",
                ]
            ),
        )
        plan = beamsweep.load_plan("plans/plan.bin")
        self.assertEqual(2, plan.centroids.shape[0])
        self.assertEqual(3, plan.beam_count)
        beams = (self.working_dir / "plans" / "plan_beams.csv").read_text().splitlines()
        self.assertEqual(1 + 3, len(beams))
        self.assertTrue((self.working_dir / "plans" / "plan_clusters.csv").exists())
        self.assertFalse((self.working_dir / "plans" / "clusters.csv").exists())

    def test_csv_datasets(self):
        self.assertEqual(
            0, run(["dataset", "build", "--format", "csv", "--out", "data/rates.csv"])
        )
        self.assertEqual(
            0, run(["dataset", "transform", "--rates", "data/rates.csv", "--out", "data"])
        )
        self.assertTrue((self.working_dir / "data" / "train_atr.csv").exists())
        self.assertEqual(
            0,
            run(
                [
                    "model",
                    "train",
                    "--dataset",
                    "data",
                    "--role",
                    "coupled",
                    "--out",
                    "coupled.bin",
                ]
            ),
        )
        self.assertEqual(32, beamsweep.load_model("coupled.bin").output_dimension)

    def test_eval_heatmap(self):
        self.assertEqual(0, run(["eval", "heatmap", "--out", "out"]))
        self.assertTrue((self.working_dir / "out" / "heatmap.csv").exists())
        self.assertFalse((self.working_dir / "out" / "curves.csv").exists())

    def test_missing_config_file_fails(self):
        with self.assertLogs("beamsweep", level="ERROR"):
            self.assertEqual(
                1, run(["scene", "gen", "--config", "missing.toml", "--out", "scenes"])
            )

    def test_missing_dataset_fails(self):
        with self.assertLogs("beamsweep", level="ERROR"):
            self.assertEqual(
                1,
                run(
                    [
                        "model",
                        "train",
                        "--dataset",
                        "nowhere",
                        "--role",
                        "coupled",
                        "--out",
                        "m.bin",
                    ]
                ),
            )

    def test_unknown_role_is_a_usage_error(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                build_parser().parse_args(
                    ["model", "train", "--dataset", "d", "--role", "x", "--out", "m"]
                )
