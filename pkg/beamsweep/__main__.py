import argparse
import logging
import sys

from . import commands, errors
from .regressor import ModelRole

logger = logging.getLogger("beamsweep")


def main(action, command, verbose=False, **options):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s - %(name)s - %(message)s",
    )
    match (action, command):
        case ("scene", "gen"):
            commands.scene_gen(**options)

        case ("dataset", "build"):
            commands.dataset_build(**options)

        case ("dataset", "transform"):
            commands.dataset_transform(**options)

        case ("model", "train"):
            commands.model_train(**options)

        case ("model", "inspect"):
            commands.model_inspect(**options)

        case ("plan", "build"):
            commands.plan_build(**options)

        case ("eval", "run"):
            commands.eval_run(**options)

        case ("eval", "heatmap"):
            commands.eval_heatmap(**options)


def add_config_arguments(parser):
    parser.add_argument(
        "--config",
        dest="config_file",
        default=argparse.SUPPRESS,
        help="Optional. The config file",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=argparse.SUPPRESS,
        help="Optional. Overrides the master seed.",
    )
    parser.add_argument(
        "--smoke",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Optional. Apply the small smoke-test profile.",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="beamsweep",
        description="Location-aided mmWave beam training on simulated streets.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug output.")
    actions = parser.add_subparsers(required=True, dest="action")

    scene_parser = actions.add_parser("scene", help="Street snapshots.")
    scene_commands = scene_parser.add_subparsers(required=True, dest="command")
    gen_parser = scene_commands.add_parser("gen", help="Generate snapshots and paths.")
    add_config_arguments(gen_parser)
    gen_parser.add_argument("--out", required=True, help="The output directory.")

    dataset_parser = actions.add_parser("dataset", help="Beam-pair datasets.")
    dataset_commands = dataset_parser.add_subparsers(required=True, dest="command")
    dataset_build_parser = dataset_commands.add_parser("build", help="Sweep every UE.")
    add_config_arguments(dataset_build_parser)
    dataset_build_parser.add_argument(
        "--scenes",
        default=argparse.SUPPRESS,
        help="Optional. Scenes written by `scene gen`; generated afresh otherwise.",
    )
    dataset_build_parser.add_argument(
        "--format",
        dest="file_format",
        choices=["binary", "csv"],
        default=argparse.SUPPRESS,
        help="Optional. The dataset file format",
    )
    dataset_build_parser.add_argument(
        "--stochastic",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Optional. Estimate rates from noisy received symbols.",
    )
    dataset_build_parser.add_argument("--out", required=True, help="The rate dataset file.")

    transform_parser = dataset_commands.add_parser(
        "transform", help="Split rates into ratio and ATR datasets."
    )
    add_config_arguments(transform_parser)
    transform_parser.add_argument("--rates", required=True, help="The rate dataset.")
    transform_parser.add_argument(
        "--format",
        dest="file_format",
        choices=["binary", "csv"],
        default=argparse.SUPPRESS,
        help="Optional. The output file format",
    )
    transform_parser.add_argument("--out", required=True, help="The output directory.")

    model_parser = actions.add_parser("model", help="Tree-ensemble predictors.")
    model_commands = model_parser.add_subparsers(required=True, dest="command")
    train_parser = model_commands.add_parser("train", help="Train one model.")
    add_config_arguments(train_parser)
    train_parser.add_argument(
        "--dataset", required=True, help="Directory written by `dataset transform`."
    )
    train_parser.add_argument(
        "--role", required=True, choices=[role.value for role in ModelRole]
    )
    train_parser.add_argument(
        "--tune",
        action="store_true",
        default=argparse.SUPPRESS,
        help="Optional. Pick hyperparameters by K-fold cross-validation.",
    )
    train_parser.add_argument("--out", required=True, help="The model file.")
    inspect_parser = model_commands.add_parser("inspect", help="Describe a model.")
    inspect_parser.add_argument("file", help="The model file.")

    plan_parser = actions.add_parser("plan", help="Location-free BS beam sets.")
    plan_commands = plan_parser.add_subparsers(required=True, dest="command")
    plan_build_parser = plan_commands.add_parser("build", help="Cluster and select.")
    add_config_arguments(plan_build_parser)
    plan_build_parser.add_argument(
        "--dataset", required=True, help="Directory written by `dataset transform`."
    )
    plan_build_parser.add_argument(
        "--clusters",
        type=int,
        default=argparse.SUPPRESS,
        help="Optional. Overrides the configured cluster count.",
    )
    plan_build_parser.add_argument(
        "--beam-count",
        type=int,
        default=argparse.SUPPRESS,
        help="Optional. BS beams kept in the plan; the whole codebook by default.",
    )
    plan_build_parser.add_argument("--out", required=True, help="The plan file.")

    eval_parser = actions.add_parser("eval", help="End-to-end experiments.")
    eval_commands = eval_parser.add_subparsers(required=True, dest="command")
    for name, help_text in (
        ("run", "Run every scenario over the beam-pair sweep."),
        ("heatmap", "Sweep decoupled set sizes."),
    ):
        command_parser = eval_commands.add_parser(name, help=help_text)
        add_config_arguments(command_parser)
        command_parser.add_argument(
            "--out",
            default=argparse.SUPPRESS,
            help="Optional. Overrides the configured output directory.",
        )
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        main(**vars(args))
    except errors.Error as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(run())
