"""Human-readable summaries rendered from the packaged Jinja templates."""

from pathlib import Path

from jinja2 import Environment, FileSystemLoader

from .regressor import param_count
from .utils import format_float

__all__ = ["render_template", "render_report", "render_model"]

TEMPLATES_DIR = Path(__file__).parent / "templates"

env = Environment(
    loader=FileSystemLoader(searchpath=[TEMPLATES_DIR]),
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)
env.filters["num"] = format_float
env.filters["fixed"] = lambda value, digits=3: f"{float(value):.{digits}f}"


def render_template(template_name, **context):
    template = env.get_template(template_name)
    return template.render(context)


def render_report(result):
    scenarios = sorted({point.scenario for point in result.curves})
    return render_template(
        "report.md.j2",
        result=result,
        manifest=result.manifest,
        scenarios=scenarios,
        curves={
            scenario: [point for point in result.curves if point.scenario == scenario]
            for scenario in scenarios
        },
        cluster_counts=sorted({point.cluster_count for point in result.cluster_curves}),
    )


def render_model(model):
    return render_template(
        "inspect.txt.j2",
        model=model,
        param_count=param_count(model),
        depth_histogram=model.depth_histogram(),
        final_loss=model.train_loss[-1].mean(),
        initial_loss=model.train_loss[0].mean(),
    )
