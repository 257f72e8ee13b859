"""Command line entry points.

Exit codes: 0 success, 2 scenario validation failure, 3 runtime failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .runner import demo_figures, run
from .scenario import ScenarioError, default_scenario_path, load_scenario

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _load(path: str):
    try:
        return load_scenario(path)
    except ScenarioError as e:
        click.echo(str(e), err=True)
        sys.exit(EXIT_VALIDATION)
    except OSError as e:
        click.echo(f"cannot read scenario: {e}", err=True)
        sys.exit(EXIT_VALIDATION)


@click.group()
def main():
    """Agent-based industrial control network at desk scale."""


@main.command("run")
@click.option(
    "--scenario",
    "scenario_path",
    default=None,
    help="Scenario JSON file (bundled default scenario if omitted).",
)
@click.option("--duration", type=float, default=60.0, show_default=True, help="Simulated seconds.")
@click.option("--seed", type=int, default=None, help="Override the scenario RNG seed.")
@click.option("--no-noise", is_flag=True, help="Disable process noise.")
@click.option("--gateway-port", type=int, default=None, help="Serve the operator HTTP/WS API.")
@click.option(
    "--realtime",
    is_flag=True,
    help="Pace the simulation against the wall clock (for live console use).",
)
@click.option("--console", "console_dir", default=None, help="Static directory to serve at /.")
def run_cmd(scenario_path, duration, seed, no_noise, gateway_port, realtime, console_dir):
    """Boot the network, run it, and print the run report as JSON."""
    scenario = _load(scenario_path or default_scenario_path())
    try:
        report = run(
            scenario,
            duration,
            seed=seed,
            noise=False if no_noise else None,
            gateway_port=gateway_port,
            realtime=realtime,
            static_dir=console_dir,
        )
    except (OSError, RuntimeError) as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(report.to_json(), nl=False)


@main.group()
def demo():
    """Regenerate the bundled demonstration data."""


@demo.command("figures")
@click.option("--out", "outdir", required=True, type=click.Path(file_okay=False))
def figures_cmd(outdir):
    """Write fig9_trend.csv, fig10_dependency.csv and fig11_sync.csv."""
    try:
        paths = demo_figures(Path(outdir))
    except OSError as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(EXIT_RUNTIME)
    for p in paths:
        click.echo(str(p))


@main.command("validate")
@click.argument("scenario_path", type=click.Path())
def validate_cmd(scenario_path):
    """Validate a scenario file, reporting every violation."""
    _load(scenario_path)
    click.echo("scenario ok")


if __name__ == "__main__":
    main()
