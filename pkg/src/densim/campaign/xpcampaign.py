"""
Run densification simulation campaigns from the command line.

When run from the command line, `xpcampaign` reads a YAML config file,
simulates every (deployment, seed) pair it names and writes CSV
statistics per run plus a campaign summary.

    Sub-commands:
        - run: simulate and write results,
        - validate: check a config file and print the resolved config,
        - layout: write the default node layout of a deployment.

    Exit status is 0 on success, 1 for an invalid config and 2 for any
    other failure.  The environment variable DENSIM_LOG sets the log
    level (default WARNING).


Command line interface
----------------------
usage: densim [-h] {run,validate,layout} ...

Simulate mmWave densification with IAB nodes, repeaters and reflective surfaces

positional arguments:
  {run,validate,layout}
    run                 Run a campaign
    validate            Check a config file
    layout              Write the default layout of a deployment

usage: densim run [-h] [-c CONFIG] [-d DEPLOYMENT] [--seed SEED]
                  [--slots SLOTS] [-o OUT] [-l LAYOUT] [-j JOBS]

optional arguments:
  -c CONFIG, --config CONFIG
                        YAML config file; defaults reproduce the reference setup
  -d DEPLOYMENT, --deployment DEPLOYMENT
                        Run only this deployment
  --seed SEED           Run only this seed
  --slots SLOTS         Number of slots per run
  -o OUT, --out OUT     Output folder
  -l LAYOUT, --layout LAYOUT
                        YAML layout file overriding node placement
  -j JOBS, --jobs JOBS  Number of worker processes
"""

#%%
import argparse
import logging
import os
import sys

# Internal imports.
from densim.base import ConfigError, DeploymentKind
from densim.campaign import run_campaign, validate_config
from densim.config import dump_config
from densim.scenario import default_layout, write_layout

logger = logging.getLogger(__name__)

#%%

def _parse_args(argv=None):
    """
    Parse command line arguments

    Returns
    -------
    `argparse.Namespace` object

    Examples
    --------
    args = _parse_args(["run", "--config", "data/quick.yaml"])
    config = validate_config(args.config)
    """
    parser = argparse.ArgumentParser(
        prog="densim",
        description="Simulate mmWave densification with IAB nodes, repeaters and reflective surfaces"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a campaign")
    run.add_argument("-c", "--config", type=str,
                     help="YAML config file; defaults reproduce the reference setup")
    run.add_argument("-d", "--deployment", type=str,
                     help="Run only this deployment")
    run.add_argument("--seed", type=int,
                     help="Run only this seed")
    run.add_argument("--slots", type=int,
                     help="Number of slots per run")
    run.add_argument("-o", "--out", type=str,
                     help="Output folder")
    run.add_argument("-l", "--layout", type=str,
                     help="YAML layout file overriding node placement")
    run.add_argument("-j", "--jobs", type=int,
                     help="Number of worker processes")

    validate = commands.add_parser("validate", help="Check a config file")
    validate.add_argument("-c", "--config", type=str, required=True,
                          help="YAML config file")

    layout = commands.add_parser("layout", help="Write the default layout of a deployment")
    layout.add_argument("-c", "--config", type=str,
                        help="YAML config file for grid and entity settings")
    layout.add_argument("-d", "--deployment", type=str, required=True,
                        help="Deployment to lay out")
    layout.add_argument("-o", "--out", type=str,
                        help="Layout file to write; printed if omitted")

    return parser.parse_args(argv)


def _overrides(args):
    """RunConfig settings named on the command line"""
    overrides = {}
    if getattr(args, "deployment", None) is not None:
        try:
            overrides["deployments"] = (DeploymentKind.parse(args.deployment).value,)
        except ValueError as exc:
            raise ConfigError("run.deployments", str(exc)) from None
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = (args.seed,)
    overrides["n_slots"] = getattr(args, "slots", None)
    overrides["output_dir"] = getattr(args, "out", None)
    overrides["jobs"] = getattr(args, "jobs", None)
    overrides["layout_file"] = getattr(args, "layout", None)
    return overrides


#%%

def _run(args):
    config = validate_config(args.config, **_overrides(args))
    summary = run_campaign(config)
    print(summary.to_string(index=False))


def _validate(args):
    config = validate_config(args.config)
    print(dump_config(config), end="")


def _layout(args):
    config = validate_config(args.config)
    try:
        kind = DeploymentKind.parse(args.deployment)
    except ValueError as exc:
        raise ConfigError("run.deployments", str(exc)) from None
    records = default_layout(kind, config.grid(), config.scenario_params())
    if args.out:
        write_layout(records, args.out)
        logger.info("wrote layout to %s", args.out)
    else:
        for record in records:
            print(record)


def main(argv=None):
    level = os.environ.get("DENSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parse_args(argv)
    command = dict(run=_run, validate=_validate, layout=_layout)[args.command]
    try:
        command(args)
    except ConfigError as exc:
        print(f"densim: invalid config: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.debug("run failed", exc_info=True)
        print(f"densim: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
