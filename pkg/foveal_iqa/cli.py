import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .config import Config, load_config
from .errors import FovealIQAError, PipelineError, ValidationError
from .geometry import GEAR_VR
from .manifest import Manifest, load_manifest
from .pipeline import COMMANDS, GROUP_BY_CHOICES, PipelineResult, RunOptions, run_pipeline
from .scoring import DEFAULT_METRICS, EXTERNAL_METRICS

logger = logging.getLogger(__name__)

OUT_DIR_ENV = "FOVEAL_IQA_OUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def create_argument_parser():
    """Create and configure the argument parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="foveal-iqa",
        description="Foveation-aware quality assessment of omnidirectional images",
    )
    parser.add_argument("command", choices=COMMANDS, help="Pipeline stage to run")
    parser.add_argument(
        "--manifest", "-m", type=str, default=None, help="Dataset manifest (JSON or YAML)."
    )
    parser.add_argument("--seed", type=int, default=None, help="Seed for fit restarts.")
    parser.add_argument("--jobs", "-j", type=int, default=None, help="Parallel workers.")
    parser.add_argument(
        "--out-dir",
        type=str,
        default=None,
        help=f"Output directory (overrides ${OUT_DIR_ENV} and the manifest).",
    )
    parser.add_argument(
        "--metrics",
        type=str,
        default=None,
        help=f"Comma-separated metric ids or 'all'. Available: {', '.join(DEFAULT_METRICS)}",
    )
    parser.add_argument(
        "--group-by",
        choices=GROUP_BY_CHOICES,
        default=None,
        help="Fit per source image plus pooled (image) or pooled only (all).",
    )
    parser.add_argument("--config", type=str, default=None, help="Path to config file.")
    parser.add_argument(
        "--verbose", "-v", action="count", default=0, help="More logging (-vv for debug)."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def parse_metrics(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items or items == ["all"]:
        return list(DEFAULT_METRICS)
    external = [item for item in items if item in EXTERNAL_METRICS]
    if external:
        raise ValidationError(
            f"{', '.join(external)} cannot be computed here; supply them via 'external_scores'"
        )
    return items


def resolve_options(args, config: Config, manifest: Optional[Manifest]) -> RunOptions:
    """Merge settings: CLI flag > environment (out-dir) > manifest > config > default."""
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
    elif os.environ.get(OUT_DIR_ENV):
        out_dir = Path(os.environ[OUT_DIR_ENV])
    elif manifest is not None and manifest.output_dir is not None:
        out_dir = manifest.output_dir
    else:
        out_dir = Path(config.out_dir)

    if args.seed is not None:
        seed = args.seed
    elif manifest is not None and manifest.seed is not None:
        seed = manifest.seed
    else:
        seed = config.seed

    return RunOptions(
        out_dir=out_dir,
        seed=seed,
        jobs=args.jobs if args.jobs is not None else config.jobs,
        metrics=parse_metrics(args.metrics) or list(config.metrics),
        group_by=args.group_by or config.group_by,
        max_value=config.max_value,
        restarts=config.restarts,
        max_iterations=config.max_iterations,
        tolerance=config.tolerance,
    )


def default_manifest() -> Manifest:
    """Manifest for the default headset with no images; enough for ``geometry``."""
    return Manifest(path=Path.cwd() / "default-manifest.json", display=GEAR_VR, images=[])


def load_run_manifest(args) -> Manifest:
    if args.manifest is not None:
        return load_manifest(args.manifest)
    if args.command == "geometry":
        return default_manifest()
    raise ValidationError(f"'{args.command}' needs --manifest")


def print_result(result: PipelineResult, verbose: bool = False) -> None:
    """Print stage output and the files it wrote."""
    if result.text:
        print(result.text, end="")
    if not result.artifacts:
        return
    if verbose:
        for path in result.artifacts:
            print(f"  wrote {path}")
    else:
        print(f"Wrote {len(result.artifacts)} file(s) under {result.artifacts[0].parent}")


def exit_code_for(error: BaseException) -> int:
    """2 for invalid input or configuration, 3 for anything that failed at run time."""
    cause = error.__cause__ if isinstance(error, PipelineError) else error
    if isinstance(cause, (ValidationError, FileNotFoundError)):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def handle_command(args) -> int:
    config = load_config(Path(args.config) if args.config else None)
    manifest = load_run_manifest(args)
    options = resolve_options(args, config, manifest)
    logger.info("options: %s", options)
    result = run_pipeline(manifest, args.command, options)
    print_result(result, verbose=args.verbose > 0)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point for the CLI."""
    parser = create_argument_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        code = handle_command(args)
    except (FovealIQAError, OSError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        code = exit_code_for(e)
    sys.exit(code)


if __name__ == "__main__":
    main()
