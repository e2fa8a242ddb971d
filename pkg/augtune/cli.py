"""Click CLI entrypoint for augtune."""

import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
from dotenv import load_dotenv

from .config import RunConfig
from .constants import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_EPSILON,
    DEFAULT_LAMBDA,
    DEFAULT_MAX_RETRIES,
    DEFAULT_ORACLE_DRAWS,
    DEFAULT_ORACLE_K,
    DEFAULT_ORACLE_ORDER,
    DEFAULT_PARALLELISM,
    DEFAULT_POOL_SIZE,
    DEFAULT_REQUEST_TIMEOUT,
    DEFAULT_RETRY_DELAY_MS,
    DEFAULT_SEED,
    DEFAULT_TEMPERATURE,
    TOOL_NAME,
    VERSION,
)
from .errors import AugtuneError, ConfigError, InputError
from .pipeline import Pipeline
from .primitives.dataset import (
    BuildSummary,
    read_eval_records,
    read_manifest,
    read_pool_records,
    write_eval_records,
    write_manifest,
    write_pool_records,
)
from .primitives.metrics import per_policy_report, render_policy_table, unfilled
from .primitives.oracle import verify_manifest
from .types import ALL_POLICIES, PolicyKind

logger = logging.getLogger(__name__)

CONFIG_FIELDS = frozenset(item.name for item in fields(RunConfig))
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

Decorator = Callable[[Callable[..., Any]], Callable[..., Any]]


def configure_logging(verbose: int, log_level: Optional[str]) -> None:
    """Send augtune's logs to stderr at the requested level."""
    if log_level:
        level = getattr(logging, log_level.upper())
    else:
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    package_logger = logging.getLogger(TOOL_NAME)
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package_logger.addHandler(handler)
    package_logger.setLevel(level)


def _parse_policies(
    ctx: click.Context, param: click.Parameter, value: str
) -> Tuple[PolicyKind, ...]:
    try:
        names = [name for name in value.split(",") if name.strip()]
        return tuple(PolicyKind.parse(name) for name in names)
    except InputError as e:
        raise click.BadParameter(str(e)) from e


def _options(*decorators: Decorator) -> Decorator:
    def apply(fn: Callable[..., Any]) -> Callable[..., Any]:
        for decorator in reversed(decorators):
            fn = decorator(fn)
        return fn

    return apply


existing_file = click.Path(exists=True, dir_okay=False, readable=True)

core_options = _options(
    click.option(
        "--policies",
        default=",".join(p.value for p in ALL_POLICIES),
        show_default=True,
        callback=_parse_policies,
        help="Comma-separated augmentation policies",
    ),
    click.option(
        "--epsilon",
        type=click.FloatRange(0.0, 1.0),
        default=DEFAULT_EPSILON,
        show_default=True,
        help="Score threshold",
    ),
    click.option(
        "--lambda",
        "lambda_",
        type=click.FloatRange(0.0, 1.0),
        default=DEFAULT_LAMBDA,
        show_default=True,
        help="Weight of the augmented loss term",
    ),
    click.option(
        "--pool-size",
        type=click.IntRange(min=1),
        default=DEFAULT_POOL_SIZE,
        show_default=True,
        help="Augmented prompts per record",
    ),
    click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True),
)

generator_options = _options(
    click.option(
        "--generator",
        type=click.Choice(["rule_based", "remote"]),
        default="rule_based",
        show_default=True,
    ),
    click.option("--generator-base-url", default=None, help="Chat endpoint base URL"),
    click.option("--generator-model", default=None),
    click.option(
        "--templates",
        "templates_path",
        type=existing_file,
        default=None,
        help="JSON file overriding policy templates",
    ),
    click.option("--temperature", type=float, default=DEFAULT_TEMPERATURE),
)

embedder_options = _options(
    click.option(
        "--embedder",
        type=click.Choice(["fallback", "remote"]),
        default="fallback",
        show_default=True,
    ),
    click.option("--embedder-base-url", default=None),
    click.option("--embedder-model", default=None),
    click.option(
        "--use-evaluation/--no-evaluation",
        default=True,
        help="Turn the embedding filter off to score every item 1",
    ),
    click.option(
        "--score-cache", "score_cache_path", default=None, help="Raw score cache file"
    ),
)

runtime_options = _options(
    click.option(
        "--parallelism",
        type=click.IntRange(min=1),
        default=DEFAULT_PARALLELISM,
        show_default=True,
    ),
    click.option(
        "--max-retries", type=click.IntRange(min=0), default=DEFAULT_MAX_RETRIES
    ),
    click.option(
        "--retry-delay-ms", type=click.IntRange(min=0), default=DEFAULT_RETRY_DELAY_MS
    ),
    click.option(
        "--backoff",
        type=click.Choice(["exponential", "linear", "fixed"]),
        default="exponential",
    ),
    click.option(
        "--timeout", "request_timeout", type=float, default=DEFAULT_REQUEST_TIMEOUT
    ),
    click.option(
        "--api-key-env",
        default=DEFAULT_API_KEY_ENV,
        show_default=True,
        help="Environment variable holding the API key",
    ),
)

caption_options = _options(
    click.option("--captions", "captions_path", type=existing_file, default=None),
    click.option(
        "--captions-format",
        type=click.Choice(["coco_annotations", "plain_jsonl"]),
        default="coco_annotations",
        show_default=True,
    ),
    click.option(
        "--machine-captions",
        "machine_captions_path",
        type=existing_file,
        default=None,
        help="plain_jsonl captions used where an image has no human caption",
    ),
    click.option(
        "--caption-strategy",
        type=click.Choice(["first_by_id", "longest", "seeded_random"]),
        default="first_by_id",
        show_default=True,
    ),
    click.option("--use-captions/--no-captions", default=True),
)


def _config(command: str, options: Dict[str, Any]) -> RunConfig:
    values = {name: value for name, value in options.items() if name in CONFIG_FIELDS}
    return RunConfig(command=command, **values).validate()


def _report_summary(kind: str, summary: BuildSummary) -> None:
    counts = ", ".join(f"{k}={v}" for k, v in summary.to_dict().items() if v)
    click.echo(f"{kind}: {counts or 'nothing to do'}", err=True)


@click.group()
@click.version_option(VERSION, prog_name=TOOL_NAME)
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG")
@click.option(
    "--log-level",
    type=click.Choice(["debug", "info", "warning", "error"], case_sensitive=False),
    default=None,
)
def cli(verbose: int, log_level: Optional[str]) -> None:
    """Prompt augmentation and caption-utilized instruct-tuning datasets."""
    load_dotenv()
    configure_logging(verbose, log_level)


@cli.command("augment")
@click.option("--qa", "qa_path", type=existing_file, required=True)
@click.option("--out", "output_path", required=True)
@core_options
@generator_options
@runtime_options
def augment_command(**options: Any) -> None:
    """Generate the prompt pool of every QA record."""
    pipeline = Pipeline(_config("augment", options))
    summary = BuildSummary()
    pools = pipeline.augment(pipeline.load_records(), summary)
    write_pool_records(options["output_path"], pools, pipeline.config)
    _report_summary("augment", summary)


@cli.command("score")
@click.option("--pools", "pools_path", type=existing_file, required=True)
@click.option("--out", "output_path", required=True)
@core_options
@embedder_options
@runtime_options
def score_command(pools_path: str, **options: Any) -> None:
    """Score and threshold pools written by ``augment``."""
    pipeline = Pipeline(_config("score", options))
    summary = BuildSummary()
    pools = pipeline.score(read_pool_records(pools_path), summary)
    write_pool_records(options["output_path"], pools, pipeline.config)
    _report_summary("score", summary)


@cli.command("sample")
@click.option("--pools", "pools_path", type=existing_file, required=True)
@click.option("--out", "output_path", required=True)
@core_options
def sample_command(pools_path: str, **options: Any) -> None:
    """Draw the training prompt of every pool written by ``score``."""
    pipeline = Pipeline(_config("sample", options))
    summary = BuildSummary()
    pools = pipeline.sample(read_pool_records(pools_path), summary)
    write_pool_records(options["output_path"], pools, pipeline.config)
    _report_summary("sample", summary)


@cli.command("build")
@click.option("--qa", "qa_path", type=existing_file, required=True)
@click.option("--out", "output_path", required=True)
@caption_options
@click.option(
    "--use-augmentation/--no-augmentation",
    default=True,
    help="Train on the original prompt only, with an empty pool",
)
@core_options
@generator_options
@embedder_options
@runtime_options
def build_command(**options: Any) -> None:
    """Build the instruct-tuning manifest."""
    pipeline = Pipeline(_config("build", options))
    manifest, summary = pipeline.build(pipeline.load_records())
    write_manifest(options["output_path"], manifest, pipeline.config)
    _report_summary("build", summary)


@cli.command("testset")
@click.option("--qa", "qa_path", type=existing_file, required=True)
@click.option("--out", "output_path", required=True)
@core_options
@generator_options
@embedder_options
@runtime_options
def testset_command(**options: Any) -> None:
    """Build the augmented evaluation set."""
    pipeline = Pipeline(_config("testset", options))
    testset, summary = pipeline.testset(pipeline.load_records())
    write_eval_records(options["output_path"], testset, pipeline.config)
    _report_summary("testset", summary)


@cli.command("eval")
@click.option("--eval", "eval_path", type=existing_file, required=True)
@click.option("--out", "output_path", default=None, help="Filled evaluation file")
@click.option("--verify", is_flag=True, help="Only check that every response is filled")
@click.option("--base-url", "responder_base_url", default=None)
@click.option("--model", "responder_model", default=None)
@runtime_options
@click.pass_context
def eval_command(
    ctx: click.Context, eval_path: str, verify: bool, **options: Any
) -> None:
    """Fill model responses through a chat endpoint, or verify a filled file."""
    records = read_eval_records(eval_path)
    if verify:
        missing = unfilled(records)
        if missing:
            for record in missing[:10]:
                click.echo(
                    f"missing response: {record.record_id} ({record.policy})", err=True
                )
            click.echo(f"{len(missing)} of {len(records)} responses missing", err=True)
            ctx.exit(1)
        click.echo(f"all {len(records)} responses filled", err=True)
        return

    if not options.get("output_path"):
        raise ConfigError("filling responses needs --out")
    pipeline = Pipeline(_config("eval", options))
    filled = pipeline.fill(records)
    write_eval_records(options["output_path"], filled, pipeline.config)


@cli.command("report")
@click.option(
    "--eval", "eval_paths", type=existing_file, multiple=True, required=True
)
@click.option("--label", "labels", multiple=True, help="Row label per --eval file")
@click.option("--cug-mode", is_flag=True, help="Responses start with a caption")
@click.option(
    "--answer-rule",
    type=click.Choice(["first", "last"]),
    default="first",
    show_default=True,
)
@click.option("--out", "output_path", default=None, help="Write the table here too")
@click.option("--json", "json_path", default=None, help="Machine-readable report")
def report_command(
    labels: Sequence[str], json_path: Optional[str], **options: Any
) -> None:
    """Compute metrics and the per-policy accuracy table."""
    config = _config("report", options)
    if labels and len(labels) != len(config.eval_paths):
        raise click.BadParameter(
            "give one --label per --eval file", param_hint="--label"
        )
    names = list(labels) or [Path(path).stem for path in config.eval_paths]

    rows = []
    document: Dict[str, Any] = {
        "tool": TOOL_NAME,
        "version": VERSION,
        "config": config.to_header(),
        "rows": [],
    }
    for name, path in zip(names, config.eval_paths):
        report, _ = per_policy_report(
            read_eval_records(path), cug_mode=config.cug_mode, rule=config.answer_rule
        )
        rows.append((name, report))
        document["rows"].append({"label": name, "path": path, **report.to_dict()})

    table = render_policy_table(rows)
    click.echo(table, nl=False)
    if config.output_path:
        Path(config.output_path).write_text(table, encoding="utf-8")
    if json_path:
        Path(json_path).write_text(
            json.dumps(document, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )


@cli.command("oracle")
@click.option("--manifest", "manifest_path", type=existing_file, required=True)
@click.option("--out", "output_path", required=True, help="JSON verdict")
@click.option(
    "--order",
    "oracle_order",
    type=click.IntRange(min=1),
    default=DEFAULT_ORACLE_ORDER,
    show_default=True,
)
@click.option(
    "--k",
    "oracle_k",
    type=click.FloatRange(min=0.0, min_open=True),
    default=DEFAULT_ORACLE_K,
    show_default=True,
)
@click.option(
    "--draws",
    "oracle_draws",
    type=click.IntRange(min=2),
    default=DEFAULT_ORACLE_DRAWS,
    show_default=True,
)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.pass_context
def oracle_command(ctx: click.Context, **options: Any) -> None:
    """Verify the composite loss on a manifest with the toy language model."""
    config = _config("oracle", options)
    verdict = verify_manifest(
        read_manifest(options["manifest_path"]),
        order=config.oracle_order,
        k=config.oracle_k,
        draws=config.oracle_draws,
        seed=config.seed,
    )
    document = {
        "tool": TOOL_NAME,
        "version": VERSION,
        "config": config.to_header(),
        **verdict.to_dict(),
    }
    Path(options["output_path"]).write_text(
        json.dumps(document, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    for name, check in verdict.checks.items():
        status = "ok" if check.passed else f"FAILED ({len(check.failures)})"
        click.echo(f"{name}: {status}", err=True)
    if not verdict.passed:
        ctx.exit(1)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return its exit status.

    Returns:
        0 on success, 1 on a domain failure, 2 on a usage or configuration error
    """
    args: Optional[List[str]] = list(argv) if argv is not None else None
    try:
        result = cli.main(args=args, prog_name=TOOL_NAME, standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        return 2
    except AugtuneError as e:
        click.echo(f"error[{e.category}]: {e}", err=True)
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
