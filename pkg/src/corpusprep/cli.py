"""Command-line interface.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime failure.
The default pipeline file can be set with the CORPUSPREP_CONFIG environment
variable.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

import click

from . import __version__
from .balance import MixtureError, MixtureSpec, REFERENCE_TARGETS, balance as balance_docs
from .benchmark import ORIENTATIONS, ModelCounter, SubprocessCounter, benchmark as run_benchmark, emit_report, to_csv, to_markdown
from .cleanse import CleanseReport, FilterRule, RuleError, cleanse as cleanse_docs, default_rules, load_blocklist
from .config import CONFIG_ENV_VAR, ConfigError, PipelineConfig, stage_seed, validate_config
from .dedup import DedupConfigError, DedupParams, deduplicate, write_audit_log
from .ingest import COUNT_UNITS, JsonlReader, corpus_stats, write_documents
from .pipeline import STAGES, encode_all, run_pipeline
from .prep import EXPORT_FORMATS, PACK_MODES, PackError, Packer, ScheduleConfig, export_packed, schedule_csv
from .tokenizer import TokenizerModel, train_bpe

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
_VALIDATION_ERRORS = (ConfigError, MixtureError, DedupConfigError, RuleError, PackError)


class _Cli(click.Group):
    def main(self, args: Any = None, prog_name: Any = None, complete_var: Any = None, standalone_mode: bool = True, **extra: Any) -> Any:
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_VALIDATION)
        except click.Abort:
            click.echo("aborted", err=True)
            sys.exit(EXIT_VALIDATION)
        except _VALIDATION_ERRORS as exc:
            click.echo(f"validation error:\n{exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


class _State:
    def __init__(self, config: str | None, seed: int | None, threads: int | None, output_dir: str | None) -> None:
        self.config_path = config
        self.seed = seed
        self.threads = threads
        self.output_dir = output_dir
        self._cfg: PipelineConfig | None = None

    def config(self, required: bool = False) -> PipelineConfig | None:
        if self._cfg is None and self.config_path:
            cfg = validate_config(self.config_path, self.output_dir)
            overrides: dict[str, Any] = {}
            if self.seed is not None:
                overrides["seed"] = self.seed
            if self.threads is not None:
                overrides["threads"] = self.threads
            self._cfg = replace(cfg, **overrides) if overrides else cfg
        if required and self._cfg is None:
            raise click.UsageError(f"a pipeline config is required (--config or ${CONFIG_ENV_VAR})")
        return self._cfg

    def seed_for(self, stage: str) -> int:
        cfg = self.config()
        base = self.seed if self.seed is not None else (cfg.seed if cfg else 0)
        return stage_seed(base, stage)


pass_state = click.make_pass_decorator(_State)


@click.group(cls=_Cli)
@click.version_option(__version__)
@click.option("--config", "config", envvar=CONFIG_ENV_VAR, type=click.Path(dir_okay=False), help="Pipeline TOML file.")
@click.option("--seed", type=int, default=None, help="Global seed (overrides the config).")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker cap for parallel stages.")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None, help="Pipeline output directory.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx: click.Context, config: str | None, seed: int | None, threads: int | None, output_dir: str | None, verbose: int) -> None:
    """Build balanced pretraining corpora and byte-fallback BPE tokenizers."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = _State(config, seed, threads, output_dir)


def _read_input(path: str) -> JsonlReader:
    return JsonlReader(path)


def _dump(obj: Any, output: str | None) -> None:
    text = json.dumps(obj, ensure_ascii=False, indent=2) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("config_path", required=False, type=click.Path(dir_okay=False))
@pass_state
def validate(state: _State, config_path: str | None) -> None:
    """Validate a pipeline file and print it with defaults filled in."""
    path = config_path or state.config_path
    if not path:
        raise click.UsageError(f"no config given (argument, --config or ${CONFIG_ENV_VAR})")
    cfg = validate_config(path, state.output_dir)
    click.echo(json.dumps(cfg.to_dict(), ensure_ascii=False, indent=2))


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--unit", type=click.Choice(COUNT_UNITS), default="bytes", show_default=True)
@click.option("--tokenizer", "model_path", type=click.Path(exists=True, dir_okay=False), help="Required for --unit tokens.")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
def stats(input_path: str, unit: str, model_path: str | None, output: str | None) -> None:
    """Per-language corpus statistics as a JSON report."""
    counter = TokenizerModel.load(model_path).count if model_path else None
    if unit == "tokens" and counter is None:
        raise click.UsageError("--unit tokens requires --tokenizer")
    reader = _read_input(input_path)
    result = corpus_stats(reader, unit, counter)
    report = result.to_report()
    report["skipped_lines"] = reader.skipped
    _dump(report, output)


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--report", type=click.Path(dir_okay=False))
@click.option("--blocklist", type=click.Path(exists=True, dir_okay=False), help="One term per line.")
@pass_state
def cleanse(state: _State, input_path: str, output_path: str, report: str | None, blocklist: str | None) -> None:
    """Normalize structure/whitespace and apply quality filters."""
    cfg = state.config()
    rules: list[FilterRule] = list(cfg.rules) if cfg else default_rules()
    if blocklist:
        rules.append(FilterRule("blocklist_file", "blocklist", terms=load_blocklist(blocklist)))
    rep = CleanseReport()
    n = write_documents(cleanse_docs(_read_input(input_path), rules, rep), output_path)
    _dump(rep.to_dict(), report) if report else click.echo(f"kept {n} of {rep.input_docs} documents", err=True)


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--audit", type=click.Path(dir_okay=False), help="JSONL audit log of dropped documents.")
@click.option("--ngram", type=int)
@click.option("--num-perm", type=int)
@click.option("--bands", type=int)
@click.option("--rows", type=int)
@click.option("--threshold", type=float)
@click.option("--per-language/--global", default=None)
@pass_state
def dedup(state: _State, input_path: str, output_path: str, audit: str | None, **overrides: Any) -> None:
    """Exact and near-duplicate removal (MinHash-LSH, verified by exact Jaccard)."""
    cfg = state.config()
    base = cfg.dedup if cfg else DedupParams()
    changes = {k: v for k, v in overrides.items() if v is not None}
    params = replace(base, seed=state.seed_for("dedup"), **changes)
    docs = list(_read_input(input_path))
    survivors, decisions = deduplicate(docs, params)
    write_documents(survivors, output_path)
    if audit:
        write_audit_log(decisions, audit)
    click.echo(f"kept {len(survivors)} of {len(docs)} documents", err=True)


def _parse_targets(values: tuple[str, ...]) -> dict[str, float]:
    out = {}
    for item in values:
        lang, _, share = item.partition("=")
        try:
            out[lang.strip()] = float(share)
        except ValueError:
            raise click.BadParameter(f"expected LANG=PROPORTION, got {item!r}", param_hint="--target") from None
    return out


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--target", "targets", multiple=True, help="LANG=PROPORTION, repeatable (default ko=0.35 en=0.28 code=0.37).")
@click.option("--unit", type=click.Choice(COUNT_UNITS), default=None)
@click.option("--budget", type=float, default=None, help="Total output size in the chosen unit.")
@click.option("--max-repetition", type=float, default=None)
@click.option("--tokenizer", "model_path", type=click.Path(exists=True, dir_okay=False), help="Required for --unit tokens.")
@click.option("--report", type=click.Path(dir_okay=False))
@pass_state
def balance(
    state: _State, input_path: str, output_path: str, targets: tuple[str, ...], unit: str | None,
    budget: float | None, max_repetition: float | None, model_path: str | None, report: str | None,
) -> None:
    """Up/down-sample language partitions toward target proportions."""
    cfg = state.config()
    base = cfg.mixture if cfg else MixtureSpec(dict(REFERENCE_TARGETS))
    spec = MixtureSpec(
        targets=_parse_targets(targets) if targets else dict(base.targets),
        unit=unit or base.unit,
        total_budget=budget if budget is not None else base.total_budget,
        seed=state.seed_for("balance"),
        max_repetition=max_repetition if max_repetition is not None else base.max_repetition,
    )
    counter = TokenizerModel.load(model_path).count if model_path else None
    if spec.unit == "tokens" and counter is None:
        raise click.UsageError("--unit tokens requires --tokenizer")
    sampled, rep = balance_docs(list(_read_input(input_path)), spec, counter)
    write_documents(sampled, output_path)
    if report:
        _dump(rep, report)
    else:
        click.echo(json.dumps(rep["output"], ensure_ascii=False), err=True)


@cli.command("train-tokenizer")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--vocab-size", type=int, default=None, help="Includes 3 special and 256 byte tokens (default 32000).")
@click.option("--min-frequency", type=int, default=None)
@pass_state
def train_tokenizer(state: _State, input_path: str, model_path: str, vocab_size: int | None, min_frequency: int | None) -> None:
    """Train a digit-isolating, byte-fallback BPE tokenizer."""
    cfg = state.config()
    vs = vocab_size or (cfg.tokenizer.vocab_size if cfg else 32_000)
    mf = min_frequency or (cfg.tokenizer.min_frequency if cfg else 2)
    model = train_bpe(_read_input(input_path), vs, mf)
    model.save(model_path)
    click.echo(f"vocab size {model.vocab_size} ({len(model.merges)} merges)", err=True)


@cli.command()
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("text", required=False)
@click.option("--add-specials", is_flag=True, help="Wrap each text in bos/eos.")
def encode(model_path: str, text: str | None, add_specials: bool) -> None:
    """Print token ids (JSON list) for TEXT, or for each stdin line."""
    model = TokenizerModel.load(model_path)
    if text is not None:
        click.echo(json.dumps(model.encode(text, add_specials)))
        return
    for line in click.get_text_stream("stdin"):
        click.echo(json.dumps(model.encode(line.rstrip("\n"), add_specials)))


def _parse_ids(raw: str) -> list[int]:
    raw = raw.strip()
    if raw.startswith("["):
        return [int(x) for x in json.loads(raw)]
    return [int(x) for x in raw.replace(",", " ").split()]


@cli.command()
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("ids", nargs=-1)
@click.option("--skip-specials", is_flag=True)
def decode(model_path: str, ids: tuple[str, ...], skip_specials: bool) -> None:
    """Decode ids given as arguments, or one JSON list / id line per stdin line."""
    model = TokenizerModel.load(model_path)
    lines = [" ".join(ids)] if ids else [ln for ln in click.get_text_stream("stdin") if ln.strip()]
    for line in lines:
        try:
            parsed = _parse_ids(line)
        except ValueError as exc:
            raise click.BadParameter(f"cannot parse ids: {line.strip()!r}") from exc
        text, clean = model.decode_checked(parsed, skip_specials)
        if not clean:
            click.echo("warning: invalid UTF-8 byte sequence replaced", err=True)
        click.echo(text)


@cli.command()
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--limit", type=int, default=None)
@click.option("--offset", type=int, default=0)
def vocab(model_path: str, limit: int | None, offset: int) -> None:
    """List id and token (JSON-escaped) for the vocabulary."""
    model = TokenizerModel.load(model_path)
    tokens = model.vocab()
    end = len(tokens) if limit is None else min(len(tokens), offset + limit)
    for i in range(offset, end):
        click.echo(f"{i}\t{json.dumps(tokens[i], ensure_ascii=False)}")


def _named(values: tuple[str, ...], option: str) -> list[tuple[str, str]]:
    out = []
    for item in values:
        name, sep, rest = item.partition("=")
        if not sep or not name:
            raise click.BadParameter(f"expected NAME=VALUE, got {item!r}", param_hint=option)
        out.append((name, rest))
    return out


@cli.command()
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--reference", "reference_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--reference-name", default="reference", show_default=True)
@click.option("--model", "models", multiple=True, help="NAME=PATH of another tokenizer model file.")
@click.option("--command", "commands", multiple=True, help="NAME=COMMAND of a line-JSON counting adapter.")
@click.option("--orientation", type=click.Choice(ORIENTATIONS), default="reference_over_model", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "markdown"]), default="markdown", show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
def benchmark(
    corpus_path: str, reference_path: str, reference_name: str, models: tuple[str, ...],
    commands: tuple[str, ...], orientation: str, fmt: str, output: str | None,
) -> None:
    """Relative token-count efficiency of tokenizers per language slice."""
    counters: list[Any] = [ModelCounter(TokenizerModel.load(reference_path), reference_name)]
    for name, path in _named(models, "--model"):
        counters.append(ModelCounter(TokenizerModel.load(path), name))
    subprocesses = [SubprocessCounter(cmd, name) for name, cmd in _named(commands, "--command")]
    counters.extend(subprocesses)
    try:
        report = run_benchmark(counters, list(_read_input(corpus_path)), reference_name, orientation)
    finally:
        for sp in subprocesses:
            sp.close()
    if output:
        emit_report(report, output, fmt)
    elif fmt == "markdown":
        click.echo(to_markdown(report), nl=False)
    elif fmt == "csv":
        click.echo(to_csv(report), nl=False)
    else:
        click.echo(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--context-length", type=int, default=None, help="Window length (default 8192).")
@click.option("--mode", type=click.Choice(PACK_MODES), default=None)
@click.option("--format", "fmt", type=click.Choice(EXPORT_FORMATS), default=None)
@pass_state
def pack(state: _State, input_path: str, model_path: str, output_path: str, context_length: int | None, mode: str | None, fmt: str | None) -> None:
    """Encode documents and pack them into EOS-separated fixed-length windows."""
    cfg = state.config()
    L = context_length or (cfg.prep.context_length if cfg else 8192)
    mode = mode or (cfg.prep.mode if cfg else "drop_last")
    fmt = fmt or (cfg.prep.format if cfg else "binary-u32-le")
    model = TokenizerModel.load(model_path)
    texts = [d.text for d in _read_input(input_path)]
    threads = state.threads or (cfg.threads if cfg else 1)
    encoded = [ids for ids in encode_all(model, texts, threads) if ids]
    packer = Packer(L, model.eos_id, mode, model.pad_id)
    manifest = export_packed(
        packer.pack(encoded), output_path, fmt,
        context_length=L, eos_id=model.eos_id, pad_id=model.pad_id, stats=packer.stats, extra={"mode": mode},
    )
    click.echo(json.dumps(manifest, indent=2))


@cli.command()
@click.option("--stages", default=None, help=f"Comma-separated subset of: {','.join(STAGES)}.")
@pass_state
def run(state: _State, stages: str | None) -> None:
    """Run the pipeline described by the config file."""
    cfg = state.config(required=True)
    assert cfg is not None
    selected = None
    if stages:
        selected = [s.strip() for s in stages.split(",") if s.strip()]
        bad = sorted(set(selected) - set(STAGES))
        if bad:
            raise click.BadParameter(f"unknown stages {bad}", param_hint="--stages")
    manifest = run_pipeline(cfg, selected)
    click.echo(json.dumps(manifest, ensure_ascii=False, indent=2))


@cli.command()
@click.option("--total-steps", type=int, default=None, help="Required unless set in the config.")
@click.option("--warmup", "warmup_steps", type=int, default=None)
@click.option("--peak", "peak_lr", type=float, default=None)
@click.option("--final", "final_lr", type=float, default=None)
@click.option("--every", type=click.IntRange(min=1), default=1, show_default=True, help="Print every N steps.")
@pass_state
def schedule(state: _State, total_steps: int | None, warmup_steps: int | None, peak_lr: float | None, final_lr: float | None, every: int) -> None:
    """Print the warmup + cosine learning-rate schedule as CSV (step,lr)."""
    cfg = state.config()
    p = cfg.prep if cfg else None
    total = total_steps if total_steps is not None else (p.total_steps if p else None)
    if total is None:
        raise click.UsageError("--total-steps is required")
    try:
        sched = ScheduleConfig(
            total_steps=total,
            warmup_steps=warmup_steps if warmup_steps is not None else (p.warmup_steps if p else 10_000),
            peak_lr=peak_lr if peak_lr is not None else (p.peak_lr if p else 3e-4),
            final_lr=final_lr if final_lr is not None else (p.final_lr if p else 3e-5),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    click.echo(schedule_csv(sched, every), nl=False)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
