"""Command-line entry point for the full experimental workflow.

Subcommands mirror the experiment stages: ``generate`` runs a method over
a dataset into a run archive, ``evaluate`` scores archives against expert
references, ``judge`` runs the LLM judge across archives, ``control-eval``
measures attribute controllability, and ``ablate`` runs the seven-config
ablation grid. Every subcommand supports ``--dry-run`` (print the planned
gateway call count, no network) and ``--mock`` (route all model calls to
the seeded deterministic backend).

Exit codes: 0 success, 1 configuration/validation error, 2 partial run
failure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import click

from agora import datasets, judge as judge_mod, metrics, pipeline, scoring, selfcheck
from agora.domain import (
    AnalysisError,
    AttributeKind,
    CANONICAL_ATTRIBUTES,
    ConfigurationError,
    Method,
    MethodConfig,
    SamplingParams,
)
from agora.embedding import HashEmbedder, HttpEmbedder
from agora.gateway import (
    BackendConfig,
    HttpBackend,
    LlmGateway,
    MockBackend,
    resolve_config_value,
)
from agora.metrics import MetricError
from agora.structured import StructuredOutputError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2

logger = logging.getLogger(__name__)


@dataclass
class CliContext:
    file_config: dict[str, Any]
    cache_dir: str | None
    parallelism: int | None
    seed: int | None
    verbose: bool

    def option(self, flag: Any, key: str, env_var: str | None = None) -> Any:
        return resolve_config_value(flag, self.file_config, key, env_var)

    @property
    def seed_or_zero(self) -> int:
        return 0 if self.seed is None else self.seed


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _parse_attributes(raw: str) -> tuple[AttributeKind, ...]:
    names = [part.strip() for part in raw.split(",") if part.strip()]
    if not names:
        raise ConfigurationError("at least one attribute is required")
    return tuple(AttributeKind.parse(name) for name in names)


def _build_gateway(ctx: CliContext, mock: bool) -> LlmGateway:
    if mock:
        return LlmGateway(MockBackend.seeded(ctx.seed_or_zero), cache_dir=ctx.cache_dir)
    backend = BackendConfig.from_env(
        base_url=ctx.option(None, "base_url", "AGORA_BASE_URL"),
        api_key=ctx.option(None, "api_key", "AGORA_API_KEY"),
        cache_dir=ctx.cache_dir,
    )
    rate = ctx.file_config.get("rate_limit_rps")
    return LlmGateway(
        HttpBackend(backend),
        cache_dir=backend.cache_dir,
        rate_limit_rps=rate,
    )


def _echo_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    table = [list(map(str, header))] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    for index, row in enumerate(table):
        click.echo("  ".join(cell.ljust(width) for cell, width in zip(row, widths)))
        if index == 0:
            click.echo("  ".join("-" * width for width in widths))


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, payload: Any) -> None:
    _write_text(
        path, json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
    )


def _case_seed(base: int, case_id: str) -> int:
    digest = hashlib.sha256(f"{base}:{case_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file; flags override its values.")
@click.option("--cache-dir", default=None, help="Response cache directory.")
@click.option("--parallelism", type=int, default=None, help="Concurrent cases.")
@click.option("--seed", type=int, default=None, help="Seed for mock/shuffle determinism.")
@click.option("--verbose", is_flag=True)
@click.pass_context
def main(ctx, config_path, cache_dir, parallelism, seed, verbose):
    """Multi-agent counselor pipeline and evaluation harness."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)
    file_config: dict[str, Any] = {}
    if config_path:
        try:
            file_config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except ValueError as exc:
            _fail(f"config file {config_path} is not valid JSON: {exc}")
    merged_cache = resolve_config_value(
        cache_dir, file_config, "cache_dir", "AGORA_CACHE_DIR"
    )
    merged_parallelism = resolve_config_value(parallelism, file_config, "parallelism")
    merged_seed = resolve_config_value(seed, file_config, "seed")
    ctx.obj = CliContext(
        file_config=file_config,
        cache_dir=merged_cache,
        parallelism=None if merged_parallelism is None else int(merged_parallelism),
        seed=None if merged_seed is None else int(merged_seed),
        verbose=verbose,
    )


@main.command()
@click.option("--dataset", type=click.Path(), default=None)
@click.option("--method", "method_name", default=None,
              type=click.Choice([m.value for m in Method]))
@click.option("--attributes", default=None,
              help="Comma list; repeat a name for the uniform setup "
                   "[default: reframing,regard,solution].")
@click.option("--turns", type=int, default=None,
              help="Debate rounds (mentalagora only) [default: 2].")
@click.option("--model", default=None)
@click.option("--temperature", type=float, default=None, help="[default: 0.7]")
@click.option("--max-tokens", type=int, default=None, help="[default: 512]")
@click.option("--run-config", "run_config_path", type=click.Path(exists=True),
              default=None,
              help="Declarative run config JSON (method config fields plus "
                   "dataset and parallelism); explicit flags override it.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--mock", is_flag=True, help="Use the seeded deterministic backend.")
@click.option("--dry-run", is_flag=True)
@click.pass_obj
def generate(ctx: CliContext, dataset, method_name, attributes, turns, model,
             temperature, max_tokens, run_config_path, out_dir, mock, dry_run):
    """Run one method configuration over a dataset into a run archive."""
    run_cfg: dict[str, Any] = {}
    if run_config_path:
        try:
            run_cfg = json.loads(Path(run_config_path).read_text(encoding="utf-8"))
        except ValueError as exc:
            _fail(f"run config {run_config_path} is not valid JSON: {exc}")
    sampling_cfg = run_cfg.get("sampling", {})

    dataset = dataset or run_cfg.get("dataset") or run_cfg.get("dataset_path")
    method_name = method_name or run_cfg.get("method")
    if not dataset or not method_name:
        _fail("generate needs --dataset and --method (flags or --run-config)")
    try:
        if attributes is not None:
            attrs = _parse_attributes(attributes)
        elif run_cfg.get("active_attributes"):
            attrs = tuple(AttributeKind.parse(a) for a in run_cfg["active_attributes"])
        else:
            attrs = CANONICAL_ATTRIBUTES
        seed = ctx.seed if ctx.seed is not None else sampling_cfg.get("seed")
        cfg = MethodConfig(
            method=Method.parse(method_name),
            active_attributes=attrs,
            debate_turns=turns if turns is not None else run_cfg.get("debate_turns", 2),
            model_id=(model or run_cfg.get("model_id")
                      or ctx.option(None, "model") or "gpt-3.5-turbo"),
            sampling=SamplingParams(
                temperature=(temperature if temperature is not None
                             else sampling_cfg.get("temperature", 0.7)),
                max_tokens=(max_tokens if max_tokens is not None
                            else sampling_cfg.get("max_tokens", 512)),
                seed=seed,
            ),
        )
        cases = datasets.load_native(dataset)
    except (ConfigurationError, datasets.LoadError) as exc:
        _fail(str(exc))
        return

    per_case = pipeline.planned_calls_per_case(cfg)
    if dry_run:
        click.echo(
            f"planned gateway calls: {per_case} per case x {len(cases)} cases "
            f"= {per_case * len(cases)}"
        )
        return

    gw = _build_gateway(ctx, mock)
    parallelism = ctx.parallelism or run_cfg.get("parallelism") or 1
    manifest = pipeline.run_batch(dataset, cfg, gw, out_dir, parallelism)
    counts = manifest.counts
    click.echo(
        f"run {manifest.run_id}: {counts['ok']} ok, {counts['failed']} failed "
        f"({gw.calls()} gateway calls)"
    )
    if counts["failed"]:
        for case_id, status in sorted(manifest.statuses.items()):
            if status.status == "failed":
                click.echo(f"  failed {case_id}: {status.reason}", err=True)
        sys.exit(EXIT_PARTIAL)


def _load_run_or_fail(run_dir: str) -> tuple[pipeline.RunManifest, dict[str, pipeline.CaseRunResult]]:
    try:
        return pipeline.load_run(run_dir)
    except FileNotFoundError as exc:
        _fail(str(exc))
        raise AssertionError  # unreachable


@main.command()
@click.option("--run", "run_dir", type=click.Path(), default=None)
@click.option("--dataset", type=click.Path(), default=None)
@click.option("--embedder-url", default=None, help="Token-embedding endpoint.")
@click.option("--mock-embedder", is_flag=True, help="Deterministic local embedder.")
@click.option("--self-test", is_flag=True,
              help="Check GM/HM aggregation against the bundled reference rows.")
@click.option("--dry-run", is_flag=True)
@click.pass_obj
def evaluate(ctx: CliContext, run_dir, dataset, embedder_url, mock_embedder,
             self_test, dry_run):
    """Score a run archive against expert references (plus GM/HM)."""
    if self_test:
        results = selfcheck.run_selfcheck()
        click.echo(selfcheck.render_selfcheck(results))
        sys.exit(EXIT_OK if all(r.ok for r in results) else EXIT_CONFIG)

    if not run_dir or not dataset:
        _fail("evaluate needs --run and --dataset (or --self-test)")
    if not embedder_url and not mock_embedder:
        _fail("evaluate needs --embedder-url or --mock-embedder")

    manifest, results = _load_run_or_fail(run_dir)
    try:
        cases = {case.id: case for case in datasets.load_native(dataset)}
    except datasets.LoadError as exc:
        _fail(str(exc))
        return

    pairs: list[tuple[str, str, str]] = []  # case_id, candidate, reference
    skipped: list[str] = []
    for case_id, result in sorted(results.items()):
        case = cases.get(case_id)
        if case is None or case.expert_response is None:
            skipped.append(case_id)
            continue
        pairs.append((case_id, result.response.text, case.expert_response))

    if dry_run:
        click.echo(
            f"planned gateway calls: 0; embedder texts: {2 * len(pairs)} "
            f"({len(pairs)} pairs)"
        )
        return
    if not pairs:
        _fail("no evaluable cases: run and dataset share no referenced case ids")

    embedder = (
        HttpEmbedder(embedder_url) if embedder_url else HashEmbedder(seed=ctx.seed_or_zero)
    )
    try:
        per_case = {
            case_id: metrics.pair_report(candidate, reference, embedder)
            for case_id, candidate, reference in pairs
        }
        corpus = metrics.corpus_report(
            [(candidate, reference) for _, candidate, reference in pairs], embedder
        )
    except MetricError as exc:
        _fail(str(exc))
        return

    run_path = Path(run_dir)
    _write_json(
        run_path / "metrics.json",
        {
            "corpus": corpus.to_json_dict(),
            "per_case": {cid: report.to_json_dict() for cid, report in per_case.items()},
            "skipped_without_reference": sorted(skipped),
        },
    )
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["case_id", "bleu", "rouge_l", "bert_score"])
    for case_id, report in sorted(per_case.items()):
        writer.writerow(
            [case_id, f"{report.bleu:.4f}", f"{report.rouge_l:.4f}", f"{report.bert_score:.4f}"]
        )
    _write_text(run_path / "metrics_per_case.csv", buffer.getvalue())

    _echo_table(
        ["BLEU", "R-L", "BScore", "GM", "HM"],
        [[f"{corpus.bleu:.2f}", f"{corpus.rouge_l:.2f}", f"{corpus.bert_score:.2f}",
          f"{corpus.gm:.2f}", f"{corpus.hm:.2f}"]],
    )
    if skipped:
        click.echo(f"skipped {len(skipped)} case(s) without expert reference")


@main.command(name="judge")
@click.option("--runs", "run_dirs", multiple=True, required=True, type=click.Path())
@click.option("--dataset", required=True, type=click.Path())
@click.option("--model", default=None)
@click.option("--out", "out_csv", type=click.Path(), default=None,
              help="Write the summary CSV here.")
@click.option("--with-reference", is_flag=True,
              help="Show the judge the expert reference for calibration "
                   "(judging is reference-free by default).")
@click.option("--mock", is_flag=True)
@click.option("--dry-run", is_flag=True)
@click.pass_obj
def judge_cmd(ctx: CliContext, run_dirs, dataset, model, out_csv, with_reference,
              mock, dry_run):
    """Judge one or more run archives on the five criteria; rank when >= 2."""
    model_id = ctx.option(model, "model") or "gpt-4-turbo"
    try:
        cases = {case.id: case for case in datasets.load_native(dataset)}
    except datasets.LoadError as exc:
        _fail(str(exc))
        return
    references = {
        cid: case.expert_response
        for cid, case in cases.items()
        if case.expert_response is not None
    }

    loaded: list[tuple[str, Path, dict[str, pipeline.CaseRunResult]]] = []
    labels_seen: dict[str, int] = {}
    for run_dir in run_dirs:
        manifest, results = _load_run_or_fail(run_dir)
        label = manifest.config.method.value
        labels_seen[label] = labels_seen.get(label, 0) + 1
        if labels_seen[label] > 1:
            label = f"{label}#{labels_seen[label]}"
        loaded.append((label, Path(run_dir), results))

    case_sets = [set(results) for _, _, results in loaded]
    common = set.intersection(*case_sets) if case_sets else set()
    mismatched = [
        f"{label}: missing {sorted(set().union(*case_sets) - set(results))}"
        for (label, _, results) in loaded
        if set(results) != set().union(*case_sets)
    ]
    if mismatched:
        _fail("runs cover different case ids; " + "; ".join(mismatched))
    unknown = sorted(cid for cid in common if cid not in cases)
    if unknown:
        _fail(f"case ids missing from dataset: {unknown}")
    case_ids = sorted(common)
    if with_reference:
        missing_refs = [cid for cid in case_ids if cid not in references]
        if missing_refs:
            _fail(f"--with-reference needs expert responses; missing: {missing_refs}")

    ranking = len(loaded) >= 2
    if dry_run:
        calls = len(case_ids) * len(loaded) + (len(case_ids) if ranking else 0)
        click.echo(f"planned gateway calls: {calls}")
        return

    gw = _build_gateway(ctx, mock)
    scores: dict[str, dict[str, judge_mod.JudgeScores]] = {lbl: {} for lbl, _, _ in loaded}
    ranks: dict[str, dict[str, int]] = {lbl: {} for lbl, _, _ in loaded}
    try:
        for case_id in case_ids:
            case = cases[case_id]
            per_method: dict[str, str] = {}
            for label, run_path, results in loaded:
                text = results[case_id].response.text
                per_method[label] = text
                scores[label][case_id] = judge_mod.judge_response(
                    case, text, gw, model_id, seed=ctx.seed,
                    expert_response=references.get(case_id) if with_reference else None,
                )
            rank_payload = None
            if ranking:
                ranking_result = judge_mod.judge_ranking(
                    case, per_method, gw, model_id,
                    shuffle_seed=_case_seed(ctx.seed_or_zero, case_id), seed=ctx.seed,
                )
                for label, rank in ranking_result.ranks.items():
                    ranks[label][case_id] = rank
                rank_payload = ranking_result.to_json_dict()
            for label, run_path, _ in loaded:
                _write_json(
                    run_path / "judgements" / f"{case_id}.json",
                    {
                        "case_id": case_id,
                        "method": label,
                        "scores": scores[label][case_id].to_json_dict(),
                        "rank": ranks[label].get(case_id),
                        "ranking": rank_payload,
                    },
                )
    except (judge_mod.JudgeParseError, StructuredOutputError) as exc:
        _fail(f"judge output unusable: {exc}")
        return

    try:
        rows = judge_mod.aggregate_judgements(scores, ranks if ranking else None)
    except AnalysisError as exc:
        _fail(str(exc))
        return
    table = judge_mod.summary_csv(rows)
    if out_csv:
        _write_text(Path(out_csv), table)
    _echo_table(
        judge_mod.SUMMARY_COLUMNS,
        [
            [row.method, f"{row.customization:.2f}", f"{row.satisfaction:.2f}",
             f"{row.professionalism:.2f}", f"{row.relevance:.2f}",
             f"{row.understanding:.2f}",
             f"{row.rank:.2f}" if row.rank is not None else "-"]
            for row in rows
        ],
    )
    if not ranking:
        click.echo("single run: ranking skipped")


def _make_scorer(ctx: CliContext, scorer_spec: str, model: str | None, gw: LlmGateway):
    if scorer_spec == "llm":
        model_id = ctx.option(model, "model") or "gpt-4-turbo"
        return scoring.LlmAttributeScorer(gw, model_id, seed=ctx.seed)
    if scorer_spec.startswith("file:"):
        return scoring.FileAttributeScorer(scorer_spec[len("file:"):])
    raise ConfigurationError(
        f"bad --scorer {scorer_spec!r}; expected 'llm' or 'file:<path>'"
    )


@main.command(name="control-eval")
@click.option("--run", "run_dir", required=True, type=click.Path())
@click.option("--dataset", required=True, type=click.Path())
@click.option("--scorer", "scorer_spec", default="llm", show_default=True,
              help="'llm' or 'file:<predictions.jsonl>'.")
@click.option("--against", type=click.Choice(["experts", "inputs"]), required=True)
@click.option("--model", default=None)
@click.option("--mock", is_flag=True)
@click.option("--dry-run", is_flag=True)
@click.pass_obj
def control_eval(ctx: CliContext, run_dir, dataset, scorer_spec, against, model,
                 mock, dry_run):
    """Measure attribute controllability as MAE against experts or inputs."""
    manifest, results = _load_run_or_fail(run_dir)
    try:
        cases = {case.id: case for case in datasets.load_native(dataset)}
    except datasets.LoadError as exc:
        _fail(str(exc))
        return

    if against == "inputs" and manifest.config.method in (Method.SA, Method.SAA):
        _fail(f"{manifest.config.method.value} has no input attribute scores")

    targets = []
    texts = []
    for case_id, result in sorted(results.items()):
        if against == "experts":
            case = cases.get(case_id)
            if case is None or case.attribute_labels is None:
                _fail(f"case {case_id} has no attribute labels in the dataset")
                return
            targets.append(case.attribute_labels)
        else:
            persona = result.response.persona
            if persona is None:
                _fail(f"case {case_id} archive carries no stage-2 influence scores")
                return
            targets.append(persona.influence)
        texts.append((case_id, result.response.text))
    if not texts:
        _fail("run archive has no ok cases")

    if dry_run:
        calls = len(texts) if scorer_spec == "llm" else 0
        click.echo(f"planned gateway calls: {calls}")
        return

    gw = _build_gateway(ctx, mock)
    try:
        scorer = _make_scorer(ctx, scorer_spec, model, gw)
        predicted = [
            scoring.score_attributes(text, scorer, case_id=case_id)
            for case_id, text in texts
        ]
        report = scoring.mae_vs_targets(predicted, targets)
    except (ConfigurationError, scoring.ScoreError, AnalysisError) as exc:
        _fail(str(exc))
        return

    run_path = Path(run_dir)
    _write_json(run_path / "control_eval.json",
                {"against": against, **report.to_json_dict()})
    _write_text(run_path / "control_eval.csv", report.to_csv())
    _echo_table(
        ["Reframing", "Regard", "Solution", "Overall MAE", "Cases"],
        [[
            f"{report.reframing_mae:.4f}" if report.reframing_mae is not None else "-",
            f"{report.regard_mae:.4f}" if report.regard_mae is not None else "-",
            f"{report.solution_mae:.4f}" if report.solution_mae is not None else "-",
            f"{report.overall_mae:.4f}", report.n_cases,
        ]],
    )


def ablation_grid(base: MethodConfig) -> list[tuple[str, MethodConfig]]:
    """The seven configurations: full, one removal per attribute, one
    uniform per attribute."""
    if base.method is not Method.MENTALAGORA or set(base.active_attributes) != set(
        CANONICAL_ATTRIBUTES
    ) or len(base.active_attributes) != 3:
        raise ConfigurationError("ablation requires the full 3-attribute base")
    grid: list[tuple[str, MethodConfig]] = [("mentalagora", base)]
    for attr in CANONICAL_ATTRIBUTES:
        remaining = tuple(a for a in CANONICAL_ATTRIBUTES if a is not attr)
        grid.append((
            f"drop_{attr.value}",
            MethodConfig(
                method=base.method, active_attributes=remaining,
                debate_turns=base.debate_turns, model_id=base.model_id,
                sampling=base.sampling,
            ),
        ))
    for attr in CANONICAL_ATTRIBUTES:
        grid.append((
            f"uniform_{attr.value}",
            MethodConfig(
                method=base.method, active_attributes=(attr, attr, attr),
                debate_turns=base.debate_turns, model_id=base.model_id,
                sampling=base.sampling,
            ),
        ))
    return grid


@main.command()
@click.option("--dataset", required=True, type=click.Path())
@click.option("--base-config", "base_config_path", type=click.Path(), default=None,
              help="JSON MethodConfig; defaults to mentalagora with all attributes.")
@click.option("--model", default=None)
@click.option("--turns", type=int, default=2, show_default=True)
@click.option("--out", "out_root", required=True, type=click.Path())
@click.option("--scorer", "scorer_spec", default=None,
              help="Enable the delta report: 'llm' or 'file:<path>'.")
@click.option("--mock", is_flag=True)
@click.option("--dry-run", is_flag=True)
@click.pass_obj
def ablate(ctx: CliContext, dataset, base_config_path, model, turns, out_root,
           scorer_spec, mock, dry_run):
    """Run the seven-configuration ablation grid, plus a delta report when
    expert labels and a scorer are available."""
    try:
        if base_config_path:
            base = MethodConfig.from_json_dict(
                json.loads(Path(base_config_path).read_text(encoding="utf-8"))
            )
        else:
            base = MethodConfig(
                method=Method.MENTALAGORA,
                debate_turns=turns,
                model_id=ctx.option(model, "model") or "gpt-3.5-turbo",
                sampling=SamplingParams(seed=ctx.seed),
            )
        grid = ablation_grid(base)
        cases = datasets.load_native(dataset)
    except (ConfigurationError, datasets.LoadError, ValueError) as exc:
        _fail(str(exc))
        return

    if dry_run:
        total = sum(pipeline.planned_calls_per_case(cfg) for _, cfg in grid) * len(cases)
        for label, cfg in grid:
            click.echo(
                f"{label}: {pipeline.planned_calls_per_case(cfg)} calls per case"
            )
        click.echo(f"planned gateway calls: {total}")
        return

    gw = _build_gateway(ctx, mock)
    root = Path(out_root)
    failures = 0
    run_results: dict[str, dict[str, pipeline.CaseRunResult]] = {}
    for label, cfg in grid:
        try:
            manifest = pipeline.run_batch(
                dataset, cfg, gw, root / label, ctx.parallelism or 1
            )
            counts = manifest.counts
            click.echo(f"{label}: {counts['ok']} ok, {counts['failed']} failed")
            if counts["failed"]:
                failures += 1
            _, run_results[label] = pipeline.load_run(root / label)
        except (ConfigurationError, pipeline.PipelineError) as exc:
            click.echo(f"{label}: configuration failed: {exc}", err=True)
            failures += 1

    labeled = {
        case.id: case.attribute_labels
        for case in cases
        if case.attribute_labels is not None
    }
    if scorer_spec and labeled:
        try:
            scorer = _make_scorer(ctx, scorer_spec, model, gw)
            delta_rows = []
            for label, _ in grid:
                results = run_results.get(label)
                if not results:
                    continue
                predicted, experts = [], []
                for case_id, result in sorted(results.items()):
                    if case_id not in labeled:
                        continue
                    predicted.append(
                        scoring.score_attributes(result.response.text, scorer, case_id=case_id)
                    )
                    experts.append(labeled[case_id])
                if predicted:
                    delta_rows.append((label, scoring.delta_vs_experts(predicted, experts)))
        except (ConfigurationError, scoring.ScoreError, AnalysisError) as exc:
            _fail(str(exc))
            return

        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(["Method", "Reframing", "Solution", "Regard", "Total Diff."])
        table_rows = []
        for label, report in delta_rows:
            row = [
                label,
                f"{report.reframing_delta:+.2f}" if report.reframing_delta is not None else "-",
                f"{report.solution_delta:+.2f}" if report.solution_delta is not None else "-",
                f"{report.regard_delta:+.2f}" if report.regard_delta is not None else "-",
                f"{report.total_diff:.2f}",
            ]
            writer.writerow(row)
            table_rows.append(row)
        _write_text(root / "delta_report.csv", buffer.getvalue())
        _write_json(
            root / "delta_report.json",
            {label: report.to_json_dict() for label, report in delta_rows},
        )
        _echo_table(["Method", "Reframing", "Solution", "Regard", "Total Diff."], table_rows)
    elif scorer_spec:
        click.echo("dataset has no attribute labels: delta report skipped")

    if failures:
        sys.exit(EXIT_PARTIAL)


if __name__ == "__main__":
    main()
