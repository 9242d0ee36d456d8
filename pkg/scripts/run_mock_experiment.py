#!/usr/bin/env python3
"""Run the full experimental workflow on the bundled fixture dataset using
the seeded mock backend: four method configurations, reference-based
evaluation, LLM-as-judge scoring with ranking, and both controllability
analyses. Everything is deterministic and network-free.

Usage:
    python scripts/run_mock_experiment.py --out mock_out --seed 7
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from agora import datasets, judge, metrics, pipeline, scoring
from agora.domain import Method, MethodConfig, SamplingParams
from agora.embedding import HashEmbedder
from agora.gateway import LlmGateway, MockBackend

REPO_ROOT = Path(__file__).resolve().parent.parent
METHODS = (Method.SA, Method.SAA, Method.MAA, Method.MENTALAGORA)


def table(header, rows):
    grid = [list(map(str, header))] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in grid) for i in range(len(header))]
    for index, row in enumerate(grid):
        print("  ".join(cell.ljust(width) for cell, width in zip(row, widths)))
        if index == 0:
            print("  ".join("-" * width for width in widths))
    print()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", default=str(REPO_ROOT / "data" / "cases.jsonl"))
    parser.add_argument("--out", default="mock_experiment_out")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--turns", type=int, default=2)
    parser.add_argument("--parallelism", type=int, default=4)
    args = parser.parse_args()

    out = Path(args.out)
    gw = LlmGateway(MockBackend.seeded(args.seed))
    cases = {case.id: case for case in datasets.load_native(args.dataset)}
    embedder = HashEmbedder(seed=args.seed)

    results_by_method = {}
    metric_rows = []
    for method in METHODS:
        cfg = MethodConfig(
            method=method,
            debate_turns=args.turns,
            model_id="mock-model",
            sampling=SamplingParams(seed=args.seed),
        )
        run_dir = out / method.value
        manifest = pipeline.run_batch(args.dataset, cfg, gw, run_dir, args.parallelism)
        _, results = pipeline.load_run(run_dir)
        results_by_method[method.value] = results
        pairs = [
            (results[cid].response.text, cases[cid].expert_response)
            for cid in sorted(results)
            if cases[cid].expert_response
        ]
        report = metrics.corpus_report(pairs, embedder)
        metric_rows.append([
            method.value, f"{report.bleu:.2f}", f"{report.rouge_l:.2f}",
            f"{report.bert_score:.2f}", f"{report.gm:.2f}", f"{report.hm:.2f}",
        ])
        print(f"{method.value}: {manifest.counts['ok']} cases ok")
    print()
    table(["Method", "BLEU", "R-L", "BScore", "GM", "HM"], metric_rows)

    judge_scores = {m: {} for m in results_by_method}
    judge_ranks = {m: {} for m in results_by_method}
    for cid in sorted(cases):
        per_method = {
            m: results[cid].response.text for m, results in results_by_method.items()
        }
        for m, text in per_method.items():
            judge_scores[m][cid] = judge.judge_response(
                cases[cid], text, gw, "mock-judge", seed=args.seed
            )
        ranking = judge.judge_ranking(
            cases[cid], per_method, gw, "mock-judge", shuffle_seed=args.seed
        )
        for m, rank in ranking.ranks.items():
            judge_ranks[m][cid] = rank
    rows = judge.aggregate_judgements(judge_scores, judge_ranks)
    table(
        judge.SUMMARY_COLUMNS,
        [[r.method, f"{r.customization:.2f}", f"{r.satisfaction:.2f}",
          f"{r.professionalism:.2f}", f"{r.relevance:.2f}",
          f"{r.understanding:.2f}", f"{r.rank:.2f}"] for r in rows],
    )

    scorer = scoring.LlmAttributeScorer(gw, "mock-scorer", seed=args.seed)
    control_rows = []
    for m in ("maa", "mentalagora"):
        results = results_by_method[m]
        predicted, influences = [], []
        for cid in sorted(results):
            predicted.append(scoring.score_attributes(results[cid].response.text, scorer, cid))
            influences.append(results[cid].response.persona.influence)
        report = scoring.mae_vs_targets(predicted, influences)
        control_rows.append([m, f"{report.overall_mae:.3f}", report.n_cases])
    table(["Method", "MAE vs input scores", "Cases"], control_rows)

    (out / "summary.json").write_text(json.dumps({
        "metrics": {row[0]: row[1:] for row in metric_rows},
        "judge": [r.to_json_dict() for r in rows],
    }, indent=2))
    print(f"artifacts under {out}/ ({gw.calls()} mock gateway calls)")


if __name__ == "__main__":
    main()
