import json
import socket
from pathlib import Path

import pytest
from click.testing import CliRunner

from agora import datasets
from agora.cli import main
from agora.domain import AttributeScoreVector, UserCase

runner = CliRunner()


def invoke(*args, env=None):
    return runner.invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


def generate_run(dataset, out_dir, method="mentalagora", *extra):
    result = invoke(
        "--seed", 7, "generate", "--dataset", dataset, "--method", method,
        "--out", out_dir, "--mock", *extra,
    )
    assert result.exit_code == 0, result.output
    return out_dir


def rewrite_responses_to_references(run_dir: Path, dataset_path):
    """Make every archived response identical to its expert reference."""
    references = {
        case.id: case.expert_response for case in datasets.load_native(dataset_path)
    }
    for case_file in (run_dir / "cases").glob("*.json"):
        payload = json.loads(case_file.read_text())
        payload["response"]["text"] = references[payload["case_id"]]
        case_file.write_text(json.dumps(payload))


class TestGenerate:
    def test_smoke(self, fixture_dataset, tmp_path):
        out = tmp_path / "run"
        result = invoke(
            "--seed", 3, "generate", "--dataset", fixture_dataset, "--method", "sa",
            "--out", out, "--mock",
        )
        assert result.exit_code == 0
        assert "6 ok, 0 failed" in result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["statuses"]) == 6
        assert len(list((out / "cases").glob("*.json"))) == 6

    def test_single_attribute_debate_is_legal(self, fixture_dataset, tmp_path):
        out = tmp_path / "run"
        result = invoke(
            "generate", "--dataset", fixture_dataset, "--method", "mentalagora",
            "--attributes", "reframing", "--turns", 2, "--out", out, "--mock",
        )
        assert result.exit_code == 0
        case = json.loads(next((out / "cases").glob("*.json")).read_text())
        assert len(case["response"]["transcript"]["turns"]) == 2

    def test_zero_turns_rejected(self, fixture_dataset, tmp_path):
        result = invoke(
            "generate", "--dataset", fixture_dataset, "--method", "mentalagora",
            "--turns", 0, "--out", tmp_path / "run", "--mock",
        )
        assert result.exit_code == 1
        assert "turns must be" in result.output

    def test_unknown_attribute_rejected(self, fixture_dataset, tmp_path):
        result = invoke(
            "generate", "--dataset", fixture_dataset, "--method", "maa",
            "--attributes", "empathy", "--out", tmp_path / "run", "--mock",
        )
        assert result.exit_code == 1
        assert "unknown attribute" in result.output

    @pytest.mark.parametrize(
        "method,expected",
        [("sa", 6), ("saa", 6), ("maa", 30), ("mentalagora", 48)],
    )
    def test_dry_run_counts(self, fixture_dataset, tmp_path, method, expected):
        result = invoke(
            "generate", "--dataset", fixture_dataset, "--method", method,
            "--turns", 2, "--out", tmp_path / "run", "--dry-run",
        )
        assert result.exit_code == 0
        assert f"= {expected}" in result.output
        assert not (tmp_path / "run").exists()

    def test_config_file_supplies_model(self, fixture_dataset, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"model": "config-model"}))
        out = tmp_path / "run"
        invoke(
            "--config", config, "generate", "--dataset", fixture_dataset,
            "--method", "sa", "--out", out, "--mock",
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["model_id"] == "config-model"

    def test_flag_overrides_config_file(self, fixture_dataset, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"model": "config-model"}))
        out = tmp_path / "run"
        invoke(
            "--config", config, "generate", "--dataset", fixture_dataset,
            "--method", "sa", "--model", "flag-model", "--out", out, "--mock",
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["model_id"] == "flag-model"

    def test_run_config_file(self, fixture_dataset, tmp_path):
        run_config = tmp_path / "run_config.json"
        run_config.write_text(json.dumps({
            "method": "maa",
            "active_attributes": ["reframing", "solution"],
            "debate_turns": 1,
            "model_id": "declared-model",
            "sampling": {"temperature": 0.3, "max_tokens": 128, "seed": 4},
            "dataset": str(fixture_dataset),
            "parallelism": 2,
        }))
        out = tmp_path / "run"
        result = invoke("generate", "--run-config", run_config, "--out", out, "--mock")
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["method"] == "maa"
        assert manifest["config"]["model_id"] == "declared-model"
        assert manifest["config"]["active_attributes"] == ["reframing", "solution"]
        assert manifest["config"]["sampling"]["seed"] == 4

    def test_flags_override_run_config(self, fixture_dataset, tmp_path):
        run_config = tmp_path / "run_config.json"
        run_config.write_text(json.dumps({
            "method": "maa", "dataset": str(fixture_dataset), "model_id": "declared",
        }))
        out = tmp_path / "run"
        result = invoke(
            "generate", "--run-config", run_config, "--method", "sa",
            "--model", "flag-model", "--out", out, "--mock",
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["method"] == "sa"
        assert manifest["config"]["model_id"] == "flag-model"

    def test_method_required_without_run_config(self, fixture_dataset, tmp_path):
        result = invoke(
            "generate", "--dataset", fixture_dataset, "--out", tmp_path / "run", "--mock"
        )
        assert result.exit_code == 1
        assert "--method" in result.output

    def test_unreachable_backend_exits_partial(self, tmp_path):
        dataset = tmp_path / "one.jsonl"
        datasets.save_native([UserCase(id="c1", posts=("hello there",))], dataset)
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        result = runner.invoke(
            main,
            ["generate", "--dataset", str(dataset), "--method", "sa",
             "--out", str(tmp_path / "run")],
            env={"AGORA_BASE_URL": f"http://127.0.0.1:{port}/v1"},
        )
        assert result.exit_code == 2
        assert "failed" in result.output


class TestEvaluate:
    def test_missing_run_dir(self, fixture_dataset, tmp_path):
        result = invoke(
            "evaluate", "--run", tmp_path / "absent", "--dataset", fixture_dataset,
            "--mock-embedder",
        )
        assert result.exit_code == 1

    def test_identity_corpus_scores_100(self, fixture_dataset, tmp_path):
        out = Path(generate_run(fixture_dataset, tmp_path / "run", "sa"))
        rewrite_responses_to_references(out, fixture_dataset)
        result = invoke(
            "evaluate", "--run", out, "--dataset", fixture_dataset, "--mock-embedder"
        )
        assert result.exit_code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        corpus = metrics["corpus"]
        for key in ("bleu", "rouge_l", "bert_score", "gm", "hm"):
            assert corpus[key] == pytest.approx(100.0)
        csv_text = (out / "metrics_per_case.csv").read_text()
        assert csv_text.splitlines()[0] == "case_id,bleu,rouge_l,bert_score"

    def test_self_test_reports_rows(self):
        result = invoke("evaluate", "--self-test")
        assert "[PASS] therapytalk/gpt-4.0/sa" in result.output
        assert "[FAIL] counselchat/gpt-4.0/sa" in result.output
        assert "22/39 reference rows internally consistent" in result.output
        assert result.exit_code == 1  # inconsistent reference rows exist

    def test_dry_run(self, fixture_dataset, tmp_path):
        out = generate_run(fixture_dataset, tmp_path / "run", "sa")
        result = invoke(
            "evaluate", "--run", out, "--dataset", fixture_dataset,
            "--mock-embedder", "--dry-run",
        )
        assert result.exit_code == 0
        assert "planned gateway calls: 0" in result.output
        assert "12" in result.output


class TestJudge:
    def test_two_runs_summary(self, fixture_dataset, tmp_path):
        run_a = generate_run(fixture_dataset, tmp_path / "a", "sa")
        run_b = generate_run(fixture_dataset, tmp_path / "b", "maa")
        out_csv = tmp_path / "summary.csv"
        result = invoke(
            "--seed", 5, "judge", "--runs", run_a, "--runs", run_b,
            "--dataset", fixture_dataset, "--mock", "--out", out_csv,
        )
        assert result.exit_code == 0, result.output
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "Method,Cus.,Sat.,Pro.,Rel.,Und.,Rank"
        assert len(lines) == 3
        ranks = [float(line.split(",")[-1]) for line in lines[1:]]
        assert sum(ranks) == pytest.approx(3.0)  # k(k+1)/2 for k=2
        judgement = json.loads(
            (Path(run_a) / "judgements" / "case-001.json").read_text()
        )
        assert set(judgement["scores"]) == {
            "customization", "satisfaction", "professionalism", "relevance", "understanding"
        }

    def test_single_run_skips_ranking(self, fixture_dataset, tmp_path):
        run_a = generate_run(fixture_dataset, tmp_path / "a", "sa")
        result = invoke(
            "judge", "--runs", run_a, "--dataset", fixture_dataset, "--mock"
        )
        assert result.exit_code == 0
        assert "ranking skipped" in result.output

    def test_with_reference_flag(self, fixture_dataset, tmp_path):
        run_a = generate_run(fixture_dataset, tmp_path / "a", "sa")
        result = invoke(
            "judge", "--runs", run_a, "--dataset", fixture_dataset, "--mock",
            "--with-reference",
        )
        assert result.exit_code == 0, result.output

    def test_with_reference_needs_expert_responses(self, tmp_path):
        dataset = tmp_path / "bare.jsonl"
        datasets.save_native([UserCase(id="c1", posts=("post",))], dataset)
        run_a = generate_run(dataset, tmp_path / "a", "sa")
        result = invoke(
            "judge", "--runs", run_a, "--dataset", dataset, "--mock",
            "--with-reference",
        )
        assert result.exit_code == 1
        assert "expert responses" in result.output

    def test_mismatched_case_sets_rejected(self, fixture_dataset, tmp_path):
        subset_path = tmp_path / "subset.jsonl"
        cases = datasets.load_native(fixture_dataset)
        datasets.save_native(cases[:5], subset_path)
        run_a = generate_run(fixture_dataset, tmp_path / "a", "sa")
        run_b = generate_run(subset_path, tmp_path / "b", "sa")
        result = invoke(
            "judge", "--runs", run_a, "--runs", run_b, "--dataset", fixture_dataset,
            "--mock",
        )
        assert result.exit_code == 1
        assert "different case ids" in result.output

    def test_dry_run_counts_ranking_calls(self, fixture_dataset, tmp_path):
        run_a = generate_run(fixture_dataset, tmp_path / "a", "sa")
        run_b = generate_run(fixture_dataset, tmp_path / "b", "maa")
        result = invoke(
            "judge", "--runs", run_a, "--runs", run_b, "--dataset", fixture_dataset,
            "--dry-run",
        )
        assert "planned gateway calls: 18" in result.output  # 6*2 likert + 6 ranking


class TestControlEval:
    def _labeled_subset(self, fixture_dataset, tmp_path):
        cases = [
            case for case in datasets.load_native(fixture_dataset)
            if case.attribute_labels is not None
        ]
        path = tmp_path / "labeled.jsonl"
        datasets.save_native(cases, path)
        return path, cases

    def test_identity_scorer_file_gives_zero_mae(self, fixture_dataset, tmp_path):
        dataset, cases = self._labeled_subset(fixture_dataset, tmp_path)
        run = generate_run(dataset, tmp_path / "run", "saa")
        predictions = tmp_path / "preds.jsonl"
        with predictions.open("w") as handle:
            for case in cases:
                handle.write(json.dumps(
                    {"case_id": case.id, **case.attribute_labels.to_json_dict()}
                ) + "\n")
        result = invoke(
            "control-eval", "--run", run, "--dataset", dataset,
            "--scorer", f"file:{predictions}", "--against", "experts",
        )
        assert result.exit_code == 0, result.output
        report = json.loads((Path(run) / "control_eval.json").read_text())
        assert report["overall_mae"] == 0.0

    def test_hand_computed_mae(self, tmp_path):
        case = UserCase(
            id="only", posts=("post text",), expert_response="ref",
            attribute_labels=AttributeScoreVector(2, 2, 3),
        )
        dataset = tmp_path / "one.jsonl"
        datasets.save_native([case], dataset)
        run = generate_run(dataset, tmp_path / "run", "sa")
        predictions = tmp_path / "preds.jsonl"
        predictions.write_text(json.dumps(
            {"case_id": "only", "reframing": 2.1, "regard": 1.8, "solution": 2.5}
        ) + "\n")
        result = invoke(
            "control-eval", "--run", run, "--dataset", dataset,
            "--scorer", f"file:{predictions}", "--against", "experts",
        )
        assert result.exit_code == 0
        report = json.loads((Path(run) / "control_eval.json").read_text())
        assert report["overall_mae"] == pytest.approx(0.8 / 3)

    def test_sa_has_no_input_scores(self, fixture_dataset, tmp_path):
        run = generate_run(fixture_dataset, tmp_path / "run", "sa")
        result = invoke(
            "control-eval", "--run", run, "--dataset", fixture_dataset,
            "--scorer", "llm", "--against", "inputs", "--mock",
        )
        assert result.exit_code == 1
        assert "no input attribute scores" in result.output

    def test_against_inputs_with_llm_scorer(self, fixture_dataset, tmp_path):
        run = generate_run(fixture_dataset, tmp_path / "run", "mentalagora")
        result = invoke(
            "--seed", 7, "control-eval", "--run", run, "--dataset", fixture_dataset,
            "--scorer", "llm", "--against", "inputs", "--mock",
        )
        assert result.exit_code == 0, result.output
        report = json.loads((Path(run) / "control_eval.json").read_text())
        assert report["n_cases"] == 6
        assert report["overall_mae"] >= 0.0

    def test_missing_labels_rejected(self, fixture_dataset, tmp_path):
        run = generate_run(fixture_dataset, tmp_path / "run", "sa")
        result = invoke(
            "control-eval", "--run", run, "--dataset", fixture_dataset,
            "--scorer", "llm", "--against", "experts", "--mock",
        )
        assert result.exit_code == 1
        assert "no attribute labels" in result.output

    def test_dry_run(self, fixture_dataset, tmp_path):
        run = generate_run(fixture_dataset, tmp_path / "run", "maa")
        result = invoke(
            "control-eval", "--run", run, "--dataset", fixture_dataset,
            "--scorer", "llm", "--against", "inputs", "--dry-run",
        )
        assert "planned gateway calls: 6" in result.output


class TestAblate:
    def test_seven_run_directories(self, fixture_dataset, tmp_path):
        out = tmp_path / "ablation"
        result = invoke(
            "--seed", 7, "--parallelism", 4, "ablate", "--dataset", fixture_dataset,
            "--turns", 1, "--out", out, "--mock",
        )
        assert result.exit_code == 0, result.output
        subdirs = {p.name for p in out.iterdir() if p.is_dir()}
        assert subdirs == {
            "mentalagora",
            "drop_reframing", "drop_regard", "drop_solution",
            "uniform_reframing", "uniform_regard", "uniform_solution",
        }

    def test_base_config_must_be_full(self, fixture_dataset, tmp_path):
        config = tmp_path / "base.json"
        config.write_text(json.dumps({
            "method": "mentalagora",
            "active_attributes": ["reframing", "regard"],
            "model_id": "m",
        }))
        result = invoke(
            "ablate", "--dataset", fixture_dataset, "--base-config", config,
            "--out", tmp_path / "ablation", "--mock",
        )
        assert result.exit_code == 1
        assert "full 3-attribute base" in result.output

    def test_delta_report_layout(self, fixture_dataset, tmp_path):
        labeled = [
            case for case in datasets.load_native(fixture_dataset)
            if case.attribute_labels is not None
        ]
        dataset = tmp_path / "labeled.jsonl"
        datasets.save_native(labeled, dataset)
        out = tmp_path / "ablation"
        result = invoke(
            "--seed", 7, "ablate", "--dataset", dataset, "--turns", 1,
            "--out", out, "--scorer", "llm", "--mock",
        )
        assert result.exit_code == 0, result.output
        lines = (out / "delta_report.csv").read_text().splitlines()
        assert lines[0] == "Method,Reframing,Solution,Regard,Total Diff."
        assert len(lines) == 8  # header + 7 configurations
        report = json.loads((out / "delta_report.json").read_text())
        for label, row in report.items():
            total = sum(
                abs(row[k]) for k in ("reframing_delta", "solution_delta", "regard_delta")
                if row[k] is not None
            )
            assert row["total_diff"] == pytest.approx(total)

    def test_dry_run_totals(self, fixture_dataset, tmp_path):
        result = invoke(
            "ablate", "--dataset", fixture_dataset, "--turns", 2,
            "--out", tmp_path / "ablation", "--dry-run",
        )
        # full 8 + three removals at 6 + three uniforms at 8, times 6 cases
        assert "planned gateway calls: 300" in result.output
