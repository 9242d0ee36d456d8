"""Orchestration of the three stages and all method configurations.

The staged methods work as follows per case:

* ``sa``: one completion from the posts alone.
* ``saa``: one completion with all active attribute descriptions inline.
* ``maa``: each active agent answers once against an empty shared history;
  the independent answers form a turn_count=1 transcript that feeds the
  persona-creation and generation stages.
* ``mentalagora``: the full debate loop (N rounds, every agent sees the
  accumulated history), then persona creation, then generation.

Batches run cases concurrently, isolate per-case failures, persist every
intermediate artifact under ``<run>/cases/``, and resume by skipping cases
already marked ok in the manifest.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping

from agora import datasets, prompts
from agora.domain import (
    AttributeKind,
    AttributeScoreVector,
    ConfigurationError,
    CounselorPersona,
    DebateTranscript,
    DebateTurn,
    GeneratedResponse,
    Method,
    MethodConfig,
    Provenance,
    UserCase,
)
from agora.gateway import ChatMessage, ChatRequest, GatewayError, LlmGateway
from agora.structured import (
    StructuredOutputError,
    complete_structured,
    require_int_in,
    require_str,
)


class PipelineError(RuntimeError):
    pass


class DebateError(PipelineError):
    """Debate aborted mid-loop; carries the partial transcript for diagnosis."""

    def __init__(self, message: str, partial: DebateTranscript):
        super().__init__(message)
        self.partial = partial


class Stage2ParseError(StructuredOutputError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _request(
    cfg: MethodConfig,
    messages: Iterable[ChatMessage],
    response_format: str = "free_text",
) -> ChatRequest:
    return ChatRequest(
        model_id=cfg.model_id,
        messages=tuple(messages),
        temperature=cfg.sampling.temperature,
        max_tokens=cfg.sampling.max_tokens,
        seed=cfg.sampling.seed,
        response_format=response_format,
    )


def _complete_text(gw: LlmGateway, req: ChatRequest) -> str:
    text = gw.complete(req).text
    if not text.strip():
        raise PipelineError("empty completion")
    return text


def run_debate(
    case: UserCase,
    attrs: tuple[AttributeKind, ...],
    n_rounds: int,
    gw: LlmGateway,
    cfg: MethodConfig,
) -> DebateTranscript:
    """Run the debating loop: N rounds, each agent in turn, every prompt
    carrying the full transcript of all earlier turns."""
    if n_rounds < 1:
        raise ConfigurationError("debate needs at least one round")
    if not attrs:
        raise ConfigurationError("debate needs at least one agent")
    turns: list[DebateTurn] = []
    for round_index in range(1, n_rounds + 1):
        for agent in attrs:
            history = DebateTranscript(tuple(turns), turn_count=n_rounds)
            messages = prompts.agent_turn_prompt(prompts.role_for(agent), case, history)
            try:
                text = _complete_text(gw, _request(cfg, messages))
            except (GatewayError, PipelineError) as exc:
                raise DebateError(
                    f"round {round_index}, agent {agent.value}: {exc}",
                    partial=DebateTranscript(tuple(turns), turn_count=n_rounds),
                ) from exc
            turns.append(DebateTurn(round_index, agent, text))
    return DebateTranscript(tuple(turns), turn_count=n_rounds)


def create_counselor(
    case: UserCase,
    transcript: DebateTranscript,
    gw: LlmGateway,
    cfg: MethodConfig,
) -> tuple[CounselorPersona, str]:
    """Stage 2: elicit integer influence scores and the persona prompt.

    Returns the parsed persona together with the raw model output, which
    callers persist alongside the parsed artifact.
    """
    active = cfg.distinct_attributes
    schema = prompts.stage2_schema(active)

    def validate(obj: Mapping[str, Any]) -> CounselorPersona:
        scores = {
            attr.value: float(require_int_in(obj, attr.value, 1, 3, Stage2ParseError))
            for attr in active
        }
        text = require_str(obj, "persona_text", Stage2ParseError)
        return CounselorPersona(
            persona_text=text, influence=AttributeScoreVector(**scores)
        )

    return complete_structured(
        gw,
        prompts.counselor_creation_prompt(case, transcript, cfg.active_attributes),
        model_id=cfg.model_id,
        schema=schema,
        validate=validate,
        error_cls=Stage2ParseError,
        temperature=cfg.sampling.temperature,
        max_tokens=cfg.sampling.max_tokens,
        seed=cfg.sampling.seed,
    )


def generate_response(
    case: UserCase,
    persona: CounselorPersona,
    transcript: DebateTranscript,
    gw: LlmGateway,
    cfg: MethodConfig,
) -> GeneratedResponse:
    """Stage 3: the tailored counselor writes the support response."""
    messages = prompts.response_generation_prompt(persona, case, transcript)
    text = _complete_text(gw, _request(cfg, messages))
    return GeneratedResponse(
        case_id=case.id,
        text=text,
        method=cfg,
        persona=persona,
        transcript=transcript,
        provenance=_provenance(cfg, gw),
    )


def _provenance(cfg: MethodConfig, gw: LlmGateway) -> Provenance:
    return Provenance(
        timestamp=_now(),
        config_hash=cfg.config_hash(),
        model_fingerprint=gw.fingerprint,
    )


@dataclass(frozen=True)
class CaseRunResult:
    response: GeneratedResponse
    persona_raw: str | None = None


def run_method(case: UserCase, cfg: MethodConfig, gw: LlmGateway) -> CaseRunResult:
    """Execute one case under the configured method."""
    if cfg.method is Method.SA:
        text = _complete_text(gw, _request(cfg, prompts.sa_prompt(case)))
        return CaseRunResult(
            GeneratedResponse(case.id, text, cfg, provenance=_provenance(cfg, gw))
        )

    if cfg.method is Method.SAA:
        messages = prompts.saa_prompt(case, cfg.active_attributes)
        text = _complete_text(gw, _request(cfg, messages))
        return CaseRunResult(
            GeneratedResponse(case.id, text, cfg, provenance=_provenance(cfg, gw))
        )

    if cfg.method is Method.MAA:
        empty = DebateTranscript((), turn_count=0)
        turns = []
        for agent in cfg.active_attributes:
            messages = prompts.agent_turn_prompt(prompts.role_for(agent), case, empty)
            turns.append(DebateTurn(1, agent, _complete_text(gw, _request(cfg, messages))))
        transcript = DebateTranscript(tuple(turns), turn_count=1)
    else:
        transcript = run_debate(case, cfg.active_attributes, cfg.debate_turns, gw, cfg)

    persona, raw = create_counselor(case, transcript, gw, cfg)
    response = generate_response(case, persona, transcript, gw, cfg)
    return CaseRunResult(response=response, persona_raw=raw)


def planned_calls_per_case(cfg: MethodConfig) -> int:
    """Gateway calls one case costs on the clean (repair-free) path."""
    if cfg.method in (Method.SA, Method.SAA):
        return 1
    if cfg.method is Method.MAA:
        return len(cfg.active_attributes) + 2
    return cfg.debate_turns * len(cfg.active_attributes) + 2


# --- batch execution and the run archive -----------------------------------

@dataclass
class CaseStatus:
    status: str  # pending | ok | failed
    reason: str | None = None


@dataclass
class RunManifest:
    run_id: str
    config: MethodConfig
    dataset_path: str
    started: str
    finished: str | None = None
    statuses: dict[str, CaseStatus] = field(default_factory=dict)
    template_version: str = ""
    gateway_fingerprint: str = ""

    @property
    def counts(self) -> dict[str, int]:
        out = {"ok": 0, "failed": 0, "pending": 0}
        for status in self.statuses.values():
            out[status.status] = out.get(status.status, 0) + 1
        return out

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "config": self.config.to_json_dict(),
            "dataset_path": self.dataset_path,
            "started": self.started,
            "finished": self.finished,
            "statuses": {
                case_id: {"status": s.status, "reason": s.reason}
                for case_id, s in sorted(self.statuses.items())
            },
            "template_version": self.template_version,
            "gateway_fingerprint": self.gateway_fingerprint,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            config=MethodConfig.from_json_dict(data["config"]),
            dataset_path=data["dataset_path"],
            started=data["started"],
            finished=data.get("finished"),
            statuses={
                case_id: CaseStatus(entry["status"], entry.get("reason"))
                for case_id, entry in data.get("statuses", {}).items()
            },
            template_version=data.get("template_version", ""),
            gateway_fingerprint=data.get("gateway_fingerprint", ""),
        )


def _write_json_atomic(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
    tmp.write_text(
        json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, path)


def case_path(run_dir: str | Path, case_id: str) -> Path:
    return Path(run_dir) / "cases" / f"{case_id}.json"


def manifest_path(run_dir: str | Path) -> Path:
    return Path(run_dir) / "manifest.json"


def run_batch(
    dataset_path: str | Path,
    cfg: MethodConfig,
    gw: LlmGateway,
    out_dir: str | Path,
    parallelism: int = 1,
) -> RunManifest:
    """Run every case in the dataset, isolating failures per case.

    Rerunning against an existing run directory skips cases already ok,
    so a failed batch can be resumed after fixing the cause. A dataset
    that fails to parse aborts before any gateway call.
    """
    if parallelism < 1:
        raise ConfigurationError("parallelism must be >= 1")
    cases = datasets.load_native(dataset_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    mpath = manifest_path(out)
    carried: dict[str, CaseStatus] = {}
    if mpath.exists():
        previous = RunManifest.from_json_dict(
            json.loads(mpath.read_text(encoding="utf-8"))
        )
        if previous.config.config_hash() != cfg.config_hash():
            raise ConfigurationError(
                f"run dir {out} was created with a different config; "
                "use a fresh directory"
            )
        carried = previous.statuses

    manifest = RunManifest(
        run_id=out.name,
        config=cfg,
        dataset_path=str(dataset_path),
        started=_now(),
        statuses={
            case.id: (
                carried[case.id]
                if carried.get(case.id, CaseStatus("pending")).status == "ok"
                else CaseStatus("pending")
            )
            for case in cases
        },
        template_version=prompts.assets_version(),
        gateway_fingerprint=gw.fingerprint,
    )
    lock = threading.Lock()

    def checkpoint() -> None:
        _write_json_atomic(mpath, manifest.to_json_dict())

    checkpoint()

    def work(case: UserCase) -> None:
        try:
            result = run_method(case, cfg, gw)
            _write_json_atomic(
                case_path(out, case.id),
                {
                    "case_id": case.id,
                    "response": result.response.to_json_dict(),
                    "persona_raw": result.persona_raw,
                },
            )
            status = CaseStatus("ok")
        except (PipelineError, StructuredOutputError, GatewayError, ConfigurationError) as exc:
            failure: dict[str, Any] = {"case_id": case.id, "error": str(exc)}
            if isinstance(exc, DebateError):
                failure["partial_transcript"] = exc.partial.to_json_dict()
            if isinstance(exc, StructuredOutputError) and exc.raw:
                failure["raw_output"] = exc.raw
            _write_json_atomic(out / "cases" / f"{case.id}.failed.json", failure)
            status = CaseStatus("failed", reason=str(exc))
        with lock:
            manifest.statuses[case.id] = status
            checkpoint()

    todo = [case for case in cases if manifest.statuses[case.id].status != "ok"]
    if parallelism == 1:
        for case in todo:
            work(case)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, todo))

    manifest.finished = _now()
    checkpoint()
    return manifest


def load_run(run_dir: str | Path) -> tuple[RunManifest, dict[str, CaseRunResult]]:
    """Read a run archive back: manifest plus every ok case's artifacts."""
    out = Path(run_dir)
    mpath = manifest_path(out)
    if not mpath.exists():
        raise FileNotFoundError(f"no manifest at {mpath}")
    manifest = RunManifest.from_json_dict(json.loads(mpath.read_text(encoding="utf-8")))
    results: dict[str, CaseRunResult] = {}
    for case_id, status in manifest.statuses.items():
        if status.status != "ok":
            continue
        payload = json.loads(case_path(out, case_id).read_text(encoding="utf-8"))
        results[case_id] = CaseRunResult(
            response=GeneratedResponse.from_json_dict(payload["response"]),
            persona_raw=payload.get("persona_raw"),
        )
    return manifest, results
