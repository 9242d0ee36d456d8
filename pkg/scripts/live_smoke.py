#!/usr/bin/env python3
"""Optional live smoke test: one case against a real endpoint.

Absolute scores from live models depend on the exact snapshot and prompt
wording, so this script asserts only schema validity of every stage:
the debate transcript has the right shape, stage-2 influence scores are
integers in 1..3, the final response is non-empty, judge scores are
integers in 1..5, and attribute scores are in [1, 3].

Requires AGORA_BASE_URL (and AGORA_API_KEY if the endpoint needs one);
exits 0 with a notice when unset so CI can include it unconditionally.

    AGORA_BASE_URL=http://localhost:8000/v1 AGORA_MODEL=my-model \
        python scripts/live_smoke.py
"""

from __future__ import annotations

import os
import sys

from agora import judge, pipeline, scoring
from agora.domain import CANONICAL_ATTRIBUTES, Method, MethodConfig, SamplingParams, UserCase
from agora.gateway import BackendConfig, HttpBackend, LlmGateway

CASE = UserCase(
    id="live-smoke-001",
    posts=(
        "I have been putting off studying for a certification exam for weeks. "
        "Every evening I plan to start and every evening I find a reason not to, "
        "and the guilt is now worse than the studying would be.",
    ),
)


def main() -> int:
    if not os.environ.get("AGORA_BASE_URL"):
        print("AGORA_BASE_URL not set: live smoke skipped")
        return 0
    model = os.environ.get("AGORA_MODEL", "gpt-3.5-turbo")
    gw = LlmGateway(
        HttpBackend(BackendConfig.from_env()),
        cache_dir=os.environ.get("AGORA_CACHE_DIR"),
    )
    cfg = MethodConfig(
        method=Method.MENTALAGORA,
        debate_turns=1,
        model_id=model,
        sampling=SamplingParams(temperature=0.7, max_tokens=512),
    )

    result = pipeline.run_method(CASE, cfg, gw)
    response = result.response
    transcript = response.transcript
    assert transcript.is_complete_for(CANONICAL_ATTRIBUTES), "transcript shape"
    print(f"[stage 1] transcript ok: {len(transcript.turns)} turns")
    influence = response.persona.influence
    assert influence.is_integral, "influence scores must be whole numbers"
    print(f"[stage 2] persona ok: influence {influence.to_json_dict()}")
    assert response.text.strip(), "final response must be non-empty"
    print(f"[stage 3] response ok: {len(response.text)} chars")

    scores = judge.judge_response(CASE, response.text, gw, model)
    print(f"[judge] scores ok: {scores.to_json_dict()}")
    vector = scoring.LlmAttributeScorer(gw, model).score(response.text)
    print(f"[scorer] attribute scores ok: {vector.to_json_dict()}")
    print(f"live smoke passed ({gw.calls()} gateway calls)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
