"""Build the replay fixtures under fixtures/llm/.

The replies are constructed, not captured from a live service: plan replies
wrap the template planner's plan, patch replies apply the split-product
repair to the step named in the prompt.  Re-run after changing prompts.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import httpx

from crbforge.llm import BridgeConfig, LlmPatcher, render_plan_prompt, request_body, retry_message
from crbforge.pipeline import TemplatePlanner, analyze, derive
from crbforge.scenarios import BUILTIN_IDS, builtin

OUT = Path(__file__).resolve().parents[1] / "fixtures" / "llm"


def reply(payload, preface="Plan follows.") -> dict:
    content = f"{preface}\n```json\n{json.dumps(payload, indent=1, sort_keys=True)}\n```\n"
    return {"status": 200, "body": {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}}


def raw_reply(content: str) -> dict:
    return {"status": 200, "body": {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}}


def body(model: str, messages) -> dict:
    return request_body(BridgeConfig(model=model, fixtures=str(OUT)), messages)


def write(name: str, request: dict, response: dict) -> None:
    (OUT / f"{name}.json").write_text(json.dumps({"request": request, "response": response}, indent=1,
                                                 sort_keys=True) + "\n")


def plan_payload(spec) -> dict:
    plan = TemplatePlanner().plan(spec, analyze(spec)).to_dict()
    plan.pop("planner")
    for s in plan["steps"]:
        s.pop("index")
    return plan


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.json"):
        old.unlink()
    for sid in BUILTIN_IDS:
        spec = builtin(sid)
        msgs = render_plan_prompt(spec, analyze(spec))
        write(f"plan_{sid}", body("replay", msgs), reply(plan_payload(spec)))

    spec = builtin("S01")
    msgs = render_plan_prompt(spec, analyze(spec))
    bad = plan_payload(spec)
    bad["steps"][0]["op"] = "integrate"
    write("plan_S01_bad_op", body("replay-bad-op", msgs), reply(bad))

    first = "I would start by differentiating the phase with respect to each parameter."
    write("plan_S01_retry_1", body("replay-retry", msgs), raw_reply(first))
    retry_msgs = msgs + [
        {"role": "assistant", "content": first},
        retry_message("reply must contain exactly one fenced block, found 0"),
    ]
    write("plan_S01_retry_2", body("replay-retry", retry_msgs), reply(plan_payload(spec)))

    # Patch conversations, recorded against a handler that builds the split-product repair.
    recorded = []

    def handler(request: httpx.Request) -> httpx.Response:
        req = json.loads(request.content)
        prompt = req["messages"][-1]["content"]
        step = json.loads(re.search(r"^Step: (.*)$", prompt, re.M).group(1))
        if req["model"] == "replay-empty":
            resp = raw_reply("")
        else:
            step["params"] = {**step["params"], "split": True}
            step.pop("index")
            resp = reply({"steps": [step], "rules": {}}, "Split the product before summing.")
        recorded.append((req, resp))
        return httpx.Response(200, json=resp["body"])

    for model in ("replay", "replay-empty"):
        recorded.clear()
        cfg = BridgeConfig(model=model, fixtures=str(OUT), max_retries=0)
        derive(spec, patcher=LlmPatcher(cfg, transport=httpx.MockTransport(handler)), inject=["degree-cap"],
               validate=False)
        for i, (req, resp) in enumerate(recorded):
            write(f"patch_S01_degree_cap_{model}_{i}", req, resp)
    print(f"wrote {len(list(OUT.glob('*.json')))} fixtures to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
