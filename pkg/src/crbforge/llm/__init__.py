"""Planner and Patcher backed by a chat-completion HTTP service.

Off by default.  With ``fixtures`` set, requests are answered from recorded
request/response pairs and no network or key is needed.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Iterable

import httpx

from ..errors import AuthMissing, PlanInvalid, SchemaError, Transport
from ..expr import IndexPoly, to_text
from ..pipeline import Amendment, Plan, PlanStep, validate_plan, validate_steps
from ..pipeline.executor import value_text
from ..pipeline.plan import OPS, check_step_shape

PROMPT_VERSION = "v1"
DEFAULT_KEY_ENV = "CRBFORGE_LLM_API_KEY"
FIXTURE_ENDPOINT = "http://fixtures.local/v1/chat/completions"
DEFAULT_MODEL = "replay"

OP_SIGNATURES = {
    "define": "() -> value, params {text}",
    "differentiate": "(expr) -> expr, params {wrt}",
    "differentiate_poly": "(index_poly) -> index_poly, params {wrt}",
    "mul_poly": "(index_poly, index_poly) -> index_poly, params {split?: bool}",
    "sum_index": "(index_poly) -> index_poly or expr, params {index}",
    "assemble_fim": "(gain_sq, noise, s_00, s_01, ..., s_PP) -> matrix, params {dim}",
    "determinant": "(matrix) -> expr",
    "crb": "(matrix[, det]) -> expr, params {param: position}",
    "simplify": "(value) -> value",
    "substitute": "(value) -> value, params {bindings: {name: text}}",
    "assert_equal": "(value, value) -> value",
}

_FENCE = re.compile(r"```[a-zA-Z]*[ \t]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class BridgeConfig:
    endpoint: str = ""
    model: str = DEFAULT_MODEL
    api_key_env: str = DEFAULT_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    fixtures: str | None = None

    def __post_init__(self):
        if not 1 <= self.timeout <= 600:
            raise SchemaError(f"timeout must be within [1, 600] seconds, got {self.timeout}")
        if self.max_retries < 0:
            raise SchemaError("max_retries must be non-negative")

    @property
    def url(self) -> str:
        if self.endpoint:
            return self.endpoint
        if self.fixtures:
            return FIXTURE_ENDPOINT
        raise SchemaError("the LLM bridge needs an endpoint (or fixtures for replay)")


# ---------------------------------------------------------------------------
# secrets


def _mask_for(secret: str) -> str:
    for mask in ("[REDACTED]", "***", "###", "~~~"):
        if not set(mask) & set(secret):
            return mask
    return ""


def scrub(obj, secrets: Iterable[str]):
    """Recursively remove every secret from strings inside ``obj``."""
    secrets = sorted({s for s in secrets if s}, key=len, reverse=True)
    if not secrets:
        return obj

    def clean(text: str) -> str:
        for s in secrets:
            mask = _mask_for(s)
            if mask:
                # mask shares no character with s, so no new match can span it
                text = text.replace(s, mask)
            else:
                while s in text:
                    text = text.replace(s, "")
        return text

    def walk(x):
        if isinstance(x, str):
            return clean(x)
        if isinstance(x, dict):
            return {walk(k): walk(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return type(x)(walk(v) for v in x)
        return x

    return walk(obj)


# ---------------------------------------------------------------------------
# transport


def canonical_body(body) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def request_body(cfg: BridgeConfig, messages: list[dict]) -> dict:
    """Chat-completion request body; also the fixture lookup key."""
    return {"model": cfg.model, "messages": messages, "temperature": cfg.temperature}


def retry_message(error: str) -> dict:
    return {"role": "user", "content": load_prompt("retry").substitute(error=error)}


class FixtureTransport(httpx.MockTransport):
    """Answers requests from ``*.json`` files holding ``{"request", "response"}`` pairs."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise SchemaError(f"fixture directory {directory} does not exist")
        self.table: dict[str, dict] = {}
        for path in sorted(self.directory.glob("*.json")):
            data = json.loads(path.read_text())
            self.table[canonical_body(data["request"])] = data["response"]
        self.calls = 0
        super().__init__(self._handle)

    def _handle(self, request: httpx.Request) -> httpx.Response:
        self.calls += 1
        try:
            key = canonical_body(json.loads(request.content))
        except ValueError:
            return httpx.Response(400, json={"error": {"message": "request body is not JSON"}})
        resp = self.table.get(key)
        if resp is None:
            return httpx.Response(404, json={"error": {"message": "no recorded fixture matches this request"}})
        return httpx.Response(resp.get("status", 200), json=resp["body"])


class ChatClient:
    """Blocking chat-completion client with bounded retries."""

    def __init__(self, cfg: BridgeConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        self.key: str | None = None
        if transport is None and cfg.fixtures:
            transport = FixtureTransport(cfg.fixtures)
        if not cfg.fixtures:
            self.key = os.environ.get(cfg.api_key_env)
            if not self.key:
                raise AuthMissing(f"environment variable {cfg.api_key_env} is not set")
        self.url = cfg.url
        self.transport = transport
        self._client = httpx.Client(transport=transport, timeout=cfg.timeout)
        self.attempts = 0

    @property
    def secrets(self) -> list[str]:
        return [self.key] if self.key else []

    def body(self, messages: list[dict]) -> dict:
        return request_body(self.cfg, messages)

    def complete(self, messages: list[dict]) -> str:
        body = self.body(messages)
        headers = {"Authorization": f"Bearer {self.key}"} if self.key else {}
        last = "no attempt made"
        for _ in range(self.cfg.max_retries + 1):
            self.attempts += 1
            try:
                resp = self._client.post(self.url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = f"timeout: {exc}"
                continue
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise Transport(scrub(f"HTTP {resp.status_code}: {resp.text}", self.secrets))
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError):
                raise Transport("reply is not a chat-completion response") from None
        raise Transport(scrub(f"giving up after {self.cfg.max_retries + 1} attempts: {last}", self.secrets))

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# prompts


def load_prompt(name: str, version: str = PROMPT_VERSION) -> Template:
    text = resources.files(__package__).joinpath("prompts", f"{name}_{version}.txt").read_text()
    return Template(text)


def _ops_text() -> str:
    return "\n".join(f"- {op}: {OP_SIGNATURES[op]}" for op in OPS)


def _workspace_text(ws) -> str:
    lines = []
    for name, value in ws.values.items():
        try:
            text = value_text(value)
        except Exception:
            text = f"<{type(value).__name__}>"
        if len(text) > 400:
            text = text[:400] + " ..."
        lines.append(f"- {name} = {text}")
    return "\n".join(lines)


def render_plan_prompt(spec, ws) -> list[dict]:
    symbols = "\n".join(f"- {n}: {info.kind}" for n, info in spec.symbols.items() if n != "pi")
    user = load_prompt("plan").substitute(
        scenario=spec.id,
        symbols=symbols,
        indices=", ".join(spec.indices),
        phase=ws["phi"].to_text() if isinstance(ws["phi"], IndexPoly) else to_text(ws["phi"]),
        params=", ".join(spec.params),
        workspace=_workspace_text(ws),
        targets="\n".join(f"- {t}" for t in spec.targets),
        ops=_ops_text(),
    )
    return [
        {"role": "system", "content": load_prompt("system").template},
        {"role": "user", "content": user},
    ]


def render_patch_prompt(spec, ws, step: PlanStep, error, rules) -> list[dict]:
    user = load_prompt("patch").substitute(
        scenario=spec.id,
        step=json.dumps(step.to_dict(), sort_keys=True),
        error_kind=getattr(error, "kind", type(error).__name__),
        error_message=str(error),
        rules=json.dumps(rules.to_dict(), sort_keys=True),
        workspace=_workspace_text(ws),
        ops=_ops_text(),
        output=step.output,
    )
    return [
        {"role": "system", "content": load_prompt("system").template},
        {"role": "user", "content": user},
    ]


def extract_block(reply: str):
    blocks = _FENCE.findall(reply or "")
    if len(blocks) != 1:
        raise PlanInvalid(f"reply must contain exactly one fenced block, found {len(blocks)}")
    try:
        return json.loads(blocks[0])
    except json.JSONDecodeError as exc:
        raise PlanInvalid(f"fenced block is not valid JSON: {exc}") from None


def _converse(client: ChatClient, messages: list[dict], parse):
    """Ask, validate, and re-prompt with the validation error on rejection."""
    replies = []
    for _ in range(client.cfg.max_retries + 1):
        reply = client.complete(messages)
        replies.append(reply)
        try:
            return parse(reply), replies
        except PlanInvalid as exc:
            messages = messages + [
                {"role": "assistant", "content": reply},
                retry_message(str(exc)),
            ]
            last = exc
    raise PlanInvalid(str(last), raw_replies=scrub(replies, client.secrets))


def llm_plan(spec, ws, cfg: BridgeConfig, client: ChatClient | None = None) -> Plan:
    client = client or ChatClient(cfg)

    def parse(reply):
        raw = extract_block(reply)
        plan = Plan.from_dict(raw, planner="llm")
        validate_plan(plan, ws.names(), spec.targets)
        return plan

    plan, _ = _converse(client, render_plan_prompt(spec, ws), parse)
    return plan


def llm_patch(record, step: PlanStep, error, ws, rules, cfg: BridgeConfig,
              client: ChatClient | None = None) -> Amendment:
    client = client or ChatClient(cfg)

    def parse(reply):
        raw = extract_block(reply)
        if not isinstance(raw, dict) or not raw.get("steps"):
            raise PlanInvalid("amendment has no steps")
        steps = tuple(PlanStep.from_dict(s, step.index) for s in raw["steps"])
        for s in steps:
            check_step_shape(s)
        validate_steps(steps, ws.names())
        if steps[-1].output != step.output:
            raise PlanInvalid(f"the last replacement step must write {step.output!r}")
        overrides = raw.get("rules") or {}
        if not isinstance(overrides, dict):
            raise PlanInvalid("rules must be an object")
        return Amendment(steps, overrides, "llm")

    amendment, _ = _converse(client, render_patch_prompt(ws.spec, ws, step, error, rules), parse)
    return amendment


@dataclass
class LlmPlanner:
    cfg: BridgeConfig
    transport: httpx.BaseTransport | None = None
    id: str = "llm"
    _client: ChatClient | None = field(default=None, repr=False)

    def client(self) -> ChatClient:
        if self._client is None:
            self._client = ChatClient(self.cfg, self.transport)
        return self._client

    def plan(self, spec, workspace) -> Plan:
        return llm_plan(spec, workspace, self.cfg, self.client())


@dataclass
class LlmPatcher:
    cfg: BridgeConfig
    transport: httpx.BaseTransport | None = None
    id: str = "llm"
    _client: ChatClient | None = field(default=None, repr=False)

    def patch(self, record, step, error, workspace, rules) -> Amendment:
        if self._client is None:
            self._client = ChatClient(self.cfg, self.transport)
        return llm_patch(record, step, error, workspace, rules, self.cfg, self._client)


__all__ = [
    "BridgeConfig", "ChatClient", "DEFAULT_KEY_ENV", "FixtureTransport", "LlmPatcher", "LlmPlanner",
    "PROMPT_VERSION", "canonical_body", "request_body", "retry_message", "extract_block", "llm_patch", "llm_plan", "render_patch_prompt",
    "render_plan_prompt", "scrub",
]
