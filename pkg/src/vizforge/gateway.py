"""Model gateway: the single choke-point for synthesizer and judge calls.

All model traffic flows through one of these objects, which handles
template rendering, retries, rate limiting, call logging, and structured
judge-output parsing. The deterministic stub makes the whole pipeline
reproducible end-to-end in tests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .errors import (
    GatewayUnavailableError,
    JudgeFormatError,
    PreconditionError,
    TemplateError,
)
from .hashing import canonical_json, hash_text

logger = logging.getLogger(__name__)

ROLES = ("synthesizer", "text_judge", "vision_judge")

PACKAGED_TEMPLATES = Path(__file__).parent / "templates"

_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\n(.*?)```", re.DOTALL)


@dataclass
class GatewayRequest:
    role: str
    template_id: str
    variables: dict = field(default_factory=dict)
    attachments: list[str] = field(default_factory=list)  # artifact hashes
    temperature: float = 0.0
    max_tokens: int = 2048
    seed: int = 0

    def check(self) -> None:
        if self.role not in ROLES:
            raise PreconditionError(f"unknown gateway role {self.role!r}")
        if self.role == "vision_judge" and not self.attachments:
            raise PreconditionError("vision_judge requests need at least one attachment")

    @property
    def request_hash(self) -> str:
        return hash_text(
            canonical_json(
                {
                    "role": self.role,
                    "template_id": self.template_id,
                    "variables": self.variables,
                    "attachments": self.attachments,
                }
            )
        )


def template_placeholders(text: str) -> set[str]:
    names = set()
    for _, name, _, _ in string.Formatter().parse(text):
        if name:
            names.add(name)
    return names


class Gateway:
    """Base gateway; subclasses implement `_call(prompt, request) -> str`."""

    def __init__(
        self,
        templates_dir: Path | str | None = None,
        call_log: Path | str | None = None,
        run_id: str = "",
        retries: int = 2,
        rate_per_second: float = 0.0,
    ):
        self.templates_dir = Path(templates_dir) if templates_dir else PACKAGED_TEMPLATES
        self.call_log = Path(call_log) if call_log else None
        self.run_id = run_id
        self.retries = retries
        self._log_lock = threading.Lock()
        self._rate_per_second = rate_per_second
        self._last_call = 0.0

    # ---------------------------------------------------------------- templates

    def template_path(self, template_id: str) -> Path:
        path = self.templates_dir / f"{template_id}.txt"
        if not path.exists():
            # a custom directory must be complete; no silent fallback
            raise TemplateError(f"template file not found: {path}")
        return path

    def render(self, template_id: str, variables: dict) -> str:
        text = self.template_path(template_id).read_text(encoding="utf-8")
        missing = template_placeholders(text) - set(variables)
        if missing:
            raise TemplateError(
                f"template {template_id}: variables missing for placeholders "
                + ", ".join(sorted(missing))
            )
        return text.format(**variables)

    # -------------------------------------------------------------------- calls

    def _throttle(self) -> None:
        if self._rate_per_second <= 0:
            return
        wait = self._last_call + 1.0 / self._rate_per_second - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._last_call = time.monotonic()

    def complete(self, request: GatewayRequest, task_id: str = "") -> str:
        request.check()
        prompt = self.render(request.template_id, request.variables)
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            self._throttle()
            try:
                response = self._call(prompt, request)
                break
            except TransportError as exc:
                last_exc = exc
                logger.warning("gateway transport error (attempt %d): %s", attempt, exc)
                time.sleep(min(2**attempt * 0.1, 2.0))
        else:
            raise GatewayUnavailableError(f"retries exhausted: {last_exc}")
        self._log_call(request, task_id, response)
        return response

    def _log_call(self, request: GatewayRequest, task_id: str, response: str) -> None:
        if self.call_log is None:
            return
        entry = {
            "run_id": self.run_id,
            "task_id": task_id,
            "request_hash": request.request_hash,
            "response_hash": hash_text(response),
        }
        with self._log_lock:
            with self.call_log.open("a", encoding="utf-8") as fh:
                fh.write(canonical_json(entry) + "\n")

    def _call(self, prompt: str, request: GatewayRequest) -> str:
        raise NotImplementedError

    # ---------------------------------------------------------- structured judge

    def judge_structured(
        self,
        request: GatewayRequest,
        schema: dict,
        strict_mode: bool = False,
        task_id: str = "",
    ) -> dict:
        """Parse and validate a judge response; one corrective re-ask allowed."""
        response = self.complete(request, task_id=task_id)
        try:
            return _parse_and_validate(response, schema, strict_mode)
        except JudgeFormatError as first:
            logger.warning("judge output malformed, issuing corrective re-ask: %s", first)
            reask = GatewayRequest(
                role=request.role,
                template_id=request.template_id,
                variables={**request.variables, "_format_reminder": "single-line JSON only"},
                attachments=request.attachments,
                seed=request.seed + 1,
            )
            # templates don't reference _format_reminder; it only perturbs the call
            reask_prompt_vars = {
                k: v for k, v in reask.variables.items() if not k.startswith("_")
            }
            reask.variables = reask_prompt_vars
            response = self.complete(reask, task_id=task_id)
            return _parse_and_validate(response, schema, strict_mode)


class TransportError(Exception):
    """Retryable provider/transport failure."""


def _strip_fences(text: str) -> str:
    m = _FENCE_RE.search(text)
    return m.group(1).strip() if m else text.strip()


def _extract_object(text: str) -> str:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end == -1 or end <= start:
        raise JudgeFormatError("no JSON object found in judge output")
    return text[start : end + 1]


def _coerce_int(value) -> int:
    if isinstance(value, bool):
        raise JudgeFormatError(f"expected integer, got bool {value}")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        return int(value.strip())
    raise JudgeFormatError(f"expected integer, got {value!r}")


def _parse_and_validate(response: str, schema: dict, strict_mode: bool) -> dict:
    text = response.strip()
    if strict_mode:
        if "\n" in text or not (text.startswith("{") and text.endswith("}")):
            raise JudgeFormatError("strict mode: output must be one single-line JSON object")
    else:
        text = _strip_fences(text)
        text = _extract_object(text)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JudgeFormatError(f"judge output is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise JudgeFormatError("judge output must be a JSON object")
    _validate_schema(obj, schema, path="")
    return obj


def _validate_schema(obj: dict, schema: dict, path: str) -> None:
    """schema: key -> nested schema dict | "int:lo:hi" | "str" | "any"."""
    for key, rule in schema.items():
        where = f"{path}.{key}" if path else key
        if key not in obj:
            raise JudgeFormatError(f"missing required key {where!r}")
        value = obj[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                raise JudgeFormatError(f"{where}: expected object")
            _validate_schema(value, rule, where)
        elif rule == "str":
            if not isinstance(value, str):
                raise JudgeFormatError(f"{where}: expected string")
        elif rule == "any":
            pass
        elif rule.startswith("int:"):
            _, lo, hi = rule.split(":")
            iv = _coerce_int(value)
            if not (int(lo) <= iv <= int(hi)):
                raise JudgeFormatError(f"{where}: {iv} outside [{lo},{hi}]")
            obj[key] = iv
        else:  # pragma: no cover - programmer error
            raise ValueError(f"bad schema rule {rule!r}")


# ---------------------------------------------------------------------- stub


class StubGateway(Gateway):
    """Deterministic stand-in: responses are a pure function of the request.

    Response shape is keyed off the template family so downstream parsers
    always get well-formed output. Tests can pin exact responses per
    template with `canned`.
    """

    def __init__(self, *args, canned: Optional[dict[str, Callable | str]] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.canned = canned or {}

    def _digest(self, request: GatewayRequest) -> bytes:
        return hashlib.sha256(
            (request.template_id + "\x00" + canonical_json(request.variables)).encode("utf-8")
        ).digest()

    def _call(self, prompt: str, request: GatewayRequest) -> str:
        canned = self.canned.get(request.template_id)
        if canned is not None:
            return canned(request) if callable(canned) else canned

        d = self._digest(request)
        hexid = d.hex()[:8]
        tid = request.template_id

        if tid.startswith("judge_reward"):
            scores = [1 + d[i] % 5 for i in range(4)]
            total = sum(scores) / 4.0
            return json.dumps(
                {
                    "Chain of Thought": f"stub analysis {hexid}",
                    "Task Completion": str(scores[0]),
                    "Solution Coherence & Code Quality": str(scores[1]),
                    "Visual Clarity": str(scores[2]),
                    "Task Relevance": str(scores[3]),
                    "Total Score": f"{total:.2f}",
                }
            )
        if tid.startswith("judge_edit"):
            scores = [1 + d[i] % 5 for i in range(3)]
            final = 1 if min(scores) >= 3 else 0
            return json.dumps(
                {
                    "Chain of Thought": f"stub analysis {hexid}",
                    "Instruction Adherence Score": scores[0],
                    "Edit Quality & Realism Score": scores[1],
                    "Preservation of Unrelated Areas Score": scores[2],
                    "Final Result": final,
                }
            )
        if tid.startswith("judge_bench"):
            sim = 1 + d[0] % 5
            align = 1 + d[1] % 5
            return json.dumps(
                {
                    "code_similarity": {"score": sim, "reasoning": f"stub {hexid}"},
                    "instruction_alignment": {"score": align, "reasoning": f"stub {hexid}"},
                },
                separators=(",", ":"),
            )
        if tid == "bench_generate":
            body = (
                f'open("out.png", "wb").write(b"\\x89PNG stub {hexid}")\n'
                f'print("stub generation {hexid}")'
            )
            return f"Here is the program.\n\n```python\n{body}\n```\n"
        if tid == "recontextualize":
            code = request.variables.get("code", "")
            return (
                "[Problem Description]\n"
                f"Write a program reproducing the behavior below (variant {hexid}): "
                f"{request.variables.get('instruction', '')}\n"
                "[Code Solution]\n"
                f"```python\n{code}\n```"
            )
        if tid in ("reverse_instruction",):
            return f"Implement the behavior shown in the sampled snippet ({hexid})."
        if tid in ("translate_instruction",):
            return (
                f"Port the task to {request.variables.get('target_domain', '')} ({hexid}): "
                + request.variables.get("instruction", "")
            )
        # evolve / reverse_code / translate_code / other synthesis templates
        instruction = (
            f"Synthesized task {hexid}"
            + (
                " on " + request.variables["concept"]
                if request.variables.get("concept")
                else ""
            )
        )
        code = (
            f'open("figure.png", "wb").write(b"\\x89PNG stub {hexid}")\n'
            f'print("synthesized artifact {hexid}")'
        )
        return (
            "[Problem Description]\n"
            f"{instruction}\n"
            "[Code Solution]\n"
            f"```python\n{code}\n```"
        )


# ------------------------------------------------------------------- provider


class HttpGateway(Gateway):
    """Minimal HTTP provider: POSTs {prompt, ...} to $VIZFORGE_GATEWAY_URL.

    Credentials come from the environment; any non-2xx or connection error
    is retryable transport failure.
    """

    def __init__(self, *args, url: str | None = None, api_key: str | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.url = url or os.environ.get("VIZFORGE_GATEWAY_URL", "")
        self.api_key = api_key or os.environ.get("VIZFORGE_GATEWAY_API_KEY", "")
        if not self.url:
            raise PreconditionError("VIZFORGE_GATEWAY_URL is not set")

    def _call(self, prompt: str, request: GatewayRequest) -> str:
        import urllib.error
        import urllib.request

        payload = json.dumps(
            {
                "prompt": prompt,
                "role": request.role,
                "attachments": request.attachments,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "seed": request.seed,
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            self.url,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=120) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise TransportError(str(exc)) from exc
        if "text" not in body:
            raise TransportError("provider response missing 'text'")
        return body["text"]
