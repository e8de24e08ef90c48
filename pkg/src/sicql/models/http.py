"""HTTP client for a chat-completions style endpoint.

Targets ``POST {base_url}/chat/completions`` with a JSON body
``{"model": ..., "messages": [...], "seed": ...}``. The API key comes from
an environment variable; no streaming, no token-level access, so masks are
an unsupported capability and judge confidence is absent (no logits).
"""

from __future__ import annotations

import os

import requests

from sicql.errors import ModelError, UnsupportedCapabilityError
from sicql.models.base import (
    CONTRACT_BOOL_COT,
    JudgeResult,
    ModelRequest,
    ModelResponse,
    parse_cot,
)

_JUDGE_INSTRUCTIONS = {
    "fact-check": "Answer true if the output is factually consistent with the input, else false.",
    "relevance": "Answer true if the output is relevant to the task, else false.",
    "soundness-steps": "Answer true if the reasoning steps validly support the conclusion, else false.",
    "semantic-match": "Answer true if the output contains or matches the described content, else false.",
}


class HttpModel:
    name = "http"
    confidence_capable = False
    token_mask_capable = False
    stream_capable = False

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "SICQL_API_KEY",
        timeout: float = 30.0,
        cost_per_call: float = 1.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.cost_per_call = cost_per_call
        self.session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, prompt: str, seed: int) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "seed": seed,
        }
        try:
            resp = self.session.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=self._headers(),
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ModelError(f"transport failure: {exc}") from exc
        if resp.status_code != 200:
            raise ModelError(f"model endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ModelError(f"malformed completion payload: {exc}") from exc

    def complete(self, request: ModelRequest) -> ModelResponse:
        if request.masks:
            raise UnsupportedCapabilityError("HTTP client cannot honor token masks")
        text = self._post(request.prompt, request.seed)
        response = ModelResponse(text=text, cost=self.cost_per_call)
        if request.contract == CONTRACT_BOOL_COT:
            response.cot, response.answer = parse_cot(text)
        return response

    def complete_constrained(self, request: ModelRequest) -> ModelResponse:
        raise UnsupportedCapabilityError("HTTP client cannot honor token masks")

    def judge(self, task: str, input_text: str, output: str, mode: str) -> JudgeResult:
        instruction = _JUDGE_INSTRUCTIONS.get(mode, _JUDGE_INSTRUCTIONS["relevance"])
        prompt = (
            f"{instruction}\n\nTask: {task}\n\nInput:\n{input_text}\n\nOutput:\n{output}\n\n"
            "Reply with exactly 'true' or 'false' on the first line, then a short reason."
        )
        text = self._post(prompt, seed=0)
        first = text.strip().splitlines()[0].strip().lower() if text.strip() else ""
        if first.startswith("true"):
            verdict = True
        elif first.startswith("false"):
            verdict = False
        else:
            raise ModelError(f"judge reply is not a boolean: {text[:120]!r}")
        rationale = "\n".join(text.strip().splitlines()[1:]).strip()
        return JudgeResult(verdict=verdict, confidence=None, rationale=rationale, cost=self.cost_per_call)
