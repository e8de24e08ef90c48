"""Deterministic scripted model standing in for an LLM.

Responses come from an ordered rule table matched against the prompt
(first match wins); a rule can give fixed response variants per attempt,
render a template over the request's field values, or copy a span out of a
field with per-token noise. All randomness is keyed on
``(seed, prompt, attempt)`` content, so identical requests get identical
responses regardless of call order or threading.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field

from sicql.automata.masking import MaskState
from sicql.automata.stream import BACKTRACK, StreamGuard
from sicql.errors import ConfigError, ModelError
from sicql.models.base import (
    CONTRACT_BOOL_COT,
    JudgeResult,
    ModelRequest,
    ModelResponse,
    parse_cot,
)

_RULE_KEYS = {
    "match", "response", "responses", "copy_field", "between", "span_frac",
    "random_span", "strip", "noise", "confidence",
}
_JUDGE_RULE_KEYS = {
    "mode", "pattern", "applies_to", "verdict", "confidence", "flip_prob",
    "logit_true", "logit_false", "rationale",
}
_SCRIPT_KEYS = {
    "cost_per_call", "judge_cost_per_call", "tokenizer", "alphabet",
    "rules", "default_response", "judge",
}
_JUDGE_KEYS = {"default_verdict", "default_confidence", "rules"}

_TEMPLATE_FIELD = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
_SEGMENT_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass
class FakeModelScript:
    rules: list[dict] = field(default_factory=list)
    judge_rules: list[dict] = field(default_factory=list)
    default_response: str | None = None
    default_verdict: bool = True
    default_confidence: float = 0.9
    cost_per_call: float = 1.0
    judge_cost_per_call: float = 1.0
    tokenizer: str = "char"  # char | whitespace
    alphabet: str = "abcdefghijklmnopqrstuvwxyz "

    @classmethod
    def from_dict(cls, data: dict) -> "FakeModelScript":
        unknown = set(data) - _SCRIPT_KEYS
        if unknown:
            raise ConfigError(f"unknown fake-model script keys: {sorted(unknown)}")
        for rule in data.get("rules", []):
            bad = set(rule) - _RULE_KEYS
            if bad:
                raise ConfigError(f"unknown rule keys: {sorted(bad)}")
            if "match" not in rule:
                raise ConfigError("every rule needs a 'match' pattern")
        judge = data.get("judge", {})
        bad = set(judge) - _JUDGE_KEYS
        if bad:
            raise ConfigError(f"unknown judge keys: {sorted(bad)}")
        for rule in judge.get("rules", []):
            bad = set(rule) - _JUDGE_RULE_KEYS
            if bad:
                raise ConfigError(f"unknown judge rule keys: {sorted(bad)}")
        if data.get("tokenizer", "char") not in ("char", "whitespace"):
            raise ConfigError("tokenizer must be 'char' or 'whitespace'")
        return cls(
            rules=list(data.get("rules", [])),
            judge_rules=list(judge.get("rules", [])),
            default_response=data.get("default_response"),
            default_verdict=judge.get("default_verdict", True),
            default_confidence=judge.get("default_confidence", 0.9),
            cost_per_call=data.get("cost_per_call", 1.0),
            judge_cost_per_call=data.get("judge_cost_per_call", 1.0),
            tokenizer=data.get("tokenizer", "char"),
            alphabet=data.get("alphabet", "abcdefghijklmnopqrstuvwxyz "),
        )

    @classmethod
    def load(cls, path: str) -> "FakeModelScript":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _derive_rng(*parts: object) -> random.Random:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _outgoing_chars(automaton) -> set[str]:
    chars: set[str] = set()
    transitions = getattr(automaton, "transitions", None)
    explicit = getattr(automaton, "explicit", None)
    if explicit is not None:  # regex DFA: explicit chars plus one OTHER probe
        chars |= set(explicit)
        for code in range(0x21, 0x2FF):
            if chr(code) not in explicit:
                chars.add(chr(code))
                break
    elif isinstance(transitions, list):  # suffix automaton
        for row in transitions:
            chars |= set(row.keys())
    return chars


def _complete_to_accepting(masks) -> str | None:
    """Shortest character suffix that leaves every mask in an accepting state."""
    from collections import deque

    chars = sorted(set().union(*(_outgoing_chars(m.automaton) for m in masks)))
    start = tuple(m.state for m in masks)
    seen = {start}
    queue = deque([(start, "")])
    while queue:
        states, path = queue.popleft()
        for ch in chars:
            nxt = []
            for m, s in zip(masks, states):
                t = m.automaton.step(s, ch)
                if t is None:
                    break
                nxt.append(t)
            else:
                pair = tuple(nxt)
                if pair in seen:
                    continue
                seen.add(pair)
                word = path + ch
                if all(m.automaton.is_accepting(t) for m, t in zip(masks, nxt)):
                    return word
                queue.append((pair, word))
    return None


def _sigmoid(x: float) -> float:
    import math

    return 1.0 / (1.0 + math.exp(-x))


class FakeModel:
    """Scripted client; safe for concurrent use (no shared mutable state)."""

    name = "fake"
    confidence_capable = True
    token_mask_capable = True
    stream_capable = True

    def __init__(self, script: FakeModelScript, seed: int = 0):
        self.script = script
        self.seed = seed

    # -- target resolution ---------------------------------------------------

    def _find_rule(self, prompt: str) -> dict | None:
        for rule in self.script.rules:
            if re.search(rule["match"], prompt, re.DOTALL):
                return rule
        return None

    def _target_text(self, rule: dict, request: ModelRequest, rng: random.Random) -> str:
        if "responses" in rule:
            variants = rule["responses"]
            template = variants[min(request.attempt, len(variants) - 1)]
            return self._render(template, request.fields)
        if "response" in rule:
            return self._render(rule["response"], request.fields)
        if "copy_field" in rule:
            source = str(request.fields.get(rule["copy_field"], ""))
            text = source
            between = rule.get("between")
            if between:
                start_marker = between[0]
                start = text.find(start_marker)
                if start >= 0:
                    start += len(start_marker)
                    end = len(text)
                    if len(between) > 1 and between[1]:
                        stop = text.find(between[1], start)
                        if stop >= 0:
                            end = stop
                    text = text[start:end]
            if "span_frac" in rule:
                lo, hi = rule["span_frac"]
                text = text[int(lo * len(text)): int(hi * len(text))]
            if "random_span" in rule and text:
                spec = rule["random_span"]
                length = rng.randint(spec.get("min_len", 1), max(spec.get("max_len", 1), 1))
                length = min(length, len(text))
                start = rng.randint(0, len(text) - length)
                text = text[start: start + length]
            if rule.get("strip", False):
                text = text.strip()
            return text
        raise ModelError(f"rule {rule.get('match')!r} provides no response form")

    @staticmethod
    def _render(template: str, fields: dict[str, str]) -> str:
        def sub(m: re.Match) -> str:
            name = m.group(1)
            return str(fields[name]) if name in fields else m.group(0)

        return _TEMPLATE_FIELD.sub(sub, template)

    # -- completion ------------------------------------------------------------

    def complete(self, request: ModelRequest) -> ModelResponse:
        return self._decode(request, masked=False)

    def complete_constrained(self, request: ModelRequest) -> ModelResponse:
        return self._decode(request, masked=True)

    def _decode(self, request: ModelRequest, masked: bool) -> ModelResponse:
        rule = self._find_rule(request.prompt)
        if rule is None:
            if self.script.default_response is None:
                raise ModelError(
                    f"no rule matches prompt: {request.prompt[:120]!r}"
                )
            rule = {"response": self.script.default_response}
        rng = _derive_rng(self.seed, "complete", request.prompt, request.attempt)
        target = self._target_text(rule, request, rng)
        noise = float(rule.get("noise", 0.0))

        masks = [MaskState(a) for a in request.masks] if masked else []
        guard: StreamGuard | None = request.guard if isinstance(request.guard, StreamGuard) else None

        segments = _SEGMENT_SPLIT.split(target) if guard else [target]
        # Re-attach the whitespace the split consumed.
        if guard and len(segments) > 1:
            rebuilt, pos = [], 0
            for seg in segments:
                start = target.find(seg, pos)
                end = start + len(seg)
                trail_end = end
                while trail_end < len(target) and target[trail_end].isspace():
                    trail_end += 1
                rebuilt.append(target[start:trail_end])
                pos = trail_end
            segments = rebuilt

        emitted_tokens: list[str] = []
        guard_violation = None
        for segment in segments:
            seg_tokens, stopped = self._emit_tokens(segment, noise, rng, masks)
            if guard is not None:
                event = guard.feed("".join(seg_tokens))
                if event is not None:
                    if event.kind == BACKTRACK:
                        continue
                    guard_violation = event.outcome
                    break
            emitted_tokens.extend(seg_tokens)
            if stopped:  # mask dead end reached on an acceptable prefix
                break
        if masks and not all(m.prefix_acceptable() for m in masks):
            # The scripted continuation dead-ended; finish the output along
            # the shortest path to a state every mask accepts.
            completion = _complete_to_accepting(masks)
            if completion is None:
                raise ModelError("mask dead end with no reachable accepting state")
            for ch in completion:
                for m in masks:
                    m.advance(ch)
                emitted_tokens.append(ch)
        if guard is not None:
            final = guard.finish()
            if not final.ok:
                guard_violation = final
            text = guard.output
            backtracks = guard.backtracks
        else:
            text = "".join(emitted_tokens)
            backtracks = 0
        if masks and not all(m.prefix_acceptable() for m in masks):
            raise ModelError("constrained decode produced output outside the mask language")

        response = ModelResponse(
            text=text,
            tokens=tuple(emitted_tokens) if not guard else None,
            cost=self.script.cost_per_call,
            confidence=rule.get("confidence"),
            guard_backtracks=backtracks,
            guard_violation=guard_violation,
        )
        if request.contract == CONTRACT_BOOL_COT:
            response.cot, response.answer = parse_cot(text)
        return response

    def _emit_tokens(
        self, segment: str, noise: float, rng: random.Random, masks: list[MaskState]
    ) -> tuple[list[str], bool]:
        """Token-by-token emission through the masks.

        Returns the emitted tokens and whether decode must stop (a masked
        proposal had no admissible alternative).
        """
        out: list[str] = []
        for token in self._tokenize(segment):
            if noise > 0 and rng.random() < noise:
                noisy = self._noise_token(rng)
                if not masks:
                    out.append(noisy)
                elif all(m.admits(noisy) for m in masks):
                    for m in masks:
                        m.advance(noisy)
                    out.append(noisy)
                # A masked-out noise token is simply dropped.
            if not masks:
                out.append(token)
                continue
            if all(m.admits(token) for m in masks):
                for m in masks:
                    m.advance(token)
                out.append(token)
            else:
                # The scripted continuation no longer fits the automaton
                # (e.g. an admitted noise token moved the span); stop on an
                # acceptable prefix rather than emit an invalid token.
                return out, True
        return out, False

    def _tokenize(self, text: str) -> list[str]:
        if self.script.tokenizer == "whitespace":
            return re.findall(r"\S+\s*", text)
        return list(text)

    def _noise_token(self, rng: random.Random) -> str:
        if self.script.tokenizer == "whitespace":
            length = rng.randint(2, 5)
            return "".join(rng.choice(self.script.alphabet.strip() or "x") for _ in range(length)) + " "
        return rng.choice(self.script.alphabet)

    # -- judging ---------------------------------------------------------------

    def judge(self, task: str, input_text: str, output: str, mode: str) -> JudgeResult:
        rule = self._find_judge_rule(task, input_text, output, mode)
        if rule is None:
            verdict = self.script.default_verdict
            confidence = self.script.default_confidence
            rationale = "default judgement"
            flip_prob = 0.0
        else:
            if "logit_true" in rule or "logit_false" in rule:
                lt = float(rule.get("logit_true", 0.0))
                lf = float(rule.get("logit_false", 0.0))
                verdict = rule.get("verdict", lt >= lf)
                confidence = _sigmoid(abs(lt - lf))
            else:
                verdict = bool(rule.get("verdict", True))
                confidence = float(rule.get("confidence", self.script.default_confidence))
            rationale = rule.get("rationale", f"matched judge rule {rule.get('pattern', '')!r}")
            flip_prob = float(rule.get("flip_prob", 0.0))
        if flip_prob > 0:
            rng = _derive_rng(self.seed, "judge", mode, task, input_text, output)
            if rng.random() < flip_prob:
                verdict = not verdict
                rationale += " (flipped)"
        return JudgeResult(
            verdict=verdict,
            confidence=confidence,
            rationale=rationale,
            cost=self.script.judge_cost_per_call,
        )

    def _find_judge_rule(self, task: str, input_text: str, output: str, mode: str) -> dict | None:
        for rule in self.script.judge_rules:
            if rule.get("mode") and rule["mode"] != mode:
                continue
            pattern = rule.get("pattern")
            if pattern is None:
                return rule
            applies_to = rule.get("applies_to", "any")
            if applies_to == "output":
                material = output
            elif applies_to == "input":
                material = input_text
            elif applies_to == "task":
                material = task
            else:
                material = "\n".join((task, input_text, output))
            if re.search(pattern, material, re.DOTALL):
                return rule
        return None
