"""Decoding-trace records, JSONL ingestion and truncated entropy.

A trace holds, for every generated token, the top-k next-token log-probabilities
the serving stack exposed plus the log-probability of the token actually
emitted.  All log-probabilities are natural-log.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    EmptyTrajectory,
    InputError,
    InvalidStep,
    MalformedLine,
    SchemaViolation,
)

MAX_TOP_K = 20
PROB_SUM_TOL = 1e-6
MAX_ENTROPY = math.log(MAX_TOP_K)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True, eq=False)
class TopKStep:
    """One decoding step: top-k (token, logprob) entries and the emitted token's logprob."""

    tokens: tuple[str, ...]
    logprobs: np.ndarray
    chosen_logprob: float | None = None

    def __post_init__(self):
        lp = np.array(self.logprobs, dtype=np.float64).reshape(-1)
        lp.setflags(write=False)
        object.__setattr__(self, "logprobs", lp)
        object.__setattr__(self, "tokens", tuple(str(t) for t in self.tokens))
        if len(self.tokens) != lp.size:
            raise InvalidStep("tokens and logprobs differ in length")
        if not 1 <= lp.size <= MAX_TOP_K:
            raise InvalidStep(f"expected 1..{MAX_TOP_K} entries, got {lp.size}")
        if not np.all(np.isfinite(lp)):
            raise InvalidStep("non-finite logprob")
        if np.any(lp > 0.0):
            raise InvalidStep("positive logprob")
        if lp.size > 1 and np.any(np.diff(lp) > 0.0):
            raise InvalidStep("entries not sorted by logprob descending")
        if float(np.sum(np.exp(lp))) > 1.0 + PROB_SUM_TOL:
            raise InvalidStep("top-k probabilities sum above 1")
        if self.chosen_logprob is not None:
            c = float(self.chosen_logprob)
            if not math.isfinite(c) or c > 0.0:
                raise InvalidStep("chosen_logprob must be finite and <= 0")
            object.__setattr__(self, "chosen_logprob", c)

    @classmethod
    def from_entries(cls, entries: Iterable[Sequence], chosen_logprob=None, sort=False):
        pairs = [(str(tok), float(lp)) for tok, lp in entries]
        if sort:
            pairs.sort(key=lambda e: -e[1])
        return cls(
            tuple(t for t, _ in pairs),
            np.array([lp for _, lp in pairs], dtype=np.float64),
            chosen_logprob,
        )

    @property
    def entries(self) -> list[tuple[str, float]]:
        return [(t, float(lp)) for t, lp in zip(self.tokens, self.logprobs)]

    def __len__(self):
        return self.logprobs.size

    def __eq__(self, other):
        if not isinstance(other, TopKStep):
            return NotImplemented
        return (
            self.tokens == other.tokens
            and np.array_equal(self.logprobs, other.logprobs)
            and self.chosen_logprob == other.chosen_logprob
        )


@dataclass(frozen=True)
class DecodingTrace:
    instance_id: str
    domain_id: str
    steps: tuple[TopKStep, ...]
    label: int | None = None
    model_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.steps) == 0:
            raise EmptyTrajectory(f"trace {self.instance_id!r} has no steps")
        if self.label is not None:
            if isinstance(self.label, bool) or self.label not in (0, 1):
                raise InputError(f"label must be 0, 1 or None, got {self.label!r}")
            object.__setattr__(self, "label", int(self.label))

    def __len__(self):
        return len(self.steps)


def truncated_entropy(step) -> float:
    """Entropy (nats) of the top-k entries as given: -sum p ln p, no renormalisation."""
    if not isinstance(step, TopKStep):
        step = TopKStep.from_entries(step)
    lp = step.logprobs
    h = -float(np.sum(np.exp(lp) * lp))
    return h if h > 0.0 else 0.0


def entropy_trajectory(trace: DecodingTrace) -> np.ndarray:
    if len(trace.steps) == 0:
        raise EmptyTrajectory("trace has no steps")
    out = np.empty(len(trace.steps))
    for t, step in enumerate(trace.steps):
        try:
            out[t] = truncated_entropy(step)
        except InvalidStep as exc:
            raise InvalidStep(exc.reason, step_index=t) from exc
    return out


# -- JSONL ---------------------------------------------------------------------


@dataclass
class Rejection:
    line_no: int
    error: InputError

    def __str__(self):
        return f"line {self.line_no}: {self.error}"


@dataclass
class ParseResult:
    traces: list[DecodingTrace] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)


def _require_str(record, key):
    if key not in record:
        raise SchemaViolation(key, "missing")
    if not isinstance(record[key], str):
        raise SchemaViolation(key, "expected a string")
    return record[key]


def _step_from_json(raw, index) -> TopKStep:
    if not isinstance(raw, dict):
        raise SchemaViolation("steps", f"step {index} is not an object")
    top = raw.get("top")
    if not isinstance(top, list) or not 1 <= len(top) <= MAX_TOP_K:
        raise SchemaViolation("top", f"step {index}: expected 1..{MAX_TOP_K} entries")
    pairs = []
    for entry in top:
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not isinstance(entry[0], str)
            or not _is_number(entry[1])
        ):
            raise SchemaViolation("top", f"step {index}: entries must be [token, logprob]")
        lp = float(entry[1])
        if not math.isfinite(lp) or lp > 0.0:
            raise SchemaViolation("logprob", f"step {index}: {entry[1]!r} is not a log-probability")
        pairs.append((entry[0], lp))
    if "chosen_logprob" not in raw:
        raise SchemaViolation("chosen_logprob", f"step {index}: missing")
    chosen = raw["chosen_logprob"]
    if not _is_number(chosen) or not math.isfinite(chosen) or chosen > 0.0:
        raise SchemaViolation("chosen_logprob", f"step {index}: {chosen!r}")
    try:
        return TopKStep.from_entries(pairs, float(chosen), sort=True)
    except InvalidStep as exc:
        raise SchemaViolation("top", f"step {index}: {exc.reason}") from exc


def trace_from_record(record) -> DecodingTrace:
    """Validate one decoded JSON object against the trace schema."""
    if not isinstance(record, dict):
        raise SchemaViolation("record", "expected a JSON object")
    instance_id = _require_str(record, "instance_id")
    domain_id = _require_str(record, "domain_id")
    model_id = _require_str(record, "model_id")
    if "label" not in record:
        raise SchemaViolation("label", "missing")
    label = record["label"]
    if label is not None and (isinstance(label, bool) or label not in (0, 1)):
        raise SchemaViolation("label", f"expected 0, 1 or null, got {label!r}")
    steps = record.get("steps")
    if not isinstance(steps, list) or not steps:
        raise SchemaViolation("steps", "expected a non-empty list")
    parsed = tuple(_step_from_json(s, i) for i, s in enumerate(steps))
    return DecodingTrace(instance_id, domain_id, parsed, label, model_id)


def trace_to_record(trace: DecodingTrace) -> dict:
    return {
        "instance_id": trace.instance_id,
        "domain_id": trace.domain_id,
        "model_id": trace.model_id,
        "label": trace.label,
        "steps": [
            {"top": [[t, lp] for t, lp in step.entries], "chosen_logprob": step.chosen_logprob}
            for step in trace.steps
        ],
    }


def dumps_trace(trace: DecodingTrace) -> str:
    return json.dumps(trace_to_record(trace), ensure_ascii=False)


def _text_lines(stream) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, io.TextIOBase):
        yield from stream
        return
    for raw in stream:
        yield raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw


def iter_traces(stream, strict=True, rejections: list | None = None) -> Iterator[DecodingTrace]:
    """Yield traces from a JSONL stream in file order.

    With ``strict`` the first bad line raises; otherwise bad lines are appended
    to ``rejections`` and skipped.
    """
    for line_no, line in enumerate(_text_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            try:
                record = json.loads(line)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise MalformedLine(line_no, exc) from exc
            try:
                yield trace_from_record(record)
            except SchemaViolation as exc:
                exc.line_no = line_no
                raise
            except InputError as exc:
                raise SchemaViolation("record", str(exc), line_no) from exc
        except InputError as exc:
            if strict:
                raise
            if rejections is not None:
                rejections.append(Rejection(line_no, exc))


def parse_traces(stream: IO | bytes, strict: bool = False) -> ParseResult:
    result = ParseResult()
    result.traces.extend(iter_traces(stream, strict=strict, rejections=result.rejections))
    return result


def write_traces(traces: Iterable[DecodingTrace], fh) -> int:
    n = 0
    for trace in traces:
        fh.write(dumps_trace(trace))
        fh.write("\n")
        n += 1
    return n
