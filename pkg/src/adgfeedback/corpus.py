"""Prompts, analytic criteria, scored responses, and justification-cue spans.

All character offsets are Unicode scalar values (Python string indices), never
bytes: the source material is Japanese and byte offsets would tie spans to an
encoding.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

CORPUS_SCHEMA = "adg-corpus/1"


class CorpusError(Exception):
    def __init__(self, code: str, message: str, *, subject: str = ""):
        super().__init__(message)
        self.code = code
        self.subject = subject


@dataclass(frozen=True)
class Criterion:
    id: str
    description: str
    max_score: int
    sub_criteria: tuple["Criterion", ...] = ()


@dataclass(frozen=True)
class LengthConstraint:
    min_chars: int
    max_chars: int


@dataclass(frozen=True)
class PromptSpec:
    id: str
    prompt_text: str
    question: str
    length_constraint: LengthConstraint
    criteria: tuple[Criterion, ...]

    def criterion(self, criterion_id: str) -> Criterion:
        """Look up a criterion by id, sub-criteria included."""
        stack = list(self.criteria)
        while stack:
            c = stack.pop()
            if c.id == criterion_id:
                return c
            stack.extend(c.sub_criteria)
        raise CorpusError("unknown-criterion", f"prompt {self.id!r} has no criterion {criterion_id!r}",
                          subject=criterion_id)


@dataclass(frozen=True)
class CriterionResult:
    """Scoring-model output for one criterion: the score, the substring that
    justifies it, and (optionally) a criterion-specific error signature used
    to pick an analytic template."""

    score: int
    cue_span: tuple[int, int] | None = None
    error_signature: str | None = None


@dataclass(frozen=True)
class ScoredResponse:
    response_id: str
    prompt_id: str
    text: str
    per_criterion: tuple[tuple[str, CriterionResult], ...]

    def result_for(self, criterion_id: str) -> CriterionResult | None:
        for cid, res in self.per_criterion:
            if cid == criterion_id:
                return res
        return None


@dataclass(frozen=True)
class Corpus:
    prompts: tuple[PromptSpec, ...]
    responses: tuple[ScoredResponse, ...]
    # Gold response-node annotations for evaluation: (response_id, criterion_id) -> node_id.
    oracle_nodes: tuple[tuple[tuple[str, str], str], ...] = ()

    def prompt(self, prompt_id: str) -> PromptSpec:
        for p in self.prompts:
            if p.id == prompt_id:
                return p
        raise CorpusError("unresolved-prompt", f"no prompt {prompt_id!r} in corpus", subject=prompt_id)

    @property
    def oracle_map(self) -> dict[tuple[str, str], str]:
        return dict(self.oracle_nodes)


def load_corpus(document: str | bytes | dict) -> Corpus:
    """Materialize a corpus document; referential and range checks applied.

    A positive score without a justification cue is legal scoring-model
    output (the feedback layer then takes its unaligned path) but unusual in
    annotated data, so it is logged as a warning during ingestion.
    """
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CorpusError("syntax", f"{exc.msg} at line {exc.lineno}, column {exc.colno}") from exc
    else:
        raw = document
    if not isinstance(raw, dict):
        raise CorpusError("syntax", "document root must be an object")
    if raw.get("schema") != CORPUS_SCHEMA:
        raise CorpusError("bad-schema", f"expected schema {CORPUS_SCHEMA!r}, got {raw.get('schema')!r}")

    prompts = tuple(_parse_prompt(entry) for entry in raw.get("prompts", []))
    by_id = {p.id: p for p in prompts}

    responses = []
    for entry in raw.get("responses", []):
        resp = _parse_response(entry)
        if resp.prompt_id not in by_id:
            raise CorpusError("unresolved-prompt",
                              f"response {resp.response_id!r} names unknown prompt {resp.prompt_id!r}",
                              subject=resp.response_id)
        prompt = by_id[resp.prompt_id]
        for cid, res in resp.per_criterion:
            criterion = prompt.criterion(cid)
            if not (0 <= res.score <= criterion.max_score):
                raise CorpusError("score-range",
                                  f"response {resp.response_id!r} criterion {cid!r} score {res.score} "
                                  f"outside [0, {criterion.max_score}]",
                                  subject=cid)
            if res.cue_span is not None:
                s, e = res.cue_span
                if not (0 <= s <= e <= len(resp.text)):
                    raise CorpusError("cue-span-bounds",
                                      f"response {resp.response_id!r} criterion {cid!r} cue span "
                                      f"[{s}, {e}) exceeds text of length {len(resp.text)}",
                                      subject=cid)
            if res.score > 0 and (res.cue_span is None or res.cue_span[0] == res.cue_span[1]):
                log.warning("response %s criterion %s scored %d without a justification cue",
                            resp.response_id, cid, res.score)
        responses.append(resp)

    oracle = []
    for rid in sorted(raw.get("oracle_nodes", {})):
        per_crit = raw["oracle_nodes"][rid]
        for cid in sorted(per_crit):
            oracle.append(((rid, cid), per_crit[cid]))

    return Corpus(prompts=prompts, responses=tuple(responses), oracle_nodes=tuple(oracle))


def load_corpus_path(path: str | Path) -> Corpus:
    """Load either a single corpus file or a directory holding a manifest.

    Directory layout: manifest.json with {"schema": ..., "prompts": [files],
    "responses": [files]}; each prompt/response file holds one record.
    """
    path = Path(path)
    if path.is_file():
        return load_corpus(path.read_text(encoding="utf-8"))
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise CorpusError("syntax", f"{path} is a directory without a manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema") != CORPUS_SCHEMA:
        raise CorpusError("bad-schema",
                          f"expected schema {CORPUS_SCHEMA!r}, got {manifest.get('schema')!r}")
    doc = {
        "schema": CORPUS_SCHEMA,
        "prompts": [json.loads((path / f).read_text(encoding="utf-8"))
                    for f in manifest.get("prompts", [])],
        "responses": [json.loads((path / f).read_text(encoding="utf-8"))
                      for f in manifest.get("responses", [])],
        "oracle_nodes": manifest.get("oracle_nodes", {}),
    }
    return load_corpus(doc)


def _parse_criterion(entry: dict) -> Criterion:
    if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
        raise CorpusError("syntax", "criterion entries need a string id")
    max_score = entry.get("max_score")
    if not isinstance(max_score, int) or max_score < 0:
        raise CorpusError("syntax", f"criterion {entry['id']!r} max_score must be a non-negative integer",
                          subject=entry["id"])
    subs = tuple(_parse_criterion(s) for s in entry.get("sub_criteria", []))
    if subs and max_score < sum(s.max_score for s in subs):
        raise CorpusError("score-range",
                          f"criterion {entry['id']!r} max_score below the sum of its sub-criteria",
                          subject=entry["id"])
    return Criterion(id=entry["id"], description=str(entry.get("description", "")),
                     max_score=max_score, sub_criteria=subs)


def _parse_prompt(entry: dict) -> PromptSpec:
    if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
        raise CorpusError("syntax", "prompt entries need a string id")
    criteria = tuple(_parse_criterion(c) for c in entry.get("criteria", []))
    if not criteria:
        raise CorpusError("syntax", f"prompt {entry['id']!r} has no criteria", subject=entry["id"])
    ids: list[str] = []
    stack = list(criteria)
    while stack:
        c = stack.pop()
        ids.append(c.id)
        stack.extend(c.sub_criteria)
    if len(set(ids)) != len(ids):
        raise CorpusError("syntax", f"prompt {entry['id']!r} has duplicate criterion ids",
                          subject=entry["id"])
    length = entry.get("length_constraint", {})
    constraint = LengthConstraint(min_chars=int(length.get("min_chars", 0)),
                                  max_chars=int(length.get("max_chars", 10_000)))
    if constraint.min_chars > constraint.max_chars:
        raise CorpusError("syntax", f"prompt {entry['id']!r} has min_chars > max_chars",
                          subject=entry["id"])
    return PromptSpec(id=entry["id"], prompt_text=str(entry.get("prompt_text", "")),
                      question=str(entry.get("question", "")),
                      length_constraint=constraint, criteria=criteria)


def _parse_response(entry: dict) -> ScoredResponse:
    if not isinstance(entry, dict) or not isinstance(entry.get("response_id"), str):
        raise CorpusError("syntax", "response entries need a string response_id")
    per_criterion = []
    for cid, res in entry.get("per_criterion", {}).items():
        span_raw = res.get("cue_span")
        span = (span_raw[0], span_raw[1]) if span_raw is not None else None
        per_criterion.append((cid, CriterionResult(
            score=int(res.get("score", 0)),
            cue_span=span,
            error_signature=res.get("error_signature"),
        )))
    return ScoredResponse(
        response_id=entry["response_id"],
        prompt_id=str(entry.get("prompt_id", "")),
        text=str(entry.get("text", "")),
        per_criterion=tuple(per_criterion),
    )


def parse_prompt(document: dict) -> PromptSpec:
    """Materialize a single prompt record (the element shape of `prompts`)."""
    return _parse_prompt(document)


def parse_response(document: dict) -> ScoredResponse:
    """Materialize a single response record; range checks are the caller's
    job when no prompt context is at hand."""
    return _parse_response(document)


def to_document(corpus: Corpus) -> dict:
    prompts = []
    for p in corpus.prompts:
        prompts.append({
            "id": p.id,
            "prompt_text": p.prompt_text,
            "question": p.question,
            "length_constraint": {"min_chars": p.length_constraint.min_chars,
                                  "max_chars": p.length_constraint.max_chars},
            "criteria": [_criterion_doc(c) for c in p.criteria],
        })
    responses = []
    for r in corpus.responses:
        per_criterion = {}
        for cid, res in r.per_criterion:
            entry: dict = {"score": res.score}
            if res.cue_span is not None:
                entry["cue_span"] = [res.cue_span[0], res.cue_span[1]]
            if res.error_signature is not None:
                entry["error_signature"] = res.error_signature
            per_criterion[cid] = entry
        responses.append({"response_id": r.response_id, "prompt_id": r.prompt_id,
                          "text": r.text, "per_criterion": per_criterion})
    oracle: dict[str, dict[str, str]] = {}
    for (rid, cid), nid in corpus.oracle_nodes:
        oracle.setdefault(rid, {})[cid] = nid
    doc: dict = {"schema": CORPUS_SCHEMA, "prompts": prompts, "responses": responses}
    if oracle:
        doc["oracle_nodes"] = oracle
    return doc


def _criterion_doc(c: Criterion) -> dict:
    entry: dict = {"id": c.id, "description": c.description, "max_score": c.max_score}
    if c.sub_criteria:
        entry["sub_criteria"] = [_criterion_doc(s) for s in c.sub_criteria]
    return entry


def cue_text(response: ScoredResponse, criterion_id: str) -> str | None:
    """Justification-cue substring for a criterion; None when absent.

    An empty span [k, k) carries no evidence and is treated as absent.
    """
    result = response.result_for(criterion_id)
    if result is None:
        raise CorpusError("unknown-criterion",
                          f"response {response.response_id!r} has no entry for criterion "
                          f"{criterion_id!r}", subject=criterion_id)
    if result.cue_span is None:
        return None
    start, end = result.cue_span
    if start == end:
        return None
    return response.text[start:end]


DEFAULT_TERMINATORS = "。．.!?！？"
DEFAULT_CLOSING_QUOTES = "」』）〉》\"'”’)]"


@dataclass(frozen=True)
class SplitRules:
    terminators: str = DEFAULT_TERMINATORS
    closing_quotes: str = DEFAULT_CLOSING_QUOTES


def split_sentences(text: str, rules: SplitRules = SplitRules()) -> list[tuple[int, int]]:
    """Span-level sentence segmentation for graph authoring.

    A sentence ends after a run of terminator characters plus any closing
    quotes. Spans cover the non-whitespace extent of the text; whitespace
    between sentences belongs to no span, so joining the slices with the
    skipped whitespace reconstructs the input.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    i = 0
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        start = i
        while i < n and text[i] not in rules.terminators:
            i += 1
        while i < n and text[i] in rules.terminators:
            i += 1
        while i < n and text[i] in rules.closing_quotes:
            i += 1
        end = i
        while end > start and text[end - 1].isspace():
            end -= 1
        spans.append((start, end))
    return spans
