"""Template registry, selection decision table, slot rendering, and reports.

Selection walks an ordered decision table; the first matching row names the
template. Rendering substitutes named slots into the template body. A report
collects one rendered item per analytic criterion plus an overall message.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .alignment import AlignConfig, AlignmentResult, SimilarityProvider, align_cue
from .corpus import CriterionResult, PromptSpec, ScoredResponse, cue_text
from .graph import (
    Adg,
    DEFAULT_LABEL_BINDINGS,
    RelationPath,
    effective_label,
    node_paragraph,
    relation_between,
)
from .validation import Finding, Severity, ValidationReport, build_report

TEMPLATES_SCHEMA = "adg-templates/1"

GENERIC_KEYS = frozenset({
    "full_credit",
    "insufficient_elements",
    "no_reference",
    "off_structure",
    "wrong_part.elaboration",
    "wrong_part.cause",
    "wrong_part.result",
    "wrong_part.contrast",
    "wrong_part.example",
    "wrong_part.paraphrase",
})


class SlotName(str, Enum):
    PARAGRAPH_NUMBER = "paragraph_number"
    CRITERION_EXCERPT = "criterion_excerpt"
    JUSTIFICATION_CUE = "justification_cue"
    ANSWER_HINT = "answer_hint"
    RELATION_NAME = "relation_name"
    SCORE_FRACTION = "score_fraction"
    NODE_EXCERPT = "node_excerpt"


SLOT_NAMES = frozenset(s.value for s in SlotName)

_PLACEHOLDER = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class FeedbackError(Exception):
    def __init__(self, code: str, message: str, *, subject: str = ""):
        super().__init__(message)
        self.code = code
        self.subject = subject


@dataclass(frozen=True)
class FeedbackTemplate:
    key: str
    body: str
    scope: str = "generic"
    required_slots: frozenset[str] = frozenset()
    language: str = "en"
    criterion_id: str | None = None
    error_signature: str | None = None

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body))


@dataclass(frozen=True)
class TemplateRegistry:
    templates: tuple[FeedbackTemplate, ...]

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(sorted({t.language for t in self.templates}))

    def has_key(self, key: str) -> bool:
        return any(t.key == key for t in self.templates)

    def get(self, key: str, language: str = "en") -> FeedbackTemplate:
        for t in self.templates:
            if t.key == key and t.language == language:
                return t
        raise FeedbackError("unbound-template",
                            f"no template {key!r} for language {language!r}", subject=key)

    def analytic_key(self, criterion_id: str, error_signature: str) -> str | None:
        for t in self.templates:
            if (t.scope == "analytic" and t.criterion_id == criterion_id
                    and t.error_signature == error_signature):
                return t.key
        return None


_TEMPLATE_FIELDS = {"key", "scope", "criterion_id", "error_signature", "body",
                    "required_slots", "language"}


def load_templates(document: str | bytes | dict) -> TemplateRegistry:
    """Parse a template registry document, schema "adg-templates/1".

    Placeholder hygiene is enforced here, not at render time: every body
    placeholder must be a declared required slot, and every required slot a
    known slot name.
    """
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise FeedbackError("syntax", f"{exc.msg} at line {exc.lineno}, column {exc.colno}") from exc
    else:
        raw = document
    if not isinstance(raw, dict):
        raise FeedbackError("syntax", "document root must be an object")
    if raw.get("schema") != TEMPLATES_SCHEMA:
        raise FeedbackError("bad-schema",
                            f"expected schema {TEMPLATES_SCHEMA!r}, got {raw.get('schema')!r}")

    templates: list[FeedbackTemplate] = []
    seen: set[tuple[str, str]] = set()
    analytic_keys: dict[tuple[str, str], str] = {}
    for entry in raw.get("templates", []):
        if not isinstance(entry, dict) or not isinstance(entry.get("key"), str):
            raise FeedbackError("syntax", "template entries need a string key")
        key = entry["key"]
        unknown = set(entry) - _TEMPLATE_FIELDS
        if unknown:
            raise FeedbackError("unknown-field",
                                f"template {key!r} has unknown fields {sorted(unknown)}", subject=key)
        scope = entry.get("scope", "generic")
        if scope not in ("generic", "analytic"):
            raise FeedbackError("bad-scope", f"template {key!r} scope must be generic or analytic",
                                subject=key)
        criterion_id = entry.get("criterion_id")
        if scope == "analytic" and not criterion_id:
            raise FeedbackError("missing-criterion-id",
                                f"analytic template {key!r} needs a criterion_id", subject=key)
        if scope == "generic" and criterion_id is not None:
            raise FeedbackError("unexpected-criterion-id",
                                f"generic template {key!r} must not carry a criterion_id", subject=key)
        body = entry.get("body", "")
        if not isinstance(body, str) or not body:
            raise FeedbackError("empty-body", f"template {key!r} has an empty body", subject=key)
        placeholders = frozenset(_PLACEHOLDER.findall(body))
        if "required_slots" in entry:
            required = frozenset(entry["required_slots"])
        else:
            required = placeholders
        bad_slots = required - SLOT_NAMES
        if bad_slots:
            raise FeedbackError("unknown-slot",
                                f"template {key!r} requires unknown slots {sorted(bad_slots)}",
                                subject=key)
        stray = placeholders - required
        if stray:
            raise FeedbackError("unknown-placeholder",
                                f"template {key!r} body uses undeclared placeholders {sorted(stray)}",
                                subject=key)
        language = str(entry.get("language", "en"))
        if (key, language) in seen:
            raise FeedbackError("duplicate-template",
                                f"template {key!r} defined twice for language {language!r}",
                                subject=key)
        seen.add((key, language))
        if scope == "analytic":
            signature = entry.get("error_signature")
            if not isinstance(signature, str) or not signature:
                raise FeedbackError("missing-error-signature",
                                    f"analytic template {key!r} needs an error_signature", subject=key)
            pair = (criterion_id, signature)
            if analytic_keys.setdefault(pair, key) != key:
                raise FeedbackError("duplicate-analytic",
                                    f"criterion {criterion_id!r} signature {signature!r} is claimed "
                                    f"by both {analytic_keys[pair]!r} and {key!r}", subject=key)
        templates.append(FeedbackTemplate(
            key=key, body=body, scope=scope, required_slots=required, language=language,
            criterion_id=criterion_id, error_signature=entry.get("error_signature"),
        ))
    return TemplateRegistry(templates=tuple(templates))


def templates_to_document(registry: TemplateRegistry) -> dict:
    entries = []
    for t in registry.templates:
        entry: dict = {"key": t.key, "scope": t.scope, "body": t.body,
                       "required_slots": sorted(t.required_slots), "language": t.language}
        if t.criterion_id is not None:
            entry["criterion_id"] = t.criterion_id
        if t.error_signature is not None:
            entry["error_signature"] = t.error_signature
        entries.append(entry)
    return {"schema": TEMPLATES_SCHEMA, "templates": entries}


def validate_registry(registry: TemplateRegistry, adg: Adg | None = None,
                      prompts: tuple[PromptSpec, ...] = ()) -> ValidationReport:
    findings: list[Finding] = []
    for language in registry.languages:
        present = {t.key for t in registry.templates if t.language == language}
        for key in sorted(GENERIC_KEYS - present):
            findings.append(Finding(Severity.ERROR, "missing-generic-template",
                                    f"language {language!r} lacks generic template {key!r}",
                                    subject=key))
    if adg is not None:
        for label in adg.label_vocabulary:
            if not registry.has_key(label.template_key):
                findings.append(Finding(Severity.ERROR, "unbound-template-key",
                                        f"label {label.name!r} binds template key "
                                        f"{label.template_key!r} absent from the registry",
                                        subject=label.name))
    if prompts:
        criterion_ids = {c.id for p in prompts for c in p.criteria}
        for t in registry.templates:
            if t.scope == "analytic" and t.criterion_id not in criterion_ids:
                findings.append(Finding(Severity.ERROR, "unknown-criterion",
                                        f"analytic template {t.key!r} references unknown "
                                        f"criterion {t.criterion_id!r}", subject=t.key))
    for t in registry.templates:
        bad = t.required_slots - SLOT_NAMES
        if bad:
            findings.append(Finding(Severity.ERROR, "unknown-slot",
                                    f"template {t.key!r} requires unknown slots {sorted(bad)}",
                                    subject=t.key))
        stray = t.placeholders - t.required_slots
        if stray:
            findings.append(Finding(Severity.ERROR, "unknown-placeholder",
                                    f"template {t.key!r} body uses undeclared placeholders "
                                    f"{sorted(stray)}", subject=t.key))
    return build_report(findings)


@dataclass(frozen=True)
class SelectionContext:
    """Everything the decision table consults for one criterion.

    label_bindings maps relation-label names to template keys; it comes from
    the graph's vocabulary so data-defined labels select data-defined
    templates.
    """

    criterion_id: str
    score: int
    max_score: int
    has_cue: bool
    alignment: AlignmentResult | None = None
    relation: RelationPath | None = None
    error_signature: str | None = None
    label_bindings: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_LABEL_BINDINGS))

    def __post_init__(self) -> None:
        if not (0 <= self.score <= self.max_score):
            raise ValueError(f"score {self.score} outside [0, {self.max_score}]")


def select_template(registry: TemplateRegistry, ctx: SelectionContext) -> str:
    """Ordered decision table; the first matching row names the template.

    1. A criterion-specific template registered for this error signature.
    2. Full score: praise regardless of alignment.
    3. No cue, or the cue matched nothing well enough: the response never
       references the graph.
    4. The cue sits on the model-answer node itself, or on a node that
       directly elaborates it while partial credit shows some required
       content landed: right place, not enough of it.
    5. The cue sits elsewhere on the structure: the feedback names the
       relation the student actually referenced, with cause/result flipped
       when the path was walked against edge direction.
    6. The cue matched a node with no route to the model answer at all.
    """
    if ctx.error_signature is not None:
        key = registry.analytic_key(ctx.criterion_id, ctx.error_signature)
        if key is not None:
            return key
    if ctx.score >= ctx.max_score:
        return _require(registry, "full_credit")
    if not ctx.has_cue or ctx.alignment is None or not ctx.alignment.aligned:
        return _require(registry, "no_reference")
    if ctx.relation is not None:
        if len(ctx.relation) == 0:
            return _require(registry, "insufficient_elements")
        first = effective_label(ctx.relation[0])
        if first == "elaboration" and len(ctx.relation) == 1 and 0 < ctx.score < ctx.max_score:
            return _require(registry, "insufficient_elements")
        key = ctx.label_bindings.get(first)
        if key is None:
            raise FeedbackError("unbound-template",
                                f"relation label {first!r} has no template binding", subject=first)
        return _require(registry, key)
    return _require(registry, "off_structure")


def _require(registry: TemplateRegistry, key: str) -> str:
    if not registry.has_key(key):
        raise FeedbackError("unbound-template", f"registry has no template {key!r}", subject=key)
    return key


def render(template: FeedbackTemplate, slots: dict[str, str]) -> str:
    """Substitute slot values into the body, verbatim, in a single pass."""
    for name in sorted(template.required_slots):
        value = slots.get(name)
        if value is None or value == "":
            raise FeedbackError("missing-slot",
                                f"template {template.key!r} requires slot {name!r}", subject=name)

    def substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        return slots[name] if name in slots else match.group(0)

    return _PLACEHOLDER.sub(substitute, template.body)


@dataclass(frozen=True)
class FeedbackItem:
    criterion_id: str
    template_key: str
    rendered_text: str
    slots_used: tuple[tuple[str, str], ...]
    score: int
    max_score: int
    alignment: AlignmentResult | None = None


@dataclass(frozen=True)
class FeedbackReport:
    response_id: str
    items: tuple[FeedbackItem, ...]
    total_score: int
    max_total: int
    overall_message: str


_OVERALL = {
    "en": {
        "full": "Every criterion is fully met. Excellent work.",
        "partial": "You earned {total} of {max} points. The notes below show, criterion by "
                   "criterion, what to revise.",
    },
    "ja": {
        "full": "すべての採点基準を満たしています。大変よくできました。",
        "partial": "得点は{max}点中{total}点です。基準ごとの下記のコメントを確認して、解答を見直しましょう。",
    },
}


def overall_message(total: int, max_total: int, language: str = "en") -> str:
    texts = _OVERALL.get(language, _OVERALL["en"])
    if max_total > 0 and total >= max_total:
        return texts["full"]
    return texts["partial"].format(total=total, max=max_total)


@dataclass(frozen=True)
class FeedbackConfig:
    language: str = "en"
    align: AlignConfig = AlignConfig()


def generate_feedback(adg: Adg, registry: TemplateRegistry, prompt: PromptSpec,
                      response: ScoredResponse, provider: SimilarityProvider | None = None,
                      config: FeedbackConfig = FeedbackConfig()) -> FeedbackReport:
    """One report per response: align, select, and render for every criterion.

    Output is deterministic byte for byte given the same inputs and provider
    cache state; nothing time- or order-dependent enters the report.
    """
    if response.prompt_id != prompt.id:
        raise FeedbackError("prompt-mismatch",
                            f"response {response.response_id!r} belongs to prompt "
                            f"{response.prompt_id!r}, not {prompt.id!r}", subject=response.response_id)
    if adg.prompt_id != prompt.id:
        raise FeedbackError("prompt-mismatch",
                            f"graph {adg.id!r} belongs to prompt {adg.prompt_id!r}, not {prompt.id!r}",
                            subject=adg.id)
    bindings = {label.name: label.template_key for label in adg.label_vocabulary}
    items: list[FeedbackItem] = []
    total = 0
    max_total = 0
    for criterion in prompt.criteria:
        result = response.result_for(criterion.id)
        if result is None:
            result = CriterionResult(score=0)
            cue = None
        else:
            cue = cue_text(response, criterion.id)
        alignment = None
        if cue is not None:
            alignment = align_cue(cue, adg, provider, config.align,
                                  response_id=response.response_id,
                                  criterion_id=criterion.id)
        bound = adg.bound_node_id(criterion.id)
        relation = None
        if alignment is not None and alignment.aligned and bound is not None:
            relation = relation_between(adg, alignment.node_id, bound)

        slots: dict[str, str] = {
            SlotName.CRITERION_EXCERPT.value: criterion.description,
            SlotName.SCORE_FRACTION.value: f"{result.score}/{criterion.max_score}",
        }
        if cue is not None:
            slots[SlotName.JUSTIFICATION_CUE.value] = cue
        if bound is not None:
            bound_node = adg.node(bound)
            hint = bound_node.hint or bound_node.text
            if hint:
                slots[SlotName.ANSWER_HINT.value] = hint
        if alignment is not None and alignment.aligned:
            matched = adg.node(alignment.node_id)
            slots[SlotName.PARAGRAPH_NUMBER.value] = str(node_paragraph(adg, alignment.node_id))
            if matched.text:
                slots[SlotName.NODE_EXCERPT.value] = matched.text
        if relation:
            slots[SlotName.RELATION_NAME.value] = effective_label(relation[0])

        ctx = SelectionContext(
            criterion_id=criterion.id, score=result.score, max_score=criterion.max_score,
            has_cue=cue is not None, alignment=alignment, relation=relation,
            error_signature=result.error_signature, label_bindings=bindings,
        )
        key = select_template(registry, ctx)
        template = registry.get(key, config.language)
        rendered = render(template, slots)
        slots_used = tuple((name, slots[name]) for name in sorted(template.required_slots))
        items.append(FeedbackItem(
            criterion_id=criterion.id, template_key=key, rendered_text=rendered,
            slots_used=slots_used, score=result.score, max_score=criterion.max_score,
            alignment=alignment,
        ))
        total += result.score
        max_total += criterion.max_score
    return FeedbackReport(
        response_id=response.response_id, items=tuple(items), total_score=total,
        max_total=max_total, overall_message=overall_message(total, max_total, config.language),
    )


def generate_feedback_batch(adg: Adg, registry: TemplateRegistry, prompt: PromptSpec,
                            responses: list[ScoredResponse],
                            provider: SimilarityProvider | None = None,
                            config: FeedbackConfig = FeedbackConfig()) -> tuple[FeedbackReport, ...]:
    return tuple(generate_feedback(adg, registry, prompt, r, provider, config)
                 for r in responses)


def report_to_document(report: FeedbackReport) -> dict:
    items = []
    for item in report.items:
        entry: dict = {
            "criterion_id": item.criterion_id,
            "template_key": item.template_key,
            "rendered_text": item.rendered_text,
            "score": item.score,
            "max_score": item.max_score,
            "slots_used": dict(item.slots_used),
        }
        if item.alignment is not None:
            entry["alignment"] = {
                "node_id": item.alignment.node_id,
                "similarity": item.alignment.similarity,
                "margin": item.alignment.margin,
                "aligned": item.alignment.aligned,
                "runner_up_node_id": item.alignment.runner_up_node_id,
                "provider_kind": item.alignment.provider_kind,
            }
        items.append(entry)
    return {
        "response_id": report.response_id,
        "total_score": report.total_score,
        "max_total": report.max_total,
        "overall_message": report.overall_message,
        "items": items,
    }


def render_report_text(report: FeedbackReport) -> str:
    """Plain-text layout: one block per criterion, then the overall message."""
    blocks = []
    for item in report.items:
        blocks.append(f"[{item.criterion_id}] {item.score}/{item.max_score}\n{item.rendered_text}")
    blocks.append(f"Total: {report.total_score}/{report.max_total}\n{report.overall_message}")
    return "\n\n".join(blocks) + "\n"
