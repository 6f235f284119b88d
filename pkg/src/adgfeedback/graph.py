"""Answer-diagnostic graphs: the logical structure of a prompt text.

An ADG holds the prompt's sentences (and finer chunks) plus the model-answer
cue for each scoring criterion, joined by edges carrying rhetorical relation
labels. Each label is bound to a feedback-template key, so "which template do
we show" reduces to "how is the student's referenced node related to the
model-answer node".
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .validation import Finding, Severity, ValidationReport, build_report

ADG_SCHEMA = "adg/1"

# Default relation vocabulary. Names are RST-flavored; the template_key is the
# feedback-registry binding used when a student's reference sits across an
# edge with that label. Labels without a dedicated template fold into the
# nearest generic one.
DEFAULT_LABEL_BINDINGS: tuple[tuple[str, str], ...] = (
    ("elaboration", "wrong_part.elaboration"),
    ("cause", "wrong_part.cause"),
    ("result", "wrong_part.result"),
    ("contrast", "wrong_part.contrast"),
    ("concession", "wrong_part.contrast"),
    ("example", "wrong_part.example"),
    ("paraphrase", "wrong_part.paraphrase"),
    ("summary", "wrong_part.paraphrase"),
    ("background", "wrong_part.elaboration"),
    ("condition", "wrong_part.cause"),
)


class AdgError(Exception):
    """Base error for ADG documents; `code` is a stable machine-readable tag."""

    code = "adg-error"

    def __init__(self, message: str, *, subject: str = ""):
        super().__init__(message)
        self.subject = subject


class AdgSyntaxError(AdgError):
    code = "syntax"

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        loc = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class AdgDocumentError(AdgError):
    """Structurally malformed document (unknown field, duplicate id, dangling ref)."""

    def __init__(self, code: str, message: str, *, subject: str = ""):
        super().__init__(message, subject=subject)
        self.code = code


class UnknownNodeError(AdgError):
    code = "unknown-node"


class NodeKind(str, Enum):
    SENTENCE = "sentence"
    CHUNK = "chunk"
    ANSWER_CUE = "answer_cue"


@dataclass(frozen=True)
class RelationLabel:
    name: str
    template_key: str


@dataclass(frozen=True)
class AdgNode:
    id: str
    kind: NodeKind
    text: str
    paragraph: int  # 1-based for prompt-text nodes; 0 means "not in the prompt text"
    span: tuple[int, int] | None = None  # [start, end) in Unicode scalar offsets
    hint: str | None = None


@dataclass(frozen=True)
class AdgEdge:
    src: str
    dst: str
    label: str
    directed: bool = True  # src is the nucleus/claim side


@dataclass(frozen=True)
class RelationStep:
    """One traversed edge; `forward` records whether we walked src -> dst."""

    edge: AdgEdge
    forward: bool

    @property
    def label(self) -> str:
        return self.edge.label


RelationPath = tuple[RelationStep, ...]

# Reading a directed causal edge against its direction flips the relation the
# reader actually experienced.
_ORIENTATION_FLIP = {"cause": "result", "result": "cause"}


def effective_label(step: RelationStep) -> str:
    """Relation label as seen from the traversal direction."""
    if step.edge.directed and not step.forward:
        return _ORIENTATION_FLIP.get(step.edge.label, step.edge.label)
    return step.edge.label


@dataclass(frozen=True, eq=True)
class Adg:
    id: str
    prompt_id: str
    prompt_text: str
    nodes: tuple[AdgNode, ...]
    edges: tuple[AdgEdge, ...]
    criteria_bindings: tuple[tuple[str, str], ...]  # (criterion id, answer_cue node id)
    label_vocabulary: tuple[RelationLabel, ...]

    def node(self, node_id: str) -> AdgNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNodeError(f"no node {node_id!r} in graph {self.id!r}", subject=node_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def bound_node_id(self, criterion_id: str) -> str | None:
        for cid, nid in self.criteria_bindings:
            if cid == criterion_id:
                return nid
        return None

    def label(self, name: str) -> RelationLabel | None:
        for lab in self.label_vocabulary:
            if lab.name == name:
                return lab
        return None

    @property
    def bindings_map(self) -> dict[str, str]:
        return dict(self.criteria_bindings)


def default_vocabulary() -> tuple[RelationLabel, ...]:
    return tuple(RelationLabel(name, key) for name, key in DEFAULT_LABEL_BINDINGS)


_TOP_KEYS = {"schema", "id", "prompt_id", "prompt_text", "label_vocabulary",
             "nodes", "edges", "criteria_bindings"}
_NODE_KEYS = {"id", "kind", "text", "paragraph", "span", "hint"}
_EDGE_KEYS = {"src", "dst", "label", "directed"}
_LABEL_KEYS = {"name", "template_key"}


def load_adg(document: str | bytes | dict) -> Adg:
    """Materialize an ADG from its JSON document.

    Rejects malformed syntax, unknown fields, duplicate node ids, and edge or
    binding references to nodes that do not exist. Semantic invariants (spans,
    reachability, label bindings) are validate_graph's job.
    """
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise AdgSyntaxError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    else:
        raw = document
    if not isinstance(raw, dict):
        raise AdgSyntaxError("document root must be an object")

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise AdgDocumentError("unknown-field", f"unknown top-level field(s): {sorted(unknown)}")
    if raw.get("schema") != ADG_SCHEMA:
        raise AdgDocumentError("bad-schema", f"expected schema {ADG_SCHEMA!r}, got {raw.get('schema')!r}")
    for key in ("id", "prompt_id", "prompt_text"):
        if not isinstance(raw.get(key), str):
            raise AdgDocumentError("unknown-field", f"missing or non-string field {key!r}")

    prompt_text = raw["prompt_text"]

    vocab_raw = raw.get("label_vocabulary")
    if vocab_raw is None:
        vocabulary = default_vocabulary()
    else:
        vocabulary = tuple(_parse_label(entry) for entry in vocab_raw)

    nodes = []
    seen_ids: set[str] = set()
    for entry in raw.get("nodes", []):
        node = _parse_node(entry, prompt_text)
        if node.id in seen_ids:
            raise AdgDocumentError("duplicate-node-id", f"node id {node.id!r} appears twice",
                                   subject=node.id)
        seen_ids.add(node.id)
        nodes.append(node)

    edges = []
    for i, entry in enumerate(raw.get("edges", [])):
        edge = _parse_edge(entry, i)
        for endpoint in (edge.src, edge.dst):
            if endpoint not in seen_ids:
                raise AdgDocumentError("unknown-node",
                                       f"edge {i} references unknown node {endpoint!r}",
                                       subject=f"edge:{i}")
        edges.append(edge)

    bindings = []
    bindings_raw = raw.get("criteria_bindings", {})
    if not isinstance(bindings_raw, dict):
        raise AdgDocumentError("unknown-field", "criteria_bindings must be an object")
    for cid in sorted(bindings_raw):
        nid = bindings_raw[cid]
        if nid not in seen_ids:
            raise AdgDocumentError("unknown-node",
                                   f"criterion {cid!r} bound to unknown node {nid!r}",
                                   subject=cid)
        bindings.append((cid, nid))

    return Adg(
        id=raw["id"],
        prompt_id=raw["prompt_id"],
        prompt_text=prompt_text,
        nodes=tuple(nodes),
        edges=tuple(edges),
        criteria_bindings=tuple(bindings),
        label_vocabulary=vocabulary,
    )


def _parse_label(entry: dict) -> RelationLabel:
    if not isinstance(entry, dict):
        raise AdgDocumentError("unknown-field", "label entries must be objects")
    unknown = set(entry) - _LABEL_KEYS
    if unknown:
        raise AdgDocumentError("unknown-field", f"unknown label field(s): {sorted(unknown)}")
    return RelationLabel(name=str(entry.get("name", "")), template_key=str(entry.get("template_key", "")))


def _parse_node(entry: dict, prompt_text: str) -> AdgNode:
    if not isinstance(entry, dict):
        raise AdgDocumentError("unknown-field", "node entries must be objects")
    unknown = set(entry) - _NODE_KEYS
    if unknown:
        raise AdgDocumentError("unknown-field", f"unknown node field(s): {sorted(unknown)}",
                               subject=str(entry.get("id", "")))
    node_id = entry.get("id")
    if not isinstance(node_id, str) or not node_id:
        raise AdgDocumentError("unknown-field", "node id must be a non-empty string")
    try:
        kind = NodeKind(entry.get("kind"))
    except ValueError:
        raise AdgDocumentError("unknown-field",
                               f"node {node_id!r} has unknown kind {entry.get('kind')!r}",
                               subject=node_id) from None
    span_raw = entry.get("span")
    span: tuple[int, int] | None = None
    if span_raw is not None:
        if (not isinstance(span_raw, (list, tuple)) or len(span_raw) != 2
                or not all(isinstance(v, int) for v in span_raw)):
            raise AdgDocumentError("unknown-field", f"node {node_id!r} span must be [start, end]",
                                   subject=node_id)
        span = (span_raw[0], span_raw[1])

    text = entry.get("text")
    if text is None:
        # Prompt-text nodes may be authored by span alone; resolve the text here.
        if span is not None and 0 <= span[0] <= span[1] <= len(prompt_text):
            text = prompt_text[span[0]:span[1]]
        else:
            raise AdgDocumentError("unknown-field",
                                   f"node {node_id!r} needs text or a resolvable span",
                                   subject=node_id)
    if not isinstance(text, str):
        raise AdgDocumentError("unknown-field", f"node {node_id!r} text must be a string",
                               subject=node_id)

    paragraph = entry.get("paragraph", 0 if kind is NodeKind.ANSWER_CUE else None)
    if not isinstance(paragraph, int):
        raise AdgDocumentError("unknown-field", f"node {node_id!r} paragraph must be an integer",
                               subject=node_id)
    hint = entry.get("hint")
    if hint is not None and not isinstance(hint, str):
        raise AdgDocumentError("unknown-field", f"node {node_id!r} hint must be a string",
                               subject=node_id)
    return AdgNode(id=node_id, kind=kind, text=text, paragraph=paragraph, span=span, hint=hint)


def _parse_edge(entry: dict, index: int) -> AdgEdge:
    if not isinstance(entry, dict):
        raise AdgDocumentError("unknown-field", "edge entries must be objects")
    unknown = set(entry) - _EDGE_KEYS
    if unknown:
        raise AdgDocumentError("unknown-field", f"unknown edge field(s): {sorted(unknown)}",
                               subject=f"edge:{index}")
    for key in ("src", "dst", "label"):
        if not isinstance(entry.get(key), str):
            raise AdgDocumentError("unknown-field", f"edge {index} missing string field {key!r}",
                                   subject=f"edge:{index}")
    directed = entry.get("directed", True)
    if not isinstance(directed, bool):
        raise AdgDocumentError("unknown-field", f"edge {index} directed must be a boolean",
                               subject=f"edge:{index}")
    return AdgEdge(src=entry["src"], dst=entry["dst"], label=entry["label"], directed=directed)


def to_document(adg: Adg) -> dict:
    """Canonical document form; load_adg(to_document(g)) == g."""
    nodes = []
    for n in adg.nodes:
        entry: dict = {"id": n.id, "kind": n.kind.value, "text": n.text, "paragraph": n.paragraph}
        if n.span is not None:
            entry["span"] = [n.span[0], n.span[1]]
        if n.hint is not None:
            entry["hint"] = n.hint
        nodes.append(entry)
    return {
        "schema": ADG_SCHEMA,
        "id": adg.id,
        "prompt_id": adg.prompt_id,
        "prompt_text": adg.prompt_text,
        "label_vocabulary": [{"name": l.name, "template_key": l.template_key}
                             for l in adg.label_vocabulary],
        "nodes": nodes,
        "edges": [{"src": e.src, "dst": e.dst, "label": e.label, "directed": e.directed}
                  for e in adg.edges],
        "criteria_bindings": {cid: nid for cid, nid in adg.criteria_bindings},
    }


def to_json(adg: Adg) -> str:
    return json.dumps(to_document(adg), ensure_ascii=False, indent=2)


def validate_graph(adg: Adg, template_keys: Iterable[str] | None = None) -> ValidationReport:
    """Check every semantic invariant; violations are findings, not exceptions.

    `template_keys`, when given, is the set of keys the template registry
    provides; vocabulary labels bound to a missing key yield a warning.
    """
    findings: list[Finding] = []
    err = lambda code, msg, subject: findings.append(Finding(Severity.ERROR, code, msg, subject))
    warn = lambda code, msg, subject: findings.append(Finding(Severity.WARNING, code, msg, subject))

    # Vocabulary well-formedness.
    seen_labels: set[str] = set()
    for lab in adg.label_vocabulary:
        if lab.name in seen_labels:
            err("duplicate-label", f"label {lab.name!r} defined twice in vocabulary", lab.name)
        seen_labels.add(lab.name)
        if not lab.template_key:
            err("empty-template-key", f"label {lab.name!r} has no template key", lab.name)
        elif template_keys is not None and lab.template_key not in set(template_keys):
            warn("unbound-template-key",
                 f"label {lab.name!r} binds template key {lab.template_key!r} "
                 "which the registry does not provide", lab.name)

    # Node id uniqueness.
    counts: dict[str, int] = {}
    for n in adg.nodes:
        counts[n.id] = counts.get(n.id, 0) + 1
    node_ids = set(counts)
    for nid, c in counts.items():
        if c > 1:
            err("duplicate-node-id", f"node id {nid!r} appears {c} times", nid)

    by_id = {}
    for n in adg.nodes:
        by_id.setdefault(n.id, n)

    # Edge integrity. Dangling edges are excluded from the adjacency used below.
    vocab_names = {l.name for l in adg.label_vocabulary}
    seen_triples: set[tuple[str, str, str]] = set()
    adjacency: dict[str, set[str]] = {nid: set() for nid in node_ids}
    for i, e in enumerate(adg.edges):
        subject = f"edge:{i}"
        if e.src not in node_ids or e.dst not in node_ids:
            err("dangling-edge", f"edge {i} ({e.src!r} -> {e.dst!r}) references a missing node",
                subject)
            continue
        if e.src == e.dst:
            err("self-loop", f"edge {i} loops on node {e.src!r}", subject)
            continue
        if e.label not in vocab_names:
            err("unbound-label", f"edge {i} label {e.label!r} is not in the vocabulary", subject)
        triple = (e.src, e.dst, e.label)
        if triple in seen_triples:
            err("duplicate-edge", f"edge {i} repeats {triple}", subject)
        seen_triples.add(triple)
        adjacency[e.src].add(e.dst)
        adjacency[e.dst].add(e.src)

    # Criterion bindings must name existing answer_cue nodes.
    for cid, nid in adg.criteria_bindings:
        if nid not in node_ids:
            err("binding-unknown-node", f"criterion {cid!r} bound to missing node {nid!r}", cid)
        elif by_id[nid].kind is not NodeKind.ANSWER_CUE:
            err("binding-not-answer-cue",
                f"criterion {cid!r} bound to {nid!r} of kind {by_id[nid].kind.value}", cid)

    # Prompt-text nodes: spans must exist, lie in bounds, and match the text.
    text = adg.prompt_text
    for n in adg.nodes:
        if n.kind in (NodeKind.SENTENCE, NodeKind.CHUNK):
            if n.span is None:
                err("span-text-mismatch", f"node {n.id!r} has no span into the prompt text", n.id)
            elif not (0 <= n.span[0] <= n.span[1] <= len(text)):
                err("span-text-mismatch", f"node {n.id!r} span {n.span} is out of bounds", n.id)
            elif text[n.span[0]:n.span[1]] != n.text:
                err("span-text-mismatch",
                    f"node {n.id!r} text does not equal the prompt substring at {n.span}", n.id)
            if n.paragraph < 1:
                err("bad-paragraph", f"node {n.id!r} needs a 1-based paragraph index", n.id)
        elif n.paragraph < 0:
            err("bad-paragraph", f"node {n.id!r} paragraph must be >= 0", n.id)

    # Chunks sharing a parent sentence must not overlap.
    sentences = [n for n in adg.nodes if n.kind is NodeKind.SENTENCE and n.span]
    chunks_by_parent: dict[str, list[AdgNode]] = {}
    for n in adg.nodes:
        if n.kind is NodeKind.CHUNK and n.span:
            for s in sentences:
                if s.span and s.span[0] <= n.span[0] and n.span[1] <= s.span[1]:
                    chunks_by_parent.setdefault(s.id, []).append(n)
                    break
    for parent_id, chunks in chunks_by_parent.items():
        chunks.sort(key=lambda c: (c.span, c.id))  # type: ignore[arg-type]
        for prev, cur in zip(chunks, chunks[1:]):
            if cur.span[0] < prev.span[1]:  # type: ignore[index]
                err("chunk-overlap",
                    f"chunks {prev.id!r} and {cur.id!r} overlap inside sentence {parent_id!r}",
                    cur.id)

    # Every answer cue must be reachable (undirected) from some prompt-text node.
    prompt_nodes = [n.id for n in adg.nodes if n.kind in (NodeKind.SENTENCE, NodeKind.CHUNK)]
    reachable = _reach(adjacency, prompt_nodes)
    for n in adg.nodes:
        if n.kind is NodeKind.ANSWER_CUE and n.id not in reachable:
            err("unreachable-answer-node",
                f"answer cue {n.id!r} is not connected to any prompt-text node", n.id)

    return build_report(findings)


def _reach(adjacency: Mapping[str, set[str]], seeds: Iterable[str]) -> set[str]:
    seen = set(seeds)
    queue = deque(seen)
    while queue:
        cur = queue.popleft()
        for nxt in adjacency.get(cur, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def relation_between(adg: Adg, from_node: str, to_node: str) -> RelationPath | None:
    """Edge path linking two nodes, searched ignoring direction.

    A direct edge wins outright. Otherwise the shortest undirected path is
    returned, ties broken by the lexicographically smallest node-id sequence.
    None means the nodes are disconnected; a path of length zero means
    from_node == to_node.
    """
    if not adg.has_node(from_node):
        raise UnknownNodeError(f"unknown node {from_node!r}", subject=from_node)
    if not adg.has_node(to_node):
        raise UnknownNodeError(f"unknown node {to_node!r}", subject=to_node)
    if from_node == to_node:
        return ()

    direct = _best_step(adg, from_node, to_node)
    if direct is not None:
        return (direct,)

    node_ids = {n.id for n in adg.nodes}
    adjacency: dict[str, set[str]] = {nid: set() for nid in node_ids}
    for e in adg.edges:
        if e.src in node_ids and e.dst in node_ids and e.src != e.dst:
            adjacency[e.src].add(e.dst)
            adjacency[e.dst].add(e.src)

    # Distance-to-target lets us walk greedily from the source, always taking
    # the smallest node id that still lies on a shortest path; prefix-greedy
    # selection yields the lexicographically smallest id sequence.
    dist = {to_node: 0}
    queue = deque([to_node])
    while queue:
        cur = queue.popleft()
        for nxt in adjacency[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    if from_node not in dist:
        return None

    steps: list[RelationStep] = []
    cur = from_node
    while cur != to_node:
        candidates = sorted(n for n in adjacency[cur] if dist.get(n) == dist[cur] - 1)
        nxt = candidates[0]
        step = _best_step(adg, cur, nxt)
        assert step is not None
        steps.append(step)
        cur = nxt
    return tuple(steps)


def _best_step(adg: Adg, a: str, b: str) -> RelationStep | None:
    """Deterministic pick among parallel edges joining a and b (either way)."""
    best: RelationStep | None = None
    for e in adg.edges:
        if e.src == a and e.dst == b:
            cand = RelationStep(e, forward=True)
        elif e.src == b and e.dst == a:
            cand = RelationStep(e, forward=False)
        else:
            continue
        key = (cand.edge.label, not cand.forward)
        if best is None or key < (best.edge.label, not best.forward):
            best = cand
    return best


def node_paragraph(adg: Adg, node_id: str) -> int:
    """Paragraph index shown in feedback; model-answer nodes report 0."""
    node = adg.node(node_id)
    if node.kind is NodeKind.ANSWER_CUE:
        return 0
    return node.paragraph
