"""Acceptance gate: one check per shipping criterion.

Each test prints a single PASS/FAIL line (visible even under captured
output) and then asserts, so a red criterion is still reported in place.
"""

from __future__ import annotations

import dataclasses
import json
import random
import time

import pytest

from adgfeedback import AdgEdge, align_cue, load_adg, validate_graph
from adgfeedback.cli import main
from adgfeedback.feedback import load_templates, select_template, validate_registry

from _oracles import chi2_sf, t_two_sided_p, trigram_scores
from conftest import FIXTURES, base_graph_document, load_fixture_json
from test_alignment import random_text
from test_feedback import (
    EXPECTED_BY_LABEL,
    LABELS,
    aligned_result,
    ctx,
    step,
    unaligned_result,
)
from test_stats import CHI_GRID, T_GRID

_MODULE_START = time.perf_counter()


def report_line(capsys, criterion: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def fixture(name: str) -> str:
    return str(FIXTURES / name)


def cli_lines(capsys, *argv: str) -> tuple[int, list[str]]:
    code = main(list(argv))
    return code, capsys.readouterr().out.strip().splitlines()


def test_criterion_1_summary_table_markers(capsys):
    started = time.perf_counter()
    code, lines = cli_lines(capsys, "stats", "--table1", fixture("table1.tsv"))
    elapsed = time.perf_counter() - started
    markers = [line.split("\t")[1] for line in lines]
    expected = ["**", "**", "**", "**", "*", "ns", "ns", "**"]
    ok = code == 0 and markers == expected and elapsed < 1.0
    report_line(capsys, "1", ok,
                f"markers {markers} vs expected {expected} in {elapsed:.3f}s")
    assert ok, f"markers {markers} != {expected}"


def test_criterion_2_choice_and_likert_tables(capsys):
    code2, lines2 = cli_lines(capsys, "stats", "--table2", fixture("table2.tsv"))
    choice_ok = code2 == 0 and lines2 == [
        "choice1\t**\tmajority=1",
        "choice2\t**\tmajority=2",
    ]
    code3, lines3 = cli_lines(capsys, "stats", "--table3", fixture("table3.tsv"))
    likert_ok = code3 == 0 and lines3 == [
        "individualization\tns\t**\t**",
        "relevance\t**\t**\tns",
        "demand\tns\t**\t**",
        "progression\t**\t**\t**",
    ]
    ok = choice_ok and likert_ok
    report_line(capsys, "2", ok,
                f"choice rows {'match' if choice_ok else 'differ'}, "
                f"12 pairwise markers {'match' if likert_ok else 'differ'}")
    assert ok, (lines2, lines3)


def test_criterion_3_score_comparison_table(capsys):
    code, lines = cli_lines(capsys, "stats", "--table5", fixture("table5.tsv"))
    ok = code == 0 and lines == ["initial\tns", "revision\tns"]
    report_line(capsys, "3", ok, f"rows {lines}")
    assert ok, lines


def test_criterion_4_distribution_function_accuracy(capsys):
    from adgfeedback import SummaryStats, chi_square_gof, welch_t

    t_error = 0.0
    for row in T_GRID:
        result = welch_t(SummaryStats(*row[:3]), SummaryStats(*row[3:]))
        t_error = max(t_error, abs(result.p_value
                                   - t_two_sided_p(result.statistic, result.df)))
    chi_error = 0.0
    for counts in CHI_GRID:
        result = chi_square_gof(counts)
        chi_error = max(chi_error, abs(result.p_value
                                       - chi2_sf(result.statistic, result.df)))
    ok = (len(T_GRID) == 20 and len(CHI_GRID) == 20
          and t_error <= 1e-6 and chi_error <= 1e-6)
    report_line(capsys, "4", ok,
                f"max |dp| over 20 points each: t {t_error:.2e}, "
                f"chi-square {chi_error:.2e}, budget 1e-6")
    assert ok, (t_error, chi_error)


def test_criterion_5_alignment_properties(capsys):
    code_exact, lines_exact = cli_lines(
        capsys, "align", "--corpus", fixture("exact_corpus.json"),
        "--adg", fixture("walkthrough_adg.json"),
        "--adg", fixture("walkthrough_ja_adg.json"), "--oracle")
    exact_ok = (code_exact == 0
                and lines_exact[-1].startswith("top1=1.0000 evaluated=11"))

    mismatches = 0
    rng = random.Random(20240817)
    for _ in range(200):
        n_nodes = rng.randint(1, 8)
        texts = [random_text(rng) for _ in range(n_nodes)]
        adg = load_adg({
            "schema": "adg/1", "id": "g-rand", "prompt_id": "p-rand",
            "prompt_text": "",
            "nodes": [{"id": f"n{i}", "kind": "sentence", "text": t, "paragraph": 1}
                      for i, t in enumerate(texts)],
            "edges": [], "criteria_bindings": {},
        })
        cue = random_text(rng)
        outcome = align_cue(cue, adg)
        expected_id, _score = min(
            ((f"n{i}", s) for i, s in enumerate(trigram_scores(cue, texts))),
            key=lambda pair: (-pair[1], pair[0]))
        if outcome.node_id != expected_id:
            mismatches += 1
    scan_ok = mismatches == 0

    code_planted, lines_planted = cli_lines(
        capsys, "align", "--corpus", fixture("planted_corpus.json"),
        "--adg", fixture("walkthrough_adg.json"), "--oracle")
    planted_ok = (code_planted == 0
                  and lines_planted[-1].startswith("top1=0.9000 evaluated=20"))

    ok = exact_ok and scan_ok and planted_ok
    report_line(capsys, "5", ok,
                f"exact corpus top1 {'1.0' if exact_ok else 'off'}, "
                f"{mismatches}/200 brute-force mismatches, "
                f"planted corpus top1 {'0.9' if planted_ok else 'off'}")
    assert ok, (lines_exact[-1:], mismatches, lines_planted[-1:])


def test_criterion_6_decision_table_totality_and_walkthrough(capsys, registry, tmp_path):
    score_by_class = {"zero": 0, "partial": 1, "max": 2}
    relations = {label: (step(label),) for label in LABELS}
    relations["self"] = ()
    relations["none"] = None

    cells = 0
    violations = []
    for score_class, score in score_by_class.items():
        for aligned in (True, False):
            for relation_name, relation in relations.items():
                cells += 1
                if aligned:
                    context = ctx(score, alignment=aligned_result(), relation=relation)
                else:
                    context = ctx(score, alignment=unaligned_result(), relation=None)
                chosen = select_template(registry, context)
                if score_class == "max":
                    expected = "full_credit"
                elif not aligned:
                    expected = "no_reference"
                elif relation_name == "self":
                    expected = "insufficient_elements"
                elif relation_name == "none":
                    expected = "off_structure"
                elif relation_name == "elaboration" and score_class == "partial":
                    expected = "insufficient_elements"
                else:
                    expected = EXPECTED_BY_LABEL[relation_name]
                if chosen != expected:
                    violations.append((score_class, aligned, relation_name, chosen))
    table_ok = cells == 72 and not violations

    out_dir = tmp_path / "walk"
    code, lines = cli_lines(
        capsys, "generate", "--corpus", fixture("walkthrough_corpus.json"),
        "--adg", fixture("walkthrough_adg.json"),
        "--adg", fixture("walkthrough_ja_adg.json"),
        "--templates", fixture("templates.json"),
        "--response-id", "walk-1", "--text", "--out", str(out_dir))
    text = "\n".join(lines)
    document = json.loads((out_dir / "walk-1.json").read_text())
    b_item = next(i for i in document["items"] if i["criterion_id"] == "B")
    walkthrough_ok = (code == 0
                      and b_item["template_key"] == "insufficient_elements"
                      and "Language is an abstract symbol" in text
                      and "Language is a symbol" in text)

    ok = table_ok and walkthrough_ok
    report_line(capsys, "6", ok,
                f"{cells} cells, {len(violations)} off-table selections; "
                f"walkthrough criterion B {'renders both excerpts' if walkthrough_ok else 'wrong'}")
    assert ok, (violations, b_item["template_key"])


def test_criterion_7_planted_defects(capsys, walkthrough_adg, walkthrough_corpus, registry):
    failures = []

    def check(name: str, expected_code: str, findings) -> None:
        errors = [f for f in findings if f.severity.value == "error"]
        if len(errors) != 1 or errors[0].code != expected_code:
            failures.append((name, [ (f.severity.value, f.code) for f in findings ]))

    base = load_adg(base_graph_document())
    check("dangling-edge", "dangling-edge", validate_graph(dataclasses.replace(
        base, edges=base.edges + (AdgEdge("s1", "zz", "elaboration"),))).findings)
    check("duplicate-node-id", "duplicate-node-id", validate_graph(dataclasses.replace(
        base, nodes=base.nodes + (base.node("a1"),))).findings)

    doc = base_graph_document()
    doc["edges"].append({"src": "s2", "dst": "s2", "label": "cause"})
    check("self-loop", "self-loop", validate_graph(load_adg(doc)).findings)

    doc = base_graph_document()
    doc["edges"].append({"src": "s1", "dst": "s2", "label": "flourish"})
    check("unbound-label", "unbound-label", validate_graph(load_adg(doc)).findings)

    doc = base_graph_document()
    doc["edges"] = [e for e in doc["edges"] if "a1" not in (e["src"], e["dst"])]
    check("unreachable-answer-node", "unreachable-answer-node",
          validate_graph(load_adg(doc)).findings)

    doc = base_graph_document()
    doc["nodes"][2]["text"] = "The sky brightened"
    check("span-text-mismatch", "span-text-mismatch",
          validate_graph(load_adg(doc)).findings)

    templates_doc = load_fixture_json("templates.json")
    templates_doc["templates"] = [
        t for t in templates_doc["templates"]
        if not (t["key"] == "wrong_part.contrast" and t["language"] == "en")]
    check("missing-generic-template", "missing-generic-template",
          validate_registry(load_templates(templates_doc), walkthrough_adg,
                            walkthrough_corpus.prompts).findings)

    templates_doc = load_fixture_json("templates.json")
    templates_doc["templates"].append({
        "key": "analytic.Z.missing_everything", "scope": "analytic",
        "criterion_id": "Z", "error_signature": "missing-everything",
        "body": "Nothing on {criterion_excerpt}.",
        "required_slots": ["criterion_excerpt"], "language": "en",
    })
    check("unknown-criterion", "unknown-criterion",
          validate_registry(load_templates(templates_doc), walkthrough_adg,
                            walkthrough_corpus.prompts).findings)

    vocab_doc = base_graph_document()
    vocab_doc["label_vocabulary"] = [
        {"name": "elaboration", "template_key": "wrong_part.elaboration"},
        {"name": "result", "template_key": "wrong_part.result"},
        {"name": "flourish", "template_key": "wrong_part.flourish"},
    ]
    check("unbound-template-key", "unbound-template-key",
          validate_registry(registry, load_adg(vocab_doc),
                            walkthrough_corpus.prompts).findings)

    ok = not failures
    report_line(capsys, "7", ok,
                "9/9 planted defects each yield exactly one error finding"
                if ok else f"failed: {failures}")
    assert ok, failures


def test_criterion_8_generation_determinism(capsys, tmp_path):
    corpus_path = fixture("planted_corpus.json")
    base_args = ["generate", "--corpus", corpus_path,
                 "--adg", fixture("walkthrough_adg.json"),
                 "--templates", fixture("templates.json")]
    first_dir, second_dir, single_dir = (tmp_path / n for n in ("a", "b", "c"))

    code1 = main(base_args + ["--out", str(first_dir)])
    code2 = main(base_args + ["--out", str(second_dir)])
    capsys.readouterr()
    response_ids = [r["response_id"]
                    for r in load_fixture_json("planted_corpus.json")["responses"]]
    batch_ok = code1 == 0 and code2 == 0 and len(response_ids) == 20 and all(
        (first_dir / f"{rid}.json").read_bytes() == (second_dir / f"{rid}.json").read_bytes()
        for rid in response_ids)

    singles_ok = True
    for rid in response_ids:
        code = main(base_args + ["--out", str(single_dir), "--response-id", rid])
        capsys.readouterr()
        if code != 0 or ((single_dir / f"{rid}.json").read_bytes()
                         != (first_dir / f"{rid}.json").read_bytes()):
            singles_ok = False
    ok = batch_ok and singles_ok
    report_line(capsys, "8", ok,
                f"20 reports byte-identical across batch runs: {batch_ok}; "
                f"batch equals per-response runs: {singles_ok}")
    assert ok


def test_criteria_run_within_budget(capsys):
    elapsed = time.perf_counter() - _MODULE_START
    ok = elapsed < 30.0
    report_line(capsys, "runtime", ok,
                f"criteria 1-8 finished in {elapsed:.2f}s of the 30s budget")
    assert ok, elapsed
