"""Command-line interface: validate, align, generate, stats, serve.

Exit codes: 0 success, 1 validation findings with severity error, 2 usage
or input-file problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .alignment import (
    AlignConfig,
    AlignmentError,
    CharNgramProvider,
    RemoteEmbeddingProvider,
    SimilarityProvider,
    TokenTfidfProvider,
    align_cue,
)
from .corpus import Corpus, CorpusError, cue_text, load_corpus_path
from .feedback import (
    FeedbackConfig,
    FeedbackError,
    generate_feedback,
    load_templates,
    render_report_text,
    report_to_document,
    validate_registry,
)
from .graph import Adg, AdgError, load_adg, validate_graph
from .stats import (
    StatsError,
    alignment_accuracy,
    run_count_table,
    run_likert_table,
    run_summary_table,
    two_level_marker,
)
from .validation import ValidationReport


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


class UsageError(Exception):
    pass


def _make_provider(args: argparse.Namespace) -> SimilarityProvider:
    name = getattr(args, "provider", "char_ngram")
    if name == "char_ngram":
        return CharNgramProvider(n=getattr(args, "ngram", 3))
    if name == "token_tfidf":
        return TokenTfidfProvider()
    if name == "remote":
        if not args.remote_url or not args.remote_model:
            raise UsageError("--provider remote needs --remote-url and --remote-model")
        return RemoteEmbeddingProvider(url=args.remote_url, model=args.remote_model,
                                       cache_path=args.embedding_cache)
    raise UsageError(f"unknown provider {name!r}")


def _align_config(args: argparse.Namespace) -> AlignConfig:
    threshold = getattr(args, "threshold", None)
    return AlignConfig(threshold=threshold) if threshold is not None else AlignConfig()


def _print_findings(report: ValidationReport) -> None:
    for finding in report.findings:
        subject = f" {finding.subject}" if finding.subject else ""
        print(f"{finding.severity.value}: {finding.code}{subject}: {finding.message}")


def _load_adgs(paths: list[str]) -> dict[str, Adg]:
    adgs: dict[str, Adg] = {}
    for path in paths:
        adg = load_adg(_read(path))
        adgs[adg.prompt_id] = adg
    return adgs


def _cmd_validate(args: argparse.Namespace) -> int:
    adg = load_adg(_read(args.adg))
    registry = None
    template_keys = None
    if args.templates:
        registry = load_templates(_read(args.templates))
        template_keys = {t.key for t in registry.templates}
    prompts = ()
    if args.corpus:
        prompts = load_corpus_path(args.corpus).prompts
    report = validate_graph(adg, template_keys=template_keys)
    _print_findings(report)
    ok = report.ok
    if registry is not None:
        registry_report = validate_registry(registry, adg, prompts)
        _print_findings(registry_report)
        ok = ok and registry_report.ok
    if ok:
        print("ok")
        return 0
    return 1


def _cmd_align(args: argparse.Namespace) -> int:
    corpus = load_corpus_path(args.corpus)
    adgs = _load_adgs(args.adg)
    provider = _make_provider(args)
    config = _align_config(args)
    rows = []
    for response in corpus.responses:
        adg = adgs.get(response.prompt_id)
        if adg is None:
            raise UsageError(f"no --adg given for prompt {response.prompt_id!r}")
        for criterion_id, _result in response.per_criterion:
            cue = cue_text(response, criterion_id)
            if cue is None:
                continue
            outcome = align_cue(cue, adg, provider, config,
                                response_id=response.response_id, criterion_id=criterion_id)
            state = "aligned" if outcome.aligned else "below-threshold"
            print(f"{response.response_id}\t{criterion_id}\t{outcome.node_id}"
                  f"\t{outcome.similarity:.4f}\t{state}")
            rows.append({"response_id": response.response_id, "criterion_id": criterion_id,
                         "node_id": outcome.node_id, "similarity": outcome.similarity,
                         "margin": outcome.margin, "aligned": outcome.aligned})
    document: dict = {"alignments": rows}
    if args.oracle:
        accuracy = alignment_accuracy(corpus, adgs, provider, config)
        top1 = "n/a" if accuracy.top1 is None else f"{accuracy.top1:.4f}"
        margin = "n/a" if accuracy.mean_margin is None else f"{accuracy.mean_margin:.4f}"
        print(f"top1={top1} evaluated={accuracy.evaluated} skipped={accuracy.skipped} "
              f"mean_margin={margin}")
        document["accuracy"] = accuracy.to_document()
    if args.json:
        Path(args.json).write_text(json.dumps(document, ensure_ascii=False, indent=2) + "\n",
                                   encoding="utf-8")
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    corpus = load_corpus_path(args.corpus)
    adgs = _load_adgs(args.adg)
    registry = load_templates(_read(args.templates))
    provider = _make_provider(args)
    config = FeedbackConfig(language=args.language, align=_align_config(args))
    responses = corpus.responses
    if args.response_id:
        responses = tuple(r for r in responses if r.response_id == args.response_id)
        if not responses:
            raise UsageError(f"no response {args.response_id!r} in corpus")
    out_dir = None
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
    for response in responses:
        prompt = corpus.prompt(response.prompt_id)
        adg = adgs.get(prompt.id)
        if adg is None:
            raise UsageError(f"no --adg given for prompt {prompt.id!r}")
        report = generate_feedback(adg, registry, prompt, response, provider, config)
        document = report_to_document(report)
        if out_dir is not None:
            path = out_dir / f"{response.response_id}.json"
            path.write_text(json.dumps(document, ensure_ascii=False, indent=2) + "\n",
                            encoding="utf-8")
        if args.text:
            print(render_report_text(report), end="")
        else:
            print(f"{response.response_id}\t{report.total_score}/{report.max_total}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    if not (args.table1 or args.table2 or args.table3 or args.table5):
        raise UsageError("stats needs at least one of --table1/--table2/--table3/--table5")
    document: dict = {}
    for flag in ("table1", "table5"):
        path = getattr(args, flag)
        if not path:
            continue
        rows = run_summary_table(_read(path))
        document[flag] = []
        for row_id, result in rows:
            print(f"{row_id}\t{result.verdict.marker}")
            document[flag].append({"id": row_id, "statistic": result.statistic,
                                   "df": result.df, "p_value": result.p_value,
                                   "verdict": result.verdict.value,
                                   "marker": result.verdict.marker})
    if args.table2:
        document["table2"] = []
        for row_id, result, majority in run_count_table(_read(args.table2)):
            print(f"{row_id}\t{result.verdict.marker}\tmajority={majority + 1}")
            document["table2"].append({"id": row_id, "statistic": result.statistic,
                                       "df": result.df, "p_value": result.p_value,
                                       "verdict": result.verdict.value,
                                       "marker": result.verdict.marker,
                                       "majority": majority + 1})
    if args.table3:
        document["table3"] = []
        for row_id, pairs in run_likert_table(_read(args.table3)):
            markers = [two_level_marker(result) for _name, result in pairs]
            print(f"{row_id}\t" + "\t".join(markers))
            document["table3"].append({
                "id": row_id,
                "pairs": [{"pair": name, "statistic": result.statistic,
                           "p_value": result.p_value, "marker": two_level_marker(result)}
                          for name, result in pairs],
            })
    if args.json:
        Path(args.json).write_text(json.dumps(document, ensure_ascii=False, indent=2) + "\n",
                                   encoding="utf-8")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service import ServiceConfig, run_service

    providers = tuple(args.provider_chain.split(",")) if args.provider_chain \
        else ("char_ngram",)
    config = ServiceConfig(
        data_dir=args.data, host=args.host, port=args.port, language=args.language,
        auth_token=args.auth_token, providers=providers, remote_url=args.remote_url,
        remote_model=args.remote_model, embedding_cache=args.embedding_cache,
        align=_align_config(args),
    )
    run_service(config)
    return 0


def _add_provider_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", default="char_ngram",
                        choices=["char_ngram", "token_tfidf", "remote"])
    parser.add_argument("--ngram", type=int, default=3)
    parser.add_argument("--threshold", type=float, default=None)
    parser.add_argument("--remote-url", dest="remote_url", default=None)
    parser.add_argument("--remote-model", dest="remote_model", default=None)
    parser.add_argument("--embedding-cache", dest="embedding_cache", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adgfb",
                                     description="Graph-guided feedback toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a graph and template registry")
    p_validate.add_argument("--adg", required=True)
    p_validate.add_argument("--templates", default=None)
    p_validate.add_argument("--corpus", default=None)
    p_validate.set_defaults(func=_cmd_validate)

    p_align = sub.add_parser("align", help="align corpus cues to graph nodes")
    p_align.add_argument("--corpus", required=True)
    p_align.add_argument("--adg", action="append", required=True)
    p_align.add_argument("--oracle", action="store_true",
                         help="score against gold node annotations")
    p_align.add_argument("--json", default=None)
    _add_provider_options(p_align)
    p_align.set_defaults(func=_cmd_align)

    p_generate = sub.add_parser("generate", help="render feedback reports")
    p_generate.add_argument("--corpus", required=True)
    p_generate.add_argument("--adg", action="append", required=True)
    p_generate.add_argument("--templates", required=True)
    p_generate.add_argument("--response-id", dest="response_id", default=None)
    p_generate.add_argument("--out", default=None)
    p_generate.add_argument("--language", default="en")
    p_generate.add_argument("--text", action="store_true",
                            help="print plain-text reports instead of score lines")
    _add_provider_options(p_generate)
    p_generate.set_defaults(func=_cmd_generate)

    p_stats = sub.add_parser("stats", help="reproduce the evaluation tables")
    p_stats.add_argument("--table1", default=None)
    p_stats.add_argument("--table2", default=None)
    p_stats.add_argument("--table3", default=None)
    p_stats.add_argument("--table5", default=None)
    p_stats.add_argument("--json", default=None)
    p_stats.set_defaults(func=_cmd_stats)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--data", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--language", default="en")
    p_serve.add_argument("--auth-token", dest="auth_token", default=None)
    p_serve.add_argument("--providers", dest="provider_chain", default=None,
                         help="comma-separated provider fallback chain")
    p_serve.add_argument("--remote-url", dest="remote_url", default=None)
    p_serve.add_argument("--remote-model", dest="remote_model", default=None)
    p_serve.add_argument("--embedding-cache", dest="embedding_cache", default=None)
    p_serve.add_argument("--threshold", type=float, default=None)
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AdgError, CorpusError, FeedbackError, AlignmentError, StatsError) as exc:
        code = getattr(exc, "code", "error")
        print(f"error: {code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
