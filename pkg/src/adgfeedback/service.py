"""HTTP service: feedback generation, prompt/graph lookup, session storage.

Storage is a directory of JSON documents (prompts/, adgs/, explanations/,
sessions/, reports/, templates.json), small enough for classroom-scale use;
the FileStore class isolates it so a database could replace it. Per-session
writes are serialized with one lock per session id. Error bodies are always
{code, message, subject}.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .alignment import (
    AlignConfig,
    CharNgramProvider,
    ProviderUnavailableError,
    RemoteEmbeddingProvider,
    SimilarityProvider,
    TokenTfidfProvider,
)
from .corpus import CorpusError, PromptSpec, ScoredResponse, parse_prompt, parse_response
from .feedback import (
    FeedbackConfig,
    TemplateRegistry,
    generate_feedback,
    load_templates,
    report_to_document,
)
from .graph import Adg, load_adg, to_document as adg_to_document

log = logging.getLogger(__name__)

CONDITIONS = ("feedback", "explanation_only")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, *, subject: str = ""):
        super().__init__(message)
        self.status = status
        self.code = code
        self.subject = subject


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str | Path
    host: str = "127.0.0.1"
    port: int = 8000
    language: str = "en"
    auth_token: str | None = None
    # Providers tried in order; a provider that raises unavailable falls
    # through to the next one.
    providers: tuple[str, ...] = ("char_ngram",)
    ngram_n: int = 3
    remote_url: str | None = None
    remote_model: str | None = None
    embedding_cache: str | None = None
    align: AlignConfig = AlignConfig()


def build_provider_chain(config: ServiceConfig) -> list[SimilarityProvider]:
    chain: list[SimilarityProvider] = []
    for name in config.providers:
        if name == "char_ngram":
            chain.append(CharNgramProvider(n=config.ngram_n))
        elif name == "token_tfidf":
            chain.append(TokenTfidfProvider())
        elif name == "remote":
            if not config.remote_url or not config.remote_model:
                raise ValueError("remote provider needs remote_url and remote_model")
            chain.append(RemoteEmbeddingProvider(
                url=config.remote_url, model=config.remote_model,
                cache_path=config.embedding_cache))
        else:
            raise ValueError(f"unknown provider {name!r}")
    return chain


class FileStore:
    """Documents-on-disk persistence; one JSON file per record."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ValueError(f"data directory {self.root} does not exist")
        if not os.access(self.root, os.W_OK):
            raise ValueError(f"data directory {self.root} is not writable")
        for sub in ("sessions", "reports"):
            (self.root / sub).mkdir(exist_ok=True)

    def _read(self, relative: str) -> dict | None:
        path = self.root / relative
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _write(self, relative: str, document: dict) -> None:
        path = self.root / relative
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(document, ensure_ascii=False, indent=2) + "\n",
                       encoding="utf-8")
        tmp.replace(path)

    def prompt(self, prompt_id: str) -> PromptSpec | None:
        raw = self._read(f"prompts/{prompt_id}.json")
        return parse_prompt(raw) if raw is not None else None

    def prompt_document(self, prompt_id: str) -> dict | None:
        return self._read(f"prompts/{prompt_id}.json")

    def adg(self, prompt_id: str) -> Adg | None:
        raw = self._read(f"adgs/{prompt_id}.json")
        return load_adg(raw) if raw is not None else None

    def registry(self) -> TemplateRegistry:
        raw = self._read("templates.json")
        if raw is None:
            raise ApiError(503, "no-registry", "service has no template registry configured")
        return load_templates(raw)

    def explanation(self, prompt_id: str) -> dict | None:
        return self._read(f"explanations/{prompt_id}.json")

    def session(self, session_id: str) -> dict | None:
        return self._read(f"sessions/{session_id}.json")

    def write_session(self, document: dict) -> None:
        self._write(f"sessions/{document['session_id']}.json", document)

    def report(self, report_id: str) -> dict | None:
        return self._read(f"reports/{report_id}.json")

    def write_report(self, report_id: str, document: dict) -> None:
        self._write(f"reports/{report_id}.json", document)


def _parse_scored_request(prompt: PromptSpec, body: dict, response_id: str) -> ScoredResponse:
    """Validate a {text, per_criterion} request against the prompt's rubric."""
    if not isinstance(body, dict):
        raise ApiError(422, "invalid-request", "request body must be an object")
    text = body.get("text")
    if not isinstance(text, str):
        raise ApiError(422, "invalid-request", "text must be a string", subject="text")
    per_criterion = body.get("per_criterion", {})
    if not isinstance(per_criterion, dict):
        raise ApiError(422, "invalid-request", "per_criterion must be an object",
                       subject="per_criterion")
    for criterion_id, entry in per_criterion.items():
        try:
            criterion = prompt.criterion(criterion_id)
        except CorpusError as exc:
            raise ApiError(422, exc.code, str(exc), subject=criterion_id) from exc
        if not isinstance(entry, dict):
            raise ApiError(422, "invalid-request",
                           f"criterion {criterion_id!r} entry must be an object",
                           subject=criterion_id)
        score = entry.get("score")
        if not isinstance(score, int) or not (0 <= score <= criterion.max_score):
            raise ApiError(422, "score-range",
                           f"criterion {criterion_id!r} score must be an integer in "
                           f"[0, {criterion.max_score}]", subject=criterion_id)
        span = entry.get("cue_span")
        if span is not None:
            if (not isinstance(span, list) or len(span) != 2
                    or not all(isinstance(v, int) for v in span)
                    or not (0 <= span[0] <= span[1] <= len(text))):
                raise ApiError(422, "cue-span-bounds",
                               f"criterion {criterion_id!r} cue_span must be [start, end] "
                               f"within the text", subject=criterion_id)
        signature = entry.get("error_signature")
        if signature is not None and not isinstance(signature, str):
            raise ApiError(422, "invalid-request",
                           f"criterion {criterion_id!r} error_signature must be a string",
                           subject=criterion_id)
    try:
        return parse_response({
            "response_id": response_id,
            "prompt_id": prompt.id,
            "text": text,
            "per_criterion": per_criterion,
        })
    except CorpusError as exc:
        raise ApiError(422, exc.code, str(exc), subject=exc.subject) from exc


def _body_digest(prompt_id: str, body: dict) -> str:
    canonical = json.dumps({"prompt_id": prompt_id, "body": body},
                           sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def create_app(config: ServiceConfig, provider: SimilarityProvider | None = None) -> FastAPI:
    """Build the service; an explicit provider replaces the configured chain."""
    store = FileStore(config.data_dir)
    chain: list[SimilarityProvider] = [provider] if provider is not None \
        else build_provider_chain(config)
    app = FastAPI(title="adgfeedback", docs_url=None, redoc_url=None)
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(session_id, threading.Lock())

    def error_response(status: int, code: str, message: str, subject: str = "") -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"code": code, "message": message, "subject": subject})

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return error_response(exc.status, exc.code, str(exc), exc.subject)

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(_request: Request,
                                      exc: RequestValidationError) -> JSONResponse:
        return error_response(422, "invalid-request", str(exc.errors()[:1]))

    @app.middleware("http")
    async def envelope(request: Request, call_next):
        if config.auth_token is not None and request.url.path != "/healthz":
            header = request.headers.get("authorization", "")
            if header != f"Bearer {config.auth_token}":
                return error_response(401, "unauthorized", "missing or invalid bearer token")
        correlation_id = str(uuid.uuid4())
        response = await call_next(request)
        # Timestamps and the correlation id live in the envelope only, so
        # identical requests keep byte-identical bodies.
        response.headers["X-Correlation-Id"] = correlation_id
        log.info("%s %s -> %d [%s]", request.method, request.url.path,
                 response.status_code, correlation_id)
        return response

    def load_prompt(prompt_id: str) -> PromptSpec:
        prompt = store.prompt(prompt_id)
        if prompt is None:
            raise ApiError(404, "unknown-prompt", f"no prompt {prompt_id!r}", subject=prompt_id)
        return prompt

    def load_graph(prompt_id: str) -> Adg:
        adg = store.adg(prompt_id)
        if adg is None:
            raise ApiError(404, "unknown-adg", f"no graph for prompt {prompt_id!r}",
                           subject=prompt_id)
        return adg

    def generate_with_fallback(prompt: PromptSpec, response: ScoredResponse) -> dict:
        adg = load_graph(prompt.id)
        registry = store.registry()
        fb_config = FeedbackConfig(language=config.language, align=config.align)
        last: ProviderUnavailableError | None = None
        for candidate in chain:
            try:
                report = generate_feedback(adg, registry, prompt, response, candidate, fb_config)
                return report_to_document(report)
            except ProviderUnavailableError as exc:
                last = exc
        raise ApiError(503, "provider-unavailable",
                       f"all providers failed: {last}" if last else "no provider configured")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/v1/prompts/{prompt_id}")
    def get_prompt(prompt_id: str) -> dict:
        document = store.prompt_document(prompt_id)
        if document is None:
            raise ApiError(404, "unknown-prompt", f"no prompt {prompt_id!r}", subject=prompt_id)
        return document

    @app.get("/v1/adg/{prompt_id}")
    def get_adg(prompt_id: str) -> dict:
        return adg_to_document(load_graph(prompt_id))

    @app.post("/v1/feedback")
    def post_feedback(body: dict = Body(...)) -> dict:
        prompt_id = body.get("prompt_id")
        if not isinstance(prompt_id, str):
            raise ApiError(422, "invalid-request", "prompt_id must be a string",
                           subject="prompt_id")
        prompt = load_prompt(prompt_id)
        response_id = "r-" + _body_digest(prompt_id, body)
        response = _parse_scored_request(prompt, body, response_id)
        document = generate_with_fallback(prompt, response)
        store.write_report(response_id, document)
        return document

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: dict = Body(...)) -> dict:
        prompt_id = body.get("prompt_id")
        if not isinstance(prompt_id, str):
            raise ApiError(422, "invalid-request", "prompt_id must be a string",
                           subject="prompt_id")
        load_prompt(prompt_id)
        condition = body.get("condition")
        if condition not in CONDITIONS:
            raise ApiError(422, "bad-condition",
                           f"condition must be one of {list(CONDITIONS)}", subject="condition")
        document = {
            "session_id": "s-" + uuid.uuid4().hex[:12],
            "prompt_id": prompt_id,
            "condition": condition,
            "closed": False,
            "attempts": [],
        }
        store.write_session(document)
        return document

    def load_session(session_id: str) -> dict:
        document = store.session(session_id)
        if document is None:
            raise ApiError(404, "unknown-session", f"no session {session_id!r}",
                           subject=session_id)
        return document

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return load_session(session_id)

    @app.post("/v1/sessions/{session_id}/attempts", status_code=201)
    def post_attempt(session_id: str, body: dict = Body(...)) -> dict:
        with session_lock(session_id):
            session = load_session(session_id)
            if session["closed"]:
                raise ApiError(409, "session-closed",
                               f"session {session_id!r} is closed", subject=session_id)
            prompt = load_prompt(session["prompt_id"])
            response_id = f"{session_id}-a{len(session['attempts']) + 1}"
            response = _parse_scored_request(prompt, body, response_id)
            report_id = None
            # The explanation condition never generates feedback, so the
            # provider chain is never touched for those sessions.
            if session["condition"] == "feedback":
                document = generate_with_fallback(prompt, response)
                report_id = response_id
                store.write_report(report_id, document)
            total = sum(result.score for _cid, result in response.per_criterion)
            previous = session["attempts"][-1]["total_score"] if session["attempts"] else None
            attempt = {
                "index": len(session["attempts"]) + 1,
                "submitted_at": datetime.now(timezone.utc).isoformat(),
                "text": response.text,
                "per_criterion": body.get("per_criterion", {}),
                "total_score": total,
                "delta": None if previous is None else total - previous,
                "feedback_report_id": report_id,
            }
            session["attempts"].append(attempt)
            store.write_session(session)
            return attempt

    @app.post("/v1/sessions/{session_id}/close")
    def close_session(session_id: str) -> dict:
        with session_lock(session_id):
            session = load_session(session_id)
            session["closed"] = True
            store.write_session(session)
            return session

    @app.get("/v1/sessions/{session_id}/feedback/latest")
    def latest_feedback(session_id: str) -> dict:
        session = load_session(session_id)
        if session["condition"] == "explanation_only":
            explanation = store.explanation(session["prompt_id"])
            if explanation is None:
                raise ApiError(404, "no-explanation",
                               f"no explanation stored for prompt {session['prompt_id']!r}",
                               subject=session["prompt_id"])
            return explanation
        for attempt in reversed(session["attempts"]):
            report_id = attempt.get("feedback_report_id")
            if report_id:
                report = store.report(report_id)
                if report is not None:
                    return report
        raise ApiError(404, "no-attempts",
                       f"session {session_id!r} has no feedback yet", subject=session_id)

    return app


def run_service(config: ServiceConfig, provider: SimilarityProvider | None = None) -> None:
    import uvicorn

    app = create_app(config, provider)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
