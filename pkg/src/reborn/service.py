"""Registry + aggregation service: REST API over the journal-backed store.

One service instance fuses the template registry and the aggregation graph
behind a single persistence layer. Requests are handled on daemon threads;
all store mutations funnel through the store's lock, and harvests are
additionally serialized per article DOI.
"""

import json
import logging
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import csvio
from .errors import DocumentError, RebornError, ServiceError, StoreError, TemplateError
from .graph import PaperRecord, object_to_json
from .harvest import harvest_directory, harvest_doi
from .interlink import (
    FixtureMetadataClient,
    FixturePartFetcher,
    HttpMetadataClient,
    RequestsFetcher,
    require_doi,
)
from .jsonld import parse_contribution
from .store import GraphStore, paper_to_json
from .templates import (
    constructor_spec,
    constructor_to_json,
    materialize,
    template_from_json,
    template_to_json,
    validate_instance,
)

logger = logging.getLogger(__name__)

_STATUS = {
    "NOT_FOUND": 404,
    "NO_SUPPLEMENTS": 404,
    "NOT_TABULAR": 409,
    "DUPLICATE_TEMPLATE": 409,
    "STORE_CLOSED": 500,
    "TRANSPORT": 500,
    "HTTP_STATUS": 500,
    "BAD_RESPONSE": 500,
    "ALL_FAILED": 500,
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8640
    journal_path: str | Path = "reborn.journal"
    fixture_root: str | Path | None = None
    metadata_endpoint: str | None = None
    parallelism: int = 4
    page_cap: int = 100

    def check(self) -> None:
        if self.parallelism < 1:
            raise ServiceError("BIND_FAILED", "parallelism must be >= 1")
        parent = Path(self.journal_path).resolve().parent
        if not parent.is_dir():
            raise ServiceError("BIND_FAILED", f"journal directory {parent} does not exist")


class RegistryService:
    def __init__(self, config: ServiceConfig):
        config.check()
        self.config = config
        self.store = GraphStore(config.journal_path)
        if config.metadata_endpoint:
            self.metadata_client = HttpMetadataClient(config.metadata_endpoint, page_cap=config.page_cap)
            self.part_fetcher = RequestsFetcher()
        else:
            root = Path(config.fixture_root or "fixtures")
            self.metadata_client = FixtureMetadataClient(root, page_cap=config.page_cap)
            self.part_fetcher = FixturePartFetcher(root)
        self._doi_locks: dict[str, threading.Lock] = {}
        self._doi_locks_guard = threading.Lock()
        handler = _make_handler(self)
        try:
            self.httpd = ThreadingHTTPServer((config.host, config.port), handler)
        except OSError as exc:
            self.store.close()
            raise ServiceError("BIND_FAILED", f"cannot bind {config.host}:{config.port}: {exc}")
        self.httpd.daemon_threads = True
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.config.host}:{self.port}"

    def doi_lock(self, doi: str) -> threading.Lock:
        with self._doi_locks_guard:
            return self._doi_locks.setdefault(doi, threading.Lock())

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        self._thread.join(timeout=5)
        self.store.close()


def serve(config: ServiceConfig) -> RegistryService:
    """Start the service; the journal is replayed before the socket opens."""
    return RegistryService(config)


def _resource_json(service: RegistryService, res) -> dict:
    return {
        "id": res.id,
        "label": res.label,
        "classes": sorted(res.classes),
        "hasDataset": service.store.has_dataset(res.id),
    }


def _statement_json(stmt) -> dict:
    return {
        "subject": stmt.subject,
        "predicateId": stmt.predicate_id,
        "predicate": stmt.predicate_label,
        "object": object_to_json(stmt.object),
    }


def _make_handler(service: RegistryService):
    store = service.store

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route access logs through logging
            logger.debug("%s - %s", self.address_string(), fmt % args)

        # -- plumbing ------------------------------------------------------

        def _send(self, status: int, body: bytes, content_type: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _json(self, payload, status: int = 200) -> None:
            body = (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")
            self._send(status, body, "application/json; charset=utf-8")

        def _error(self, code: str, message: str, status: int | None = None) -> None:
            self._json({"code": code, "message": message}, status or _STATUS.get(code, 400))

        def _body(self) -> bytes:
            length = int(self.headers.get("Content-Length") or 0)
            return self.rfile.read(length) if length else b""

        def _dispatch(self, method: str) -> None:
            url = urlparse(self.path)
            query = {k: v[0] for k, v in parse_qs(url.query).items()}
            try:
                for pattern, handler_method, handler in _ROUTES:
                    if handler_method != method:
                        continue
                    m = pattern.match(url.path)
                    if m:
                        handler(self, query, *m.groups())
                        return
                self._error("NOT_FOUND", f"no route for {method} {url.path}", 404)
            except RebornError as exc:
                self._error(exc.code, exc.message)
            except Exception as exc:  # unexpected: surface as 500, keep serving
                logger.exception("internal error handling %s %s", method, self.path)
                self._error("INTERNAL", str(exc), 500)

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        # -- templates -------------------------------------------------------

        def get_templates(self, query):
            self._json([template_to_json(t) for t in store.list_templates()])

        def post_templates(self, query):
            try:
                doc = json.loads(self._body().decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as exc:
                self._error("MALFORMED", f"body is not JSON: {exc}")
                return
            tpl = template_from_json(doc)
            store.add_template(tpl)
            self._json(template_to_json(tpl), 201)

        def _template_or_404(self, template_id: str):
            tpl = store.get_template(template_id)
            if tpl is None:
                raise TemplateError("NOT_FOUND", f"template {template_id!r} not found")
            return tpl

        def get_template(self, query, template_id):
            self._json(template_to_json(self._template_or_404(template_id)))

        def get_materialized(self, query, template_id):
            self._template_or_404(template_id)
            bundle = materialize(store.get_template, template_id)
            self._json({
                "root": bundle.root_id,
                "templates": {tid: template_to_json(t) for tid, t in sorted(bundle.templates.items())},
            })

        def get_constructor(self, query, template_id):
            self._json(constructor_to_json(constructor_spec(self._template_or_404(template_id))))

        # -- resources ---------------------------------------------------------

        def get_resource(self, query, node_id):
            res = store.get_resource(node_id)
            if res is None:
                raise StoreError("NOT_FOUND", f"resource {node_id!r} not found")
            self._json(_resource_json(service, res))

        def get_subgraph(self, query, node_id):
            try:
                depth = int(query.get("depth", "1"))
            except ValueError:
                self._error("BAD_REQUEST", "depth must be an integer")
                return
            resources, statements = store.subgraph(node_id, depth)
            self._json({
                "root": node_id,
                "resources": [_resource_json(service, r) for r in resources],
                "statements": [_statement_json(s) for s in statements],
            })

        def get_dataframe(self, query, node_id):
            ds = store.to_dataframe(node_id)
            self._send(200, csvio.write_table(ds.columns, ds.rows), "text/csv; charset=utf-8")

        # -- validation ----------------------------------------------------------

        def post_validate(self, query):
            graph = parse_contribution(self._body())
            template_id = query.get("template") or graph.claims.get(graph.root)
            if not template_id:
                self._error("NO_TEMPLATE_CLAIM", "document root claims no template and none was given")
                return
            self._template_or_404(template_id)
            bundle = materialize(store.get_template, template_id)
            report = validate_instance(bundle, graph, graph.root)
            self._json(report.to_json())

        # -- harvesting -------------------------------------------------------------

        def post_harvest(self, query):
            body = self._read_json_body()
            doi = require_doi(body.get("doi", ""))
            research_field = body.get("research_field", "")
            with service.doi_lock(doi):
                report = harvest_doi(
                    store,
                    service.metadata_client,
                    service.part_fetcher,
                    doi,
                    research_field=research_field,
                    parallelism=service.config.parallelism,
                )
            self._json(report.to_json())

        def post_directory(self, query):
            body = self._read_json_body()
            path = body.get("path", "")
            paper = PaperRecord(
                id="",
                title=body.get("title", ""),
                authors=list(body.get("authors", [])),
                publication_year=int(body.get("publication_year") or 0),
                publication_month=body.get("publication_month"),
                published_in=body.get("published_in", ""),
                doi=body.get("doi"),
                research_field=body.get("research_field", ""),
            )
            report = harvest_directory(store, path, paper)
            self._json(report.to_json())

        def _read_json_body(self) -> dict:
            try:
                body = json.loads(self._body().decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as exc:
                raise DocumentError("MALFORMED_JSON", f"body is not JSON: {exc}")
            if not isinstance(body, dict):
                raise DocumentError("MALFORMED_JSON", "body must be a JSON object")
            return body

        # -- views ----------------------------------------------------------------------

        def get_comparisons(self, query):
            roots = [r for r in query.get("contributions", "").split(",") if r]
            if not roots:
                self._error("BAD_REQUEST", "contributions parameter is required")
                return
            table = store.compare(roots)
            self._json({
                "columns": table.columns,
                "rows": [{"predicate": row.predicate, "cells": row.cells} for row in table.rows],
            })

        def get_leaderboards(self, query):
            rows = store.leaderboard(query.get("task", ""), query.get("dataset", ""), query.get("metric", ""))
            self._json([
                {
                    "model": r.model,
                    "score": r.score,
                    "metric": r.metric,
                    "dataset": r.dataset,
                    "task": r.task,
                    "paper": r.paper_id,
                }
                for r in rows
            ])

        def get_paper(self, query, paper_id):
            paper = store.get_paper(paper_id)
            if paper is None:
                raise StoreError("NOT_FOUND", f"paper {paper_id!r} not found")
            self._json(paper_to_json(paper))

    _ID = r"([A-Za-z0-9_.:%-]+)"
    _ROUTES = [
        (re.compile(r"^/api/templates/?$"), "GET", Handler.get_templates),
        (re.compile(r"^/api/templates/?$"), "POST", Handler.post_templates),
        (re.compile(rf"^/api/templates/{_ID}$"), "GET", Handler.get_template),
        (re.compile(rf"^/api/templates/{_ID}/materialized$"), "GET", Handler.get_materialized),
        (re.compile(rf"^/api/templates/{_ID}/constructor$"), "GET", Handler.get_constructor),
        (re.compile(rf"^/api/resources/{_ID}$"), "GET", Handler.get_resource),
        (re.compile(rf"^/api/resources/{_ID}/subgraph$"), "GET", Handler.get_subgraph),
        (re.compile(rf"^/api/resources/{_ID}/dataframe$"), "GET", Handler.get_dataframe),
        (re.compile(r"^/api/validate$"), "POST", Handler.post_validate),
        (re.compile(r"^/api/harvest$"), "POST", Handler.post_harvest),
        (re.compile(r"^/api/papers/directory$"), "POST", Handler.post_directory),
        (re.compile(rf"^/api/papers/{_ID}$"), "GET", Handler.get_paper),
        (re.compile(r"^/api/comparisons$"), "GET", Handler.get_comparisons),
        (re.compile(r"^/api/leaderboards$"), "GET", Handler.get_leaderboards),
    ]

    return Handler
