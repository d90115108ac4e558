"""Command-line entry point.

Machine-readable output goes to stdout, diagnostics to stderr. Exit codes:
0 success, 1 operational error (including validation nonconformance),
2 usage error.
"""

import json
import sys
from pathlib import Path

import click
import requests

from .errors import RebornError
from .interlink import (
    build_crossref_relation,
    build_datacite_links,
    discovery_query,
)
from .jsonld import parse_contribution
from .service import ServiceConfig, serve
from .templates import (
    constructor_spec,
    load_template,
    materialize,
    template_to_json,
    validate_instance,
)

DEFAULT_HOST = "http://127.0.0.1:8640"


def _emit(payload) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2))


def _fail(exc: RebornError) -> None:
    click.echo(f"error [{exc.code}]: {exc.message}", err=True)
    sys.exit(1)


def _request(method: str, url: str, **kwargs):
    try:
        resp = requests.request(method, url, timeout=60, **kwargs)
    except requests.RequestException as exc:
        click.echo(f"error [TRANSPORT]: {exc}", err=True)
        sys.exit(1)
    if resp.status_code >= 400:
        try:
            err = resp.json()
            click.echo(f"error [{err.get('code', resp.status_code)}]: {err.get('message', '')}", err=True)
        except ValueError:
            click.echo(f"error [HTTP_STATUS]: {resp.status_code}", err=True)
        sys.exit(1)
    return resp


host_option = click.option("--host", default=DEFAULT_HOST, show_default=True, help="Registry service base URL.")


@click.group()
def main():
    """Template registry, aggregation graph, and DOI interlinking toolkit."""


# -- serve ------------------------------------------------------------------


@main.command("serve")
@click.option("--bind", "host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8640, show_default=True, help="Port to bind (0 picks a free port).")
@click.option("--journal", default=None, type=click.Path(), help="Journal file  [default: reborn.journal]")
@click.option("--fixtures", default="fixtures", show_default=True, type=click.Path(),
              help="Stub metadata fixture directory (used unless --endpoint is given).")
@click.option("--endpoint", envvar="REBORN_ENDPOINT", default=None,
              help="Live DataCite-compatible metadata endpoint base URL.")
@click.option("--parallelism", default=None, type=int, help="Max in-flight part fetches  [default: 4]")
@click.option("--page-cap", default=None, type=int, help="Pagination hard cap  [default: 100]")
@click.option("--config", "config_file", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON config supplying journal / parallelism / page_cap defaults.")
def serve_cmd(host, port, journal, fixtures, endpoint, parallelism, page_cap, config_file):
    """Run the registry/aggregation service."""
    defaults = {}
    if config_file:
        try:
            defaults = json.loads(Path(config_file).read_text("utf-8"))
        except ValueError as exc:
            raise click.UsageError(f"config file is not JSON: {exc}")
    config = ServiceConfig(
        host=host,
        port=port,
        journal_path=journal or defaults.get("journal", "reborn.journal"),
        fixture_root=fixtures,
        metadata_endpoint=endpoint,
        parallelism=parallelism if parallelism is not None else defaults.get("parallelism", 4),
        page_cap=page_cap if page_cap is not None else defaults.get("page_cap", 100),
    )
    try:
        service = serve(config)
    except RebornError as exc:
        _fail(exc)
    click.echo(f"SERVING {service.base_url}")
    try:
        service._thread.join()
    except KeyboardInterrupt:
        service.close()


# -- template ----------------------------------------------------------------


@main.group()
def template():
    """Lint, push, materialize, and inspect templates."""


@template.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
def lint(file):
    """Check a template document; prints the normalized form."""
    try:
        tpl = load_template(Path(file).read_bytes())
        constructor_spec(tpl)  # surfaces name collisions early
    except RebornError as exc:
        _fail(exc)
    _emit(template_to_json(tpl))


@template.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@host_option
def push(file, host):
    """Register a template document with the service."""
    try:
        tpl = load_template(Path(file).read_bytes())
    except RebornError as exc:
        _fail(exc)
    resp = _request("POST", f"{host}/api/templates", json=template_to_json(tpl))
    _emit(resp.json())


@template.command("materialize")
@click.argument("template_id")
@host_option
def template_materialize(template_id, host):
    """Fetch the materialized bundle for a template id."""
    _emit(_request("GET", f"{host}/api/templates/{template_id}/materialized").json())


@template.command("constructor")
@click.argument("template_id")
@host_option
def template_constructor(template_id, host):
    """Fetch the constructor spec for a template id."""
    _emit(_request("GET", f"{host}/api/templates/{template_id}/constructor").json())


# -- validate -----------------------------------------------------------------


def _local_resolver(templates_dir: str):
    index = {}
    for path in sorted(Path(templates_dir).glob("*.json")):
        tpl = load_template(path.read_bytes())
        index[tpl.id] = tpl
    return index.get


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--template", "template_id", default=None, help="Template id (default: the document's claim).")
@click.option("--templates-dir", default="templates", show_default=True, type=click.Path(),
              help="Directory of template documents for offline validation.")
@click.option("--host", default=None, help="Validate via a running service instead of local templates.")
def validate(file, template_id, templates_dir, host):
    """Validate a supplementary-data document; nonconformance exits 1."""
    data = Path(file).read_bytes()
    if host:
        url = f"{host}/api/validate"
        if template_id:
            url += f"?template={template_id}"
        report = _request("POST", url, data=data, headers={"Content-Type": "application/json"}).json()
    else:
        if not Path(templates_dir).is_dir():
            raise click.UsageError(f"templates directory {templates_dir!r} not found (or pass --host)")
        try:
            graph = parse_contribution(data)
            tid = template_id or graph.claims.get(graph.root)
            if not tid:
                raise click.UsageError("document claims no template; pass --template")
            bundle = materialize(_local_resolver(templates_dir), tid)
            report = validate_instance(bundle, graph, graph.root).to_json()
        except RebornError as exc:
            _fail(exc)
    _emit(report)
    if not report.get("conforms"):
        sys.exit(1)


# -- harvest ---------------------------------------------------------------------


@main.group()
def harvest():
    """DOI- and directory-based harvesting into the service."""


@harvest.command()
@click.argument("doi")
@click.option("--research-field", default="", help="Research field label for the paper record.")
@host_option
def doi(doi, research_field, host):
    """Harvest all supplementary data interlinked with an article DOI."""
    resp = _request("POST", f"{host}/api/harvest", json={"doi": doi, "research_field": research_field})
    _emit(resp.json())


@harvest.command("dir")
@click.argument("path", type=click.Path())
@click.option("--title", required=True)
@click.option("--author", "authors", multiple=True, help="Repeatable, in order.")
@click.option("--year", "publication_year", type=int, default=0)
@click.option("--month", "publication_month", type=int, default=None)
@click.option("--published-in", default="")
@click.option("--research-field", default="")
@click.option("--doi", default=None)
@host_option
def harvest_dir(path, title, authors, publication_year, publication_month, published_in, research_field, doi, host):
    """Harvest every .json contribution file in a directory under one paper."""
    body = {
        "path": str(Path(path).resolve()),
        "title": title,
        "authors": list(authors),
        "publication_year": publication_year,
        "publication_month": publication_month,
        "published_in": published_in,
        "research_field": research_field,
        "doi": doi,
    }
    _emit(_request("POST", f"{host}/api/papers/directory", json=body).json())


# -- links ----------------------------------------------------------------------------


@main.group()
def links():
    """Emit DOI-metadata link records."""


@links.command()
@click.option("--article-doi", required=True)
@click.option("--part", "parts", multiple=True, required=True, help="Supplementary part URL (repeatable).")
def datacite(article_doi, parts):
    """relatedIdentifiers block: IsSupplementTo + one HasPart per URL."""
    try:
        records = build_datacite_links(article_doi, list(parts))
    except RebornError as exc:
        _fail(exc)
    _emit({"relatedIdentifiers": [r.to_json() for r in records]})


@links.command()
@click.option("--dataset-doi", required=True)
def crossref(dataset_doi):
    """relation block with the is-supplemented-by entry."""
    try:
        relation = build_crossref_relation(dataset_doi)
    except RebornError as exc:
        _fail(exc)
    _emit({"relation": relation})


# -- query ------------------------------------------------------------------------------


@main.group()
def query():
    """Build metadata-service queries."""


@query.command()
@click.option("--article-doi", required=True)
def discovery(article_doi):
    """Supplementary-data discovery query for an article DOI."""
    try:
        click.echo(discovery_query(article_doi))
    except RebornError as exc:
        _fail(exc)


# -- export ------------------------------------------------------------------------------


@main.group()
def export():
    """Pull value-added views out of the service."""


@export.command()
@click.option("--id", "node_id", required=True, help="Resource id carrying a dataset.")
@host_option
def dataframe(node_id, host):
    """Write a stored dataset as RFC 4180 CSV to stdout."""
    resp = _request("GET", f"{host}/api/resources/{node_id}/dataframe")
    sys.stdout.buffer.write(resp.content)
    sys.stdout.buffer.flush()


@export.command()
@click.option("--contributions", required=True, help="Comma-separated contribution root ids.")
@host_option
def comparison(contributions, host):
    """Tabular juxtaposition of contributions, aligned by predicate."""
    _emit(_request("GET", f"{host}/api/comparisons", params={"contributions": contributions}).json())


@export.command()
@click.option("--task", required=True)
@click.option("--dataset", required=True)
@click.option("--metric", required=True)
@host_option
def leaderboard(task, dataset, metric, host):
    """TDMS rows for a task/dataset/metric, best score first."""
    _emit(_request(
        "GET", f"{host}/api/leaderboards", params={"task": task, "dataset": dataset, "metric": metric}
    ).json())


if __name__ == "__main__":
    main()
