"""DOI-metadata interlinking and supplementary-data discovery.

Builds the related-identifier records that connect an article DOI with its
deposited supplementary data, constructs the discovery query, resolves an
article DOI to fetchable part URLs through a DataCite-compatible metadata
service, and fetches the parts with bounded parallelism.
"""

import hashlib
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote, urlparse

import requests

from .errors import LinkError, TransportError

logger = logging.getLogger(__name__)

DOI_RE = re.compile(r"10\.\d{4,9}/\S+$")

IS_SUPPLEMENT_TO = "IsSupplementTo"
HAS_PART = "HasPart"


def normalize_doi(doi: str) -> str:
    """Strip resolver prefixes and lowercase the registrant prefix only."""
    for prefix in ("https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/"):
        if doi.startswith(prefix):
            doi = doi[len(prefix):]
            break
    if "/" in doi:
        head, tail = doi.split("/", 1)
        doi = head.lower() + "/" + tail
    return doi


def require_doi(doi: str) -> str:
    doi = normalize_doi(doi)
    if not DOI_RE.match(doi):
        raise LinkError("BAD_DOI", f"{doi!r} is not a DOI")
    return doi


@dataclass(frozen=True)
class RelatedIdentifier:
    relation_type: str
    related_identifier: str
    resource_type_general: str
    related_identifier_type: str

    def to_json(self) -> dict:
        return {
            "relationType": self.relation_type,
            "relatedIdentifier": self.related_identifier,
            "resourceTypeGeneral": self.resource_type_general,
            "relatedIdentifierType": self.related_identifier_type,
        }


@dataclass
class HarvestManifest:
    """One deposited dataset record resolved to its fetchable part URLs."""

    article_doi: str
    dataset_doi: str
    part_urls: list[str]
    title: str = ""  # deposition title, when the metadata record carries one


def build_datacite_links(article_doi: str, part_urls: list[str]) -> list[RelatedIdentifier]:
    """Data-to-article link records: IsSupplementTo for the article, one
    HasPart per supplementary file, order preserved."""
    article_doi = require_doi(article_doi)
    if not part_urls:
        raise LinkError("EMPTY_PARTS", "at least one part URL is required")
    records = [RelatedIdentifier(IS_SUPPLEMENT_TO, article_doi, "JournalArticle", "DOI")]
    records += [RelatedIdentifier(HAS_PART, url, "Dataset", "URL") for url in part_urls]
    return records


def build_crossref_relation(dataset_doi: str) -> dict:
    """Article-to-data relation for Crossref DOI metadata."""
    dataset_doi = require_doi(dataset_doi)
    return {"is-supplemented-by": [{"id-type": "doi", "id": dataset_doi}]}


def discovery_query(article_doi: str) -> str:
    article_doi = require_doi(article_doi)
    return (
        f"relatedIdentifiers.relatedIdentifier:{article_doi}"
        f" AND relatedIdentifiers.relationType:{IS_SUPPLEMENT_TO}"
    )


@dataclass
class RetryPolicy:
    """3 attempts with exponential backoff on transport errors and HTTP 5xx; 4xx is terminal."""

    attempts: int = 3
    delays: tuple[float, ...] = (0.5, 1.0, 2.0)
    timeout: float = 30.0

    def sleep(self, attempt: int) -> None:
        time.sleep(self.delays[min(attempt, len(self.delays) - 1)])


class HttpMetadataClient:
    """DataCite-compatible REST client: GET <base>/dois?query=..., follows
    links.next pagination."""

    def __init__(self, base_url: str, policy: RetryPolicy | None = None, page_cap: int = 100):
        self.base_url = base_url.rstrip("/")
        self.policy = policy or RetryPolicy()
        self.page_cap = page_cap
        self._session = requests.Session()

    def _get(self, url: str) -> dict:
        last: Exception | None = None
        for attempt in range(self.policy.attempts):
            try:
                resp = self._session.get(url, timeout=self.policy.timeout)
            except requests.RequestException as exc:
                last = TransportError("TRANSPORT", f"GET {url}: {exc}")
            else:
                if resp.status_code >= 500:
                    last = TransportError("HTTP_STATUS", f"GET {url}: HTTP {resp.status_code}", resp.status_code)
                elif resp.status_code >= 400:
                    raise TransportError("HTTP_STATUS", f"GET {url}: HTTP {resp.status_code}", resp.status_code)
                else:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise TransportError("BAD_RESPONSE", f"GET {url}: unparseable JSON: {exc}")
            if attempt < self.policy.attempts - 1:
                self.policy.sleep(attempt)
        raise last

    def pages(self, query: str):
        url = f"{self.base_url}/dois?query={quote(query, safe='')}"
        for _ in range(self.page_cap):
            page = self._get(url)
            yield page
            url = (page.get("links") or {}).get("next")
            if not url:
                return
        logger.warning("pagination cap reached for query %r", query)


class FixtureMetadataClient:
    """Stub metadata service backed by a fixture directory.

    Responses live under <root>/responses/<sha256(query)[:16]>.json; a
    response may name its successor page in links.next (a fixture file
    name). Part files live under <root>/parts/.
    """

    def __init__(self, root: str | Path, page_cap: int = 100):
        self.root = Path(root)
        self.page_cap = page_cap

    @staticmethod
    def query_hash(query: str) -> str:
        return hashlib.sha256(query.encode("utf-8")).hexdigest()[:16]

    def _load(self, name: str) -> dict:
        path = self.root / "responses" / name
        try:
            return json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise TransportError("BAD_RESPONSE", f"fixture {path}: unparseable JSON: {exc}")

    def pages(self, query: str):
        name = self.query_hash(query) + ".json"
        if not (self.root / "responses" / name).exists():
            logger.warning("no fixture response for query %r (file %s)", query, name)
            yield {"data": []}
            return
        for _ in range(self.page_cap):
            page = self._load(name)
            yield page
            name = (page.get("links") or {}).get("next")
            if not name:
                return
        logger.warning("pagination cap reached for query %r", query)


def discover(client, article_doi: str) -> list[HarvestManifest]:
    """Resolve an article DOI to manifests of fetchable supplementary parts.

    Keeps only HasPart entries with relatedIdentifierType=URL and
    resourceTypeGeneral=Dataset; records with no such part are skipped with
    a warning. Pagination is followed to exhaustion.
    """
    article_doi = require_doi(article_doi)
    query = discovery_query(article_doi)
    manifests: list[HarvestManifest] = []
    for page in client.pages(query):
        if not isinstance(page, dict) or not isinstance(page.get("data", []), list):
            raise TransportError("BAD_RESPONSE", "metadata response is not an object with a data list")
        for record in page.get("data", []):
            try:
                attrs = record.get("attributes", {})
                dataset_doi = attrs.get("doi") or record.get("id", "")
                rels = attrs.get("relatedIdentifiers", [])
                supplements = any(
                    r.get("relationType") == IS_SUPPLEMENT_TO
                    and normalize_doi(r.get("relatedIdentifier", "")) == article_doi
                    for r in rels
                )
                if not supplements:
                    continue
                parts = []
                for r in rels:
                    if r.get("relationType") != HAS_PART:
                        continue
                    if r.get("relatedIdentifierType") != "URL" or r.get("resourceTypeGeneral") != "Dataset":
                        logger.warning(
                            "ignoring HasPart %r on %s: not a URL-typed Dataset",
                            r.get("relatedIdentifier"), dataset_doi,
                        )
                        continue
                    parts.append(r.get("relatedIdentifier"))
            except AttributeError as exc:
                raise TransportError("BAD_RESPONSE", f"malformed metadata record: {exc}")
            if not parts:
                logger.warning("dataset %s supplements %s but lists no harvestable parts", dataset_doi, article_doi)
                continue
            titles = attrs.get("titles") or []
            title = titles[0].get("title", "") if titles and isinstance(titles[0], dict) else ""
            manifests.append(HarvestManifest(article_doi, dataset_doi, parts, title))
    return manifests


@dataclass
class PartFetch:
    url: str
    content: bytes | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.content is not None


class RequestsFetcher:
    """HTTP part fetcher with the shared retry policy."""

    def __init__(self, policy: RetryPolicy | None = None):
        self.policy = policy or RetryPolicy()
        self._session = requests.Session()

    def fetch(self, url: str) -> bytes:
        last: Exception | None = None
        for attempt in range(self.policy.attempts):
            try:
                resp = self._session.get(url, timeout=self.policy.timeout)
            except requests.RequestException as exc:
                last = TransportError("TRANSPORT", f"GET {url}: {exc}")
            else:
                if resp.status_code >= 500:
                    last = TransportError("HTTP_STATUS", f"GET {url}: HTTP {resp.status_code}", resp.status_code)
                elif resp.status_code >= 400:
                    raise TransportError("HTTP_STATUS", f"GET {url}: HTTP {resp.status_code}", resp.status_code)
                else:
                    return resp.content
            if attempt < self.policy.attempts - 1:
                self.policy.sleep(attempt)
        raise last


class FixturePartFetcher:
    """Serves part URLs from <root>/parts/<basename of the URL path>."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def fetch(self, url: str) -> bytes:
        name = Path(urlparse(url).path).name
        path = self.root / "parts" / name
        if not path.exists():
            raise TransportError("HTTP_STATUS", f"no fixture part for {url} (file {name})", 404)
        return path.read_bytes()


def fetch_parts(fetcher, manifest: HarvestManifest, parallelism: int = 4) -> list[PartFetch]:
    """Fetch every part URL, at most `parallelism` in flight, results in
    manifest order. Per-URL failures are recorded; raises ALL_FAILED only
    when nothing succeeded."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(url: str) -> PartFetch:
        try:
            return PartFetch(url, content=fetcher.fetch(url))
        except TransportError as exc:
            logger.warning("part fetch failed: %s", exc.message)
            return PartFetch(url, error=exc.code)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        results = list(pool.map(one, manifest.part_urls))
    if results and not any(r.ok for r in results):
        exc = TransportError("ALL_FAILED", f"all {len(results)} parts failed for {manifest.dataset_doi}")
        exc.results = results
        raise exc
    return results
