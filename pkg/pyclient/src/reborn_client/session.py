"""Client session: registry connection, dynamic constructor namespace,
harvest triggers, and data-frame retrieval.

Constructors are generated at runtime from constructor specs fetched over
HTTP; with a bundle cache file the same session surface works offline.
"""

import io
import json
from pathlib import Path

import pandas as pd
import requests

from .constructors import ConstructorSpec, instantiate, parse_constructor
from .errors import ClientError


class RebornClient:
    """Entry point: `client = RebornClient(host="http://127.0.0.1:8640")`."""

    def __init__(self, host: str | None = None, bundle_cache: str | Path | None = None):
        if host is None and bundle_cache is None:
            raise ClientError("TRANSPORT", "need a registry host or a bundle cache for offline use")
        self.host = host.rstrip("/") if host else None
        self.cache_path = Path(bundle_cache) if bundle_cache else None
        self.templates = TemplateNamespace(self)
        self.harvesters = Harvesters(self)
        self.resources = Resources(self)
        self._http = requests.Session()

    # -- transport ----------------------------------------------------------

    def _raise_for_error(self, resp) -> None:
        if resp.status_code < 400:
            return
        try:
            body = resp.json()
            raise ClientError(body.get("code", "HTTP_STATUS"), body.get("message", ""))
        except ValueError:
            raise ClientError("HTTP_STATUS", f"HTTP {resp.status_code} from {resp.url}")

    def _request(self, method: str, path: str, **kwargs):
        if self.host is None:
            raise ClientError("TRANSPORT", "session is offline (no registry host)")
        try:
            resp = self._http.request(method, self.host + path, timeout=60, **kwargs)
        except requests.RequestException as exc:
            raise ClientError("TRANSPORT", f"{method} {path}: {exc}")
        self._raise_for_error(resp)
        return resp

    def get_json(self, path: str) -> dict:
        return self._request("GET", path).json()

    def post_json(self, path: str, body: dict) -> dict:
        return self._request("POST", path, json=body).json()


class TemplateNamespace:
    """Holds one generated callable per materialized template."""

    def __init__(self, client: RebornClient):
        self._client = client
        self._materialized: set[str] = set()
        self._constructors: dict[str, object] = {}

    def materialize_template(self, template_id: str):
        """Fetch the template's bundle and install its constructors.

        Repeat calls are cached no-ops returning the same namespace.
        """
        if template_id in self._materialized:
            return self
        for spec in self._fetch_specs(template_id):
            existing = self._constructors.get(spec.function_name)
            if existing is not None and existing.spec.template_id != spec.template_id:
                raise ClientError(
                    "NAME_COLLISION",
                    f"constructor {spec.function_name} already bound to {existing.spec.template_id}",
                )
            self._constructors[spec.function_name] = _make_constructor(spec)
        self._materialized.add(template_id)
        return self

    def _fetch_specs(self, template_id: str) -> list[ConstructorSpec]:
        client = self._client
        if client.host is not None:
            bundle = client.get_json(f"/api/templates/{template_id}/materialized")
            specs = {
                tid: client.get_json(f"/api/templates/{tid}/constructor")
                for tid in bundle["templates"]
            }
            if client.cache_path is not None:
                self._store_cache(template_id, bundle, specs)
            return [parse_constructor(doc) for doc in specs.values()]
        cache = self._load_cache()
        entry = cache.get(template_id)
        if entry is None:
            raise ClientError("NOT_FOUND", f"template {template_id} is not in the offline bundle cache")
        return [parse_constructor(doc) for doc in entry["constructors"].values()]

    def _load_cache(self) -> dict:
        if self._client.cache_path is None or not self._client.cache_path.exists():
            return {}
        return json.loads(self._client.cache_path.read_text("utf-8"))

    def _store_cache(self, template_id: str, bundle: dict, specs: dict) -> None:
        cache = self._load_cache()
        cache[template_id] = {"bundle": bundle, "constructors": specs}
        self._client.cache_path.write_text(json.dumps(cache, ensure_ascii=False, indent=2), "utf-8")

    def __getattr__(self, name: str):
        try:
            return self.__dict__["_constructors"][name]
        except KeyError:
            raise AttributeError(f"no materialized constructor named {name!r}")


def _make_constructor(spec: ConstructorSpec):
    def constructor(*args, **kwargs):
        return instantiate(spec, args, kwargs)

    constructor.__name__ = spec.function_name
    constructor.__qualname__ = spec.function_name
    constructor.spec = spec
    return constructor


class Harvesters:
    def __init__(self, client: RebornClient):
        self._client = client

    def doi_harvest(self, doi: str, research_field: str | None = None, orkg_rf: str | None = None) -> dict:
        field = research_field if research_field is not None else (orkg_rf or "")
        return self._client.post_json("/api/harvest", {"doi": doi, "research_field": field})

    def directory_harvest(
        self,
        directory: str,
        title: str,
        authors: list[str] | None = None,
        publication_year: int = 0,
        publication_month: int | None = None,
        published_in: str = "",
        research_field: str | None = None,
        orkg_rf: str | None = None,
        doi: str | None = None,
    ) -> dict:
        field = research_field if research_field is not None else (orkg_rf or "")
        body = {
            "path": str(Path(directory).resolve()),
            "title": title,
            "authors": list(authors or []),
            "publication_year": publication_year,
            "publication_month": publication_month,
            "published_in": published_in,
            "research_field": field,
            "doi": doi,
        }
        return self._client.post_json("/api/papers/directory", body)


class Resources:
    def __init__(self, client: RebornClient):
        self._client = client

    def by_id(self, id: str) -> "ResourceHandle":
        return ResourceHandle(self._client, id)


class ResourceHandle:
    def __init__(self, client: RebornClient, resource_id: str):
        self._client = client
        self.id = resource_id

    def as_dataframe(self) -> pd.DataFrame:
        """The resource's tabular payload, cells as lexical strings."""
        resp = self._client._request("GET", f"/api/resources/{self.id}/dataframe")
        text = resp.content.decode("utf-8")
        return pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
