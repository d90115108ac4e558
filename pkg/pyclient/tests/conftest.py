"""Launches the registry service as a subprocess (its CLI + REST API are the
only contact surface) and seeds it with the template fixtures."""

import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest
import requests

FIXTURES = Path(__file__).parent / "fixtures"


def query_hash(query: str) -> str:
    return hashlib.sha256(query.encode("utf-8")).hexdigest()[:16]


def discovery_query(article_doi: str) -> str:
    return (
        f"relatedIdentifiers.relatedIdentifier:{article_doi}"
        " AND relatedIdentifiers.relationType:IsSupplementTo"
    )


def write_metadata_fixture(root: Path, article_doi: str, dataset_doi: str, part_urls: list[str]) -> None:
    responses = root / "responses"
    responses.mkdir(parents=True, exist_ok=True)
    rels = [{
        "relationType": "IsSupplementTo",
        "relatedIdentifier": article_doi,
        "resourceTypeGeneral": "JournalArticle",
        "relatedIdentifierType": "DOI",
    }] + [{
        "relationType": "HasPart",
        "relatedIdentifier": url,
        "resourceTypeGeneral": "Dataset",
        "relatedIdentifierType": "URL",
    } for url in part_urls]
    page = {"data": [{"id": dataset_doi, "attributes": {"doi": dataset_doi, "relatedIdentifiers": rels}}]}
    name = query_hash(discovery_query(article_doi)) + ".json"
    (responses / name).write_text(json.dumps(page), "utf-8")


class Registry:
    def __init__(self, base_url: str, fixture_root: Path):
        self.base_url = base_url
        self.fixture_root = fixture_root

    def get(self, path: str, **kw):
        return requests.get(self.base_url + path, timeout=30, **kw)

    def post(self, path: str, **kw):
        return requests.post(self.base_url + path, timeout=30, **kw)


@pytest.fixture()
def registry(tmp_path):
    fixture_root = tmp_path / "fixtures"
    (fixture_root / "parts").mkdir(parents=True)
    proc = subprocess.Popen(
        [sys.executable, "-m", "reborn.cli", "serve", "--port", "0",
         "--journal", str(tmp_path / "registry.journal"), "--fixtures", str(fixture_root)],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True,
    )
    try:
        line = proc.stdout.readline().strip()
        assert line.startswith("SERVING "), f"unexpected service banner: {line!r}"
        reg = Registry(line.split()[1], fixture_root)
        for path in sorted((FIXTURES / "templates").glob("*.json")):
            resp = reg.post("/api/templates", json=json.loads(path.read_text("utf-8")))
            assert resp.status_code == 201, resp.text
        yield reg
    finally:
        proc.terminate()
        proc.wait(timeout=10)
