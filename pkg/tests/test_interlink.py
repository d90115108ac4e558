import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

import testutil
from reborn.errors import LinkError, TransportError
from reborn.interlink import (
    FixtureMetadataClient,
    FixturePartFetcher,
    HttpMetadataClient,
    RequestsFetcher,
    RetryPolicy,
    build_crossref_relation,
    build_datacite_links,
    discover,
    discovery_query,
    fetch_parts,
    normalize_doi,
    HarvestManifest,
)

SOIL_DOI = testutil.SOIL_DOI


class TestDoiNormalization:
    def test_strip_resolver_prefix(self):
        assert normalize_doi("https://doi.org/10.5194/soil-10-139-2024") == SOIL_DOI

    def test_prefix_lowercased_suffix_kept(self):
        assert normalize_doi("10.5194/SOIL-10-139-2024") == "10.5194/SOIL-10-139-2024"
        assert normalize_doi("10.5194/soil") == "10.5194/soil"


class TestDataciteLinks:
    def test_soil_article_two_records(self):
        url = "https://service.tib.eu/ldmservice/contribution-1.json"
        records = build_datacite_links(SOIL_DOI, [url])
        assert [r.to_json() for r in records] == [
            {
                "relationType": "IsSupplementTo",
                "relatedIdentifier": SOIL_DOI,
                "resourceTypeGeneral": "JournalArticle",
                "relatedIdentifierType": "DOI",
            },
            {
                "relationType": "HasPart",
                "relatedIdentifier": url,
                "resourceTypeGeneral": "Dataset",
                "relatedIdentifierType": "URL",
            },
        ]

    def test_three_parts_four_records(self):
        records = build_datacite_links(SOIL_DOI, ["u1", "u2", "u3"])
        assert len(records) == 4
        assert [r.related_identifier for r in records[1:]] == ["u1", "u2", "u3"]

    def test_bad_doi(self):
        with pytest.raises(LinkError) as exc:
            build_datacite_links("not-a-doi", ["u"])
        assert exc.value.code == "BAD_DOI"

    def test_empty_parts(self):
        with pytest.raises(LinkError) as exc:
            build_datacite_links(SOIL_DOI, [])
        assert exc.value.code == "EMPTY_PARTS"


class TestCrossrefRelation:
    def test_soil_dataset(self):
        assert build_crossref_relation("10.57702/yztrbsd4") == {
            "is-supplemented-by": [{"id-type": "doi", "id": "10.57702/yztrbsd4"}]
        }

    def test_cs_dataset(self):
        rel = build_crossref_relation("10.57702/9zhuubz9")
        assert rel["is-supplemented-by"][0]["id"] == "10.57702/9zhuubz9"

    def test_empty(self):
        with pytest.raises(LinkError) as exc:
            build_crossref_relation("")
        assert exc.value.code == "BAD_DOI"


class TestDiscoveryQuery:
    def test_soil(self):
        assert discovery_query(SOIL_DOI) == (
            "relatedIdentifiers.relatedIdentifier:10.5194/soil-10-139-2024"
            " AND relatedIdentifiers.relationType:IsSupplementTo"
        )

    def test_agroecology(self):
        q = discovery_query("10.1002/eap.1695")
        assert q == (
            "relatedIdentifiers.relatedIdentifier:10.1002/eap.1695"
            " AND relatedIdentifiers.relationType:IsSupplementTo"
        )

    def test_contains_doi_exactly_once(self):
        q = discovery_query(SOIL_DOI)
        assert q.count(SOIL_DOI) == 1

    def test_malformed(self):
        with pytest.raises(LinkError):
            discovery_query("x")


class TestDiscover:
    def test_soil_fixture_single_manifest(self, tmp_path):
        url = "https://service.tib.eu/ldm/contribution-1.json"
        record = testutil.datacite_record(SOIL_DOI, "10.57702/yztrbsd4", [url])
        testutil.write_fixture_response(tmp_path, discovery_query(SOIL_DOI), {"data": [record]})
        manifests = discover(FixtureMetadataClient(tmp_path), SOIL_DOI)
        assert len(manifests) == 1
        assert manifests[0].dataset_doi == "10.57702/yztrbsd4"
        assert manifests[0].part_urls == [url]

    def test_zero_hits(self, tmp_path):
        testutil.write_fixture_response(tmp_path, discovery_query(SOIL_DOI), {"data": []})
        assert discover(FixtureMetadataClient(tmp_path), SOIL_DOI) == []

    def test_two_pages_unioned(self, tmp_path):
        q = discovery_query(SOIL_DOI)
        r1 = testutil.datacite_record(SOIL_DOI, "10.57702/aaa1", ["https://x.example/a.json"])
        r2 = testutil.datacite_record(SOIL_DOI, "10.57702/bbb2", ["https://x.example/b.json"])
        testutil.write_fixture_response(tmp_path, q, {"data": [r1], "links": {"next": "page2.json"}})
        testutil.write_fixture_response(tmp_path, q, {"data": [r2]}, name="page2.json")
        manifests = discover(FixtureMetadataClient(tmp_path), SOIL_DOI)
        assert [m.dataset_doi for m in manifests] == ["10.57702/aaa1", "10.57702/bbb2"]

    def test_non_dataset_parts_skipped(self, tmp_path):
        record = testutil.datacite_record(SOIL_DOI, "10.57702/ccc3", ["https://x.example/a.json"])
        record["attributes"]["relatedIdentifiers"].append({
            "relationType": "HasPart",
            "relatedIdentifier": "https://x.example/figure.png",
            "resourceTypeGeneral": "Image",
            "relatedIdentifierType": "URL",
        })
        testutil.write_fixture_response(tmp_path, discovery_query(SOIL_DOI), {"data": [record]})
        manifests = discover(FixtureMetadataClient(tmp_path), SOIL_DOI)
        assert manifests[0].part_urls == ["https://x.example/a.json"]

    def test_round_trip_with_link_builder(self, tmp_path):
        # records built by build_datacite_links are discovered back verbatim
        urls = [f"https://x.example/c{k}.json" for k in range(3)]
        record = testutil.datacite_record(SOIL_DOI, "10.57702/ddd4", urls)
        testutil.write_fixture_response(tmp_path, discovery_query(SOIL_DOI), {"data": [record]})
        manifests = discover(FixtureMetadataClient(tmp_path), SOIL_DOI)
        assert manifests[0].part_urls == urls


class FlakyHandler(BaseHTTPRequestHandler):
    """Serves /flaky with two 500s then success; /missing is a plain 404."""

    failures = {}

    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path.startswith("/missing"):
            self.send_response(404)
            self.end_headers()
            return
        if self.path.startswith("/flaky"):
            count = FlakyHandler.failures.get(self.path, 0)
            FlakyHandler.failures[self.path] = count + 1
            if count < 2:
                self.send_response(500)
                self.end_headers()
                return
        body = json.dumps({"served": self.path}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture()
def stub_server():
    FlakyHandler.failures = {}
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), FlakyHandler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}"
    httpd.shutdown()
    httpd.server_close()


class TestFetchParts:
    def test_single_fixture_url(self, stub_server):
        manifest = HarvestManifest(SOIL_DOI, "10.57702/x", [f"{stub_server}/part1.json"])
        results = fetch_parts(RequestsFetcher(RetryPolicy(delays=(0, 0, 0))), manifest)
        assert results[0].ok
        assert b"part1.json" in results[0].content

    def test_mixed_status(self, stub_server):
        manifest = HarvestManifest(SOIL_DOI, "10.57702/x",
                                   [f"{stub_server}/good.json", f"{stub_server}/missing.json"])
        results = fetch_parts(RequestsFetcher(RetryPolicy(delays=(0, 0, 0))), manifest)
        assert results[0].ok
        assert not results[1].ok
        assert results[1].error == "HTTP_STATUS"

    def test_all_failed(self, stub_server):
        manifest = HarvestManifest(SOIL_DOI, "10.57702/x",
                                   [f"{stub_server}/missing/1", f"{stub_server}/missing/2"])
        with pytest.raises(TransportError) as exc:
            fetch_parts(RequestsFetcher(RetryPolicy(delays=(0, 0, 0))), manifest)
        assert exc.value.code == "ALL_FAILED"

    def test_retry_on_5xx(self, stub_server):
        fetcher = RequestsFetcher(RetryPolicy(delays=(0, 0, 0)))
        assert b"flaky" in fetcher.fetch(f"{stub_server}/flaky/a")

    def test_order_preserved_and_parallelism_bounded(self):
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}

        class SlowFetcher:
            def fetch(self, url):
                with lock:
                    state["active"] += 1
                    state["peak"] = max(state["peak"], state["active"])
                time.sleep(0.02)
                with lock:
                    state["active"] -= 1
                return url.encode()

        urls = [f"u{k}" for k in range(12)]
        manifest = HarvestManifest(SOIL_DOI, "10.57702/x", urls)
        results = fetch_parts(SlowFetcher(), manifest, parallelism=3)
        assert [r.url for r in results] == urls
        assert [r.content.decode() for r in results] == urls
        assert state["peak"] <= 3

    def test_fixture_part_fetcher(self, tmp_path):
        testutil.write_fixture_parts(tmp_path, {"c1.json": b"hello"})
        fetcher = FixturePartFetcher(tmp_path)
        assert fetcher.fetch("https://x.example/deep/path/c1.json") == b"hello"
        with pytest.raises(TransportError) as exc:
            fetcher.fetch("https://x.example/absent.json")
        assert exc.value.code == "HTTP_STATUS"


class TestHttpMetadataClient:
    def test_retries_then_succeeds(self, stub_server):
        client = HttpMetadataClient(stub_server, RetryPolicy(delays=(0, 0, 0)))
        page = client._get(f"{stub_server}/flaky/meta")
        assert page["served"] == "/flaky/meta"

    def test_4xx_terminal(self, stub_server):
        client = HttpMetadataClient(stub_server, RetryPolicy(delays=(0, 0, 0)))
        with pytest.raises(TransportError) as exc:
            client._get(f"{stub_server}/missing")
        assert exc.value.status == 404
