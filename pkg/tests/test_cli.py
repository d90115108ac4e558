import json
import subprocess
import sys

import pytest
import requests
from click.testing import CliRunner

import testutil
from reborn.cli import main
from reborn.jsonld import serialize_contribution
from reborn.templates import template_to_json

SOIL_DOI = testutil.SOIL_DOI


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, *args, **kw):
    return runner.invoke(main, list(args), **kw)


class TestLinks:
    def test_datacite_golden(self, runner):
        url = "https://service.tib.eu/x/contribution-1.json"
        result = invoke(runner, "links", "datacite", "--article-doi", SOIL_DOI, "--part", url)
        assert result.exit_code == 0
        body = json.loads(result.stdout)
        assert body["relatedIdentifiers"] == [
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

    def test_crossref_golden(self, runner):
        result = invoke(runner, "links", "crossref", "--dataset-doi", "10.57702/yztrbsd4")
        assert result.exit_code == 0
        assert json.loads(result.stdout) == {
            "relation": {"is-supplemented-by": [{"id-type": "doi", "id": "10.57702/yztrbsd4"}]}
        }

    def test_bad_doi_exit_1(self, runner):
        result = invoke(runner, "links", "datacite", "--article-doi", "junk", "--part", "u")
        assert result.exit_code == 1
        assert "BAD_DOI" in result.stderr


class TestQuery:
    def test_discovery_golden(self, runner):
        result = invoke(runner, "query", "discovery", "--article-doi", SOIL_DOI)
        assert result.exit_code == 0
        assert result.stdout.strip() == (
            "relatedIdentifiers.relatedIdentifier:10.5194/soil-10-139-2024"
            " AND relatedIdentifiers.relationType:IsSupplementTo"
        )


class TestUsage:
    def test_missing_required_flag_exits_2(self, runner):
        result = invoke(runner, "harvest", "doi")
        assert result.exit_code == 2

    def test_help_everywhere(self, runner):
        for args in ([], ["serve"], ["template"], ["template", "lint"], ["template", "push"],
                     ["template", "materialize"], ["template", "constructor"], ["validate"],
                     ["harvest"], ["harvest", "doi"], ["harvest", "dir"], ["links"],
                     ["links", "datacite"], ["links", "crossref"], ["query"], ["query", "discovery"],
                     ["export"], ["export", "dataframe"], ["export", "comparison"],
                     ["export", "leaderboard"]):
            result = invoke(runner, *args, "--help")
            assert result.exit_code == 0, args
            assert "Usage" in result.stdout


class TestTemplateCommands:
    def test_lint_good(self, runner):
        path = testutil.FIXTURES / "templates" / "students_ttest.json"
        result = invoke(runner, "template", "lint", str(path))
        assert result.exit_code == 0
        assert json.loads(result.stdout)["id"] == "R12002"

    def test_lint_bad(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"id": "R1", "label": "x", "targetClass": "C", "shapes": '
                       '[{"property": "P", "propertyLabel": "p", "minCount": 2, "maxCount": 1, '
                       '"range": {"kind": "dataset"}, "order": 1}]}')
        result = invoke(runner, "template", "lint", str(bad))
        assert result.exit_code == 1
        assert "BAD_CARDINALITY" in result.stderr


class TestValidateCommand:
    def test_offline_conforming(self, runner, tmp_path):
        doc = tmp_path / "article.contribution.1.json"
        doc.write_bytes(serialize_contribution(testutil.build_ttest_graph()))
        result = invoke(runner, "validate", str(doc), "--template", "R12002",
                        "--templates-dir", str(testutil.FIXTURES / "templates"))
        assert result.exit_code == 0
        assert json.loads(result.stdout)["conforms"] is True

    def test_offline_nonconforming_exits_1(self, runner, tmp_path):
        graph = testutil.build_ttest_graph()
        graph.statements = [s for s in graph.statements
                            if not (s.subject == "local0" and s.predicate_label == "label")]
        doc = tmp_path / "bad.json"
        doc.write_bytes(serialize_contribution(graph))
        result = invoke(runner, "validate", str(doc),
                        "--templates-dir", str(testutil.FIXTURES / "templates"))
        assert result.exit_code == 1
        assert json.loads(result.stdout)["conforms"] is False

    def test_missing_templates_dir_exits_2(self, runner, tmp_path):
        doc = tmp_path / "doc.json"
        doc.write_bytes(serialize_contribution(testutil.build_ttest_graph()))
        result = invoke(runner, "validate", str(doc), "--templates-dir", str(tmp_path / "absent"))
        assert result.exit_code == 2


class TestAgainstService:
    def test_push_harvest_export_flow(self, runner, service, tmp_path):
        host = service.base_url
        result = invoke(runner, "harvest", "doi", SOIL_DOI, "--research-field", "Soil Science",
                        "--host", host)
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert len(report["contributions"]) == 4

        result = invoke(runner, "template", "materialize", "R12002", "--host", host)
        assert json.loads(result.stdout)["root"] == "R12002"

        result = invoke(runner, "export", "comparison",
                        "--contributions", ",".join(report["contributions"]), "--host", host)
        assert result.exit_code == 0
        assert json.loads(result.stdout)["columns"] == report["contributions"]

        result = invoke(runner, "export", "leaderboard", "--task", "Synonym Discovery",
                        "--dataset", "SciERC", "--metric", "F1 score", "--host", host)
        assert result.exit_code == 0
        assert json.loads(result.stdout) == []  # soil corpus carries no TDMS tuples

    def test_validate_via_service(self, runner, service, tmp_path):
        doc = tmp_path / "article.contribution.1.json"
        doc.write_bytes(serialize_contribution(testutil.build_ttest_graph()))
        result = invoke(runner, "validate", str(doc), "--template", "R12002", "--host", service.base_url)
        assert result.exit_code == 0
        assert json.loads(result.stdout)["conforms"] is True

    def test_harvest_unknown_doi_exit_1(self, runner, service):
        result = invoke(runner, "harvest", "doi", "10.9999/absent", "--host", service.base_url)
        assert result.exit_code == 1
        assert "NO_SUPPLEMENTS" in result.stderr


class TestServeSubprocess:
    def test_config_file_supplies_journal_path(self, tmp_path, resolver):
        journal = tmp_path / "from-config.journal"
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"journal": str(journal), "parallelism": 2, "page_cap": 10}))
        proc = subprocess.Popen(
            [sys.executable, "-m", "reborn.cli", "serve", "--port", "0",
             "--fixtures", str(tmp_path), "--config", str(config)],
            stdout=subprocess.PIPE, text=True,
        )
        try:
            line = proc.stdout.readline().strip()
            assert line.startswith("SERVING http://127.0.0.1:")
            base = line.split()[1]
            assert requests.get(f"{base}/api/templates", timeout=10).json() == []
            doc = template_to_json(resolver("R12004"))
            assert requests.post(f"{base}/api/templates", json=doc, timeout=10).status_code == 201
            assert journal.exists()
        finally:
            proc.terminate()
            proc.wait(timeout=10)
