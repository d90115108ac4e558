"""Journal-backed aggregation graph store.

Holds templates, resources, statements, embedded datasets, and paper
records, with the value-added read views (dataframe export, comparison,
leaderboard). All state changes append one self-contained journal record
and are replayed on open; a single lock serializes writes (reads return
immutable or copied values).
"""

import logging
import re
import threading
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import StoreError
from .graph import (
    ContributionGraph,
    PaperRecord,
    Resource,
    ResourceRef,
    Statement,
    TabularDataset,
    object_from_json,
    object_to_json,
    render_object,
)
from .journal import Journal
from .templates import Template, snake_case, template_from_json, template_to_json

logger = logging.getLogger(__name__)

TDMS_KEYS = ("task", "dataset", "metric", "score", "model")


@dataclass(frozen=True)
class ProvenanceKey:
    """Identifies where a contribution came from: (article DOI or synthetic
    directory key, part URL or file name)."""

    source: str
    part: str


@dataclass(frozen=True)
class LeaderboardRow:
    model: str
    score: str  # lexical form; parses as a finite Decimal
    metric: str
    dataset: str
    task: str
    paper_id: str


@dataclass
class ComparisonRow:
    predicate: str
    cells: list[list[str]]  # aligned with ComparisonTable.columns


@dataclass
class ComparisonTable:
    columns: list[str]
    rows: list[ComparisonRow]


def paper_to_json(paper: PaperRecord) -> dict:
    return {
        "id": paper.id,
        "title": paper.title,
        "authors": list(paper.authors),
        "publicationYear": paper.publication_year,
        "publicationMonth": paper.publication_month,
        "publishedIn": paper.published_in,
        "doi": paper.doi,
        "researchField": paper.research_field,
        "contributions": list(paper.contribution_roots),
    }


def paper_from_json(doc: dict) -> PaperRecord:
    return PaperRecord(
        id=doc["id"],
        title=doc["title"],
        authors=list(doc.get("authors", [])),
        publication_year=doc.get("publicationYear", 0),
        publication_month=doc.get("publicationMonth"),
        published_in=doc.get("publishedIn", ""),
        doi=doc.get("doi"),
        research_field=doc.get("researchField", ""),
        contribution_roots=list(doc.get("contributions", [])),
    )


def _id_number(node_id: str) -> int:
    m = re.search(r"(\d+)$", node_id)
    return int(m.group(1)) if m else 0


class GraphStore:
    def __init__(self, journal_path: str | Path):
        self._lock = threading.RLock()
        self._closed = False
        self._journal = Journal(journal_path)
        self._templates: dict[str, Template] = {}
        self._resources: dict[str, Resource] = {}
        self._statements: dict[str, list[Statement]] = {}
        self._statement_count = 0
        self._datasets: dict[str, TabularDataset] = {}
        self._claims: dict[str, str] = {}
        self._papers: dict[str, PaperRecord] = {}
        self._paper_by_doi: dict[str, str] = {}
        self._paper_by_title: dict[str, str] = {}
        self._provenance: dict[tuple[str, str], tuple[str, str]] = {}
        self._node_owner: dict[str, tuple[str, str]] = {}
        self._counter = 0
        for rec in self._journal.replay():
            try:
                self._apply(rec["op"], rec["payload"])
            except StoreError:
                raise
            except Exception:
                raise StoreError("JOURNAL_CORRUPT", f"journal record at seq {rec['seq']} cannot be applied")

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            self._journal.close()
            self._closed = True

    def _ensure_open(self) -> None:
        if self._closed:
            raise StoreError("STORE_CLOSED", "store is closed")

    # -- record application (shared by live writes and replay) -------------

    def _note_id(self, node_id: str) -> None:
        self._counter = max(self._counter, _id_number(node_id))

    def _apply(self, op: str, payload: dict) -> None:
        if op == "template":
            tpl = template_from_json(payload)
            self._templates[tpl.id] = tpl
        elif op == "mint":
            self._note_id(payload["id"])
        elif op == "paper":
            paper = paper_from_json(payload)
            self._papers[paper.id] = paper
            if paper.doi:
                self._paper_by_doi[paper.doi] = paper.id
            else:
                self._paper_by_title[paper.title] = paper.id
            self._note_id(paper.id)
        elif op == "contribution":
            paper_id = payload["paper"]
            root = payload["root"]
            for rdoc in payload["resources"]:
                res = Resource(rdoc["id"], rdoc.get("label", ""), tuple(rdoc.get("classes", [])))
                self._resources[res.id] = res
                self._node_owner[res.id] = (paper_id, root)
                self._note_id(res.id)
            for sdoc in payload["statements"]:
                stmt = Statement(sdoc["s"], sdoc["p"], sdoc["pl"], object_from_json(sdoc["o"]))
                self._statements.setdefault(stmt.subject, []).append(stmt)
                self._statement_count += 1
            for nid, ddoc in payload.get("datasets", {}).items():
                self._datasets[nid] = TabularDataset(ddoc["name"], list(ddoc["columns"]), [list(r) for r in ddoc["rows"]])
            self._claims.update(payload.get("claims", {}))
            self._papers[paper_id].contribution_roots.append(root)
            prov = payload.get("provenance")
            if prov:
                self._provenance[(prov["source"], prov["part"])] = (paper_id, root)
        else:
            raise StoreError("JOURNAL_CORRUPT", f"unknown journal op {op!r}")

    # -- templates ----------------------------------------------------------

    def add_template(self, tpl: Template) -> None:
        with self._lock:
            self._ensure_open()
            if tpl.id in self._templates:
                raise StoreError("DUPLICATE_TEMPLATE", f"template {tpl.id!r} already registered")
            doc = template_to_json(tpl)
            self._apply("template", doc)
            self._journal.append("template", doc)

    def get_template(self, template_id: str) -> Template | None:
        with self._lock:
            return self._templates.get(template_id)

    def list_templates(self) -> list[Template]:
        with self._lock:
            return sorted(self._templates.values(), key=lambda t: _id_number(t.id))

    # -- identifiers ---------------------------------------------------------

    def _next_id(self) -> str:
        self._counter += 1
        return f"R{self._counter}"

    def mint_id(self, kind: str = "resource") -> str:
        if kind not in ("resource", "paper"):
            raise StoreError("INVALID_GRAPH", f"unknown id kind {kind!r}")
        with self._lock:
            self._ensure_open()
            nid = self._next_id()
            self._journal.append("mint", {"id": nid, "kind": kind})
            return nid

    # -- ingest ---------------------------------------------------------------

    def ingest_contribution(
        self,
        graph: ContributionGraph,
        paper: PaperRecord,
        provenance: ProvenanceKey | None = None,
    ) -> tuple[str, str]:
        """Re-mint a contribution into the store under a paper record.

        An existing paper with the same DOI (or, lacking a DOI, the same
        title) is reused. A provenance key already seen makes the call a
        no-op returning the original (paper_id, root_id).
        """
        with self._lock:
            self._ensure_open()
            if provenance is not None:
                prior = self._provenance.get((provenance.source, provenance.part))
                if prior is not None:
                    return prior
            graph.check()
            paper_id = self.ensure_paper(paper)

            order = graph.traversal_order()
            mapping = {local: self._next_id() for local in order}
            root_id = mapping[graph.root]

            def remap(obj):
                return ResourceRef(mapping[obj.id]) if isinstance(obj, ResourceRef) else obj

            payload = {
                "paper": paper_id,
                "root": root_id,
                "resources": [
                    {
                        "id": mapping[nid],
                        "label": graph.resources[nid].label,
                        "classes": list(graph.resources[nid].classes),
                    }
                    for nid in order
                ],
                "statements": [
                    {
                        "s": mapping[s.subject],
                        "p": s.predicate_id,
                        "pl": s.predicate_label,
                        "o": object_to_json(remap(s.object)),
                    }
                    for s in graph.statements
                ],
                "datasets": {
                    mapping[nid]: {"name": ds.name, "columns": list(ds.columns), "rows": [list(r) for r in ds.rows]}
                    for nid, ds in graph.datasets.items()
                },
                "claims": {mapping[nid]: tid for nid, tid in graph.claims.items()},
                "provenance": None if provenance is None else {"source": provenance.source, "part": provenance.part},
            }
            self._apply("contribution", payload)
            self._journal.append("contribution", payload)
            return paper_id, root_id

    # -- reads -----------------------------------------------------------------

    @property
    def statement_count(self) -> int:
        with self._lock:
            return self._statement_count

    def get_resource(self, node_id: str) -> Resource | None:
        with self._lock:
            return self._resources.get(node_id)

    def has_dataset(self, node_id: str) -> bool:
        with self._lock:
            return node_id in self._datasets

    def statements_of(self, node_id: str) -> list[Statement]:
        with self._lock:
            return list(self._statements.get(node_id, []))

    def subgraph(self, node_id: str, depth: int = 1) -> tuple[list[Resource], list[Statement]]:
        with self._lock:
            if node_id not in self._resources:
                raise StoreError("NOT_FOUND", f"resource {node_id!r} not found")
            seen = [node_id]
            seen_set = {node_id}
            statements: list[Statement] = []
            frontier = [node_id]
            for _ in range(max(depth, 0)):
                nxt: list[str] = []
                for nid in frontier:
                    for stmt in self._statements.get(nid, []):
                        statements.append(stmt)
                        if isinstance(stmt.object, ResourceRef) and stmt.object.id not in seen_set:
                            seen_set.add(stmt.object.id)
                            seen.append(stmt.object.id)
                            nxt.append(stmt.object.id)
                frontier = nxt
                if not frontier:
                    break
            return [self._resources[nid] for nid in seen], statements

    def extract_graph(self, root: str, depth: int = 50) -> ContributionGraph:
        """Rebuild a ContributionGraph view rooted at a stored resource."""
        resources, statements = self.subgraph(root, depth)
        graph = ContributionGraph(root=root)
        for res in resources:
            graph.resources[res.id] = res
            if res.id in self._datasets:
                ds = self._datasets[res.id]
                graph.datasets[res.id] = TabularDataset(ds.name, list(ds.columns), [list(r) for r in ds.rows])
            if res.id in self._claims:
                graph.claims[res.id] = self._claims[res.id]
        graph.statements = statements
        return graph

    def to_dataframe(self, node_id: str) -> TabularDataset:
        with self._lock:
            if node_id not in self._resources:
                raise StoreError("NOT_FOUND", f"resource {node_id!r} not found")
            ds = self._datasets.get(node_id)
            if ds is None:
                raise StoreError("NOT_TABULAR", f"resource {node_id!r} holds no dataset")
            return TabularDataset(ds.name, list(ds.columns), [list(r) for r in ds.rows])

    def _label_of(self, node_id: str) -> str:
        res = self._resources.get(node_id)
        return res.label if res else ""

    def compare(self, roots: list[str]) -> ComparisonTable:
        """Align the depth-1 statements of several contributions by predicate label."""
        with self._lock:
            for root in roots:
                if root not in self._resources:
                    raise StoreError("NOT_FOUND", f"resource {root!r} not found")
            labels: set[str] = set()
            per_root: list[dict[str, list[str]]] = []
            for root in roots:
                cells: dict[str, list[str]] = {}
                for stmt in self._statements.get(root, []):
                    labels.add(stmt.predicate_label)
                    cells.setdefault(stmt.predicate_label, []).append(
                        render_object(stmt.object, self._label_of)
                    )
                per_root.append(cells)
            rows = [
                ComparisonRow(label, [cells.get(label, []) for cells in per_root])
                for label in sorted(labels)
            ]
            return ComparisonTable(list(roots), rows)

    def leaderboard(self, task: str, dataset: str, metric: str) -> list[LeaderboardRow]:
        """All TDMS tuples matching (task, dataset, metric) exactly, best score first."""
        with self._lock:
            rows: list[tuple] = []
            for nid in self._resources:
                grouped: dict[str, list[str]] = {}
                for stmt in self._statements.get(nid, []):
                    grouped.setdefault(snake_case(stmt.predicate_label), []).append(
                        render_object(stmt.object, self._label_of)
                    )
                if not all(k in grouped for k in TDMS_KEYS):
                    continue
                if grouped["task"][0] != task or grouped["dataset"][0] != dataset or grouped["metric"][0] != metric:
                    continue
                score = grouped["score"][0]
                try:
                    value = Decimal(score)
                    if not value.is_finite():
                        raise InvalidOperation
                except InvalidOperation:
                    logger.warning("skipping TDMS node %s: score %r is not a finite decimal", nid, score)
                    continue
                paper_id = self._node_owner.get(nid, ("", ""))[0]
                rows.append((value, _id_number(paper_id), LeaderboardRow(
                    model=grouped["model"][0],
                    score=score,
                    metric=metric,
                    dataset=dataset,
                    task=task,
                    paper_id=paper_id,
                )))
            rows.sort(key=lambda t: (-t[0], t[1]))
            return [r for _, _, r in rows]

    # -- papers ------------------------------------------------------------------

    def ensure_paper(self, paper: PaperRecord) -> str:
        """Create a paper record, or return the existing one for the same
        DOI (or, lacking a DOI, the same title)."""
        with self._lock:
            self._ensure_open()
            if not paper.title:
                raise StoreError("INVALID_PAPER", "paper title must be non-empty")
            if paper.publication_month is not None and not 1 <= paper.publication_month <= 12:
                raise StoreError("INVALID_PAPER", f"publication month {paper.publication_month} not in 1..12")
            if paper.doi and paper.doi in self._paper_by_doi:
                return self._paper_by_doi[paper.doi]
            if not paper.doi and paper.title in self._paper_by_title:
                return self._paper_by_title[paper.title]
            pdoc = paper_to_json(paper)
            pdoc["id"] = self._next_id()
            pdoc["contributions"] = []
            self._apply("paper", pdoc)
            self._journal.append("paper", pdoc)
            return pdoc["id"]

    def get_paper(self, paper_id: str) -> PaperRecord | None:
        with self._lock:
            return self._papers.get(paper_id)

    def paper_by_doi(self, doi: str) -> PaperRecord | None:
        with self._lock:
            pid = self._paper_by_doi.get(doi)
            return self._papers.get(pid) if pid else None

    def list_papers(self) -> list[PaperRecord]:
        with self._lock:
            return sorted(self._papers.values(), key=lambda p: _id_number(p.id))

    def has_provenance(self, key: ProvenanceKey) -> bool:
        with self._lock:
            return (key.source, key.part) in self._provenance

    def owner_of(self, node_id: str) -> tuple[str, str] | None:
        with self._lock:
            return self._node_owner.get(node_id)
