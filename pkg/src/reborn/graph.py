"""Core graph model: resources, literals, statements, datasets, papers.

A ContributionGraph is one structured research finding rooted at a single
resource node. Node identifiers are opaque strings; graphs authored locally
use arbitrary local ids which the store re-mints at ingest time.
"""

from dataclasses import dataclass, field

from .errors import StoreError

LITERAL_DATATYPES = ("string", "decimal", "integer", "boolean", "uri", "date")


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str = "string"


@dataclass(frozen=True)
class External:
    uri: str


@dataclass(frozen=True)
class ResourceRef:
    id: str


# A statement object is one of the three value kinds above.
Object = Literal | External | ResourceRef


@dataclass(frozen=True)
class Resource:
    id: str
    label: str = ""
    classes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Statement:
    subject: str
    predicate_id: str
    predicate_label: str
    object: Object


@dataclass
class TabularDataset:
    """Embedded data-frame payload. Cells are lexical strings, never parsed."""

    name: str
    columns: list[str]
    rows: list[list[str]]

    def check(self) -> None:
        for c in self.columns:
            if not c:
                raise StoreError("INVALID_GRAPH", f"dataset {self.name!r} has an empty column label")
        width = len(self.columns)
        for k, row in enumerate(self.rows):
            if len(row) != width:
                raise StoreError(
                    "INVALID_GRAPH",
                    f"dataset {self.name!r} row {k} has {len(row)} cells, expected {width}",
                )


@dataclass
class ContributionGraph:
    root: str
    resources: dict[str, Resource] = field(default_factory=dict)
    statements: list[Statement] = field(default_factory=list)
    datasets: dict[str, TabularDataset] = field(default_factory=dict)
    claims: dict[str, str] = field(default_factory=dict)  # node id -> template id

    def statements_of(self, subject: str) -> list[Statement]:
        return [s for s in self.statements if s.subject == subject]

    def traversal_order(self) -> list[str]:
        """Resource ids in depth-first order from the root, statement order.

        The canonical ordering used for blank-node numbering and id re-minting.
        """
        by_subject: dict[str, list[Statement]] = {}
        for s in self.statements:
            by_subject.setdefault(s.subject, []).append(s)
        order: list[str] = []
        seen: set[str] = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen or nid not in self.resources:
                continue
            seen.add(nid)
            order.append(nid)
            children = [
                s.object.id
                for s in by_subject.get(nid, [])
                if isinstance(s.object, ResourceRef) and s.object.id not in seen
            ]
            stack.extend(reversed(children))
        return order

    def check(self) -> None:
        """Raise StoreError(INVALID_GRAPH) on dangling references or unreachable nodes."""
        if self.root not in self.resources:
            raise StoreError("INVALID_GRAPH", f"root {self.root!r} is not a resource in the graph")
        for s in self.statements:
            if s.subject not in self.resources:
                raise StoreError("INVALID_GRAPH", f"statement subject {s.subject!r} is not in the graph")
            if isinstance(s.object, ResourceRef) and s.object.id not in self.resources:
                raise StoreError("INVALID_GRAPH", f"statement object {s.object.id!r} is not in the graph")
        for nid in self.datasets:
            if nid not in self.resources:
                raise StoreError("INVALID_GRAPH", f"dataset holder {nid!r} is not in the graph")
        for nid in self.claims:
            if nid not in self.resources:
                raise StoreError("INVALID_GRAPH", f"conformance claim on unknown node {nid!r}")
        reachable = set(self.traversal_order())
        unreachable = set(self.resources) - reachable
        if unreachable:
            names = ", ".join(sorted(unreachable))
            raise StoreError("INVALID_GRAPH", f"nodes unreachable from root: {names}")
        for ds in self.datasets.values():
            ds.check()


@dataclass
class PaperRecord:
    """Bibliographic envelope owning ingested contributions."""

    id: str
    title: str
    authors: list[str] = field(default_factory=list)
    publication_year: int = 0
    publication_month: int | None = None
    published_in: str = ""
    doi: str | None = None
    research_field: str = ""
    contribution_roots: list[str] = field(default_factory=list)


def object_to_json(obj: Object) -> dict:
    if isinstance(obj, Literal):
        return {"kind": "literal", "lexical": obj.lexical, "datatype": obj.datatype}
    if isinstance(obj, External):
        return {"kind": "external", "uri": obj.uri}
    return {"kind": "resource", "id": obj.id}


def object_from_json(doc: dict) -> Object:
    kind = doc.get("kind")
    if kind == "literal":
        return Literal(doc["lexical"], doc.get("datatype", "string"))
    if kind == "external":
        return External(doc["uri"])
    if kind == "resource":
        return ResourceRef(doc["id"])
    raise StoreError("INVALID_GRAPH", f"unknown object kind {kind!r}")


def render_object(obj: Object, resolve_label=None) -> str:
    """Human-facing cell rendering: literal lexical, resource label/id, external URI."""
    if isinstance(obj, Literal):
        return obj.lexical
    if isinstance(obj, External):
        return obj.uri
    if resolve_label is not None:
        label = resolve_label(obj.id)
        if label:
            return label
    return obj.id
