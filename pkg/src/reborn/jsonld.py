"""Supplementary-document codec: ContributionGraph <-> the JSON-LD profile.

One document carries one contribution. Node objects hold "@id", "@type",
"@label", "conformsTo" plus predicate keys (snake_case of the predicate
label); the @context maps each predicate key to rb:<key>. Datasets are
inline objects typed rb:Dataset. Local resources are numbered "_:n<k>" in
depth-first traversal order from the root, so output is byte-deterministic.

Only this profile is read and written; no general JSON-LD processing.
"""

import json

from .errors import DocumentError
from .graph import (
    ContributionGraph,
    External,
    Literal,
    Resource,
    ResourceRef,
    Statement,
    TabularDataset,
)
from .templates import snake_case

FORMAT_VERSION = "1"
VOCAB_URI = "https://w3id.org/reborn/vocab#"
DATASET_TYPE = "rb:Dataset"

_RESERVED_KEYS = {"@id", "@type", "@label", "conformsTo"}
_DATASET_KEYS = {"name", "columns", "rows"}


def _encode_literal(lit: Literal):
    if lit.datatype == "string":
        return lit.lexical
    return {"@value": lit.lexical, "@type": lit.datatype}


def serialize_contribution(graph: ContributionGraph) -> bytes:
    """Serialize a graph to document bytes (UTF-8, no BOM, trailing newline)."""
    graph.check()
    order = graph.traversal_order()
    blank = {nid: f"_:n{k}" for k, nid in enumerate(order)}
    inlined: set[str] = set()
    keys_used: set[str] = set()

    def encode_node(nid: str) -> dict:
        inlined.add(nid)
        res = graph.resources[nid]
        node: dict = {"@id": blank[nid]}
        dataset = graph.datasets.get(nid)
        types = sorted(res.classes)
        if dataset is not None:
            types = [DATASET_TYPE] + types
        if types:
            node["@type"] = types
        # "@label" is always present on plain nodes so a definition can never
        # collapse to the bare {"@id": ...} shape that marks a reference
        if dataset is None or res.label != dataset.name:
            node["@label"] = res.label
        claim = graph.claims.get(nid)
        if claim is not None:
            node["conformsTo"] = claim
        if dataset is not None:
            node["name"] = dataset.name
            node["columns"] = list(dataset.columns)
            node["rows"] = [list(r) for r in dataset.rows]
        grouped: dict[str, list] = {}
        for stmt in graph.statements_of(nid):
            grouped.setdefault(snake_case(stmt.predicate_label), []).append(stmt)
        for key, stmts in grouped.items():
            if dataset is not None and key in _DATASET_KEYS:
                raise DocumentError(
                    "KEY_COLLISION",
                    f"predicate {stmts[0].predicate_label!r} on dataset node {blank[nid]} collides with a dataset field",
                )
            keys_used.add(key)
            values = [encode_object(s.object) for s in stmts]
            node[key] = values[0] if len(values) == 1 else values
        return node

    def encode_object(obj):
        if isinstance(obj, Literal):
            return _encode_literal(obj)
        if isinstance(obj, External):
            return {"@id": obj.uri}
        if obj.id in inlined:
            return {"@id": blank[obj.id]}
        return encode_node(obj.id)

    root_obj = encode_node(graph.root)
    context = {"rb": VOCAB_URI}
    for key in sorted(keys_used):
        context[key] = f"rb:{key}"
    doc = {"formatVersion": FORMAT_VERSION, "@context": context, "root": root_obj}
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def _parse_dataset(obj: dict, node_id: str) -> TabularDataset:
    name = obj.get("name")
    columns = obj.get("columns")
    rows = obj.get("rows")
    if not isinstance(name, str) or not isinstance(columns, list) or not isinstance(rows, list):
        raise DocumentError("BAD_DATASET", f"dataset at {node_id} needs string name, columns list, rows list")
    if not all(isinstance(c, str) and c for c in columns):
        raise DocumentError("BAD_DATASET", f"dataset at {node_id} has empty or non-string column labels")
    width = len(columns)
    for k, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != width:
            raise DocumentError("BAD_DATASET", f"dataset at {node_id}: row {k} does not match {width} columns")
        if not all(isinstance(c, str) for c in row):
            raise DocumentError("BAD_DATASET", f"dataset at {node_id}: row {k} has non-string cells")
    return TabularDataset(name, list(columns), [list(r) for r in rows])


def parse_contribution(document: bytes | str) -> ContributionGraph:
    """Parse document bytes back into a ContributionGraph with local node ids."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentError("MALFORMED_JSON", f"not UTF-8: {exc}")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise DocumentError("MALFORMED_JSON", f"not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise DocumentError("MALFORMED_JSON", "document must be a JSON object")
    version = doc.get("formatVersion")
    if version != FORMAT_VERSION:
        raise DocumentError("UNKNOWN_VERSION", f"formatVersion {version!r}, expected {FORMAT_VERSION!r}")
    root_obj = doc.get("root")
    if not isinstance(root_obj, dict) or set(root_obj) <= {"@id"}:
        raise DocumentError("MISSING_ROOT", "document has no inline root node object")

    graph = ContributionGraph(root="")
    referenced: dict[str, str] = {}  # blank id -> where it was referenced

    def parse_node(obj: dict) -> str:
        nid = obj.get("@id")
        if not isinstance(nid, str) or not nid:
            raise DocumentError("BAD_NODE", "node object without \"@id\"")
        if nid in graph.resources:
            raise DocumentError("BAD_NODE", f"node {nid!r} is defined twice")
        types = obj.get("@type", [])
        if isinstance(types, str):
            types = [types]
        if not isinstance(types, list) or not all(isinstance(t, str) for t in types):
            raise DocumentError("BAD_NODE", f"node {nid!r} has a malformed \"@type\"")
        is_dataset = DATASET_TYPE in types
        classes = tuple(t for t in types if t != DATASET_TYPE)
        dataset = _parse_dataset(obj, nid) if is_dataset else None
        if "@label" in obj:
            label = obj["@label"]
            if not isinstance(label, str):
                raise DocumentError("BAD_NODE", f"node {nid!r} has a non-string \"@label\"")
        else:
            label = dataset.name if dataset is not None else ""
        graph.resources[nid] = Resource(nid, label, classes)
        if dataset is not None:
            graph.datasets[nid] = dataset
        claim = obj.get("conformsTo")
        if claim is not None:
            if not isinstance(claim, str):
                raise DocumentError("BAD_NODE", f"node {nid!r} has a non-string \"conformsTo\"")
            graph.claims[nid] = claim
        skip = _RESERVED_KEYS | (_DATASET_KEYS if is_dataset else set())
        for key, raw in obj.items():
            if key in skip:
                continue
            values = raw if isinstance(raw, list) else [raw]
            for value in values:
                graph.statements.append(Statement(nid, f"rb:{key}", key, parse_value(value, nid, key)))
        return nid

    def parse_value(value, subject: str, key: str):
        if isinstance(value, str):
            return Literal(value, "string")
        if isinstance(value, bool):
            return Literal("true" if value else "false", "boolean")
        if isinstance(value, int):
            return Literal(str(value), "integer")
        if isinstance(value, float):
            return Literal(repr(value), "decimal")
        if isinstance(value, dict):
            if "@value" in value:
                lex = value["@value"]
                if not isinstance(lex, str):
                    raise DocumentError("BAD_NODE", f"non-string \"@value\" under {subject}/{key}")
                dt = value.get("@type", "string")
                return Literal(lex, dt)
            if set(value) == {"@id"}:
                target = value["@id"]
                if not isinstance(target, str):
                    raise DocumentError("BAD_NODE", f"non-string \"@id\" under {subject}/{key}")
                if target.startswith("_:"):
                    referenced.setdefault(target, f"{subject}/{key}")
                    return ResourceRef(target)
                return External(target)
            return ResourceRef(parse_node(value))
        raise DocumentError("BAD_NODE", f"unsupported value under {subject}/{key}: {value!r}")

    graph.root = parse_node(root_obj)
    for target, where in referenced.items():
        if target not in graph.resources:
            raise DocumentError("DANGLING_REFERENCE", f"{where} references undefined node {target!r}")
    return graph


def graph_signature(graph: ContributionGraph):
    """Canonical, id-independent form of a graph.

    Resources are relabeled by depth-first traversal position and predicates
    by their snake_case key (the identity that survives the codec), so two
    graphs are isomorphic exactly when their signatures are equal.
    """
    order = graph.traversal_order()
    canon = {nid: k for k, nid in enumerate(order)}

    def obj_sig(obj):
        if isinstance(obj, Literal):
            return ("lit", obj.lexical, obj.datatype)
        if isinstance(obj, External):
            return ("ext", obj.uri)
        return ("res", canon[obj.id])

    nodes = []
    for nid in order:
        res = graph.resources[nid]
        ds = graph.datasets.get(nid)
        nodes.append(
            (
                canon[nid],
                res.label,
                tuple(sorted(res.classes)),
                graph.claims.get(nid),
                None if ds is None else (ds.name, tuple(ds.columns), tuple(tuple(r) for r in ds.rows)),
                tuple(
                    (snake_case(s.predicate_label), obj_sig(s.object))
                    for s in graph.statements_of(nid)
                ),
            )
        )
    return (canon[graph.root], tuple(nodes))
