"""Client-side writer for the supplementary-document wire format.

Documents are a single JSON object: formatVersion "1", an "@context"
mapping the rb: prefix plus every predicate key, and an inline "root" node.
Nodes carry "@id" (blank ids "_:n<k>" numbered depth-first in statement
order), "@label", optional "conformsTo", and predicate keys; embedded
datasets are objects typed "rb:Dataset" with name/columns/rows. A node is
inlined on first encounter and referenced as {"@id": ...} afterwards, so
output is byte-deterministic.
"""

import json
from dataclasses import dataclass, field

FORMAT_VERSION = "1"
VOCAB_URI = "https://w3id.org/reborn/vocab#"
DATASET_TYPE = "rb:Dataset"


@dataclass
class Node:
    """One resource in an instance fragment."""

    label: str = ""
    claim: str | None = None
    dataset: tuple[str, list[str], list[list[str]]] | None = None  # (name, columns, rows)
    statements: list[tuple[str, object]] = field(default_factory=list)
    # statement values: ("literal", lexical, datatype) | ("external", uri) | Node


def write_document(root: Node) -> bytes:
    order: dict[int, str] = {}
    keys_used: set[str] = set()

    def assign(node: Node) -> None:
        if id(node) in order:
            return
        order[id(node)] = f"_:n{len(order)}"
        for _, value in node.statements:
            if isinstance(value, Node):
                assign(value)

    assign(root)
    inlined: set[int] = set()

    def encode(node: Node) -> dict:
        inlined.add(id(node))
        obj: dict = {"@id": order[id(node)]}
        if node.dataset is not None:
            obj["@type"] = [DATASET_TYPE]
            if node.label != node.dataset[0]:
                obj["@label"] = node.label
        else:
            obj["@label"] = node.label
        if node.claim is not None:
            obj["conformsTo"] = node.claim
        if node.dataset is not None:
            name, columns, rows = node.dataset
            obj["name"] = name
            obj["columns"] = list(columns)
            obj["rows"] = [list(r) for r in rows]
        grouped: dict[str, list] = {}
        for key, value in node.statements:
            grouped.setdefault(key, []).append(value)
        for key, values in grouped.items():
            keys_used.add(key)
            encoded = [encode_value(v) for v in values]
            obj[key] = encoded[0] if len(encoded) == 1 else encoded
        return obj

    def encode_value(value):
        if isinstance(value, Node):
            if id(value) in inlined:
                return {"@id": order[id(value)]}
            return encode(value)
        if value[0] == "external":
            return {"@id": value[1]}
        _, lexical, datatype = value
        if datatype == "string":
            return lexical
        return {"@value": lexical, "@type": datatype}

    root_obj = encode(root)
    context = {"rb": VOCAB_URI}
    for key in sorted(keys_used):
        context[key] = f"rb:{key}"
    doc = {"formatVersion": FORMAT_VERSION, "@context": context, "root": root_obj}
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")
