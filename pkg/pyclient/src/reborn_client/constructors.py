"""Constructor machinery: turn fetched constructor specs into callables.

A constructor accepts positional or keyword arguments per its params and
builds an instance fragment. Host numbers are captured with their lexical
rendering (shortest round-trip for binary floats); strings are kept
verbatim; (frame, name) pairs become embedded datasets; nested instances
splice their subgraph.
"""

import decimal
from dataclasses import dataclass
from pathlib import Path

from .documents import Node, write_document
from .errors import ClientError


@dataclass(frozen=True)
class Param:
    name: str
    required: bool
    repeatable: bool
    kind: str  # literal | class | nested | dataset
    value: str | None  # datatype / class id / template id


@dataclass(frozen=True)
class ConstructorSpec:
    template_id: str
    function_name: str
    params: tuple[Param, ...]


def parse_constructor(doc: dict) -> ConstructorSpec:
    try:
        params = tuple(
            Param(
                name=p["name"],
                required=p["required"],
                repeatable=p["repeatable"],
                kind=p["range"]["kind"],
                value=p["range"].get("value"),
            )
            for p in doc["params"]
        )
        return ConstructorSpec(doc["templateId"], doc["functionName"], params)
    except (KeyError, TypeError) as exc:
        raise ClientError("BAD_RESPONSE", f"malformed constructor spec: {exc}")


class TemplateInstance:
    """An in-memory instance fragment plus its conformance claim."""

    def __init__(self, template_id: str, root: Node):
        self.template_id = template_id
        self.root = root

    def to_bytes(self) -> bytes:
        return write_document(self.root)

    def serialize_to_file(self, path, format: str = "json-ld"):
        if format != "json-ld":
            raise ClientError("UNSUPPORTED_FORMAT", f"unsupported serialization format {format!r}")
        try:
            Path(path).write_bytes(self.to_bytes())
        except OSError as exc:
            raise ClientError("IO", f"cannot write {path}: {exc}")
        return Path(path)


def _scalar_lexical(value, where: str) -> str:
    if isinstance(value, str):
        return value  # host-supplied strings are kept verbatim
    if isinstance(value, bool):
        return "true" if value else "false"
    if hasattr(value, "item"):  # numpy scalars
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, decimal.Decimal):
        return str(value)
    raise ClientError("KIND_MISMATCH", f"{where}: cannot capture {type(value).__name__} as a literal")


def _cell_lexical(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def frame_to_dataset(frame, name: str) -> tuple[str, list[str], list[list[str]]]:
    columns = [str(c) for c in frame.columns]
    rows = [[_cell_lexical(v) for v in row] for row in frame.itertuples(index=False, name=None)]
    return (name, columns, rows)


def _is_frame(value) -> bool:
    return hasattr(value, "columns") and hasattr(value, "itertuples")


def _build_value(param: Param, value, where: str):
    if param.kind == "literal":
        if isinstance(value, (TemplateInstance, Node)) or _is_frame(value) or isinstance(value, (tuple, list)):
            raise ClientError("KIND_MISMATCH", f"{where}: expected a {param.value} literal")
        return ("literal", _scalar_lexical(value, where), param.value)
    if param.kind == "class":
        if not isinstance(value, str):
            raise ClientError("KIND_MISMATCH", f"{where}: expected a URI or resource label string")
        if value.startswith(("http://", "https://")):
            return ("external", value)
        return Node(label=value)
    if param.kind == "dataset":
        if _is_frame(value):
            frame, name = value, "dataset"
        elif isinstance(value, (tuple, list)) and len(value) == 2 and _is_frame(value[0]) and isinstance(value[1], str):
            frame, name = value
        else:
            raise ClientError("KIND_MISMATCH", f"{where}: expected a data frame or a (frame, name) pair")
        dataset = frame_to_dataset(frame, name)
        return Node(label=dataset[0], dataset=dataset)
    # nested
    if not isinstance(value, TemplateInstance):
        raise ClientError("KIND_MISMATCH", f"{where}: expected an instance of template {param.value}")
    if value.template_id != param.value:
        raise ClientError(
            "KIND_MISMATCH",
            f"{where}: expected an instance of template {param.value}, got {value.template_id}",
        )
    return value.root


def instantiate(spec: ConstructorSpec, args: tuple, kwargs: dict) -> TemplateInstance:
    if len(args) > len(spec.params):
        raise ClientError("UNKNOWN_PARAM", f"{spec.function_name}() takes at most {len(spec.params)} arguments")
    given: dict[str, object] = {}
    for param, value in zip(spec.params, args):
        given[param.name] = value
    for name, value in kwargs.items():
        if name in given:
            raise ClientError("DUPLICATE_PARAM", f"{spec.function_name}(): {name} given twice")
        given[name] = value
    names = {p.name for p in spec.params}
    for name in given:
        if name not in names:
            raise ClientError("UNKNOWN_PARAM", f"{spec.function_name}() has no parameter {name!r}")

    root = Node(claim=spec.template_id)
    for param in spec.params:
        if param.name not in given:
            if param.required:
                raise ClientError("MISSING_REQUIRED", f"{spec.function_name}(): missing required {param.name}")
            continue
        value = given[param.name]
        where = f"{spec.function_name}({param.name}=...)"
        if param.repeatable and isinstance(value, list):
            items = value
        else:
            items = [value]
        for item in items:
            root.statements.append((param.name, _build_value(param, item, where)))
    for key, encoded in root.statements:
        if key == "label" and isinstance(encoded, tuple) and encoded[0] == "literal":
            root.label = encoded[1]  # the label field doubles as the display name
            break
    return TemplateInstance(spec.template_id, root)
