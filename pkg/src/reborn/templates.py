"""Templates: schemata that make knowledge of the same type structurally identical.

Covers loading template documents, recursive materialization of nested
templates into bundles, derivation of constructor specs (the function-based
authoring surface), and instance validation against a bundle.
"""

import json
import re
from dataclasses import dataclass, field

from .errors import DocumentError, TemplateError
from .graph import (
    LITERAL_DATATYPES,
    ContributionGraph,
    External,
    Literal,
    ResourceRef,
)

RANGE_KINDS = ("literal", "class", "nested", "dataset")

_NAME_RE = re.compile(r"[a-z_][a-z0-9_]*$")
_STRIP_RE = re.compile(r"['’-]")  # apostrophes (incl. typographic) and hyphens vanish
_RUN_RE = re.compile(r"[^a-z0-9]+")


def snake_case(label: str) -> str:
    """Normalize a label to a snake_case token ("Student's t-test" -> "students_ttest")."""
    s = _STRIP_RE.sub("", label.lower())
    s = _RUN_RE.sub("_", s).strip("_")
    if s and s[0].isdigit():
        s = "_" + s
    return s


@dataclass(frozen=True)
class RangeSpec:
    """Exactly one range variant: literal(datatype), class(id), nested(template id), dataset."""

    kind: str
    value: str | None = None

    def to_json(self) -> dict:
        doc = {"kind": self.kind}
        if self.value is not None:
            doc["value"] = self.value
        return doc


@dataclass(frozen=True)
class PropertyShape:
    property_id: str
    property_label: str
    min_count: int
    max_count: int | None  # None = unbounded
    range: RangeSpec
    order: int

    @property
    def key(self) -> str:
        return snake_case(self.property_label)


@dataclass(frozen=True)
class Template:
    id: str
    label: str
    target_class: str
    shapes: tuple[PropertyShape, ...]
    description: str | None = None

    def shape_by_key(self) -> dict[str, PropertyShape]:
        return {s.key: s for s in self.shapes}


@dataclass(frozen=True)
class ConstructorParam:
    name: str
    required: bool
    repeatable: bool
    value_kind: RangeSpec


@dataclass(frozen=True)
class ConstructorSpec:
    template_id: str
    function_name: str
    params: tuple[ConstructorParam, ...]


@dataclass(frozen=True)
class MaterializedBundle:
    root_id: str
    templates: dict[str, Template]


@dataclass(frozen=True)
class Violation:
    node: str
    property_id: str
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def conforms(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        def enc(v: Violation) -> dict:
            return {"node": v.node, "property": v.property_id, "code": v.code, "message": v.message}

        return {
            "conforms": self.conforms,
            "violations": [enc(v) for v in self.violations],
            "warnings": [enc(v) for v in self.warnings],
        }


def _load_shape(doc: dict, pos: int) -> PropertyShape:
    try:
        pid = doc["property"]
        plabel = doc["propertyLabel"]
        min_count = doc["minCount"]
        max_count = doc["maxCount"]
        range_doc = doc["range"]
        order = doc["order"]
    except (KeyError, TypeError) as exc:
        raise TemplateError("MALFORMED", f"shape {pos}: missing field {exc}")
    if not isinstance(min_count, int) or isinstance(min_count, bool) or min_count < 0:
        raise TemplateError("BAD_CARDINALITY", f"shape {plabel!r}: minCount must be a non-negative integer")
    if max_count == "unbounded":
        max_count = None
    elif not isinstance(max_count, int) or isinstance(max_count, bool) or max_count < 1:
        raise TemplateError("BAD_CARDINALITY", f"shape {plabel!r}: maxCount must be a positive integer or \"unbounded\"")
    if max_count is not None and min_count > max_count:
        raise TemplateError("BAD_CARDINALITY", f"shape {plabel!r}: minCount {min_count} > maxCount {max_count}")
    if not isinstance(range_doc, dict) or range_doc.get("kind") not in RANGE_KINDS:
        raise TemplateError("BAD_RANGE", f"shape {plabel!r}: range kind must be one of {RANGE_KINDS}")
    kind = range_doc["kind"]
    value = range_doc.get("value")
    if kind == "literal":
        if value not in LITERAL_DATATYPES:
            raise TemplateError("BAD_RANGE", f"shape {plabel!r}: literal datatype must be one of {LITERAL_DATATYPES}")
    elif kind in ("class", "nested"):
        if not value:
            raise TemplateError("BAD_RANGE", f"shape {plabel!r}: {kind} range needs a value")
    else:  # dataset carries no value
        value = None
    return PropertyShape(pid, plabel, min_count, max_count, RangeSpec(kind, value), order)


def load_template(document: bytes | str) -> Template:
    """Parse a template document (JSON, UTF-8) into a Template."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TemplateError("MALFORMED", f"not UTF-8: {exc}")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TemplateError("MALFORMED", f"not valid JSON: {exc}")
    return template_from_json(doc)


def template_from_json(doc) -> Template:
    if not isinstance(doc, dict):
        raise TemplateError("MALFORMED", "template document must be a JSON object")
    tid = doc.get("id")
    label = doc.get("label")
    target = doc.get("targetClass")
    if not tid or not isinstance(tid, str):
        raise TemplateError("MALFORMED", "template id must be a non-empty string")
    if not isinstance(label, str) or not isinstance(target, str):
        raise TemplateError("MALFORMED", "template label and targetClass must be strings")
    shapes_doc = doc.get("shapes", [])
    if not isinstance(shapes_doc, list):
        raise TemplateError("MALFORMED", "shapes must be a list")
    shapes = [_load_shape(s, k) for k, s in enumerate(shapes_doc)]
    shapes.sort(key=lambda s: s.order)  # stable: file order breaks ties
    seen: set[str] = set()
    for s in shapes:
        if s.property_id in seen:
            raise TemplateError("DUPLICATE_PROPERTY", f"property {s.property_id!r} appears twice")
        seen.add(s.property_id)
    return Template(tid, label, target, tuple(shapes), doc.get("description"))


def template_to_json(tpl: Template) -> dict:
    doc = {
        "id": tpl.id,
        "label": tpl.label,
        "targetClass": tpl.target_class,
        "shapes": [
            {
                "property": s.property_id,
                "propertyLabel": s.property_label,
                "minCount": s.min_count,
                "maxCount": "unbounded" if s.max_count is None else s.max_count,
                "range": s.range.to_json(),
                "order": s.order,
            }
            for s in tpl.shapes
        ],
    }
    if tpl.description is not None:
        doc["description"] = tpl.description
    return doc


def materialize(resolver, template_id: str) -> MaterializedBundle:
    """Resolve a template and the transitive closure of its NESTED references.

    `resolver` maps a template id to a Template or None. Each template is
    fetched exactly once; cyclic references terminate.
    """
    templates: dict[str, Template] = {}
    pending = [template_id]
    while pending:
        tid = pending.pop(0)
        if tid in templates:
            continue
        tpl = resolver(tid)
        if tpl is None:
            raise TemplateError("NOT_FOUND", f"template {tid!r} not found")
        templates[tid] = tpl
        for shape in tpl.shapes:
            if shape.range.kind == "nested" and shape.range.value not in templates:
                pending.append(shape.range.value)
    return MaterializedBundle(template_id, templates)


def constructor_spec(tpl: Template) -> ConstructorSpec:
    """Derive the function-based authoring surface from a template."""
    fn = snake_case(tpl.label)
    if not _NAME_RE.match(fn):
        raise TemplateError("BAD_NAME", f"label {tpl.label!r} normalizes to invalid name {fn!r}")
    params = []
    seen: dict[str, str] = {}
    for shape in tpl.shapes:
        name = shape.key
        if not _NAME_RE.match(name):
            raise TemplateError("BAD_NAME", f"property label {shape.property_label!r} normalizes to invalid name {name!r}")
        if name in seen:
            raise TemplateError(
                "NAME_COLLISION",
                f"properties {seen[name]!r} and {shape.property_label!r} both normalize to {name!r}",
            )
        seen[name] = shape.property_label
        params.append(
            ConstructorParam(
                name=name,
                required=shape.min_count >= 1,
                repeatable=shape.max_count is None or shape.max_count > 1,
                value_kind=shape.range,
            )
        )
    return ConstructorSpec(tpl.id, fn, tuple(params))


def constructor_to_json(spec: ConstructorSpec) -> dict:
    return {
        "templateId": spec.template_id,
        "functionName": spec.function_name,
        "params": [
            {
                "name": p.name,
                "required": p.required,
                "repeatable": p.repeatable,
                "range": p.value_kind.to_json(),
            }
            for p in spec.params
        ],
    }


def constructor_from_json(doc: dict) -> ConstructorSpec:
    try:
        params = tuple(
            ConstructorParam(
                name=p["name"],
                required=p["required"],
                repeatable=p["repeatable"],
                value_kind=RangeSpec(p["range"]["kind"], p["range"].get("value")),
            )
            for p in doc["params"]
        )
        return ConstructorSpec(doc["templateId"], doc["functionName"], params)
    except (KeyError, TypeError) as exc:
        raise DocumentError("MALFORMED_JSON", f"bad constructor spec: {exc}")


def _check_object_kind(shape: PropertyShape, obj, graph: ContributionGraph) -> str | None:
    """Return a RANGE_KIND violation message, or None when the object fits the shape."""
    kind = shape.range.kind
    if kind == "literal":
        if not isinstance(obj, Literal):
            return f"expected a {shape.range.value} literal"
        if obj.datatype != shape.range.value:
            return f"expected datatype {shape.range.value}, got {obj.datatype}"
        return None
    if isinstance(obj, Literal):
        return f"expected a {kind} object, got a literal"
    if kind == "class":
        return None  # resource or external URI both satisfy a class range
    if isinstance(obj, External):
        return f"expected a {kind} object, got an external URI"
    if kind == "dataset":
        if obj.id not in graph.datasets:
            return "resource carries no dataset payload"
        return None
    return None  # nested: recursion handled by the caller


def validate_instance(bundle: MaterializedBundle, graph: ContributionGraph, root: str) -> ValidationReport:
    """Validate a graph node (and, recursively, nested nodes) against a bundle.

    Unknown properties are warning-class findings and do not affect
    conformance. Re-entry into a (node, template) pair already being
    validated is treated as satisfied so cyclic data terminates.
    """
    report = ValidationReport()
    in_progress: set[tuple[str, str]] = set()

    def visit(node_id: str, template_id: str) -> None:
        key = (node_id, template_id)
        if key in in_progress:
            return
        in_progress.add(key)
        tpl = bundle.templates.get(template_id)
        if tpl is None:
            report.violations.append(
                Violation(node_id, "", "UNRESOLVED_TEMPLATE", f"template {template_id!r} is not in the bundle")
            )
            return
        grouped: dict[str, list] = {}
        for stmt in graph.statements_of(node_id):
            grouped.setdefault(snake_case(stmt.predicate_label), []).append(stmt)
        shape_keys = tpl.shape_by_key()
        for skey, shape in shape_keys.items():
            stmts = grouped.get(skey, [])
            if len(stmts) < shape.min_count:
                report.violations.append(
                    Violation(node_id, shape.property_id, "MIN_COUNT",
                              f"{shape.property_label!r} needs at least {shape.min_count} value(s), found {len(stmts)}")
                )
            if shape.max_count is not None and len(stmts) > shape.max_count:
                report.violations.append(
                    Violation(node_id, shape.property_id, "MAX_COUNT",
                              f"{shape.property_label!r} allows at most {shape.max_count} value(s), found {len(stmts)}")
                )
            for stmt in stmts:
                problem = _check_object_kind(shape, stmt.object, graph)
                if problem is not None:
                    report.violations.append(Violation(node_id, shape.property_id, "RANGE_KIND", problem))
                    continue
                if shape.range.kind == "nested":
                    if isinstance(stmt.object, ResourceRef):
                        visit(stmt.object.id, shape.range.value)
                    else:
                        report.violations.append(
                            Violation(node_id, shape.property_id, "RANGE_KIND", "nested object must be a resource")
                        )
        for skey, stmts in grouped.items():
            if skey not in shape_keys:
                report.warnings.append(
                    Violation(node_id, stmts[0].predicate_id, "UNKNOWN_PROPERTY",
                              f"property {stmts[0].predicate_label!r} is not declared by template {template_id}")
                )

    visit(root, bundle.root_id)
    for node_id, template_id in graph.claims.items():
        if template_id in bundle.templates:
            visit(node_id, template_id)
    return report
