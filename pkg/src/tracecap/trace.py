"""Trace interchange format: model, parser, canonical serializer, URL patterns.

A trace is a class-level interaction recipe: a URL pattern naming the pages it
applies to, an ordered list of click actions addressed by element selectors,
and provenance describing where it was recorded. Traces are stored as UTF-8
JSON documents (``*.trace.json``, schema version "1.0"); the canonical
serialization is byte-deterministic so equal traces diff clean in a shared
repository.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional
from urllib.parse import urlsplit

from .errors import InvalidUrl, TraceSchemaError, TraceSyntaxError, TraceVersionError

TRACE_VERSION = "1.0"

DEFAULT_WAIT_AFTER_MS = 2000
DEFAULT_MAX_ITERATIONS = 1000
MAX_ITERATIONS_LIMIT = 10000
MAX_ITERATIONS_WARN = 1000

_ID_RE = re.compile(r"^[a-z0-9][a-z0-9-]*$")


class SelectorStrategy(str, Enum):
    ELEMENT_ID = "element-id"
    HTML_CLASS = "html-class"
    CSS = "css"
    XPATH = "xpath"


class ActionKind(str, Enum):
    CLICK = "click"
    CLICK_ALL = "click-all"
    REPEAT_CLICK = "repeat-click"


class UntilCondition(str, Enum):
    ELEMENT_ABSENT = "element-absent"
    ELEMENT_DISABLED = "element-disabled"
    MAX_ONLY = "max-only"


class OnMissing(str, Enum):
    FAIL = "fail"
    SKIP = "skip"


@dataclass(frozen=True)
class Selector:
    """Addresses zero or more elements in a document, in document order."""

    strategy: SelectorStrategy
    value: str

    def to_dict(self) -> Dict[str, str]:
        return {"strategy": self.strategy.value, "value": self.value}


@dataclass(frozen=True)
class TraceAction:
    """One curator-recorded interaction.

    Which selector fields are populated depends on ``kind``: click and
    repeat-click use ``selector``; click-all uses ``scope_selector`` (the
    container) plus ``link_selector`` (the links within it).
    """

    kind: ActionKind
    selector: Optional[Selector] = None
    scope_selector: Optional[Selector] = None
    link_selector: Optional[Selector] = None
    until: Optional[UntilCondition] = None
    max_iterations: Optional[int] = None
    wait_after_ms: int = DEFAULT_WAIT_AFTER_MS
    on_missing: OnMissing = OnMissing.FAIL

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind.value}
        if self.selector is not None:
            out["selector"] = self.selector.to_dict()
        if self.scope_selector is not None:
            out["scope_selector"] = self.scope_selector.to_dict()
        if self.link_selector is not None:
            out["link_selector"] = self.link_selector.to_dict()
        if self.until is not None:
            out["until"] = self.until.value
        if self.max_iterations is not None:
            out["max_iterations"] = self.max_iterations
        out["wait_after_ms"] = self.wait_after_ms
        out["on_missing"] = self.on_missing.value
        return out


@dataclass(frozen=True)
class Provenance:
    """Where and by whom the trace was recorded."""

    created_on: str
    user_agent: str
    created_at: str
    curator: Optional[str] = None

    def to_dict(self) -> Dict[str, str]:
        out = {
            "created_on": self.created_on,
            "user_agent": self.user_agent,
            "created_at": self.created_at,
        }
        if self.curator is not None:
            out["curator"] = self.curator
        return out


@dataclass(frozen=True)
class UrlPattern:
    """A URL glob: ``*`` matches within one path segment, ``**`` across them.

    Matching is case-insensitive in scheme and host, case-sensitive from the
    first path character on.
    """

    pattern: str

    def literal_prefix(self) -> str:
        """Pattern text before the first wildcard; used for specificity."""
        idx = self.pattern.find("*")
        return self.pattern if idx < 0 else self.pattern[:idx]


@dataclass
class Trace:
    """A class-level interaction recipe.

    ``categories`` buckets recorded target URIs per action index (e.g. action
    0 records "files", action 1 records "zip") so evaluation can report
    per-category availability. ``extra`` holds unknown top-level fields from
    the source document; they are preserved on serialization but carry no
    meaning here.
    """

    id: str
    url_pattern: UrlPattern
    actions: List[TraceAction]
    provenance: Provenance
    categories: Dict[int, str] = field(default_factory=dict)
    trace_version: str = TRACE_VERSION
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    path: str
    message: str


@dataclass
class ValidationReport:
    findings: List[Finding] = field(default_factory=list)

    @property
    def errors(self) -> List[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> List[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            "findings": [
                {"severity": f.severity, "path": f.path, "message": f.message}
                for f in self.findings
            ]
        }


# ---------------------------------------------------------------------------
# parsing

def _require(obj: Dict[str, Any], key: str, typ, path: str):
    if key not in obj:
        raise TraceSchemaError(path, f"missing required field: {path}")
    val = obj[key]
    if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
        raise TraceSchemaError(path, f"field {path} has wrong type")
    return val


def _enum_value(raw: str, enum_cls, path: str):
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise TraceSchemaError(path, f"{path} must be one of: {allowed}") from None


def _parse_selector(obj: Any, path: str) -> Selector:
    if not isinstance(obj, dict):
        raise TraceSchemaError(path, f"{path} must be an object")
    unknown = set(obj) - {"strategy", "value"}
    if unknown:
        raise TraceSchemaError(path, f"{path} has unknown fields: {sorted(unknown)}")
    strategy = _enum_value(
        _require(obj, "strategy", str, f"{path}.strategy"), SelectorStrategy, f"{path}.strategy"
    )
    value = _require(obj, "value", str, f"{path}.value")
    return Selector(strategy=strategy, value=value)


_ACTION_FIELDS = {
    "kind", "selector", "scope_selector", "link_selector",
    "until", "max_iterations", "wait_after_ms", "on_missing",
}

_SELECTOR_FIELDS_BY_KIND = {
    ActionKind.CLICK: {"selector"},
    ActionKind.REPEAT_CLICK: {"selector"},
    ActionKind.CLICK_ALL: {"scope_selector", "link_selector"},
}


def _parse_action(obj: Any, index: int) -> TraceAction:
    path = f"actions[{index}]"
    if not isinstance(obj, dict):
        raise TraceSchemaError(path, f"{path} must be an object")
    unknown = set(obj) - _ACTION_FIELDS
    if unknown:
        raise TraceSchemaError(path, f"{path} has unknown fields: {sorted(unknown)}")

    kind = _enum_value(_require(obj, "kind", str, f"{path}.kind"), ActionKind, f"{path}.kind")

    wanted = _SELECTOR_FIELDS_BY_KIND[kind]
    for name in ("selector", "scope_selector", "link_selector"):
        if name in wanted:
            if name not in obj:
                raise TraceSchemaError(f"{path}.{name}", f"missing required field: {path}.{name}")
        elif name in obj:
            raise TraceSchemaError(
                f"{path}.{name}", f"{path}.{name} is not allowed for kind={kind.value}"
            )

    until = None
    max_iterations = None
    if kind is ActionKind.REPEAT_CLICK:
        until = _enum_value(
            _require(obj, "until", str, f"{path}.until"), UntilCondition, f"{path}.until"
        )
        if "max_iterations" in obj:
            max_iterations = _require(obj, "max_iterations", int, f"{path}.max_iterations")
        elif until is UntilCondition.MAX_ONLY:
            raise TraceSchemaError(
                f"{path}.max_iterations",
                f"{path}.max_iterations is required when until=max-only",
            )
        else:
            max_iterations = DEFAULT_MAX_ITERATIONS
        if not (1 <= max_iterations <= MAX_ITERATIONS_LIMIT):
            raise TraceSchemaError(
                f"{path}.max_iterations",
                f"{path}.max_iterations must be in 1..{MAX_ITERATIONS_LIMIT}",
            )
    else:
        for name in ("until", "max_iterations"):
            if name in obj:
                raise TraceSchemaError(
                    f"{path}.{name}", f"{path}.{name} is only valid for repeat-click"
                )

    wait_after_ms = DEFAULT_WAIT_AFTER_MS
    if "wait_after_ms" in obj:
        wait_after_ms = _require(obj, "wait_after_ms", int, f"{path}.wait_after_ms")
        if wait_after_ms < 0:
            raise TraceSchemaError(f"{path}.wait_after_ms", f"{path}.wait_after_ms must be >= 0")

    on_missing = OnMissing.FAIL
    if "on_missing" in obj:
        on_missing = _enum_value(obj["on_missing"], OnMissing, f"{path}.on_missing")

    return TraceAction(
        kind=kind,
        selector=_parse_selector(obj["selector"], f"{path}.selector") if "selector" in obj else None,
        scope_selector=(
            _parse_selector(obj["scope_selector"], f"{path}.scope_selector")
            if "scope_selector" in obj else None
        ),
        link_selector=(
            _parse_selector(obj["link_selector"], f"{path}.link_selector")
            if "link_selector" in obj else None
        ),
        until=until,
        max_iterations=max_iterations,
        wait_after_ms=wait_after_ms,
        on_missing=on_missing,
    )


def _parse_provenance(obj: Any) -> Provenance:
    path = "provenance"
    if not isinstance(obj, dict):
        raise TraceSchemaError(path, f"{path} must be an object")
    unknown = set(obj) - {"created_on", "user_agent", "created_at", "curator"}
    if unknown:
        raise TraceSchemaError(path, f"{path} has unknown fields: {sorted(unknown)}")
    curator = None
    if "curator" in obj:
        curator = _require(obj, "curator", str, f"{path}.curator")
    return Provenance(
        created_on=_require(obj, "created_on", str, f"{path}.created_on"),
        user_agent=_require(obj, "user_agent", str, f"{path}.user_agent"),
        created_at=_require(obj, "created_at", str, f"{path}.created_at"),
        curator=curator,
    )


_KNOWN_TOP_LEVEL = {"trace_version", "id", "url_pattern", "actions", "categories", "provenance"}


def parse_trace(data: bytes) -> Trace:
    """Parse a trace document. Unknown top-level fields are kept in ``extra``.

    Raises TraceSyntaxError for malformed JSON, TraceVersionError for an
    unsupported trace_version, TraceSchemaError (naming the field) for any
    structural or invariant violation.
    """
    try:
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TraceSyntaxError(f"trace document is not well-formed: {exc}") from exc
    if not isinstance(doc, dict):
        raise TraceSyntaxError("trace document must be a JSON object")

    version = _require(doc, "trace_version", str, "trace_version")
    if version != TRACE_VERSION:
        raise TraceVersionError(f"unsupported trace_version: {version!r}")

    trace_id = _require(doc, "id", str, "id")
    pattern = UrlPattern(_require(doc, "url_pattern", str, "url_pattern"))

    raw_actions = _require(doc, "actions", list, "actions")
    actions = [_parse_action(a, i) for i, a in enumerate(raw_actions)]

    categories: Dict[int, str] = {}
    if "categories" in doc:
        raw_cat = _require(doc, "categories", dict, "categories")
        for key, label in raw_cat.items():
            if not isinstance(key, str) or not key.isdigit():
                raise TraceSchemaError("categories", f"categories key {key!r} is not an action index")
            if not isinstance(label, str):
                raise TraceSchemaError("categories", f"categories[{key}] must be a string")
            categories[int(key)] = label

    provenance = _parse_provenance(_require(doc, "provenance", dict, "provenance"))
    extra = {k: doc[k] for k in doc if k not in _KNOWN_TOP_LEVEL}

    trace = Trace(
        id=trace_id,
        url_pattern=pattern,
        actions=actions,
        provenance=provenance,
        categories=categories,
        trace_version=version,
        extra=extra,
    )
    report = validate_trace(trace)
    if not report.ok():
        first = report.errors[0]
        raise TraceSchemaError(first.path, first.message)
    return trace


# ---------------------------------------------------------------------------
# validation

def _is_absolute_http(url: str) -> bool:
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def _is_rfc3339(ts: str) -> bool:
    text = ts[:-1] + "+00:00" if ts.endswith(("Z", "z")) else ts
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        return False
    return parsed.tzinfo is not None


def validate_trace(trace: Trace) -> ValidationReport:
    """Check every model invariant; violations are findings, not exceptions.

    Error findings are exactly the invariant violations. The single warning
    rule: repeat-click with until=max-only and max_iterations above
    1000 (expensive plans that never self-terminate).
    """
    findings: List[Finding] = []

    def err(path: str, message: str):
        findings.append(Finding("error", path, message))

    def warn(path: str, message: str):
        findings.append(Finding("warning", path, message))

    if not _ID_RE.match(trace.id):
        err("id", "id must match [a-z0-9][a-z0-9-]*")
    if not (trace.url_pattern.pattern.startswith("http://")
            or trace.url_pattern.pattern.startswith("https://")):
        err("url_pattern", "url_pattern must begin with http:// or https://")

    if not trace.actions:
        err("actions", "actions must be non-empty")

    for i, action in enumerate(trace.actions):
        path = f"actions[{i}]"
        wanted = _SELECTOR_FIELDS_BY_KIND[action.kind]
        present = {
            name for name in ("selector", "scope_selector", "link_selector")
            if getattr(action, name) is not None
        }
        for name in wanted - present:
            err(f"{path}.{name}", f"{name} is required for kind={action.kind.value}")
        for name in present - wanted:
            err(f"{path}.{name}", f"{name} is not allowed for kind={action.kind.value}")
        for name in present:
            sel: Selector = getattr(action, name)
            if not sel.value:
                err(f"{path}.{name}.value", "selector value must be non-empty")
            elif sel.strategy is SelectorStrategy.ELEMENT_ID and any(c.isspace() for c in sel.value):
                err(f"{path}.{name}.value", "element-id selector value must contain no whitespace")

        if action.kind is ActionKind.REPEAT_CLICK:
            if action.until is None:
                err(f"{path}.until", "until is required for repeat-click")
            if action.max_iterations is None:
                if action.until is UntilCondition.MAX_ONLY:
                    err(f"{path}.max_iterations",
                        "max_iterations must be explicit when until=max-only")
            elif not (1 <= action.max_iterations <= MAX_ITERATIONS_LIMIT):
                err(f"{path}.max_iterations",
                    f"max_iterations must be in 1..{MAX_ITERATIONS_LIMIT}")
            elif (action.until is UntilCondition.MAX_ONLY
                  and action.max_iterations > MAX_ITERATIONS_WARN):
                warn(f"{path}.max_iterations",
                     f"until=max-only with max_iterations={action.max_iterations} "
                     f"will always click {action.max_iterations} times")
        else:
            if action.until is not None:
                err(f"{path}.until", "until is only valid for repeat-click")
            if action.max_iterations is not None:
                err(f"{path}.max_iterations", "max_iterations is only valid for repeat-click")

        if action.wait_after_ms < 0:
            err(f"{path}.wait_after_ms", "wait_after_ms must be >= 0")

    for idx in trace.categories:
        if not (0 <= idx < len(trace.actions)):
            err("categories", f"categories key {idx} is not a valid action index")

    if not _is_absolute_http(trace.provenance.created_on):
        err("provenance.created_on", "created_on must be an absolute http(s) URI")
    if not _is_rfc3339(trace.provenance.created_at):
        err("provenance.created_at", "created_at must be an RFC 3339 timestamp")

    return ValidationReport(findings)


# ---------------------------------------------------------------------------
# serialization

def _sorted_deep(value: Any) -> Any:
    """Recursively key-sort dicts so extra fields serialize deterministically."""
    if isinstance(value, dict):
        return {k: _sorted_deep(value[k]) for k in sorted(value)}
    if isinstance(value, list):
        return [_sorted_deep(v) for v in value]
    return value


def serialize_trace(trace: Trace) -> bytes:
    """Canonical form: fixed key order, 2-space indent, UTF-8, trailing newline.

    Equal traces serialize to identical bytes; defaults are written out
    explicitly so a document's semantics are visible without this code.
    """
    doc: Dict[str, Any] = {
        "trace_version": trace.trace_version,
        "id": trace.id,
        "url_pattern": trace.url_pattern.pattern,
        "actions": [a.to_dict() for a in trace.actions],
    }
    if trace.categories:
        doc["categories"] = {str(k): trace.categories[k] for k in sorted(trace.categories)}
    doc["provenance"] = trace.provenance.to_dict()
    for key in sorted(trace.extra):
        doc[key] = _sorted_deep(trace.extra[key])
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# URL pattern matching

def _pattern_regex(pattern: str) -> re.Pattern:
    # Lowercase the scheme://host prefix so host matching is case-insensitive;
    # everything from the first path character on stays case-sensitive.
    scheme_end = pattern.find("://")
    path_start = len(pattern)
    if scheme_end >= 0:
        for i in range(scheme_end + 3, len(pattern)):
            if pattern[i] in "/?":
                path_start = i
                break
    normalized = pattern[:path_start].lower() + pattern[path_start:]

    out: List[str] = []
    i = 0
    while i < len(normalized):
        if normalized.startswith("**", i):
            out.append(".*")
            i += 2
        elif normalized[i] == "*":
            out.append("[^/]*")
            i += 1
        else:
            out.append(re.escape(normalized[i]))
            i += 1
    return re.compile("".join(out))


def match_url(pattern: UrlPattern, url: str) -> bool:
    """True iff ``url`` matches the pattern glob.

    The fragment is stripped before matching (it never reaches a proxy);
    the query string participates. Raises InvalidUrl for relative or
    unparseable URLs.
    """
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise InvalidUrl(f"unparseable url: {url!r}") from exc
    if not parts.scheme or not parts.netloc:
        raise InvalidUrl(f"url must be absolute: {url!r}")

    subject = f"{parts.scheme.lower()}://{parts.netloc.lower()}{parts.path}"
    if parts.query:
        subject += f"?{parts.query}"
    return _pattern_regex(pattern.pattern).fullmatch(subject) is not None
