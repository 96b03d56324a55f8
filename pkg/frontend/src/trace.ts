/**
 * Trace document assembly: the exact interchange format the capture engine
 * parses, emitted in its canonical serialization (fixed key order, 2-space
 * indent, trailing newline) so exports are byte-stable.
 */

import type { Selector } from "./selector";

export type ActionKind = "click" | "click-all" | "repeat-click";
export type UntilCondition = "element-absent" | "element-disabled" | "max-only";
export type OnMissing = "fail" | "skip";

export interface TraceAction {
  kind: ActionKind;
  selector?: Selector;
  scope_selector?: Selector;
  link_selector?: Selector;
  until?: UntilCondition;
  max_iterations?: number;
  wait_after_ms: number;
  on_missing: OnMissing;
}

export interface Provenance {
  created_on: string;
  user_agent: string;
  created_at: string;
  curator?: string;
}

export interface TraceDocument {
  trace_version: "1.0";
  id: string;
  url_pattern: string;
  actions: TraceAction[];
  categories?: Record<string, string>;
  provenance: Provenance;
}

export const DEFAULT_WAIT_AFTER_MS = 2000;
export const DEFAULT_MAX_ITERATIONS = 1000;

const ID_RE = /^[a-z0-9][a-z0-9-]*$/;

function canonicalSelector(selector: Selector): Record<string, string> {
  return { strategy: selector.strategy, value: selector.value };
}

function canonicalAction(action: TraceAction): Record<string, unknown> {
  const out: Record<string, unknown> = { kind: action.kind };
  if (action.selector) {
    out.selector = canonicalSelector(action.selector);
  }
  if (action.scope_selector) {
    out.scope_selector = canonicalSelector(action.scope_selector);
  }
  if (action.link_selector) {
    out.link_selector = canonicalSelector(action.link_selector);
  }
  if (action.until !== undefined) {
    out.until = action.until;
  }
  if (action.max_iterations !== undefined) {
    out.max_iterations = action.max_iterations;
  }
  out.wait_after_ms = action.wait_after_ms;
  out.on_missing = action.on_missing;
  return out;
}

/** Canonical bytes: identical to the engine's own serializer. */
export function serializeTrace(doc: TraceDocument): string {
  const ordered: Record<string, unknown> = {
    trace_version: doc.trace_version,
    id: doc.id,
    url_pattern: doc.url_pattern,
    actions: doc.actions.map(canonicalAction),
  };
  if (doc.categories && Object.keys(doc.categories).length > 0) {
    const categories: Record<string, string> = {};
    for (const key of Object.keys(doc.categories).sort((a, b) => Number(a) - Number(b))) {
      categories[key] = doc.categories[key];
    }
    ordered.categories = categories;
  }
  const provenance: Record<string, string> = {
    created_on: doc.provenance.created_on,
    user_agent: doc.provenance.user_agent,
    created_at: doc.provenance.created_at,
  };
  if (doc.provenance.curator !== undefined) {
    provenance.curator = doc.provenance.curator;
  }
  ordered.provenance = provenance;
  return JSON.stringify(ordered, null, 2) + "\n";
}

export interface Finding {
  severity: "error" | "warning";
  path: string;
  message: string;
}

/**
 * Pre-flight validation mirroring the engine's invariants; the engine's
 * ingest endpoint remains the authority and its findings are surfaced
 * verbatim on upload.
 */
export function validateTrace(doc: TraceDocument): Finding[] {
  const findings: Finding[] = [];
  const err = (path: string, message: string) =>
    findings.push({ severity: "error", path, message });

  if (!ID_RE.test(doc.id)) {
    err("id", "id must match [a-z0-9][a-z0-9-]*");
  }
  if (!/^https?:\/\//.test(doc.url_pattern)) {
    err("url_pattern", "url_pattern must begin with http:// or https://");
  }
  if (doc.actions.length === 0) {
    err("actions", "actions must be non-empty");
  }

  doc.actions.forEach((action, i) => {
    const path = `actions[${i}]`;
    const wants = action.kind === "click-all"
      ? ["scope_selector", "link_selector"]
      : ["selector"];
    for (const field of ["selector", "scope_selector", "link_selector"] as const) {
      const present = action[field] !== undefined;
      if (wants.includes(field) && !present) {
        err(`${path}.${field}`, `${field} is required for kind=${action.kind}`);
      }
      if (!wants.includes(field) && present) {
        err(`${path}.${field}`, `${field} is not allowed for kind=${action.kind}`);
      }
      const selector = action[field];
      if (selector) {
        if (selector.value.length === 0) {
          err(`${path}.${field}.value`, "selector value must be non-empty");
        } else if (selector.strategy === "element-id" && /\s/.test(selector.value)) {
          err(`${path}.${field}.value`, "element-id value must contain no whitespace");
        }
      }
    }
    if (action.kind === "repeat-click") {
      if (!action.until) {
        err(`${path}.until`, "until is required for repeat-click");
      }
      if (action.until === "max-only" && action.max_iterations === undefined) {
        err(`${path}.max_iterations`, "max_iterations must be explicit for until=max-only");
      }
      if (action.max_iterations !== undefined &&
          (action.max_iterations < 1 || action.max_iterations > 10000)) {
        err(`${path}.max_iterations`, "max_iterations must be in 1..10000");
      }
    } else {
      if (action.until !== undefined) {
        err(`${path}.until`, "until is only valid for repeat-click");
      }
      if (action.max_iterations !== undefined) {
        err(`${path}.max_iterations`, "max_iterations is only valid for repeat-click");
      }
    }
    if (action.wait_after_ms < 0) {
      err(`${path}.wait_after_ms`, "wait_after_ms must be >= 0");
    }
  });

  for (const key of Object.keys(doc.categories ?? {})) {
    const index = Number(key);
    if (!Number.isInteger(index) || index < 0 || index >= doc.actions.length) {
      err("categories", `categories key ${key} is not a valid action index`);
    }
  }
  if (!/^https?:\/\//.test(doc.provenance.created_on)) {
    err("provenance.created_on", "created_on must be an absolute http(s) URI");
  }
  if (Number.isNaN(Date.parse(doc.provenance.created_at))) {
    err("provenance.created_at", "created_at must be an RFC 3339 timestamp");
  }
  return findings;
}
