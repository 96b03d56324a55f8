/**
 * A recording session: one page, an ordered list of curator-classified
 * actions, and the metadata needed to export a class-level trace.
 *
 * Abstractness is enforced by construction: recorded actions hold element
 * selectors and curatorial intent only. No URL the curator traverses is
 * ever stored; the exported document's only URLs are the (editable) URL
 * pattern and the provenance page.
 */

import { proposeUrlPattern } from "./pattern";
import { deriveSelector, resolveSelector, Selector } from "./selector";
import {
  DEFAULT_MAX_ITERATIONS,
  DEFAULT_WAIT_AFTER_MS,
  OnMissing,
  TraceAction,
  TraceDocument,
  UntilCondition,
  serializeTrace,
  validateTrace,
} from "./trace";

export const UI_MARKER_ATTRIBUTE = "data-tracecap-ui";

export class OverlayConflict extends Error {}

export interface ClickOptions {
  kind: "click" | "repeat-click";
  category?: string;
  until?: UntilCondition; // repeat-click only
  maxIterations?: number;
  waitAfterMs?: number;
  onMissing?: OnMissing;
}

export interface ClickAllOptions {
  category?: string;
  waitAfterMs?: number;
  onMissing?: OnMissing;
}

export interface RecordedAction {
  action: TraceAction;
  category?: string;
}

export class RecordingSession {
  readonly originUrl: string;
  readonly userAgent: string;
  readonly curator?: string;
  urlPattern: string;
  traceId: string;
  private recorded: RecordedAction[] = [];

  constructor(originUrl: string, userAgent: string, curator?: string) {
    this.originUrl = originUrl;
    this.userAgent = userAgent;
    this.curator = curator;
    this.urlPattern = proposeUrlPattern(originUrl);
    this.traceId = defaultTraceId(originUrl);
  }

  get actions(): RecordedAction[] {
    return [...this.recorded];
  }

  /**
   * Record a click (or repeat-click) on the given element. The derived
   * selector must resolve back to exactly this element; clicks landing on
   * the extension's own UI are rejected.
   */
  recordClick(element: Element, options: ClickOptions): TraceAction {
    guardOverlay(element);
    const selector = deriveUnique(element);
    const action: TraceAction = {
      kind: options.kind,
      selector,
      wait_after_ms: options.waitAfterMs ?? DEFAULT_WAIT_AFTER_MS,
      on_missing: options.onMissing ?? "fail",
    };
    if (options.kind === "repeat-click") {
      action.until = options.until ?? "element-absent";
      action.max_iterations = options.maxIterations ??
        (action.until === "max-only" ? undefined : DEFAULT_MAX_ITERATIONS);
      if (action.until === "max-only" && action.max_iterations === undefined) {
        throw new Error("max-only repeat-click needs an explicit max_iterations");
      }
    }
    this.recorded.push({ action, category: options.category });
    return action;
  }

  /**
   * Record a click-all over the curator-selected container: the scope
   * selector addresses the container, the link selector the links within.
   */
  recordClickAll(scopeElement: Element, options: ClickAllOptions = {}): TraceAction {
    guardOverlay(scopeElement);
    const action: TraceAction = {
      kind: "click-all",
      scope_selector: deriveUnique(scopeElement),
      link_selector: deriveLinkSelector(scopeElement),
      wait_after_ms: options.waitAfterMs ?? DEFAULT_WAIT_AFTER_MS,
      on_missing: options.onMissing ?? "fail",
    };
    this.recorded.push({ action, category: options.category });
    return action;
  }

  removeAction(index: number): void {
    this.recorded.splice(index, 1);
  }

  buildDocument(): TraceDocument {
    const categories: Record<string, string> = {};
    this.recorded.forEach((entry, i) => {
      if (entry.category) {
        categories[String(i)] = entry.category;
      }
    });
    const doc: TraceDocument = {
      trace_version: "1.0",
      id: this.traceId,
      url_pattern: this.urlPattern,
      actions: this.recorded.map((entry) => entry.action),
      provenance: {
        created_on: this.originUrl,
        user_agent: this.userAgent,
        created_at: new Date().toISOString().replace(/\.\d{3}Z$/, "Z"),
        ...(this.curator !== undefined ? { curator: this.curator } : {}),
      },
    };
    if (Object.keys(categories).length > 0) {
      doc.categories = categories;
    }
    return doc;
  }

  /** Canonical document text; throws if the trace would not validate. */
  exportTrace(): string {
    if (this.recorded.length === 0) {
      throw new Error("nothing recorded yet");
    }
    const doc = this.buildDocument();
    const errors = validateTrace(doc).filter((f) => f.severity === "error");
    if (errors.length > 0) {
      throw new Error(`trace does not validate: ${errors[0].path}: ${errors[0].message}`);
    }
    return serializeTrace(doc);
  }
}

function guardOverlay(element: Element): void {
  if (element.closest(`[${UI_MARKER_ATTRIBUTE}]`)) {
    throw new OverlayConflict("click landed on the recorder's own UI");
  }
}

function deriveUnique(element: Element): Selector {
  const selector = deriveSelector(element);
  const matches = resolveSelector(element.ownerDocument, selector);
  if (matches.length !== 1 || matches[0] !== element) {
    throw new Error(
      `derived selector ${selector.strategy} ${JSON.stringify(selector.value)} ` +
      `does not uniquely resolve to the clicked element`);
  }
  return selector;
}

/** A selector for the links inside a click-all scope. */
function deriveLinkSelector(scopeElement: Element): Selector {
  const anchors = Array.from(scopeElement.querySelectorAll("a"));
  if (anchors.length > 0) {
    const shared = Array.from(anchors[0].classList).find((cls) =>
      anchors.every((a) => a.classList.contains(cls)));
    if (shared) {
      return { strategy: "html-class", value: shared };
    }
  }
  return { strategy: "css", value: "a" };
}

function defaultTraceId(originUrl: string): string {
  const url = new URL(originUrl);
  const base = `${url.host}${url.pathname}`
    .toLowerCase()
    .replace(/[^a-z0-9]+/g, "-")
    .replace(/^-+|-+$/g, "")
    .slice(0, 48);
  return base.length > 0 ? base : "recorded-trace";
}
