/**
 * Stable selector derivation for recorded elements.
 *
 * Preference order: unique element id, unique class, unique class
 * combination or short unique CSS path, absolute XPath as the always-available
 * fallback. Whatever is returned must re-resolve to exactly the element it
 * was derived from on the current page.
 */

export type SelectorStrategy = "element-id" | "html-class" | "css" | "xpath";

export interface Selector {
  strategy: SelectorStrategy;
  value: string;
}

function cssEscape(value: string): string {
  // CSS.escape is unavailable in some test DOMs
  if (typeof CSS !== "undefined" && CSS.escape) {
    return CSS.escape(value);
  }
  return value.replace(/([^a-zA-Z0-9_-])/g, "\\$1");
}

function classList(element: Element): string[] {
  return Array.from(element.classList).filter((c) => c.length > 0);
}

export function deriveSelector(element: Element): Selector {
  const doc = element.ownerDocument;

  const id = element.getAttribute("id");
  if (id && !/\s/.test(id) && doc.querySelectorAll(`[id="${cssEscape(id)}"]`).length === 1) {
    return { strategy: "element-id", value: id };
  }

  for (const cls of classList(element)) {
    const matches = doc.getElementsByClassName(cls);
    if (matches.length === 1 && matches[0] === element) {
      return { strategy: "html-class", value: cls };
    }
  }

  const classes = classList(element);
  if (classes.length > 1) {
    const combo = element.tagName.toLowerCase() +
      classes.map((c) => `.${cssEscape(c)}`).join("");
    const matches = doc.querySelectorAll(combo);
    if (matches.length === 1 && matches[0] === element) {
      return { strategy: "css", value: combo };
    }
  }

  const path = shortestUniqueCssPath(element);
  if (path !== null) {
    return { strategy: "css", value: path };
  }

  return { strategy: "xpath", value: absoluteXPath(element) };
}

/** Grow a child-combinator path upward until it matches uniquely. */
function shortestUniqueCssPath(element: Element): string | null {
  const doc = element.ownerDocument;
  const segments: string[] = [];
  let current: Element | null = element;

  while (current && current !== doc.documentElement) {
    segments.unshift(segmentFor(current));
    const candidate = segments.join(" > ");
    const matches = doc.querySelectorAll(candidate);
    if (matches.length === 1 && matches[0] === element) {
      return candidate;
    }
    const parent: Element | null = current.parentElement;
    if (parent && parent.id && !/\s/.test(parent.id)) {
      const anchored = `#${cssEscape(parent.id)} > ${segments.join(" > ")}`;
      const hits = doc.querySelectorAll(anchored);
      if (hits.length === 1 && hits[0] === element) {
        return anchored;
      }
    }
    current = parent;
    if (segments.length >= 8) {
      break; // beyond this depth an XPath reads better
    }
  }
  return null;
}

function segmentFor(element: Element): string {
  const tag = element.tagName.toLowerCase();
  const parent = element.parentElement;
  if (!parent) {
    return tag;
  }
  const sameTag = Array.from(parent.children).filter(
    (child) => child.tagName === element.tagName,
  );
  if (sameTag.length === 1) {
    return tag;
  }
  return `${tag}:nth-of-type(${sameTag.indexOf(element) + 1})`;
}

export function absoluteXPath(element: Element): string {
  const parts: string[] = [];
  let current: Element | null = element;
  while (current) {
    const parent: Element | null = current.parentElement;
    if (!parent) {
      parts.unshift(`/${current.tagName.toLowerCase()}`);
      break;
    }
    const sameTag = Array.from(parent.children).filter(
      (child) => child.tagName === current!.tagName,
    );
    const index = sameTag.indexOf(current) + 1;
    parts.unshift(`/${current.tagName.toLowerCase()}[${index}]`);
    current = parent;
  }
  return parts.join("");
}

/** Resolve any derived selector back to its matches, in document order. */
export function resolveSelector(doc: Document, selector: Selector): Element[] {
  switch (selector.strategy) {
    case "element-id":
      return Array.from(doc.querySelectorAll(`[id="${cssEscape(selector.value)}"]`));
    case "html-class":
      return Array.from(doc.getElementsByClassName(selector.value));
    case "css":
      return Array.from(doc.querySelectorAll(selector.value));
    case "xpath":
      return resolveAbsoluteXPath(doc, selector.value);
  }
}

/** Minimal evaluator for the absolute paths this module generates. */
function resolveAbsoluteXPath(doc: Document, xpath: string): Element[] {
  const steps = xpath.split("/").filter((s) => s.length > 0);
  let context: Element[] = doc.documentElement ? [doc.documentElement] : [];
  const first = steps.shift();
  if (!first) {
    return [];
  }
  const rootTag = first.replace(/\[\d+\]$/, "");
  if (!context.length || context[0].tagName.toLowerCase() !== rootTag) {
    return [];
  }
  for (const step of steps) {
    const match = step.match(/^([a-z0-9-]+)(?:\[(\d+)\])?$/i);
    if (!match) {
      return [];
    }
    const [, tag, indexText] = match;
    const next: Element[] = [];
    for (const node of context) {
      const children = Array.from(node.children).filter(
        (child) => child.tagName.toLowerCase() === tag.toLowerCase(),
      );
      if (indexText) {
        const child = children[parseInt(indexText, 10) - 1];
        if (child) {
          next.push(child);
        }
      } else {
        next.push(...children);
      }
    }
    context = next;
  }
  return context;
}
