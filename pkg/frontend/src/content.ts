/**
 * Content script: arms click capture on the page being recorded.
 *
 * The next click is classified by whatever mode the curator armed in the
 * popup (plain click, repeat-click, or pick-container for click-all); the
 * recorded action is kept here per page and handed to the background
 * worker for export and upload.
 */

import { OverlayConflict, RecordingSession } from "./session";
import type { UntilCondition } from "./trace";

interface ArmedMode {
  kind: "click" | "repeat-click" | "click-all";
  category?: string;
  until?: UntilCondition;
  maxIterations?: number;
  waitAfterMs?: number;
  onMissing?: "fail" | "skip";
}

let session: RecordingSession | null = null;
let armed: ArmedMode | null = null;
let highlighted: Element | null = null;

function setHighlight(element: Element | null): void {
  if (highlighted instanceof HTMLElement) {
    highlighted.style.outline = "";
  }
  highlighted = element;
  if (element instanceof HTMLElement) {
    element.style.outline = "2px solid #c8102e";
  }
}

function onPointerOver(event: Event): void {
  if (armed && event.target instanceof Element) {
    setHighlight(event.target);
  }
}

function onClick(event: MouseEvent): void {
  if (!session || !armed || !(event.target instanceof Element)) {
    return;
  }
  event.preventDefault();
  event.stopPropagation();
  try {
    if (armed.kind === "click-all") {
      session.recordClickAll(event.target, {
        category: armed.category,
        waitAfterMs: armed.waitAfterMs,
        onMissing: armed.onMissing,
      });
    } else {
      session.recordClick(event.target, {
        kind: armed.kind,
        category: armed.category,
        until: armed.until,
        maxIterations: armed.maxIterations,
        waitAfterMs: armed.waitAfterMs,
        onMissing: armed.onMissing,
      });
    }
    chrome.runtime.sendMessage({ type: "action-recorded", count: session.actions.length });
  } catch (error) {
    if (!(error instanceof OverlayConflict)) {
      chrome.runtime.sendMessage({ type: "record-failed", message: String(error) });
    }
  } finally {
    armed = null;
    setHighlight(null);
  }
}

chrome.runtime.onMessage.addListener((message: any, _sender: any, sendResponse: any) => {
  switch (message.type) {
    case "start-recording":
      session = new RecordingSession(location.href, navigator.userAgent, message.curator);
      sendResponse({ ok: true, proposedPattern: session.urlPattern });
      break;
    case "arm":
      armed = message.mode as ArmedMode;
      sendResponse({ ok: true });
      break;
    case "set-pattern":
      if (session) {
        session.urlPattern = message.pattern;
      }
      sendResponse({ ok: session !== null });
      break;
    case "set-id":
      if (session) {
        session.traceId = message.id;
      }
      sendResponse({ ok: session !== null });
      break;
    case "session-state":
      sendResponse(session === null ? { recording: false } : {
        recording: true,
        pattern: session.urlPattern,
        id: session.traceId,
        actions: session.actions.map((a) => ({
          kind: a.action.kind,
          category: a.category ?? null,
        })),
      });
      break;
    case "export":
      try {
        sendResponse({ ok: true, id: session!.traceId, document: session!.exportTrace() });
      } catch (error) {
        sendResponse({ ok: false, message: String(error) });
      }
      break;
    case "stop-recording":
      session = null;
      armed = null;
      setHighlight(null);
      sendResponse({ ok: true });
      break;
  }
  return false;
});

document.addEventListener("pointerover", onPointerOver, true);
document.addEventListener("click", onClick, true);
