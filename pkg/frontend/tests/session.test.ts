import { beforeEach, describe, expect, it } from "vitest";
import { OverlayConflict, RecordingSession, UI_MARKER_ATTRIBUTE } from "../src/session";

const REPO_PAGE = `
  <div id="files">
    <a class="file" href="/repo/alpha/file/1">file-1.txt</a>
    <a class="file" href="/repo/alpha/file/2">file-2.txt</a>
  </div>
  <a id="zip" href="/repo/alpha/archive.zip">download archive</a>
  <div ${UI_MARKER_ATTRIBUTE}><button id="recorder-button">recorder ui</button></div>
`;

function newSession(): RecordingSession {
  return new RecordingSession("http://127.0.0.1:8080/repo/alpha", "test-agent/1.0");
}

describe("RecordingSession", () => {
  beforeEach(() => {
    document.body.innerHTML = REPO_PAGE;
  });

  it("records a repeat-click with curatorial options", () => {
    const session = newSession();
    const action = session.recordClick(document.getElementById("zip")!, {
      kind: "repeat-click", until: "element-disabled", category: "slides",
    });
    expect(action.kind).toBe("repeat-click");
    expect(action.until).toBe("element-disabled");
    expect(action.max_iterations).toBe(1000);
    expect(session.actions).toHaveLength(1);
  });

  it("records click-all from a curator-selected container", () => {
    const session = newSession();
    const action = session.recordClickAll(document.getElementById("files")!, {
      category: "files",
    });
    expect(action.scope_selector).toEqual({ strategy: "element-id", value: "files" });
    expect(action.link_selector).toEqual({ strategy: "html-class", value: "file" });
  });

  it("ignores clicks landing on the recorder's own UI", () => {
    const session = newSession();
    expect(() => session.recordClick(document.getElementById("recorder-button")!,
                                     { kind: "click" }))
      .toThrow(OverlayConflict);
    expect(session.actions).toHaveLength(0);
  });

  it("exports a document with defaults and categories", () => {
    const session = newSession();
    session.recordClickAll(document.getElementById("files")!, { category: "files" });
    session.recordClick(document.getElementById("zip")!, {
      kind: "click", category: "zip", onMissing: "skip",
    });
    const doc = session.buildDocument();
    expect(doc.actions[0].wait_after_ms).toBe(2000);
    expect(doc.categories).toEqual({ "0": "files", "1": "zip" });
    expect(doc.provenance.created_on).toBe("http://127.0.0.1:8080/repo/alpha");
    expect(() => session.exportTrace()).not.toThrow();
  });

  it("export contains no URLs beyond the pattern and provenance page", () => {
    const session = newSession();
    session.urlPattern = "http://127.0.0.1:8080/repo/*";
    session.recordClickAll(document.getElementById("files")!, { category: "files" });
    session.recordClick(document.getElementById("zip")!, { kind: "click" });
    const text = session.exportTrace();
    const urls = text.match(/https?:\/\/[^"\s]+/g) ?? [];
    expect(new Set(urls)).toEqual(new Set([
      "http://127.0.0.1:8080/repo/*",
      "http://127.0.0.1:8080/repo/alpha",
    ]));
    // in particular: none of the traversed file/archive URLs leaked
    expect(text).not.toContain("file/1");
    expect(text).not.toContain("archive.zip");
  });

  it("refuses to export an empty session", () => {
    expect(() => newSession().exportTrace()).toThrow(/nothing recorded/);
  });

  it("proposes a pattern from the origin and lets the curator edit it", () => {
    const session = newSession();
    expect(session.urlPattern).toBe("http://127.0.0.1:8080/repo/alpha");
    session.urlPattern = "http://127.0.0.1:8080/repo/*";
    session.recordClick(document.getElementById("zip")!, { kind: "click" });
    expect(session.buildDocument().url_pattern).toBe("http://127.0.0.1:8080/repo/*");
  });
});
