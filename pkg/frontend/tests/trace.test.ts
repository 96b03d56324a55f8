import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { TraceDocument, serializeTrace, validateTrace } from "../src/trace";
import { proposeUrlPattern } from "../src/pattern";

function repoDocument(): TraceDocument {
  return {
    trace_version: "1.0",
    id: "repo-files-and-zip",
    url_pattern: "http://127.0.0.1:8080/repo/*",
    actions: [
      {
        kind: "click-all",
        scope_selector: { strategy: "element-id", value: "files" },
        link_selector: { strategy: "html-class", value: "file" },
        wait_after_ms: 100,
        on_missing: "fail",
      },
      {
        kind: "click",
        selector: { strategy: "element-id", value: "zip" },
        wait_after_ms: 100,
        on_missing: "skip",
      },
    ],
    categories: { "0": "files", "1": "zip" },
    provenance: {
      created_on: "https://portal.example/repo/sample",
      user_agent: "tracecap-tests/1.0",
      created_at: "2026-01-01T00:00:00Z",
    },
  };
}

describe("canonical serialization", () => {
  it("matches the engine's canonical bytes for the shipped example", () => {
    // The engine wrote this file with its own canonical serializer.
    const golden = readFileSync(
      join(__dirname, "..", "..", "docs", "examples", "repo.trace.json"), "utf-8");
    expect(serializeTrace(repoDocument())).toBe(golden);
  });

  it("is deterministic regardless of category key insertion order", () => {
    const doc = repoDocument();
    const shuffled = repoDocument();
    shuffled.categories = { "1": "zip", "0": "files" };
    expect(serializeTrace(shuffled)).toBe(serializeTrace(doc));
  });
});

describe("validation", () => {
  it("accepts a well-formed document", () => {
    expect(validateTrace(repoDocument())).toEqual([]);
  });

  it("rejects click-all without a link selector", () => {
    const doc = repoDocument();
    delete doc.actions[0].link_selector;
    const findings = validateTrace(doc);
    expect(findings).toHaveLength(1);
    expect(findings[0].path).toContain("link_selector");
  });

  it("requires explicit max for max-only repetition", () => {
    const doc = repoDocument();
    doc.actions = [{
      kind: "repeat-click",
      selector: { strategy: "element-id", value: "next" },
      until: "max-only",
      wait_after_ms: 100,
      on_missing: "fail",
    }];
    expect(validateTrace(doc).some((f) => f.path.includes("max_iterations"))).toBe(true);
  });

  it("rejects bad ids and bad category indexes", () => {
    const doc = repoDocument();
    doc.id = "Bad_Id";
    doc.categories = { "7": "files" };
    const paths = validateTrace(doc).map((f) => f.path);
    expect(paths).toContain("id");
    expect(paths).toContain("categories");
  });
});

describe("url pattern proposal", () => {
  it("generalizes digit-bearing segments", () => {
    expect(proposeUrlPattern("https://decks.example/deck-123/slide-4"))
      .toBe("https://decks.example/*/*");
  });

  it("keeps stable segments", () => {
    expect(proposeUrlPattern("https://portal.example/repo/alpha"))
      .toBe("https://portal.example/repo/alpha");
  });

  it("generalizes segments that vary across recordings", () => {
    expect(proposeUrlPattern("https://portal.example/repo/alpha",
                             ["https://portal.example/repo/beta"]))
      .toBe("https://portal.example/repo/*");
  });

  it("preserves the host and scheme untouched", () => {
    expect(proposeUrlPattern("http://127.0.0.1:8080/repo/alpha",
                             ["http://127.0.0.1:8080/repo/zeta"]))
      .toBe("http://127.0.0.1:8080/repo/*");
  });
});
