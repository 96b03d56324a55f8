/** Popup UI: start a session, arm the next click with a curatorial intent,
 * edit the pattern, then export or upload. */

function $(id: string): HTMLElement {
  return document.getElementById(id)!;
}

function valueOf(id: string): string {
  return ($(id) as HTMLInputElement).value.trim();
}

async function send(message: unknown): Promise<any> {
  return chrome.runtime.sendMessage(message);
}

function setStatus(text: string): void {
  $("status").textContent = text;
}

async function refresh(): Promise<void> {
  const state = await send({ type: "session-state" });
  if (!state?.recording) {
    setStatus("not recording");
    return;
  }
  ($("pattern") as HTMLInputElement).value = state.pattern;
  ($("trace-id") as HTMLInputElement).value = state.id;
  const list = $("actions");
  list.textContent = "";
  state.actions.forEach((action: any, i: number) => {
    const item = document.createElement("li");
    item.textContent = `${i}: ${action.kind}${action.category ? ` (${action.category})` : ""}`;
    list.appendChild(item);
  });
  setStatus(`recording, ${state.actions.length} action(s)`);
}

function armedMode(kind: "click" | "repeat-click" | "click-all") {
  const mode: Record<string, unknown> = { kind, category: valueOf("category") || undefined };
  const wait = valueOf("wait-ms");
  if (wait) {
    mode.waitAfterMs = parseInt(wait, 10);
  }
  if (($("skip-missing") as HTMLInputElement).checked) {
    mode.onMissing = "skip";
  }
  if (kind === "repeat-click") {
    mode.until = (valueOf("until") || "element-absent");
    const max = valueOf("max-iterations");
    if (max) {
      mode.maxIterations = parseInt(max, 10);
    }
  }
  return mode;
}

$("start").addEventListener("click", async () => {
  await send({ type: "start-recording", curator: valueOf("curator") || undefined });
  await refresh();
});

for (const kind of ["click", "repeat-click", "click-all"] as const) {
  $(`arm-${kind}`).addEventListener("click", async () => {
    await send({ type: "arm", mode: armedMode(kind) });
    setStatus(`armed: next page click records a ${kind}`);
    window.close();
  });
}

$("pattern").addEventListener("change", async () => {
  await send({ type: "set-pattern", pattern: valueOf("pattern") });
});

$("trace-id").addEventListener("change", async () => {
  await send({ type: "set-id", id: valueOf("trace-id") });
});

$("export").addEventListener("click", async () => {
  const result = await send({ type: "popup-export-download" });
  setStatus(result.ok ? "exported" : `export failed: ${result.message}`);
});

$("upload").addEventListener("click", async () => {
  const result = await send({ type: "popup-upload", endpoint: valueOf("endpoint") });
  if (result.ok) {
    setStatus(`uploaded as version ${result.version}`);
  } else {
    const first = result.findings?.[0];
    setStatus(first
      ? `rejected (${result.status}): ${first.path}: ${first.message}`
      : `upload failed: ${result.message ?? result.status}`);
  }
});

$("stop").addEventListener("click", async () => {
  await send({ type: "stop-recording" });
  await refresh();
});

refresh();
