/**
 * Service worker: relays export/upload requests from the popup to the
 * active tab's content script, downloads exported documents, and uploads
 * them to a configured ingest endpoint.
 */

import { uploadTrace } from "./upload";

async function activeTabId(): Promise<number> {
  const [tab] = await chrome.tabs.query({ active: true, currentWindow: true });
  if (!tab?.id) {
    throw new Error("no active tab");
  }
  return tab.id;
}

async function askContent(message: unknown): Promise<any> {
  return chrome.tabs.sendMessage(await activeTabId(), message);
}

chrome.runtime.onMessage.addListener((message: any, _sender: any, sendResponse: any) => {
  (async () => {
    switch (message.type) {
      case "popup-export-download": {
        const exported = await askContent({ type: "export" });
        if (!exported.ok) {
          sendResponse(exported);
          return;
        }
        const url = `data:application/json;charset=utf-8,${encodeURIComponent(exported.document)}`;
        await chrome.downloads.download({
          url,
          filename: `${exported.id}.trace.json`,
          saveAs: true,
        });
        sendResponse({ ok: true });
        return;
      }
      case "popup-upload": {
        const exported = await askContent({ type: "export" });
        if (!exported.ok) {
          sendResponse(exported);
          return;
        }
        const result = await uploadTrace(message.endpoint, exported.id, exported.document);
        sendResponse(result);
        return;
      }
      default: {
        // popup → content passthrough (start/arm/set-pattern/state/stop)
        sendResponse(await askContent(message));
      }
    }
  })().catch((error) => sendResponse({ ok: false, message: String(error) }));
  return true; // async response
});
