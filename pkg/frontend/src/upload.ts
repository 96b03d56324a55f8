/**
 * Upload an exported trace to the engine's ingest endpoint
 * (PUT /traces/<id>). Validation findings from the engine come back to the
 * caller either way; they are the authoritative verdict on the document.
 */

import type { Finding } from "./trace";

export interface UploadResult {
  ok: boolean;
  status: number;
  version?: number;
  digest?: string;
  findings: Finding[];
}

export async function uploadTrace(
  endpoint: string,
  traceId: string,
  documentText: string,
): Promise<UploadResult> {
  const response = await fetch(`${endpoint.replace(/\/$/, "")}/traces/${traceId}`, {
    method: "PUT",
    headers: { "Content-Type": "application/json" },
    body: documentText,
  });
  let body: any = {};
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; surface the status alone
  }
  return {
    ok: response.status === 201,
    status: response.status,
    version: body.version,
    digest: body.digest,
    findings: body.findings ?? [],
  };
}
