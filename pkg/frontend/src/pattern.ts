/**
 * URL-pattern proposal: pre-fill a class-level pattern from the page the
 * trace is being recorded on. Segments that look instance-specific (they
 * contain digits) become `*`; the curator can edit the result before export.
 */

export function proposeUrlPattern(originUrl: string, variants: string[] = []): string {
  const url = new URL(originUrl);
  const segments = url.pathname.split("/").filter((s) => s.length > 0);
  const variantSegments = variants
    .map((v) => new URL(v))
    .filter((v) => v.origin === url.origin)
    .map((v) => v.pathname.split("/").filter((s) => s.length > 0));

  const generalized = segments.map((segment, i) => {
    if (/\d/.test(segment)) {
      return "*";
    }
    // a segment that differs across recorded variants is instance-specific
    if (variantSegments.some((other) => other[i] !== undefined && other[i] !== segment)) {
      return "*";
    }
    return segment;
  });

  const path = generalized.length ? `/${generalized.join("/")}` : "/";
  return `${url.protocol}//${url.host}${path}`;
}
