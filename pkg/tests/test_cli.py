"""CLI surface: exit codes, JSON output, the ingest endpoint."""

import json
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests

from tracecap.cli import main
from tracecap.repository import TraceRepository
from tracecap.trace import parse_trace, serialize_trace

from conftest import PROVENANCE, repo_trace

CORPUS = Path(__file__).parent / "corpus"


def run_cli(capsys, *argv) -> tuple:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_good_trace(capsys):
    code, out, _ = run_cli(capsys, "trace", "validate",
                           str(CORPUS / "01-minimal-click.trace.json"))
    assert code == 0
    assert json.loads(out) == {"findings": []}


def test_validate_missing_file_is_operation_error(capsys):
    code, _, err = run_cli(capsys, "trace", "validate", "/nope/missing.trace.json")
    assert code == 1
    assert "error" in err


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["trace", "match", "https://h.example/x"])  # missing --pattern*
    assert exit_info.value.code == 2


def test_match_nonmatching_exits_1(capsys, tmp_path):
    trace_file = tmp_path / "t.trace.json"
    trace_file.write_bytes(serialize_trace(repo_trace("https://h.example")))
    code, out, _ = run_cli(capsys, "trace", "match", "--pattern-from", str(trace_file),
                           "https://other.example/repo/x")
    assert code == 1
    assert json.loads(out)["match"] is False


def test_match_matching_exits_0(capsys):
    code, out, _ = run_cli(capsys, "trace", "match", "--pattern",
                           "https://h.example/*", "https://h.example/x")
    assert code == 0
    assert json.loads(out)["match"] is True


def test_plan_renders_text(capsys):
    code, out, _ = run_cli(capsys, "trace", "plan",
                           str(CORPUS / "07-all-kinds.trace.json"))
    assert code == 0
    assert "navigate" in out and "loop" in out


def test_out_flag_writes_file(capsys, tmp_path):
    out_file = tmp_path / "report.json"
    code, out, _ = run_cli(capsys, "--out", str(out_file), "trace", "validate",
                           str(CORPUS / "01-minimal-click.trace.json"))
    assert code == 0
    assert out == ""
    assert json.loads(out_file.read_text()) == {"findings": []}


def test_capture_one_cli(capsys, portal, portal_script, tmp_path):
    script_file = tmp_path / "script.json"
    script_file.write_text(json.dumps(portal_script))
    trace_file = tmp_path / "repo.trace.json"
    trace_file.write_bytes(serialize_trace(repo_trace(portal.base_url)))
    code, out, _ = run_cli(
        capsys, "capture", "one", "--url", portal.url("/repo/alpha"),
        "--trace", str(trace_file), "--out-dir", str(tmp_path / "caps"),
        "--backend", "mock", "--page-script", str(script_file))
    assert code == 0
    result = json.loads(out)
    assert result["status"] == "ok"
    assert Path(result["warc_path"]).is_file()
    from tracecap.quality import warc_inventory
    captured = warc_inventory(result["warc_path"])
    expected = {u for uris in result["inventory"]["categories"].values() for u in uris}
    assert expected <= captured


def test_quality_aggregate_pretty(capsys, tmp_path):
    qualities = [{"resource_url": f"https://h.example/{i}", "categories": {},
                  "overall": r} for i, r in enumerate((1.0, 0.5))]
    src = tmp_path / "q.json"
    src.write_text(json.dumps(qualities))
    code, out, _ = run_cli(capsys, "--pretty", "quality", "aggregate", "--in", str(src))
    assert code == 0
    assert out.splitlines()[0].startswith("category")


def test_bench_overhead_cli(capsys, tmp_path):
    tracer = [{"target_url": "https://h.example/r", "timings": {"total_ms": 3000}}]
    baseline = [{"total_ms": 1000}]
    (tmp_path / "t.json").write_text(json.dumps(tracer))
    (tmp_path / "b.json").write_text(json.dumps(baseline))
    csv_path = tmp_path / "delta.csv"
    code, out, _ = run_cli(capsys, "bench", "overhead",
                           "--tracer", str(tmp_path / "t.json"),
                           "--baseline", str(tmp_path / "b.json"),
                           "--csv", str(csv_path))
    assert code == 0
    report = json.loads(out)
    assert report["deltas_ms"] == [2000]
    assert csv_path.read_text().splitlines()[0] == "resource_url,tracer_ms,baseline_ms,delta_ms"


# --- serve-ingest -------------------------------------------------------------

@pytest.fixture()
def ingest_server(tmp_path):
    from tracecap.ingest import IngestServer
    server = IngestServer(tmp_path / "ingest-repo").start()
    yield server, tmp_path / "ingest-repo"
    server.stop()


def test_ingest_health(ingest_server):
    server, _ = ingest_server
    response = requests.get(f"{server.endpoint}/health", timeout=5)
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_ingest_put_valid_trace_201_and_lookup(ingest_server):
    server, repo_dir = ingest_server
    trace = repo_trace("https://portal.example")
    body = serialize_trace(trace)
    response = requests.put(f"{server.endpoint}/traces/{trace.id}", data=body, timeout=5)
    assert response.status_code == 201
    assert response.json()["version"] == 1

    again = requests.put(f"{server.endpoint}/traces/{trace.id}", data=body, timeout=5)
    assert again.json()["version"] == 2

    repo = TraceRepository(repo_dir)
    refs = repo.lookup("https://portal.example/repo/thing")
    assert refs and refs[0].version == 2
    assert repo.load(refs[0]).id == trace.id


def test_ingest_rejects_invalid_with_422(ingest_server):
    server, _ = ingest_server
    doc = {
        "trace_version": "1.0", "id": "bad-click-all",
        "url_pattern": "https://h.example/*",
        "actions": [{"kind": "click-all",
                     "scope_selector": {"strategy": "css", "value": "#files"}}],
        "provenance": PROVENANCE,
    }
    response = requests.put(f"{server.endpoint}/traces/bad-click-all",
                            data=json.dumps(doc).encode(), timeout=5)
    assert response.status_code == 422
    findings = response.json()["findings"]
    assert any("link_selector" in f["message"] or "link_selector" in f["path"]
               for f in findings)


def test_ingest_rejects_id_mismatch(ingest_server):
    server, _ = ingest_server
    body = serialize_trace(repo_trace("https://portal.example"))
    response = requests.put(f"{server.endpoint}/traces/other-id", data=body, timeout=5)
    assert response.status_code == 422


def test_cli_subprocess_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "tracecap.cli", "trace", "validate",
         str(CORPUS / "01-minimal-click.trace.json")],
        capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == {"findings": []}
