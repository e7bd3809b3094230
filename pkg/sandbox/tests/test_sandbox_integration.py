"""End-to-end tests: the evaluation CLI driving this runner for real.

The primary toolkit is consumed strictly through its external interfaces:
the `fim-forge eval` command, benchmark/completions JSONL files, and the
line-delimited JSON execution protocol this package serves.
"""

import json
import subprocess
import sys

EVAL_CMD = [sys.executable, "-m", "fim_forge.cli", "eval"]

EVEN_ODD_PREFIX = (
    "def even_odd_count(num):\n"
    '    """Return a tuple with the counts of even and odd digits of num."""\n'
    "    even_count = 0\n"
    "    odd_count = 0\n"
)
EVEN_ODD_MIDDLE = "    for i in str(abs(num)):"
EVEN_ODD_SUFFIX = (
    "\n        if int(i)%2==0:\n"
    "            even_count +=1\n"
    "        else:\n"
    "            odd_count +=1\n"
    "    return (even_count, odd_count)\n"
)
EVEN_ODD_TEST = (
    "def check(candidate):\n"
    "    assert candidate(7) == (0, 1)\n"
    "    assert candidate(-78) == (1, 1)\n"
    "    assert candidate(3452) == (2, 2)\n"
    "    assert candidate(0) == (1, 0)\n"
    "check(even_odd_count)\n"
)

# Longer than the canonical single line but still correct in context.
EVEN_ODD_LONGER_MIDDLE = (
    "    if num < 0:\n"
    "        num = str(num)[1:]\n"
    "    else:\n"
    "        num = str(num)\n"
    "    for i in num:"
)


def even_odd_record():
    return {
        "task_id": "integration/even_odd_count",
        "kind": "single-line",
        "prefix": EVEN_ODD_PREFIX,
        "suffix": EVEN_ODD_SUFFIX,
        "canonical_middle": EVEN_ODD_MIDDLE,
        "test_program": EVEN_ODD_TEST,
    }


def span_record(i):
    name = f"itask_{i}"
    return {
        "task_id": f"integration/{name}",
        "kind": "random-span",
        "prefix": f"def {name}(x):\n    base = {i}\n    value = ba",
        "suffix": "\n    return value\n",
        "canonical_middle": f"se + x * {i + 2}",
        "test_program": f"assert {name}(3) == {i} + 3 * {i + 2}\n",
    }


def write_jsonl(path, rows):
    path.write_text(
        "".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8"
    )
    return path


def run_eval(args, timeout=300):
    proc = subprocess.run(
        EVAL_CMD + args, capture_output=True, text=True, timeout=timeout
    )
    return proc


def read_report(path):
    return json.loads(path.read_text(encoding="utf-8"))


def rows_by_strategy(report):
    table = {}
    for row in report["rows"]:
        table.setdefault(row["strategy"], {})[row["kind"]] = row["pass_at_1"]
    return table


def test_canonical_middles_pass_for_real(tmp_path):
    bench = write_jsonl(
        tmp_path / "bench.jsonl", [even_odd_record()] + [span_record(i) for i in range(4)]
    )
    report_path = tmp_path / "report.json"
    proc = run_eval(
        [
            "--benchmark", str(bench),
            "--canonical",
            "--strategies", "none,overlap-trim",
            "--workers", "2",
            "--out-report", str(report_path),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    report = read_report(report_path)
    assert report["rows"]
    assert all(row["pass_at_1"] == 1.0 for row in report["rows"])


def test_longer_valid_middle_passes_raw_but_fails_truncated(tmp_path):
    bench = write_jsonl(tmp_path / "bench.jsonl", [even_odd_record()])
    comps = write_jsonl(
        tmp_path / "comps.jsonl",
        [{"task_id": "integration/even_odd_count", "raw": EVEN_ODD_LONGER_MIDDLE}],
    )
    report_path = tmp_path / "report.json"
    proc = run_eval(
        [
            "--benchmark", str(bench),
            "--completions", str(comps),
            "--strategies", "none,single-line",
            "--out-report", str(report_path),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    table = rows_by_strategy(read_report(report_path))
    assert table["none"]["single-line"] == 1.0
    assert table["single-line"]["single-line"] == 0.0


def test_overlap_trimming_recovers_real_failures(tmp_path):
    tasks = [span_record(i) for i in range(6)]
    bench = write_jsonl(tmp_path / "bench.jsonl", tasks)
    completions = []
    for i, task in enumerate(tasks):
        raw = task["canonical_middle"]
        if i < 3:
            raw = task["prefix"][-12:] + raw + task["suffix"][:6]
        completions.append({"task_id": task["task_id"], "raw": raw})
    comps = write_jsonl(tmp_path / "comps.jsonl", completions)
    report_path = tmp_path / "report.json"
    proc = run_eval(
        [
            "--benchmark", str(bench),
            "--completions", str(comps),
            "--strategies", "none,overlap-trim",
            "--out-report", str(report_path),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    table = rows_by_strategy(read_report(report_path))
    assert table["none"]["random-span"] == 0.5
    assert table["overlap-trim"]["random-span"] == 1.0


def test_timeout_status_flows_through_results(tmp_path):
    task = span_record(0)
    bench = write_jsonl(tmp_path / "bench.jsonl", [task])
    comps = write_jsonl(
        tmp_path / "comps.jsonl",
        [{"task_id": task["task_id"], "raw": "se\n    while True: pass\n    value = ba"}],
    )
    results_path = tmp_path / "results.jsonl"
    proc = run_eval(
        [
            "--benchmark", str(bench),
            "--completions", str(comps),
            "--strategies", "none",
            "--timeout-s", "1",
            "--out-results", str(results_path),
        ]
    )
    assert proc.returncode == 0, proc.stderr
    results = [
        json.loads(line)
        for line in results_path.read_text(encoding="utf-8").splitlines()
    ]
    assert results[0]["status"] == "timeout"
