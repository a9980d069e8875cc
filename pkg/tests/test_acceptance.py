"""The five gate checks, one printed verdict line apiece.

Run ``pytest tests/test_acceptance.py -s`` to watch the lines go by.  Each
check gathers its own evidence — transcripts are re-run and re-timed here,
the explorer and the fuzz walks are re-executed, and the property counts
are read back from a fresh pytest run — so a stale sibling test cannot
vouch for a criterion.
"""

import io
import re
import subprocess
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

from consent_fabric.cli import entry
import test_explorer
import test_lifecycle_fuzz

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "src" / "consent_fabric" / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

# each adversary must be turned away with the scripted refusal
DENIALS = {
    "adversary1": ("error Locked",),
    "adversary2": ("error NotLive",),
    "adversary3": ("error PostConditionDenied",),
    "adversary4": ("error PostConditionDenied", "error TunnelBroken"),
    "adversary5": ("error CrossBorderUnsupported",),
}


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def run_scenario(name):
    buffer = io.StringIO()
    started = time.perf_counter()
    with redirect_stdout(buffer):
        code = entry(["run", str(SCENARIOS / f"{name}.dpi")])
    elapsed = time.perf_counter() - started
    return code, buffer.getvalue(), elapsed


def test_criterion_1_running_example():
    code, out, elapsed = run_scenario("running_example")
    golden = (GOLDEN / "running_example.txt").read_text(encoding="utf-8")
    faults = []
    if code != 0:
        faults.append(f"exit {code}")
    if out != golden:
        faults.append("transcript drifted from the golden copy")
    if elapsed >= 1.0:
        faults.append(f"took {elapsed:.2f} s")
    verdict(1, not faults,
            "; ".join(faults) or
            f"running example byte-exact in {elapsed * 1000:.0f} ms")


def test_criterion_2_adversaries():
    faults = []
    for name, markers in sorted(DENIALS.items()):
        code, out, _ = run_scenario(name)
        golden = (GOLDEN / f"{name}.txt").read_text(encoding="utf-8")
        if code != 0:
            faults.append(f"{name} exit {code}")
        if out != golden:
            faults.append(f"{name} transcript drifted")
        for marker in markers:
            if marker not in out:
                faults.append(f"{name} missing {marker!r}")
    verdict(2, not faults,
            "; ".join(faults) or
            "five adversaries turned away with the scripted refusals, exit 0")


def test_criterion_3_small_model():
    try:
        deep, wide, elapsed = test_explorer.run_small_model()
    except Exception as exc:
        verdict(3, False, f"{type(exc).__name__}: {str(exc)[:200]}")
        return
    faults = []
    if elapsed >= test_explorer.TIME_BUDGET:
        faults.append(f"took {elapsed:.1f} s")
    if deep <= 1000 or wide <= 1000:
        faults.append(f"suspiciously small sweep ({deep}/{wide})")
    verdict(3, not faults,
            "; ".join(faults) or
            f"{deep + wide} states swept clean in {elapsed:.1f} s")


def test_criterion_4_properties():
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "tests/test_properties.py",
         "-q", "--hypothesis-show-statistics"],
        cwd=ROOT, capture_output=True, text=True, timeout=600)
    parts = re.split(r"\S*test_properties\.py::(test_\w+)", proc.stdout)
    totals = {}
    for name, block in zip(parts[1::2], parts[2::2]):
        totals[name] = sum(int(n) for n in
                           re.findall(r"(\d+) passing examples", block))
    faults = []
    if proc.returncode != 0:
        faults.append(f"pytest exit {proc.returncode}")
    if len(totals) != 5:
        faults.append(f"expected 5 properties, saw {sorted(totals)}")
    faults.extend(f"{name} ran {count}" for name, count in totals.items()
                  if count < 1000)
    if faults:
        note = "; ".join(faults)
    else:
        note = f"five properties at {min(totals.values())} cases each"
    verdict(4, not faults, note)


def test_criterion_5_lifecycle():
    try:
        test_lifecycle_fuzz.test_fuzzed_walks_never_leave_the_lifecycle_graph()
        test_lifecycle_fuzz.test_fuzz_worlds_reach_every_state()
    except Exception as exc:
        verdict(5, False, f"{type(exc).__name__}: {str(exc)[:200]}")
        return
    verdict(5, True, "fuzzed walks stayed on the lifecycle graph and every "
                     "journalled exchange ran on a live connection")
