import subprocess
import sys
from pathlib import Path

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def run(*args):
    return subprocess.run([sys.executable, *map(str, args)], capture_output=True, text=True,
                          check=True)


def test_run_random_suite_smoke():
    out = run(SCRIPTS / "run_random_suite.py", "--seeds", "0", "5").stdout
    assert "instances      5" in out


def test_trace_run_smoke(tmp_path):
    csv_path = tmp_path / "t.csv"
    res = run(SCRIPTS / "trace_run.py", "--suite-seed", "3", "--csv", csv_path)
    assert csv_path.read_text().startswith("k,sigma")
    assert "reason" in res.stderr


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cpdqsap", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "solve" in res.stdout
