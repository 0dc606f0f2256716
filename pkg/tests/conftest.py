import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# Acceptance verdicts collected by test_acceptance.py; printed at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def write_manifest(tmp_path):
    """Write a CSV plus JSON manifest and return the manifest path."""

    def _write(rows, header, label_column, pos, neg, normalize=False, name="toy"):
        csv_path = tmp_path / f"{name}.csv"
        lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        man = tmp_path / f"{name}.json"
        man.write_text(json.dumps(dict(source_path=csv_path.name, label_column=label_column,
                                       positive_classes=pos, negative_classes=neg,
                                       normalize=normalize)), encoding="utf-8")
        return man

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
