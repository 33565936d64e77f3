import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from civic_lens import synthetic  # noqa: E402
from civic_lens.taxonomy import label_columns  # noqa: E402

_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record one line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        _ACCEPTANCE[number] = (title, passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {n}. {title}" + (f" ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def keyword_corpus():
    comments, truth = synthetic.generate(seed=0)
    labels = {t: np.array([truth[c.comment_id][t] for c in comments]) for t in label_columns()}
    return comments, truth, labels
