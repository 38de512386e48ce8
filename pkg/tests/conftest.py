import numpy as np
import pytest

from idea_farr.idea import IdeaParams, idea_curve
from idea_farr.timeseries import GenerationSeries


def idea_series(r0, d, n, scale=1.0, interval=7.0):
    """Noiseless IDEA incidence for model generations 1..n, labelled 1..n."""
    values = scale * idea_curve(IdeaParams(r0, d), np.arange(1, n + 1))
    return GenerationSeries(values, interval, i0_generation=1)


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


def two_wave_values(scale=1000.0):
    """First wave (r0=2, d=0.1) over 10 generations, then a fresh wave (r0=3, d=0.05).

    Returns the values and the index of the first element of the second wave.
    """
    first = idea_curve(IdeaParams(2, 0.1), np.arange(1, 11))
    second = idea_curve(IdeaParams(3, 0.05), np.arange(1, 9))
    return scale * np.concatenate([first, second]), first.size


def write_generation_csv(path, values, i0=1):
    lines = ["generation,incidence"]
    lines += [f"{i0 + k},{float(v)!r}" for k, v in enumerate(values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion for the summary."""
    def _report(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title} -- {detail}")
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
