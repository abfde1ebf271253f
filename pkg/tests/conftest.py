import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_dft_magnitudes(frame, n_fft):
    """|DFT| of a zero-padded frame by direct summation (independent of numpy.fft)."""
    x = np.zeros(n_fft)
    x[: len(frame)] = frame
    n = np.arange(n_fft)
    out = np.empty(n_fft // 2 + 1)
    for k in range(n_fft // 2 + 1):
        angle = 2 * np.pi * k * n / n_fft
        out[k] = np.hypot(np.dot(x, np.cos(angle)), np.dot(x, np.sin(angle)))
    return out


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL/SKIP line per acceptance criterion; returns ``ok``."""
    lines = request.config.stash[_CRITERIA]

    def record(number, title, ok, detail="", status=None):
        status = status or ("PASS" if ok else "FAIL")
        line = f"[{status}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
