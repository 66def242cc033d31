import numpy as np
import pytest

from pdpha.encoder import EncoderConfig
from pdpha.instances import Instance
from pdpha.policy import PolicyNetwork


def numeric_grad5(f, param, idx, h=1e-4):
    """Five-point central difference; O(h^4) truncation with far less rounding noise."""
    old = param.data[idx]
    vals = []
    for k in (2, 1, -1, -2):
        param.data[idx] = old + k * h
        vals.append(f())
    param.data[idx] = old
    f2, f1, fm1, fm2 = vals
    return (-f2 + 8 * f1 - 8 * fm1 + fm2) / (12 * h)


def numeric_grad(f, param, idx, h=1e-6):
    old = param.data[idx]
    param.data[idx] = old + h
    fp = f()
    param.data[idx] = old - h
    fm = f()
    param.data[idx] = old
    return (fp - fm) / (2 * h)


def rel_err(a, b, floor=1e-4):
    # below |g| ~ 1e-4 the h=1e-6 difference quotient is dominated by its ~1e-9 rounding noise
    return abs(a - b) / max(abs(a), abs(b), floor)


@pytest.fixture
def collinear():
    return Instance(depot=(0, 0), pickups=[(0, 0.3)], deliveries=[(0, 0.8)])


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def tiny_cfg():
    return EncoderConfig(d_h=8, heads=2, layers=1, ff_hidden=16)


@pytest.fixture
def tiny_model(tiny_cfg):
    return PolicyNetwork(tiny_cfg, seed=3)


@pytest.fixture
def small_model():
    return PolicyNetwork(EncoderConfig(d_h=16, heads=4, layers=2, ff_hidden=32), seed=11)


# one line per acceptance criterion, printed at the end of the run
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
