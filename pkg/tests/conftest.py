import itertools

import numpy as np
import pytest

from invbound.tensors import SymTensor, TensorSpaceSpec, random_tensor

ST33 = TensorSpaceSpec("St", 3, 3)

_acceptance_lines = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary."""

    def _record(label, ok, detail=""):
        _acceptance_lines.append(f"[{'PASS' if ok else 'FAIL'}] {label}{': ' + detail if detail else ''}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def unit_random(space, rng):
    t = random_tensor(space, rng)
    return t * (1.0 / t.norm())


def naive_dense(t: SymTensor) -> np.ndarray:
    """Dense array by looking up every full index tuple one at a time."""
    out = np.zeros((t.dim,) * t.order)
    for idx in itertools.product(range(t.dim), repeat=t.order):
        out[idx] = t[idx]
    return out
