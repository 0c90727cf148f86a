from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from heatlab.kernels import KernelParams, make_preset
from heatlab.lattice import Lattice
from heatlab.parallel import set_workers


@pytest.fixture(autouse=True)
def _single_worker():
    set_workers(1)
    yield
    set_workers(1)


@pytest.fixture
def lat_small():
    """64-cell 1-d torus of period 16."""
    return Lattice(1, 0.25, 16.0)


@pytest.fixture
def frac1():
    return make_preset("fractional", KernelParams(alpha=1.0))


def const_kernel(value=1.0, dim=1, translation_invariant=True):
    """Kernel identically ``value`` on all pairs (alpha is nominal)."""
    from heatlab.kernels import custom_kernel

    return custom_kernel(KernelParams(alpha=1.0, dim=dim),
                         lambda t, x, y: np.full(np.broadcast_shapes(np.shape(x), np.shape(y))[:-1], value),
                         translation_invariant=translation_invariant, time_dependent=False,
                         bound=lambda r: np.full(np.shape(r), max(value, 1e-300)))


SMOKE = Path(str(resources.files("heatlab") / "presets" / "smoke.ini"))


@pytest.fixture(scope="session")
def smoke_runs(tmp_path_factory):
    """The bundled smoke preset run through the CLI at one and at four worker threads."""
    from heatlab.cli import main

    base = tmp_path_factory.mktemp("smoke")
    out = {}
    for n in (1, 4):
        d = base / f"t{n}"
        out[n] = (main(["run", str(SMOKE), "--out", str(d), "--threads", str(n)]), d)
    set_workers(1)
    return out


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def criterion(request, capsys):
    """Record one acceptance line ``[PASS|FAIL] <n> <title>: <detail>`` and assert on it."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {number:>2} {title}: {detail}"
        request.config.stash[ACCEPTANCE_LINES].append(line)
        with capsys.disabled():
            print("\n" + line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
