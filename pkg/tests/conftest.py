import pytest

from cavityvac import AtomPair, CavityConfig, PhotonicCrystal

L0 = 1e-5
M = 1e-11
W_OSC = 1e5
W_CUT = 1e16


@pytest.fixture(scope="session")
def mirror_cavity():
    """Mirror parameters used throughout: 10 um cavity, 1e-11 kg, 1e5 1/s trap, 1e16 1/s cutoff."""
    return CavityConfig(L0, M, W_OSC, W_CUT)


@pytest.fixture(scope="session")
def two_modes():
    # cutoff between the second and third mode
    base = CavityConfig(L0, M, W_OSC, W_CUT)
    return base.replace(omega_cut=2.5 * base.fundamental)


@pytest.fixture(scope="session")
def crystal():
    return PhotonicCrystal(1.8e15, 2.0e15, 1e7)


@pytest.fixture
def pair():
    return AtomPair((1e-7, 2e-7, 3e-7), 3e15, (1e-29, 2e-30, 0.0), (3e-30, 1e-29, 5e-30))



_ACCEPTANCE_LINES = []


class _Recorder:
    def __call__(self, number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
