import numpy as np
import pytest

from three_spin_cp.spin_algebra.system import SpinSystem

TWO_PI = 2 * np.pi
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def liquid_system(delta_hz=450.0, j_hh=8.5, j_h1c=172.0, j_h2c=8.0) -> SpinSystem:
    return SpinSystem.build(
        spins=[("H1", "1H"), ("H2", "1H"), ("C", "13C")],
        shifts={"H1": TWO_PI * delta_hz / 2, "H2": -TWO_PI * delta_hz / 2, "C": 0.0},
        j={("H1", "H2"): TWO_PI * j_hh, ("H1", "C"): TWO_PI * j_h1c, ("H2", "C"): TWO_PI * j_h2c})


def l_geometry(delta_hz=1000.0) -> SpinSystem:
    return SpinSystem.build(
        spins=[("H1", "1H"), ("H2", "1H"), ("C", "13C")],
        shifts={"H1": TWO_PI * delta_hz / 2, "H2": -TWO_PI * delta_hz / 2, "C": 0.0},
        geometry={"H1": (2.2, 0, 0), "H2": (0, 0, 0), "C": (0, 1.1, 0)})


@pytest.fixture
def liquid450():
    return liquid_system(450.0)


@pytest.fixture
def lsolid():
    return l_geometry()


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = ("PASS" if passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        status, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{status} {name} {detail}")
