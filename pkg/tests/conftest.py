import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heatobs.geometry import Polygon, PolarCurve, sample_polar_boundary  # noqa: E402
from heatobs.mesh import triangulate  # noqa: E402

DOMAIN = PolarCurve.trig(1.0, [(3, 0.0, 0.1)])
OBSTACLE_1 = PolarCurve.trig(0.5, [(1, 0.1, 0.0), (2, 0.0, -0.02)])
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def unit_square():
    return Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


@pytest.fixture(scope="session")
def two_triangle_square(unit_square):
    return triangulate(unit_square, [], target_h=1.5)


@pytest.fixture(scope="session")
def domain_mesh():
    """Inversion-scale mesh of D: 100 boundary segments, h about 2 pi / 100."""
    return triangulate(sample_polar_boundary(DOMAIN, 100), [], target_h=2 * np.pi / 100, seed=0)


@pytest.fixture(scope="session")
def coarse_domain_mesh():
    return triangulate(sample_polar_boundary(DOMAIN, 30), [], target_h=2 * np.pi / 30, seed=0)


# -- acceptance reporting: one PASS/FAIL line per criterion --------------------

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    num, title = marker.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "ran": False, "details": []})
    if rep.when == "call" or rep.failed:
        entry["ran"] = True
        entry["ok"] &= rep.passed
        entry["details"] += [str(v) for k, v in rep.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] and e["ran"] else ("FAIL" if e["ran"] else "SKIP")
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"criterion {num:2d} {status}  {e['title']}" + (f"  [{detail}]" if detail else ""))
