import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from raylines.line_space import LineTangent, line_from_point_dir

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

coord = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(coord, coord, coord).map(np.array)
unit3 = vec3.filter(lambda v: np.linalg.norm(v) > 0.1).map(lambda v: v / np.linalg.norm(v))


@st.composite
def lines(draw):
    return line_from_point_dir(draw(vec3), draw(unit3))


@st.composite
def line_and_tangents(draw, k=2):
    L = draw(lines())
    ts = []
    for _ in range(k):
        dP = draw(vec3)
        du = draw(vec3)
        ts.append(LineTangent(dP, du - (du @ L.u) * L.u))
    return (L, *ts)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key][1])
