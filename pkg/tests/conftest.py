import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    deadline=None,
    max_examples=int(os.environ.get("EPFKIT_HYPOTHESIS_EXAMPLES", "100")),
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance lines collected during the run, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


# ---------------------------------------------------------------- strategies

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def rotations(draw):
    q = np.array([draw(st.floats(-1.0, 1.0)) for _ in range(4)])
    n = np.linalg.norm(q)
    if n < 1e-3:
        q, n = np.array([1.0, 0.0, 0.0, 0.0]), 1.0
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@st.composite
def realizable_stresses(draw, min_k=1e-3):
    """PSD stresses, with zero principal stresses drawn often enough to hit the boundary."""
    rho = np.array([draw(st.one_of(st.just(0.0), st.floats(0.0, 5.0))) for _ in range(3)])
    if rho.sum() < 2 * min_k:
        rho[0] += 2 * min_k
    v = draw(rotations())
    tau = v @ np.diag(rho) @ v.T
    return 0.5 * (tau + tau.T)


@st.composite
def symmetric_matrices(draw):
    vals = [draw(finite) for _ in range(6)]
    xx, yy, zz, xy, xz, yz = vals
    return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])


@st.composite
def map_points(draw):
    """Points of the barycentric triangle as weights of the 1C, 2C and 3C corners."""
    w = np.array([draw(st.floats(0.0, 1.0)) for _ in range(3)])
    if w.sum() == 0.0:
        w[2] = 1.0
    return w / w.sum()


# ------------------------------------------------------------------ fixtures


@pytest.fixture(scope="session")
def baseline():
    from epfkit.channel import ChannelConfig, solve_channel

    return solve_channel(ChannelConfig())


@pytest.fixture(scope="session")
def consistent_campaign(baseline):
    from epfkit.channel import ChannelConfig, run_uq_campaign
    from epfkit.perturbation import campaign_specs

    return run_uq_campaign(ChannelConfig(), campaign_specs(0.5), baseline=baseline)


@pytest.fixture(scope="session")
def legacy_campaign(baseline):
    from epfkit.channel import ChannelConfig, run_uq_campaign
    from epfkit.perturbation import campaign_specs

    return run_uq_campaign(ChannelConfig(), campaign_specs(1.0, 0.5), baseline=baseline)
