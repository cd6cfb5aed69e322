import numpy as np
import pytest
from hypothesis import settings

from pinnheat.autodiff import DerivBundle
from pinnheat.network import Architecture, Normalization, forward, init_network

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

IDENTITY = Normalization((1.0, 1.0, 1.0), (0.0, 0.0, 0.0), out_scale=1.0, out_offset=0.0)


def small_net(seed=0, layers=2, width=8):
    return init_network(Architecture(layers, width), seed)


def fd_bundle(net, norm, p, h=1e-4) -> DerivBundle:
    """Central finite differences of ``forward`` at one point."""
    p = np.asarray(p, dtype=np.float64)

    def u(dx=0.0, dy=0.0, dt=0.0):
        return forward(net, norm, p + np.array([dx, dy, dt]))

    u0 = u()
    return DerivBundle(
        u=u0,
        du_dx=(u(dx=h) - u(dx=-h)) / (2 * h),
        du_dy=(u(dy=h) - u(dy=-h)) / (2 * h),
        du_dt=(u(dt=h) - u(dt=-h)) / (2 * h),
        d2u_dx2=(u(dx=h) - 2 * u0 + u(dx=-h)) / h ** 2,
        d2u_dy2=(u(dy=h) - 2 * u0 + u(dy=-h)) / h ** 2,
    )


@pytest.fixture
def window_norm():
    return Normalization.for_window(20.0, 10.0, 0.0, 2.0)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
