import numpy as np
import pytest

from mairs.channel import ScenarioChannels
from mairs.harness import random_layout, random_reflections
from mairs.scenario import (
    STOCK_IRS_REFS,
    MovingRegion,
    RfParams,
    ScenarioSpec,
    TargetArea,
    desk_scenario,
    uniform_panel,
)


def random_instance(rng, max_panels=3, max_elements=8, max_antennas=4, n_points=None,
                    unit=False, kappa=None):
    """Small random scenario plus a feasible layout and reflection vector."""
    rf = RfParams.from_physical()
    lam = rf.wavelength
    n_pan = int(rng.integers(1, max_panels + 1))
    panels = []
    for ell in range(n_pan):
        n = int(rng.integers(1, max_elements + 1))
        k_bs = 10 ** rng.uniform(-0.5, 1.0) if kappa is None else kappa
        panels.append(uniform_panel(ell, STOCK_IRS_REFS[ell], 1, n, lam / 2,
                                    pathloss_exp_bs=rng.uniform(2.0, 2.6), rician_bs=k_bs))
    corner = (rng.uniform(45, 65), rng.uniform(-20, 20), 0.0)
    side = 1.0 if n_points is None else float(n_points - 1)
    area = TargetArea(0, corner, side, 1.0, pathloss_exp=rng.uniform(2.0, 2.6),
                      rician=10 ** rng.uniform(-0.5, 1.0) if kappa is None else kappa)
    spec = ScenarioSpec(rf, MovingRegion(2.5 * lam), panels, (area,),
                        int(rng.integers(1, max_antennas + 1)))
    layout = random_layout(spec, rng)
    v = random_reflections(spec.n_elements, rng, unit=unit)
    return spec, layout, v


@pytest.fixture(scope="session")
def desk():
    return desk_scenario()


@pytest.fixture(scope="session")
def desk_channels(desk):
    return ScenarioChannels(desk)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
