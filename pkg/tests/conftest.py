import pytest

from parktrack.config import load_config
from parktrack.pipeline import design_controllers, plan_path, scenario
from parktrack.sim import CONTROLLERS, compare


@pytest.fixture(scope="session")
def reference_cfg():
    return load_config()


@pytest.fixture(scope="session")
def reference_plan(reference_cfg):
    return plan_path(reference_cfg)


@pytest.fixture(scope="session")
def reference_schedules(reference_cfg):
    return design_controllers(reference_cfg, ["forward", "backward"])


@pytest.fixture(scope="session")
def reference_scenarios(reference_cfg, reference_plan, reference_schedules):
    return {
        d: [scenario(reference_cfg, reference_plan.curvature[d], reference_plan.speed[d], c, reference_schedules[d], d)
            for c in CONTROLLERS]
        for d in ("forward", "backward")
    }


@pytest.fixture(scope="session")
def reference_reports(reference_scenarios):
    return {d: compare(scs) for d, scs in reference_scenarios.items()}
