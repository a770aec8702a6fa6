import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def disk(h, w, cy, cx, r):
    rr, cc = np.mgrid[:h, :w]
    return (rr - cy) ** 2 + (cc - cx) ** 2 <= r * r


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


SCENE_SPEC = {"width": 1200, "height": 1200, "res": 0.1, "seed": 3,
              "scarp": {"orientation_deg": 20.0, "drop_m": 20.0},
              "rocks": {"count": 80}}


@pytest.fixture(scope="session")
def scene_dir(tmp_path_factory):
    """Synthetic scene with oracle detections, written through the CLI."""
    import json

    from rocktraits.cli import main

    root = tmp_path_factory.mktemp("scene")
    (root / "spec.json").write_text(json.dumps(SCENE_SPEC))
    assert main(["synth", "--spec", str(root / "spec.json"), "--out", str(root / "scene")]) == 0
    return root / "scene"


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
