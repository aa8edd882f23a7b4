from __future__ import annotations

import pytest

from enf_tools.models import EnfModel
from enf_tools.services import synth
from scripts import closed_loop

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def walk():
    return synth.gen_enf_walk(EnfModel(step_std_hz=0.001, seed=7), 240.0, 1.0)


def test_mains_loop_meets_targets(walk):
    score, rmse = closed_loop.run_mains(walk, seed=7)
    assert score >= closed_loop.TARGETS["mains"]
    assert rmse <= closed_loop.MAINS_RMSE_TARGET_HZ


def test_video_loop_meets_target(walk):
    score = closed_loop.run_video(walk, seed=7, duration_s=240.0, occluded=False)
    assert score >= closed_loop.TARGETS["video"]


def test_occluded_loop_meets_target(walk):
    score = closed_loop.run_video(walk, seed=7, duration_s=240.0, occluded=True)
    assert score >= closed_loop.TARGETS["occluded"]


def test_main_reports_failure_with_exit_1(monkeypatch):
    monkeypatch.setattr(closed_loop, "run_mains", lambda walk, seed: (0.5, 0.001))
    assert closed_loop.main(["--loop", "mains", "--duration", "30"]) == 1
