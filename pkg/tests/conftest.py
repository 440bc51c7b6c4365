import math

import numpy as np
import pytest

from telelink.geometry import Pose6D, Twist, Wrench
from telelink.kinematics import ChainModel, Joint, JointState
from telelink.netlink import codec


def random_pose(rng, scale=1.0) -> Pose6D:
    q = rng.normal(size=4)
    return Pose6D(scale * rng.normal(size=3), q / np.linalg.norm(q))


def random_chain(rng, n=None) -> ChainModel:
    n = int(rng.integers(1, 8)) if n is None else n
    joints = []
    for _ in range(n):
        axis = rng.normal(size=3)
        offset = Pose6D(rng.uniform(-0.3, 0.3, 3), _unit(rng.normal(size=4)))
        joints.append(Joint(tuple(axis), offset))
    return ChainModel(tuple(joints), [-math.pi] * n, [math.pi] * n, [2.0] * n, [50.0] * n,
                      tool=Pose6D(rng.uniform(-0.2, 0.2, 3)))


def _unit(v):
    return v / np.linalg.norm(v)


def _vec(rng, n):
    return tuple(float(x) for x in rng.normal(size=n))


def random_message(rng):
    """One random message of a random variant."""
    kind = int(rng.integers(0, 10))
    side = codec.LEFT if rng.random() < 0.5 else codec.RIGHT
    if kind == 0:
        return codec.EefPoseCmd(side, random_pose(rng), Twist(_vec(rng, 3), _vec(rng, 3)))
    if kind == 1:
        return codec.HandJointCmd(side, _vec(rng, 9 if rng.random() < 0.5 else 5))
    if kind == 2:
        return codec.HeadPoseCmd(random_pose(rng))
    if kind == 3:
        return codec.BaseVelocityCmd(Twist(_vec(rng, 3), _vec(rng, 3)))
    if kind == 4:
        return codec.WrenchFeedback(side, Wrench(_vec(rng, 3), _vec(rng, 3)))
    if kind == 5:
        return codec.HandCurrentFeedback(side, tuple(abs(x) for x in _vec(rng, 5)))
    if kind == 6:
        n = int(rng.integers(1, 17))
        return codec.ArmStateFeedback(side, JointState(rng.normal(size=n), rng.normal(size=n)))
    if kind == 7:
        size = int(rng.integers(0, 64))
        return codec.VideoFrame(int(rng.integers(0, 256)), int(rng.integers(0, 2**63)),
                                random_pose(rng), rng.integers(0, 256, size, dtype=np.uint8).tobytes())
    if kind == 8:
        return codec.FaceKeypoints(rng.integers(0, 256, int(rng.integers(0, 40)), dtype=np.uint8).tobytes())
    return codec.ErrorState(side, int(rng.integers(0, 2**16)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
