"""Synthetic manipulation tasks whose trajectories are attached to the object.

Each task owns a canonical point cloud and a canonical end-effector pose
sequence expressed in the object frame; a demo applies one rigid transform
to both, so demo actions equal pose_applied * canonical_trajectory exactly.
The clouds are deliberately asymmetric (tabs/markers) because a rotationally
symmetric cloud admits no continuous equivariant frame and is rejected by
the frame builder.

Splits follow the evaluation protocol: train_T/test_T sample poses from a
narrow band (yaw within +/-15 degrees, translation within 0.1 units),
test_NP samples uniform rotations over SO(3) via normalized quaternions and
translations within 0.5 units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .diffusion import ActionSequence, Observation
from .errors import BadParameter, IoFailure
from .se3 import SE3Pose, Twist, compose, exp_map, rotation_about_z

SPLITS = ("train_T", "test_T", "test_NP")

T_BAND_YAW = np.deg2rad(15.0)
T_BAND_TRANS = 0.1
NP_TRANS = 0.5


@dataclass(frozen=True)
class TaskSpec:
    name: str
    cloud: Observation                 # canonical object points + colors
    canonical_trajectory: ActionSequence
    horizon: int

    def __post_init__(self):
        if len(self.canonical_trajectory) != self.horizon + 1:
            raise BadParameter("trajectory length must be horizon + 1")


# ---------------------------------------------------------------------------
# object generators (shape parameters -> canonical cloud)

def triangle_cloud(n: int = 64) -> Observation:
    """Scalene triangle plate; colors carry the barycentric coordinates."""
    rng = np.random.default_rng(2024_01)
    verts = np.array([[0.9, -0.5, 0.0], [-0.7, -0.4, 0.0], [0.1, 0.8, 0.0]])
    b = rng.dirichlet(np.ones(3), size=n)
    points = b @ verts
    return Observation(points, b)


def cap_cloud(n: int = 256, radius: float = 0.5, height: float = 0.12) -> Observation:
    """Bottle-cap disk with a rim and a side tab breaking the symmetry."""
    rng = np.random.default_rng(2024_02)
    n_top = n - n // 4 - 12
    rr = radius * np.sqrt(rng.uniform(size=n_top))
    aa = rng.uniform(0.0, 2.0 * np.pi, size=n_top)
    top = np.stack([rr * np.cos(aa), rr * np.sin(aa), np.full(n_top, height)], axis=1)
    a2 = rng.uniform(0.0, 2.0 * np.pi, size=n // 4)
    z2 = rng.uniform(0.0, height, size=n // 4)
    rim = np.stack([radius * np.cos(a2), radius * np.sin(a2), z2], axis=1)
    tab = np.array([radius + 0.12, 0.0, height * 0.5]) + 0.02 * rng.normal(size=(12, 3))
    points = np.concatenate([top, rim, tab])
    shade = (points[:, 2] / height).clip(0.0, 1.0)
    colors = np.stack([shade, 0.3 * np.ones(n), 1.0 - shade], axis=1)
    return Observation(points, colors)


def sheet_cloud(n: int = 256, width: float = 1.6, depth: float = 1.0) -> Observation:
    """Paper sheet with a corner marker cluster (kills the 180-degree flip)."""
    rng = np.random.default_rng(2024_03)
    n_sheet = n - 16
    xy = rng.uniform(-0.5, 0.5, size=(n_sheet, 2)) * np.array([width, depth])
    sheet = np.concatenate([xy, np.zeros((n_sheet, 1))], axis=1)
    marker = np.array([0.45 * width, 0.42 * depth, 0.0]) + 0.015 * rng.normal(size=(16, 3))
    points = np.concatenate([sheet, marker])
    u = (points[:, 0] / width + 0.6).clip(0.0, 1.0)
    v = (points[:, 1] / depth + 0.6).clip(0.0, 1.0)
    colors = np.stack([u, v, np.full(n, 0.9)], axis=1)
    return Observation(points, colors)


# ---------------------------------------------------------------------------
# canonical trajectories

def _rotate_triangle_traj(horizon: int = 8) -> ActionSequence:
    contact = np.array([0.55, -0.35, 0.05])
    poses = []
    for theta in np.linspace(0.0, np.deg2rad(100.0), horizon + 1):
        rot = rotation_about_z(theta)
        poses.append(SE3Pose(rot.rotation, rot.rotation @ contact))
    return ActionSequence.from_poses(poses)


def _screw_cap_traj(horizon: int = 8) -> ActionSequence:
    # constant relative twist per step: unscrew about +z while lifting
    step = exp_map(Twist(np.array([0.0, 0.0, 0.05]), np.array([0.0, 0.0, 0.35])))
    pose = SE3Pose(np.eye(3), np.array([0.08, 0.0, 0.18]))
    poses = [pose]
    for _ in range(horizon):
        pose = compose(step, pose)
        poses.append(pose)
    return ActionSequence.from_poses(poses)


def _calligraphy_traj(horizon: int = 15) -> ActionSequence:
    ts = np.linspace(0.0, 1.0, horizon + 1)
    xs = -0.6 + 1.2 * ts
    ys = 0.35 * np.sin(2.0 * np.pi * ts * 0.75)
    yaw = np.arctan2(np.gradient(ys), np.gradient(xs))
    poses = [
        SE3Pose(rotation_about_z(a).rotation, np.array([x, y, 0.06]))
        for x, y, a in zip(xs, ys, yaw)
    ]
    return ActionSequence.from_poses(poses)


def build_task(name: str) -> TaskSpec:
    if name == "rotate_triangle":
        traj = _rotate_triangle_traj()
        return TaskSpec(name, triangle_cloud(), traj, traj.horizon)
    if name == "screw_cap":
        traj = _screw_cap_traj()
        return TaskSpec(name, cap_cloud(), traj, traj.horizon)
    if name == "calligraphy_stroke":
        traj = _calligraphy_traj()
        return TaskSpec(name, sheet_cloud(), traj, traj.horizon)
    raise BadParameter(f"unknown task {name!r}; choose from {TASK_NAMES}")


TASK_NAMES = ("rotate_triangle", "screw_cap", "calligraphy_stroke")


# ---------------------------------------------------------------------------
# demo generation

@dataclass(frozen=True)
class Demo:
    observation: Observation
    actions: ActionSequence
    pose_applied: SE3Pose
    split: str
    seed: int


def _uniform_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform over SO(3) from a normalized 4-Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def sample_pose(split: str, rng: np.random.Generator) -> SE3Pose:
    """Object pose for a demo; narrow band for T splits, full SE(3) for NP."""
    if split in ("train_T", "test_T"):
        yaw = rng.uniform(-T_BAND_YAW, T_BAND_YAW)
        trans = rng.uniform(-T_BAND_TRANS, T_BAND_TRANS, size=3)
        return SE3Pose(rotation_about_z(yaw).rotation, trans)
    if split == "test_NP":
        R = _uniform_rotation(rng)
        trans = rng.uniform(-NP_TRANS, NP_TRANS, size=3)
        return SE3Pose(R, trans)
    raise BadParameter(f"unknown split {split!r}; choose from {SPLITS}")


def generate_demo(
    task: TaskSpec,
    split: str,
    rng: np.random.Generator,
    pose_override: SE3Pose | None = None,
    point_jitter: float = 0.0,
    seed: int = 0,
) -> Demo:
    """One demonstration: cloud and actions moved by the same sampled pose."""
    pose = pose_override if pose_override is not None else sample_pose(split, rng)
    points = pose.apply_points(task.cloud.points)
    if point_jitter > 0.0:
        points = points + rng.normal(scale=point_jitter, size=points.shape)
    observation = Observation(points, task.cloud.colors)
    actions = task.canonical_trajectory.transformed(pose)
    return Demo(observation, actions, pose, split, seed)


def transform_demo(demo: Demo, pose: SE3Pose) -> Demo:
    """Rigidly move an existing demo (cloud, actions, and recorded pose)."""
    return Demo(
        observation=demo.observation.transformed(pose),
        actions=demo.actions.transformed(pose),
        pose_applied=compose(pose, demo.pose_applied),
        split=demo.split,
        seed=demo.seed,
    )


def task_target_provider(task: TaskSpec):
    """Ground-truth provider for the oracle denoiser.

    Recovers the object pose by aligning the canonical frame of the observed
    cloud with the canonical frame of the task's reference cloud; because the
    frame is exactly equivariant, provider(T O) = T provider(O) and jitter-free
    clouds recover their trajectory to floating-point precision. Clouds that
    cannot have come from this task raise UnknownObservation.
    """
    from .denoiser import FrameSpec, compute_frame
    from .errors import DegenerateFrame, UnknownObservation
    from .se3 import inverse

    spec = FrameSpec.default()
    ref = compute_frame(task.cloud, spec)
    ref_inv = inverse(SE3Pose(ref.axes, ref.origin))

    def provider(obs: Observation) -> ActionSequence:
        if obs.points.shape != task.cloud.points.shape:
            raise UnknownObservation(
                f"cloud shape {obs.points.shape} does not match task {task.name}"
            )
        try:
            frame = compute_frame(obs, spec)
        except DegenerateFrame as exc:
            raise UnknownObservation(f"frame failed: {exc}") from exc
        pose = compose(SE3Pose(frame.axes, frame.origin), ref_inv)
        return task.canonical_trajectory.transformed(pose)

    return provider


# ---------------------------------------------------------------------------
# dataset files (JSON Lines; one record per demo after a header object)

def demo_to_record(task_name: str, demo: Demo) -> dict:
    return {
        "task": task_name,
        "split": demo.split,
        "seed": demo.seed,
        "pose": demo.pose_applied.to_floats(),
        "points": [[float(v) for v in p] for p in demo.observation.points],
        "colors": [[float(v) for v in c] for c in demo.observation.colors],
        "actions": demo.actions.to_float_lists(),
    }


def record_to_demo(rec: dict) -> Demo:
    return Demo(
        observation=Observation(
            np.asarray(rec["points"], dtype=np.float64),
            np.asarray(rec["colors"], dtype=np.float64),
        ),
        actions=ActionSequence.from_float_lists(rec["actions"]),
        pose_applied=SE3Pose.from_floats(rec["pose"]),
        split=rec["split"],
        seed=int(rec["seed"]),
    )


def build_dataset(task: TaskSpec, counts: dict, seed: int, path,
                  point_jitter: float = 0.0, meta: dict | None = None) -> int:
    """Write a deterministic dataset file; returns the record count.

    Records draw from per-record generator streams seeded by
    (master seed, record index), so the file is byte-identical across
    reruns and records may be generated in parallel.
    """
    for key in ("train", "test_T", "test_NP"):
        if counts.get(key, 0) < 0:
            raise BadParameter(f"count {key} must be >= 0")
    plan = (
        [("train_T", i) for i in range(counts.get("train", 0))]
        + [("test_T", i) for i in range(counts.get("test_T", 0))]
        + [("test_NP", i) for i in range(counts.get("test_NP", 0))]
    )
    header = {
        "kind": "dataset_header",
        "task": task.name,
        "counts": {k: int(counts.get(k, 0)) for k in ("train", "test_T", "test_NP")},
        "seed": int(seed),
        "point_jitter": float(point_jitter),
    }
    if meta:
        header.update(meta)
    try:
        with open(path, "w") as f:
            f.write(json.dumps(header) + "\n")
            for index, (split, _) in enumerate(plan):
                rng = np.random.default_rng([seed, index])
                demo = generate_demo(task, split, rng, point_jitter=point_jitter,
                                     seed=index)
                f.write(json.dumps(demo_to_record(task.name, demo)) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write dataset {path}: {exc}") from exc
    return len(plan)


def load_dataset(path) -> tuple[dict | None, list[Demo]]:
    """Read a dataset file; parse failures name the 1-based line number."""
    header = None
    demos = []
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as exc:
        raise IoFailure(f"cannot read dataset {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if rec.get("kind") == "dataset_header":
                header = rec
                continue
            demos.append(record_to_demo(rec))
        except (ValueError, KeyError, TypeError) as exc:
            raise IoFailure(f"{path}: parse error at line {lineno}: {exc}") from exc
    return header, demos
