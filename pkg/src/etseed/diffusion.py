"""Forward/reverse trajectory diffusion on SE(3).

Forward perturbation of a clean pose H0 at step k:

    Hk = Exp(gamma sqrt(1 - abar_k) eps) * F(sqrt(abar_k); H0, I)

where F(tau; a, b) = Exp((1 - tau) Log(b a^-1)) a is the geodesic blend and
eps is a unit Gaussian twist. The reverse process runs K-1 observation-
invariant denoise steps

    H^{k-1} = Exp(lambda0 Log(Hhat^{k->0} H^k) + lambda1 Log(H^k))

followed by one observation-equivariant step H^0 = Hhat^{1->0} H^1 that
composes the final prediction directly. Models plug in through a small
protocol: ``horizon``, ``context(obs)`` and
``predict_relative(obs, R, t, k, ctx)`` routed equivariant at k=1 and
invariant at k>1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import BadParameter, HorizonMismatch, NearPiRotation
from .schedule import NoiseSchedule, reverse_coefficients
from .se3 import PI_MARGIN, SE3Pose, Twist


@dataclass(frozen=True)
class Observation:
    """Colored point cloud: (N, 3) coordinates plus (N, 3) colors in [0, 1]."""

    points: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        col = np.ascontiguousarray(self.colors, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 3:
            raise BadParameter(f"points must be (N>=3, 3), got {pts.shape}")
        if col.shape != pts.shape:
            raise BadParameter("colors must match points shape")
        if not np.all(np.isfinite(pts)):
            raise BadParameter("points must be finite")
        if np.any(col < 0.0) or np.any(col > 1.0):
            raise BadParameter("colors must lie in [0, 1]")
        pts.setflags(write=False)
        col.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "colors", col)

    def transformed(self, pose: SE3Pose) -> "Observation":
        """Rigidly move the cloud; colors ride along unchanged."""
        return Observation(pose.apply_points(self.points), self.colors)


@dataclass(frozen=True)
class ActionSequence:
    """Ordered end-effector pose targets, stored as stacked arrays."""

    rotations: np.ndarray     # (P, 3, 3)
    translations: np.ndarray  # (P, 3)

    def __post_init__(self):
        R = np.ascontiguousarray(self.rotations, dtype=np.float64)
        t = np.ascontiguousarray(self.translations, dtype=np.float64)
        if R.ndim != 3 or R.shape[1:] != (3, 3) or R.shape[0] < 1:
            raise BadParameter(f"rotations must be (P>=1, 3, 3), got {R.shape}")
        if t.shape != (R.shape[0], 3):
            raise BadParameter("translations must be (P, 3)")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotations", R)
        object.__setattr__(self, "translations", t)

    def __len__(self) -> int:
        return self.rotations.shape[0]

    @property
    def horizon(self) -> int:
        return len(self) - 1

    def poses(self) -> list[SE3Pose]:
        return [SE3Pose(R, t) for R, t in zip(self.rotations, self.translations)]

    @classmethod
    def from_poses(cls, poses) -> "ActionSequence":
        return cls(
            np.stack([p.rotation for p in poses]),
            np.stack([p.translation for p in poses]),
        )

    def transformed(self, pose: SE3Pose) -> "ActionSequence":
        """Left-multiply every pose by a rigid transform."""
        R, t = backend.active().compose(
            np.broadcast_to(pose.rotation, self.rotations.shape),
            np.broadcast_to(pose.translation, self.translations.shape),
            self.rotations,
            self.translations,
        )
        return ActionSequence(R, t)

    def to_float_lists(self) -> list[list[float]]:
        """Serialization: one 16-float row-major homogeneous matrix per pose."""
        return [p.to_floats() for p in self.poses()]

    @classmethod
    def from_float_lists(cls, rows) -> "ActionSequence":
        return cls.from_poses([SE3Pose.from_floats(r) for r in rows])


@dataclass(frozen=True)
class DiffusionLoss:
    """Summed rotation-geodesic plus squared-translation loss."""

    rotation_term: float
    translation_term: float
    w_rot: float
    total: float

    def __post_init__(self):
        expected = self.w_rot * self.rotation_term + self.translation_term
        if abs(self.total - expected) > 1e-12 * max(1.0, abs(expected)):
            raise BadParameter("total must equal w_rot*rotation + translation")

    @classmethod
    def build(cls, rotation_term, translation_term, w_rot=1.0) -> "DiffusionLoss":
        return cls(
            rotation_term=float(rotation_term),
            translation_term=float(translation_term),
            w_rot=float(w_rot),
            total=float(w_rot * rotation_term + translation_term),
        )


def sequence_loss(rel_R, rel_t, tgt_R, tgt_t, w_rot=1.0) -> DiffusionLoss:
    """Loss between predicted and target relative transforms.

    Rotation: summed SO(3) geodesic angles; translation: summed squared
    Euclidean distances.
    """
    k = backend.active()
    rot = float(np.sum(k.rot_angle(rel_R, tgt_R)))
    trans = float(np.sum((np.asarray(rel_t) - np.asarray(tgt_t)) ** 2))
    return DiffusionLoss.build(rot, trans, w_rot)


def forward_diffuse_arrays(R0, t0, k, sched: NoiseSchedule, eps):
    """Batched forward perturbation; deterministic given the noise draw eps.

    Raises NearPiRotation when any clean rotation sits at the log
    singularity (the geodesic toward identity is then ill-defined).
    """
    kern = backend.active()
    R0 = np.asarray(R0, dtype=np.float64).reshape(-1, 3, 3)
    t0 = np.asarray(t0, dtype=np.float64).reshape(-1, 3)
    tr = R0[:, 0, 0] + R0[:, 1, 1] + R0[:, 2, 2]
    vee_n = np.sqrt(
        (R0[:, 2, 1] - R0[:, 1, 2]) ** 2
        + (R0[:, 0, 2] - R0[:, 2, 0]) ** 2
        + (R0[:, 1, 0] - R0[:, 0, 1]) ** 2
    ) * 0.5
    angles = np.arctan2(vee_n, (tr - 1.0) * 0.5)
    if np.any(angles > np.pi - PI_MARGIN):
        raise NearPiRotation("clean pose rotation at the log singularity")

    sqrt_ab = np.sqrt(sched.alpha_bar_at(k))
    # F(sqrt(abar); H0, I) = Exp(-(1 - sqrt(abar)) Log(H0)) H0
    logs = kern.log_se3(R0, t0)
    Ri, ti = kern.exp_se3(-(1.0 - sqrt_ab) * logs)
    Ri, ti = kern.compose(Ri, ti, R0, t0)
    scale = sched.noise_scale(k)
    Rn, tn = kern.exp_se3(np.asarray(eps, dtype=np.float64) * scale[None, :])
    return kern.compose(Rn, tn, Ri, ti)


def forward_diffuse(
    H0: SE3Pose, k: int, s: NoiseSchedule, rng: np.random.Generator
) -> tuple[SE3Pose, Twist]:
    """Perturb one pose at step k; returns (Hk, sampled unit twist)."""
    if not 1 <= k <= s.K:
        raise BadParameter(f"k must be in [1, {s.K}], got {k}")
    eps = rng.standard_normal(6)
    R, t = forward_diffuse_arrays(
        H0.rotation[None], H0.translation[None], k, s, eps[None]
    )
    return SE3Pose(R[0], t[0]), Twist.from_vector(eps)


def _check_horizon(model, seq_len: int):
    if model.horizon != seq_len - 1:
        raise HorizonMismatch(
            f"model horizon {model.horizon} vs sequence horizon {seq_len - 1}"
        )


def predict_noise(model, O: Observation, Ak: ActionSequence, k: int) -> ActionSequence:
    """Predicted relative transforms from A^k back to the clean sequence.

    Routes to the equivariant evaluation mode at k=1 and the invariant mode
    at k>1.
    """
    if k < 1:
        raise BadParameter(f"k must be >= 1, got {k}")
    _check_horizon(model, len(Ak))
    ctx = model.context(O)
    R, t = model.predict_relative(O, Ak.rotations, Ak.translations, k, ctx)
    return ActionSequence(R, t)


def train_step(
    model,
    O: Observation,
    A0: ActionSequence,
    s: NoiseSchedule,
    rng: np.random.Generator,
    w_rot: float = 1.0,
) -> DiffusionLoss:
    """One training-phase pass: diffuse, predict, score.

    Samples k uniformly from {1..K} and a unit Gaussian twist per pose,
    perturbs every pose of A0, and scores the model's predicted relative
    transforms against H_i^0 (H_i^k)^-1. Pure; parameter updates are the
    fitting mechanism's job.
    """
    _check_horizon(model, len(A0))
    kern = backend.active()
    k = int(rng.integers(1, s.K + 1))
    eps = rng.standard_normal((len(A0), 6))
    Rk, tk = forward_diffuse_arrays(A0.rotations, A0.translations, k, s, eps)
    ctx = model.context(O)
    rel_R, rel_t = model.predict_relative(O, Rk, tk, k, ctx)
    Rki, tki = kern.invert(Rk, tk)
    tgt_R, tgt_t = kern.compose(A0.rotations, A0.translations, Rki, tki)
    return sequence_loss(rel_R, rel_t, tgt_R, tgt_t, w_rot)


def infer(
    model,
    O: Observation,
    s: NoiseSchedule,
    T_p: int,
    rng: np.random.Generator,
    trace: list | None = None,
) -> ActionSequence:
    """Inference phase: sample A^K, denoise K-1 invariant steps, finish
    with the equivariant composition.

    A^K is drawn i.i.d. per pose from the SE(3) Gaussian centered at
    identity with twist scale gamma, consuming the stream in pose-index
    order so paired runs can replay identical draws. Deterministic given
    the generator state. When ``trace`` is a list, the per-step pose lists
    (16 floats each) are appended to it, A^K first.
    """
    if T_p < 0:
        raise BadParameter(f"horizon must be >= 0, got {T_p}")
    _check_horizon(model, T_p + 1)
    kern = backend.active()
    P = T_p + 1
    draws = rng.standard_normal((P, 6)) * s.terminal_scale()[None, :]
    R, t = kern.exp_se3(draws)
    ctx = model.context(O)
    if trace is not None:
        trace.append(ActionSequence(R, t).to_float_lists())
    for k in range(s.K, 1, -1):
        rel_R, rel_t = model.predict_relative(O, R, t, k, ctx)
        lam0, lam1 = reverse_coefficients(s, k)
        MR, Mt = kern.compose(rel_R, rel_t, R, t)
        v = lam0 * kern.log_se3(MR, Mt) + lam1 * kern.log_se3(R, t)
        R, t = kern.exp_se3(v)
        if trace is not None:
            trace.append(ActionSequence(R, t).to_float_lists())
    rel_R, rel_t = model.predict_relative(O, R, t, 1, ctx)
    R, t = kern.compose(rel_R, rel_t, R, t)
    if trace is not None:
        trace.append(ActionSequence(R, t).to_float_lists())
    return ActionSequence(R, t)


def sequence_geodesics(a: ActionSequence, b: ActionSequence) -> np.ndarray:
    """Per-pose geodesic distances between two sequences."""
    if len(a) != len(b):
        raise BadParameter("sequences must have equal length")
    kern = backend.active()
    ang = kern.rot_angle(a.rotations, b.rotations)
    dt = np.linalg.norm(a.translations - b.translations, axis=1)
    return np.sqrt(ang * ang + dt * dt)
