"""Denoiser models with equivariance enforced by construction.

Two evaluation modes share one architecture:

* invariant mode (used at k > 1): the observation enters only through
  rigid-motion-invariant cloud statistics, and the noisy poses enter as raw
  chain coordinates, so the output is literally unchanged under any rigid
  transform of the observation, for every parameter setting;
* equivariant mode (used at k = 1): the same invariant features drive local
  predictions that are pushed through a canonical frame - rotations as
  Gram-Schmidt of frame-rotated anchor pairs, translations as
  mass-center + frame-rotated offsets - so the output co-transforms exactly.

The canonical frame itself is equivariant: its origin is the cloud's mass
center and its axes come from Gram-Schmidt over radially-weighted offset
sums, which rotate with the cloud because the weights depend only on
invariant radii. Rotationally symmetric clouds make those sums vanish and
are rejected (DegenerateFrame) rather than silently canonicalized.

Fitting is plain gradient descent (Adam) through a hand-written backward
pass over the MLP heads, the Gram-Schmidt map, and the geodesic/L2 loss;
the gradients are validated against central finite differences at
initialization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .diffusion import ActionSequence, Observation, forward_diffuse_arrays, sequence_loss
from .errors import (
    BadParameter,
    DegenerateFrame,
    HorizonMismatch,
    IoFailure,
    NonFiniteLoss,
    UnknownObservation,
)
from .schedule import NoiseSchedule
from .se3 import SE3Pose

ANCHOR_EPS = 1e-8     # Gram-Schmidt degeneracy threshold
_SIN_FLOOR = 1e-7     # gradient guard at the geodesic-loss cone tip


# ---------------------------------------------------------------------------
# per-point features and the canonical frame

@dataclass(frozen=True)
class FeatureBundle:
    """Per-point channels split by transformation behavior.

    type0: (N, D0) scalars, untouched by rigid motion.
    type1: (N, D1, 3) vectors that rotate with the cloud.
    """

    type0: np.ndarray
    type1: np.ndarray

    def transformed(self, pose: SE3Pose) -> "FeatureBundle":
        rotated = np.einsum("ij,ndj->ndi", pose.rotation, self.type1)
        return FeatureBundle(self.type0, rotated)


def point_features(obs: Observation) -> FeatureBundle:
    """Normalized radii + colors as type-0, center offsets as type-1."""
    center = obs.points.mean(axis=0)
    offsets = obs.points - center
    radii = np.linalg.norm(offsets, axis=1)
    mean_r = radii.mean()
    if mean_r < 1e-12:
        raise DegenerateFrame("all points coincide with the mass center")
    type0 = np.concatenate([(radii / mean_r)[:, None], obs.colors], axis=1)
    return FeatureBundle(type0, offsets[:, None, :])


@dataclass(frozen=True)
class CanonicalFrame:
    """Object-attached frame: mass center plus orthonormal axes (det +1)."""

    origin: np.ndarray  # (3,)
    axes: np.ndarray    # (3, 3), columns are the axis directions


@dataclass(frozen=True)
class FrameSpec:
    """Radial-basis mixing weights for the two anchor vectors."""

    centers: np.ndarray  # (B,) in normalized-radius units
    width: float
    coeffs: np.ndarray   # (2, B)

    @classmethod
    def default(cls, bins: int = 8) -> "FrameSpec":
        centers = np.linspace(0.2, 2.0, bins)
        ramp = np.linspace(0.0, 1.0, bins)
        # two independent smooth radial profiles; the first emphasizes far
        # points, the second flips sign mid-radius, which keeps the anchors
        # non-collinear on generic clouds and fixes their signs
        coeffs = np.stack([ramp, ramp * ramp - 0.3])
        return cls(centers=centers, width=0.35, coeffs=coeffs)

    def to_dict(self) -> dict:
        return {
            "centers": [float(c) for c in self.centers],
            "width": float(self.width),
            "coeffs": [[float(c) for c in row] for row in self.coeffs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameSpec":
        return cls(
            centers=np.asarray(d["centers"], dtype=np.float64),
            width=float(d["width"]),
            coeffs=np.asarray(d["coeffs"], dtype=np.float64),
        )


def _gram_schmidt_single(v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    n1 = np.linalg.norm(v1)
    if n1 < ANCHOR_EPS:
        raise DegenerateFrame(f"first anchor norm {n1:.3e} below {ANCHOR_EPS}")
    e1 = v1 / n1
    w = v2 - (e1 @ v2) * e1
    n2 = np.linalg.norm(w)
    if n2 < ANCHOR_EPS:
        raise DegenerateFrame(f"second anchor residual {n2:.3e} below {ANCHOR_EPS}")
    e2 = w / n2
    return np.stack([e1, e2, np.cross(e1, e2)], axis=1)


def compute_frame(obs: Observation, frame_spec: FrameSpec) -> CanonicalFrame:
    """Equivariant canonical frame from radially-weighted anchor vectors.

    v_a = sum_i w_a(r_i) (x_i - M) with w_a a fixed radial profile; the
    axes are the Gram-Schmidt frame of (v1, v2). Symmetric clouds cancel
    the sums and raise DegenerateFrame.
    """
    bundle = point_features(obs)
    rt = bundle.type0[:, 0]
    offsets = bundle.type1[:, 0, :]
    phi = np.exp(-(((rt[:, None] - frame_spec.centers) / frame_spec.width) ** 2))
    weights = phi @ frame_spec.coeffs.T  # (N, 2)
    v = weights.T @ offsets              # (2, 3)
    axes = _gram_schmidt_single(v[0], v[1])
    return CanonicalFrame(origin=obs.points.mean(axis=0), axes=axes)


# ---------------------------------------------------------------------------
# batched Gram-Schmidt with a hand-written backward pass

def gram_schmidt(v1: np.ndarray, v2: np.ndarray):
    """(P, 3) anchor pairs -> (P, 3, 3) rotations with columns e1, e2, e1xe2.

    Returns (R, cache); feed the cache to :func:`gram_schmidt_backward`.
    """
    n1 = np.linalg.norm(v1, axis=1)
    if np.any(n1 < ANCHOR_EPS):
        raise DegenerateFrame("first anchor vector vanished")
    e1 = v1 / n1[:, None]
    p = np.einsum("ni,ni->n", e1, v2)
    w = v2 - p[:, None] * e1
    n2 = np.linalg.norm(w, axis=1)
    if np.any(n2 < ANCHOR_EPS):
        raise DegenerateFrame("anchor vectors are collinear")
    e2 = w / n2[:, None]
    e3 = np.cross(e1, e2)
    R = np.stack([e1, e2, e3], axis=2)
    return R, (v2, n1, e1, p, w, n2, e2, e3)


def gram_schmidt_backward(cache, gR: np.ndarray):
    """Adjoint of gram_schmidt: gradients w.r.t. the two anchor vectors."""
    v2, n1, e1, p, w, n2, e2, e3 = cache
    g1 = gR[:, :, 0]
    g2 = gR[:, :, 1]
    g3 = gR[:, :, 2]
    # e3 = e1 x e2
    ge1 = g1 + np.cross(e2, g3)
    ge2 = g2 + np.cross(g3, e1)
    # e2 = w / ||w||
    gw = (ge2 - np.einsum("ni,ni->n", ge2, e2)[:, None] * e2) / n2[:, None]
    # w = v2 - (e1 . v2) e1
    gwe1 = np.einsum("ni,ni->n", gw, e1)
    gv2 = gw - gwe1[:, None] * e1
    ge1 = ge1 - gwe1[:, None] * v2 - p[:, None] * gw
    # e1 = v1 / ||v1||
    gv1 = (ge1 - np.einsum("ni,ni->n", ge1, e1)[:, None] * e1) / n1[:, None]
    return gv1, gv2


# ---------------------------------------------------------------------------
# MLP heads

def _mlp_init(rng: np.random.Generator, sizes, final_bias) -> dict:
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = 1.0 / np.sqrt(fan_in)
        if i == len(sizes) - 2:
            scale *= 0.05  # small head so initial outputs sit near the bias
        params[f"W{i}"] = rng.normal(scale=scale, size=(fan_out, fan_in))
        params[f"b{i}"] = np.zeros(fan_out)
    params[f"b{len(sizes) - 2}"] = np.asarray(final_bias, dtype=np.float64).copy()
    return params


def _mlp_forward(params: dict, prefix: str, x: np.ndarray):
    h0 = np.tanh(x @ params[f"{prefix}.W0"].T + params[f"{prefix}.b0"])
    h1 = np.tanh(h0 @ params[f"{prefix}.W1"].T + params[f"{prefix}.b1"])
    y = h1 @ params[f"{prefix}.W2"].T + params[f"{prefix}.b2"]
    return y, (x, h0, h1)


def _mlp_backward(params: dict, prefix: str, cache, gy: np.ndarray) -> dict:
    x, h0, h1 = cache
    grads = {
        f"{prefix}.W2": gy.T @ h1,
        f"{prefix}.b2": gy.sum(axis=0),
    }
    gh1 = (gy @ params[f"{prefix}.W2"]) * (1.0 - h1 * h1)
    grads[f"{prefix}.W1"] = gh1.T @ h0
    grads[f"{prefix}.b1"] = gh1.sum(axis=0)
    gh0 = (gh1 @ params[f"{prefix}.W1"]) * (1.0 - h0 * h0)
    grads[f"{prefix}.W0"] = gh0.T @ x
    grads[f"{prefix}.b0"] = gh0.sum(axis=0)
    return grads


# ---------------------------------------------------------------------------
# the model

@dataclass(frozen=True)
class FeatureConfig:
    """Invariant cloud statistics and head sizing."""

    rbf_bins: int = 16
    rbf_max: float = 2.5
    rbf_width: float = 0.2
    hidden: int = 64

    def to_dict(self) -> dict:
        return {
            "rbf_bins": self.rbf_bins,
            "rbf_max": self.rbf_max,
            "rbf_width": self.rbf_width,
            "hidden": self.hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            rbf_bins=int(d["rbf_bins"]),
            rbf_max=float(d["rbf_max"]),
            rbf_width=float(d["rbf_width"]),
            hidden=int(d["hidden"]),
        )


_CLOUD_EXTRA = 6  # 3 raw radial moments + mean color
_POSE_FEATS = 15  # R (9) + t (3) + R^T t (3)
_K_FEATS = 3
_HEAD_BIAS = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])


class DenoiserModel:
    """Frame-regressor denoiser with invariant and equivariant heads."""

    def __init__(
        self,
        horizon: int,
        schedule: NoiseSchedule,
        feature_config: FeatureConfig,
        frame_spec: FrameSpec,
        params: dict[str, np.ndarray],
    ):
        self.horizon = horizon
        self.schedule = schedule
        self.feature_config = feature_config
        self.frame_spec = frame_spec
        self.params = params

    # -- observation context ------------------------------------------------

    def cloud_features(self, obs: Observation) -> np.ndarray:
        """Invariant cloud statistics: smoothed radial density (soft-binned
        so roundoff can never flip a bin), raw radial moments, mean color."""
        fc = self.feature_config
        bundle = point_features(obs)
        rt = bundle.type0[:, 0]
        radii = np.linalg.norm(bundle.type1[:, 0, :], axis=1)
        centers = np.linspace(0.0, fc.rbf_max, fc.rbf_bins)
        density = np.exp(-(((rt[:, None] - centers) / fc.rbf_width) ** 2)).mean(axis=0)
        moments = np.array([radii.mean(), (radii**2).mean(), (radii**3).mean()])
        return np.concatenate([density, moments, obs.colors.mean(axis=0)])

    def context(self, obs: Observation) -> dict:
        """Per-observation invariants, computed once per episode."""
        return {"cloud": self.cloud_features(obs), "frame": compute_frame(obs, self.frame_spec)}

    # -- feature assembly ---------------------------------------------------

    def _pose_block(self, R: np.ndarray, t: np.ndarray) -> np.ndarray:
        P = R.shape[0]
        rt = np.einsum("nji,nj->ni", R, t)  # R^T t
        return np.concatenate([R.reshape(P, 9), t, rt], axis=1)

    def _inputs(self, ctx: dict, R: np.ndarray, t: np.ndarray, k: int | None) -> np.ndarray:
        P = R.shape[0]
        cols = [np.tile(ctx["cloud"], (P, 1)), self._pose_block(R, t)]
        if k is not None:
            kk = k / self.schedule.K
            cols.append(np.tile([kk, np.sin(np.pi * kk), np.cos(np.pi * kk)], (P, 1)))
        cols.append(np.eye(self.horizon + 1))
        return np.concatenate(cols, axis=1)

    # -- heads ----------------------------------------------------------------

    def _head(self, prefix: str, x: np.ndarray, phi: np.ndarray):
        """Shared-MLP output plus a per-pose affine term over the pose block.

        The exact relative-transform law is affine in [R, t, R^T t] per pose
        index, so the affine path can represent it globally; the MLP carries
        whatever remains.
        """
        y, mlp_cache = _mlp_forward(self.params, prefix, x)
        y = y + np.einsum("pij,pj->pi", self.params[f"{prefix}.A"], phi)
        y = y + self.params[f"{prefix}.c"]
        return y, (mlp_cache, phi)

    def _forward(self, ctx: dict, R: np.ndarray, t: np.ndarray, k: int):
        """Relative-transform prediction plus backward-pass caches."""
        phi = self._pose_block(R, t)
        if k > 1:
            # the invariant target family scales with the schedule, so the
            # affine path sees k-scaled copies of the pose block
            ab = self.schedule.alpha_bar_at(k)
            phi_k = np.concatenate(
                [phi, np.sqrt(ab) * phi, np.sqrt(1.0 - ab) * phi], axis=1
            )
            x = self._inputs(ctx, R, t, k)
            y, head_cache = self._head("inv", x, phi_k)
            rel_R, gs_cache = gram_schmidt(y[:, 0:3], y[:, 3:6])
            rel_t = y[:, 6:9]
            return rel_R, rel_t, ("inv", head_cache, gs_cache, None)
        frame = ctx["frame"]
        x = self._inputs(ctx, R, t, None)
        y, head_cache = self._head("eqv", x, phi)
        a1 = y[:, 0:3] @ frame.axes.T
        a2 = y[:, 3:6] @ frame.axes.T
        rel_R, gs_cache = gram_schmidt(a1, a2)
        rel_t = frame.origin + y[:, 6:9] @ frame.axes.T
        return rel_R, rel_t, ("eqv", head_cache, gs_cache, frame)

    def predict_relative(self, obs, R, t, k, ctx=None):
        """Model protocol entry point used by the diffusion engine."""
        if ctx is None:
            ctx = self.context(obs)
        rel_R, rel_t, _ = self._forward(ctx, R, t, k)
        return rel_R, rel_t

    # -- parameter plumbing ---------------------------------------------------

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in sorted(self.params)])

    def set_flat_params(self, theta: np.ndarray):
        i = 0
        for name in sorted(self.params):
            n = self.params[name].size
            self.params[name] = theta[i : i + n].reshape(self.params[name].shape).copy()
            i += n


def make_model(
    horizon: int,
    schedule: NoiseSchedule,
    seed: int = 0,
    feature_config: FeatureConfig | None = None,
    frame_spec: FrameSpec | None = None,
) -> DenoiserModel:
    """Freshly initialized model; initial rotations sit at well-conditioned
    Gram-Schmidt inputs so every output is a valid rotation."""
    if horizon < 0:
        raise BadParameter(f"horizon must be >= 0, got {horizon}")
    fc = feature_config or FeatureConfig()
    fs = frame_spec or FrameSpec.default()
    cloud_dim = fc.rbf_bins + _CLOUD_EXTRA
    inv_in = cloud_dim + _POSE_FEATS + _K_FEATS + horizon + 1
    eqv_in = cloud_dim + _POSE_FEATS + horizon + 1
    rng = np.random.default_rng(seed)
    params = {}
    for prefix, dim, blocks in (("inv", inv_in, 3), ("eqv", eqv_in, 1)):
        head = _mlp_init(rng, (dim, fc.hidden, fc.hidden, 9), _HEAD_BIAS)
        params.update({f"{prefix}.{k}": v for k, v in head.items()})
        params[f"{prefix}.A"] = np.zeros((horizon + 1, 9, blocks * _POSE_FEATS))
        params[f"{prefix}.c"] = np.zeros((horizon + 1, 9))
    return DenoiserModel(horizon, schedule, fc, fs, params)


# ---------------------------------------------------------------------------
# spec-level evaluation wrappers

def eval_invariant(model: DenoiserModel, O: Observation, Ak: ActionSequence, k: int) -> ActionSequence:
    """Invariant-mode relative transforms (k > 1)."""
    if k <= 1:
        raise BadParameter("invariant mode is defined for k > 1")
    if model.horizon != Ak.horizon:
        raise HorizonMismatch(f"model horizon {model.horizon} vs {Ak.horizon}")
    R, t = model.predict_relative(O, Ak.rotations, Ak.translations, k)
    return ActionSequence(R, t)


def eval_equivariant(model: DenoiserModel, O: Observation, A1: ActionSequence) -> ActionSequence:
    """Equivariant-mode relative transforms (the k = 1 step)."""
    if model.horizon != A1.horizon:
        raise HorizonMismatch(f"model horizon {model.horizon} vs {A1.horizon}")
    R, t = model.predict_relative(O, A1.rotations, A1.translations, 1)
    return ActionSequence(R, t)


# ---------------------------------------------------------------------------
# oracle

class OracleDenoiser:
    """Test double that knows the clean sequence and predicts the exact
    relative transform H_i^0 (H_i^k)^-1 in both modes."""

    def __init__(self, target_provider, horizon: int):
        self.target_provider = target_provider
        self.horizon = horizon

    def context(self, obs: Observation) -> dict:
        target = self.target_provider(obs)
        if target is None:
            raise UnknownObservation("target provider returned no sequence")
        if target.horizon != self.horizon:
            raise HorizonMismatch(
                f"provider horizon {target.horizon} vs model {self.horizon}"
            )
        return {"target": target}

    def predict_relative(self, obs, R, t, k, ctx=None):
        if ctx is None:
            ctx = self.context(obs)
        target = ctx["target"]
        kern = backend.active()
        Ri, ti = kern.invert(R, t)
        return kern.compose(target.rotations, target.translations, Ri, ti)


def make_oracle(target_provider, horizon: int) -> OracleDenoiser:
    return OracleDenoiser(target_provider, horizon)


# ---------------------------------------------------------------------------
# fitting

@dataclass
class OptimizerConfig:
    steps: int = 2000
    batch_size: int = 4
    learning_rate: float = 5e-3
    lr_decay: str = "cosine"  # "cosine" | "none"
    seed: int = 0
    w_rot: float = 1.0
    grad_check: bool = True
    grad_check_count: int = 24
    record_every: int = 20
    head: str = "both"  # "both" | "inv" | "eqv": which head's k-range to sample


class _Adam:
    def __init__(self, params: dict, lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / c1) / (
                np.sqrt(self.v[k] / c2) + self.eps
            )


def _loss_and_grads(model: DenoiserModel, ctx: dict, Rk, tk, tgt_R, tgt_t, k, w_rot):
    """Forward + backward for one diffused sequence; returns (loss, grads)."""
    rel_R, rel_t, (prefix, head_cache, gs_cache, frame) = model._forward(ctx, Rk, tk, k)
    loss = sequence_loss(rel_R, rel_t, tgt_R, tgt_t, w_rot)

    # translation: d/d rel_t sum ||rel_t - tgt||^2
    g_t = 2.0 * (rel_t - tgt_t)
    # rotation: d/d rel_R sum theta = -tgt_R / (2 sin theta), floored at the cone tip
    sin_th = np.sin(backend.active().rot_angle(rel_R, tgt_R))
    g_R = -w_rot * tgt_R / (2.0 * np.maximum(sin_th, _SIN_FLOOR))[:, None, None]

    gv1, gv2 = gram_schmidt_backward(gs_cache, g_R)
    if prefix == "eqv":
        gv1 = gv1 @ frame.axes
        gv2 = gv2 @ frame.axes
        g_t = g_t @ frame.axes
    gy = np.concatenate([gv1, gv2, g_t], axis=1)
    mlp_cache, phi = head_cache
    grads = _mlp_backward(model.params, prefix, mlp_cache, gy)
    grads[f"{prefix}.A"] = np.einsum("pi,pj->pij", gy, phi)
    grads[f"{prefix}.c"] = gy
    return loss, grads


def _sample_case(dataset, ctxs, s, rng, head: str):
    """Draw (demo, k, noise) and build the diffused inputs and targets.

    head="both" balances the two (parameter-disjoint) heads 50/50, drawing
    k from each head's own range; uniform k would starve the k=1 head at
    one update per K steps.
    """
    idx = int(rng.integers(len(dataset)))
    _, A0 = dataset[idx]
    if head == "both":
        head = "eqv" if (s.K == 1 or rng.random() < 0.5) else "inv"
    if head == "inv":
        k = int(rng.integers(2, s.K + 1)) if s.K > 1 else 1
    elif head == "eqv":
        k = 1
    else:
        raise BadParameter(f"unknown head {head!r}")
    eps = rng.standard_normal((len(A0), 6))
    Rk, tk = forward_diffuse_arrays(A0.rotations, A0.translations, k, s, eps)
    kern = backend.active()
    Ri, ti = kern.invert(Rk, tk)
    tgt_R, tgt_t = kern.compose(A0.rotations, A0.translations, Ri, ti)
    return ctxs[idx], Rk, tk, tgt_R, tgt_t, k


def _finite_difference_check(model, case, w_rot, count, rng) -> float:
    """Max relative error of the analytic gradient against central
    differences on ``count`` randomly chosen parameters."""
    ctx, Rk, tk, tgt_R, tgt_t, k = case
    _, grads = _loss_and_grads(model, ctx, Rk, tk, tgt_R, tgt_t, k, w_rot)
    flat_grad = np.concatenate([grads[n].ravel() for n in sorted(grads)])
    names = sorted(grads)
    theta0 = np.concatenate([model.params[n].ravel() for n in names])

    def loss_at(theta):
        saved = {n: model.params[n] for n in names}
        i = 0
        for n in names:
            size = saved[n].size
            model.params[n] = theta[i : i + size].reshape(saved[n].shape)
            i += size
        try:
            rel_R, rel_t, _ = model._forward(ctx, Rk, tk, k)
            return sequence_loss(rel_R, rel_t, tgt_R, tgt_t, w_rot).total
        finally:
            model.params.update(saved)

    # central differences bottom out near |f| * eps / h in absolute terms,
    # so tiny-gradient entries are compared absolutely (denominator floor 1)
    h = 1e-5
    max_rel = 0.0
    for idx in rng.choice(theta0.size, size=min(count, theta0.size), replace=False):
        tp = theta0.copy()
        tp[idx] += h
        tm = theta0.copy()
        tm[idx] -= h
        fd = (loss_at(tp) - loss_at(tm)) / (2.0 * h)
        denom = max(abs(fd), abs(flat_grad[idx]), 1.0)
        max_rel = max(max_rel, abs(fd - flat_grad[idx]) / denom)
    return max_rel


def fit(model: DenoiserModel, dataset, config: OptimizerConfig | None = None) -> dict:
    """Gradient-based minimization of the diffusion loss over sampled (k, eps).

    ``dataset`` is a sequence of (Observation, ActionSequence) demos. The
    report carries the loss curve and the finite-difference validation
    result. Raises NonFiniteLoss with the offending step index if the loss
    leaves the reals.
    """
    config = config or OptimizerConfig()
    s = model.schedule
    if not dataset:
        raise BadParameter("dataset must contain at least one demo")
    for obs, A0 in dataset:
        if A0.horizon != model.horizon:
            raise HorizonMismatch(
                f"demo horizon {A0.horizon} vs model horizon {model.horizon}"
            )
    ctxs = [model.context(obs) for obs, _ in dataset]
    rng = np.random.default_rng(config.seed)

    # fixed probe batch from the same sampling distribution as training,
    # re-evaluated after fitting for the before/after comparison
    probe_rng = np.random.default_rng([config.seed, 1])
    probes = [
        _sample_case(dataset, ctxs, s, probe_rng, config.head)
        for _ in range(96)
    ]

    def probe_loss() -> float:
        total = 0.0
        for ctx, Rk, tk, tgt_R, tgt_t, k in probes:
            rel_R, rel_t, _ = model._forward(ctx, Rk, tk, k)
            total += sequence_loss(rel_R, rel_t, tgt_R, tgt_t, config.w_rot).total
        return total / len(probes)

    initial_loss = probe_loss()
    grad_err = None
    if config.grad_check:
        case = _sample_case(dataset, ctxs, s, rng,
                            "inv" if s.K > 1 else "eqv")
        grad_err = _finite_difference_check(
            model, case, config.w_rot, config.grad_check_count, rng
        )
        if grad_err > 1e-4:
            raise RuntimeError(
                f"analytic gradient disagrees with finite differences: {grad_err:.3e}"
            )

    opt = _Adam(model.params, config.learning_rate)
    curve = [(0, initial_loss)]
    last = initial_loss
    for step in range(1, config.steps + 1):
        if config.lr_decay == "cosine":
            opt.lr = config.learning_rate * 0.5 * (
                1.0 + np.cos(np.pi * (step - 1) / max(1, config.steps))
            )
        batch_loss = 0.0
        batch_grads: dict[str, np.ndarray] = {}
        for _ in range(config.batch_size):
            ctx, Rk, tk, tgt_R, tgt_t, k = _sample_case(
                dataset, ctxs, s, rng, config.head
            )
            loss, grads = _loss_and_grads(
                model, ctx, Rk, tk, tgt_R, tgt_t, k, config.w_rot
            )
            batch_loss += loss.total
            for name, g in grads.items():
                if name in batch_grads:
                    batch_grads[name] += g
                else:
                    batch_grads[name] = g.copy()
        if not np.isfinite(batch_loss):
            raise NonFiniteLoss(step)
        for name in batch_grads:
            batch_grads[name] /= config.batch_size
        opt.step(model.params, batch_grads)
        last = float(batch_loss / config.batch_size)
        if step % config.record_every == 0 or step == config.steps:
            curve.append((step, last))

    return {
        "initial_loss": initial_loss,
        "final_loss": probe_loss() if config.steps > 0 else initial_loss,
        "loss_curve": curve,
        "grad_check_max_rel_err": grad_err,
        "steps": config.steps,
    }


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(model: DenoiserModel, path) -> None:
    """JSON checkpoint; float repr round-trips bit-exactly."""
    payload = {
        "schedule": model.schedule.to_dict(),
        "frame_spec": model.frame_spec.to_dict(),
        "weights": {k: v.ravel().tolist() for k, v in model.params.items()},
        "weight_shapes": {k: list(v.shape) for k, v in model.params.items()},
        "horizon": model.horizon,
        "feature_config": model.feature_config.to_dict(),
    }
    try:
        with open(path, "w") as f:
            json.dump(payload, f)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> DenoiserModel:
    try:
        with open(path) as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    params = {
        name: np.asarray(flat, dtype=np.float64).reshape(payload["weight_shapes"][name])
        for name, flat in payload["weights"].items()
    }
    return DenoiserModel(
        horizon=int(payload["horizon"]),
        schedule=NoiseSchedule.from_dict(payload["schedule"]),
        feature_config=FeatureConfig.from_dict(payload["feature_config"]),
        frame_spec=FrameSpec.from_dict(payload["frame_spec"]),
        params=params,
    )
