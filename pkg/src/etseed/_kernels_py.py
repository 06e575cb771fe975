"""Pure-numpy batched SE(3) kernels.

Fallback implementation of the hot loops; `etseed._kernels` is the compiled
twin with identical semantics. Both operate on stacked arrays:
rotations (N, 3, 3), translations (N, 3), twists (N, 6) laid out as
[u_x, u_y, u_z, w_x, w_y, w_z].

Conventions:
  exp([u, w]) = (R, t) with R = Rodrigues(w) and t = V(w) u, where
  V = I + (1 - cos th)/th^2 W + (th - sin th)/th^3 W^2,  W = skew(w).
  Below SMALL_ANGLE the sin/cos ratios switch to 2nd-order Taylor series.
  log uses the principal branch ||w|| <= pi; inside PI_BAND of pi the axis
  is recovered from the symmetric part of R with the sign fixed so the
  component at the largest diagonal entry is non-negative.
"""

import numpy as np

SMALL_ANGLE = 1e-6
PI_BAND = 1e-6

BACKEND_NAME = "python"


def _skew(w: np.ndarray) -> np.ndarray:
    """Stack of skew-symmetric matrices from (N, 3) vectors."""
    n = w.shape[0]
    s = np.zeros((n, 3, 3), dtype=np.float64)
    s[:, 0, 1] = -w[:, 2]
    s[:, 0, 2] = w[:, 1]
    s[:, 1, 0] = w[:, 2]
    s[:, 1, 2] = -w[:, 0]
    s[:, 2, 0] = -w[:, 1]
    s[:, 2, 1] = w[:, 0]
    return s


def exp_se3(twists: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched exponential map: (N, 6) twists -> (R, t)."""
    tw = np.ascontiguousarray(twists, dtype=np.float64).reshape(-1, 6)
    u, w = tw[:, :3], tw[:, 3:]
    th = np.linalg.norm(w, axis=1)
    th2 = th * th
    small = th < SMALL_ANGLE
    safe = np.where(small, 1.0, th)

    a = np.where(small, 1.0 - th2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    c = np.where(small, 1.0 / 6.0 - th2 / 120.0,
                 (safe - np.sin(safe)) / (safe * safe * safe))

    W = _skew(w)
    W2 = W @ W
    eye = np.broadcast_to(np.eye(3), W.shape)
    R = eye + a[:, None, None] * W + b[:, None, None] * W2
    V = eye + b[:, None, None] * W + c[:, None, None] * W2
    t = np.einsum("nij,nj->ni", V, u)
    return R, t


def _rot_log(R: np.ndarray) -> np.ndarray:
    """Axis-angle vectors from a stack of rotation matrices.

    Angle from atan2(||vee||, (tr - 1)/2), which stays well-conditioned at
    both ends of [0, pi]; axis from the normalized antisymmetric part.
    """
    tr = R[:, 0, 0] + R[:, 1, 1] + R[:, 2, 2]
    cos_th = (tr - 1.0) * 0.5
    vee = 0.5 * np.stack(
        [R[:, 2, 1] - R[:, 1, 2], R[:, 0, 2] - R[:, 2, 0], R[:, 1, 0] - R[:, 0, 1]],
        axis=1,
    )
    sin_th = np.linalg.norm(vee, axis=1)
    th = np.arctan2(sin_th, cos_th)
    th2 = th * th

    small = th < SMALL_ANGLE
    near_pi = th > np.pi - PI_BAND
    safe_sin = np.where(small | near_pi, 1.0, sin_th)
    # small: w = (1 + th^2/6) vee; regular: w = th * vee / ||vee||
    scale = np.where(small, 1.0 + th2 / 6.0, th / safe_sin)
    w = scale[:, None] * vee

    if np.any(near_pi):
        idx = np.nonzero(near_pi)[0]
        for i in idx:
            Ri = R[i]
            diag = np.array([Ri[0, 0], Ri[1, 1], Ri[2, 2]])
            j = int(np.argmax(diag))
            axis = np.zeros(3)
            axis[j] = np.sqrt(max(0.0, (diag[j] + 1.0) * 0.5))
            denom = 4.0 * axis[j] if axis[j] > 0.0 else 1.0
            for m in range(3):
                if m != j:
                    axis[m] = (Ri[j, m] + Ri[m, j]) / denom
            norm = np.linalg.norm(axis)
            if norm > 0.0:
                axis /= norm
            w[i] = th[i] * axis
    return w


def log_se3(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Batched logarithm map: (R, t) -> (N, 6) twists.

    Total function; the pi singularity resolves via the deterministic
    fallback documented in the module docstring.
    """
    R = np.ascontiguousarray(R, dtype=np.float64).reshape(-1, 3, 3)
    t = np.ascontiguousarray(t, dtype=np.float64).reshape(-1, 3)
    w = _rot_log(R)
    th = np.linalg.norm(w, axis=1)
    th2 = th * th
    small = th < SMALL_ANGLE
    safe2 = np.where(small, 1.0, th2)

    # V^-1 = I - W/2 + d W^2,  d = (1 - th sin th / (2 (1 - cos th))) / th^2
    with np.errstate(invalid="ignore", divide="ignore"):
        d_reg = (1.0 - th * np.sin(th) / (2.0 * (1.0 - np.cos(th)))) / safe2
    d = np.where(small, 1.0 / 12.0 + th2 / 720.0, d_reg)

    W = _skew(w)
    W2 = W @ W
    eye = np.broadcast_to(np.eye(3), W.shape)
    Vinv = eye - 0.5 * W + d[:, None, None] * W2
    u = np.einsum("nij,nj->ni", Vinv, t)
    return np.concatenate([u, w], axis=1)


def compose(Ra: np.ndarray, ta: np.ndarray, Rb: np.ndarray, tb: np.ndarray):
    """Batched pose composition a * b in homogeneous-matrix semantics."""
    Ra = np.asarray(Ra, dtype=np.float64)
    Rb = np.asarray(Rb, dtype=np.float64)
    R = Ra @ Rb
    t = np.einsum("nij,nj->ni", Ra, np.asarray(tb, dtype=np.float64))
    t = t + np.asarray(ta, dtype=np.float64)
    return R, t


def invert(R: np.ndarray, t: np.ndarray):
    """Batched pose inversion."""
    R = np.asarray(R, dtype=np.float64)
    Rt = np.swapaxes(R, -1, -2)
    ti = -np.einsum("nij,nj->ni", Rt, np.asarray(t, dtype=np.float64))
    return np.ascontiguousarray(Rt), ti


def rot_angle(Ra: np.ndarray, Rb: np.ndarray) -> np.ndarray:
    """Geodesic angle ||Log(Ra^T Rb)|| for stacks of rotations.

    Uses the atan2 form so nearly-identical rotations report an angle at
    roundoff level instead of the ~1e-8 floor of the arccos form.
    """
    Ra = np.asarray(Ra, dtype=np.float64)
    Rb = np.asarray(Rb, dtype=np.float64)
    Q = np.einsum("nji,njk->nik", Ra, Rb)  # Ra^T Rb
    tr = Q[:, 0, 0] + Q[:, 1, 1] + Q[:, 2, 2]
    vee = 0.5 * np.stack(
        [Q[:, 2, 1] - Q[:, 1, 2], Q[:, 0, 2] - Q[:, 2, 0], Q[:, 1, 0] - Q[:, 0, 1]],
        axis=1,
    )
    return np.arctan2(np.linalg.norm(vee, axis=1), (tr - 1.0) * 0.5)
