"""SE(3) / SO(3) / se(3) primitives.

Poses are stored as an explicit (rotation, translation) pair rather than a
4x4 matrix; the homogeneous form appears only in serialization. Twists are
6-vectors [u, omega] with omega in axis-angle radians. All operations are
pure, reentrant, and take RNG state explicitly where randomness is involved.

Batched array math is delegated to the active kernel backend (compiled or
pure numpy, see :mod:`etseed.backend`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import BadParameter, CovarianceNotPSD, NearPiRotation

ORTHO_DRIFT_REORTH = 1e-7   # re-orthonormalize rotations that drift past this
ORTHO_TOL = 1e-9
PI_MARGIN = 1e-6            # log_map raises inside this band around pi


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


def _orthonormalize(R: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(R)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


@dataclass(frozen=True)
class SE3Pose:
    """A rigid transformation: 3x3 rotation plus 3-vector translation.

    Construction re-orthonormalizes the rotation (via SVD projection) when
    orthogonality drift exceeds 1e-7, and rejects left-handed inputs.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise BadParameter(f"rotation must be 3x3, got {R.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise BadParameter("pose entries must be finite")
        if np.linalg.det(R) <= 0.0:
            raise BadParameter("rotation must be right-handed (det > 0)")
        drift = np.max(np.abs(R.T @ R - np.eye(3)))
        if drift > ORTHO_DRIFT_REORTH:
            R = _orthonormalize(R)
        object.__setattr__(self, "rotation", _as_readonly(R))
        object.__setattr__(self, "translation", _as_readonly(t))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix (row-major)."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_floats(self) -> list[float]:
        """Serialization form: 16 floats, row-major homogeneous matrix."""
        return [float(x) for x in self.matrix().reshape(-1)]

    @classmethod
    def from_floats(cls, values) -> "SE3Pose":
        m = np.asarray(values, dtype=np.float64).reshape(4, 4)
        if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise BadParameter("homogeneous matrix must end in [0, 0, 0, 1]")
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def identity(cls) -> "SE3Pose":
        return cls(np.eye(3), np.zeros(3))

    def apply_points(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) point array."""
        return points @ self.rotation.T + self.translation


IDENTITY = SE3Pose.identity()


@dataclass(frozen=True)
class Twist:
    """se(3) element: translation part u plus axis-angle rotation part omega."""

    u: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64).reshape(3)
        w = np.asarray(self.omega, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
            raise BadParameter("twist components must be finite")
        object.__setattr__(self, "u", _as_readonly(u))
        object.__setattr__(self, "omega", _as_readonly(w))

    def as_vector(self) -> np.ndarray:
        """Serialization form: [u_x, u_y, u_z, w_x, w_y, w_z]."""
        return np.concatenate([self.u, self.omega])

    @classmethod
    def from_vector(cls, v) -> "Twist":
        v = np.asarray(v, dtype=np.float64).reshape(6)
        return cls(v[:3], v[3:])

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class SE3Gaussian:
    """Gaussian on SE(3): mean pose and 6x6 covariance in twist coordinates."""

    mean: SE3Pose
    covariance: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (6, 6):
            raise BadParameter(f"covariance must be 6x6, got {cov.shape}")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise BadParameter("covariance must be symmetric within 1e-12")
        if np.min(np.linalg.eigvalsh(cov)) < -1e-12:
            raise CovarianceNotPSD("covariance has eigenvalue below -1e-12")
        object.__setattr__(self, "covariance", _as_readonly(cov))


def exp_map(delta: Twist) -> SE3Pose:
    """Exponential map se(3) -> SE(3).

    Rodrigues' formula for the rotation, left-Jacobian integral V(omega) for
    the translation; switches to 2nd-order Taylor below 1e-6 rad.
    """
    R, t = backend.active().exp_se3(delta.as_vector()[None, :])
    return SE3Pose(R[0], t[0])


def rotation_angle(R: np.ndarray) -> float:
    """Rotation angle of a single 3x3 rotation matrix, in [0, pi]."""
    R = np.asarray(R, dtype=np.float64)
    tr = float(R[0, 0] + R[1, 1] + R[2, 2])
    s = 0.5 * np.sqrt((R[2, 1] - R[1, 2]) ** 2 + (R[0, 2] - R[2, 0]) ** 2
                      + (R[1, 0] - R[0, 1]) ** 2)
    return float(np.arctan2(s, (tr - 1.0) * 0.5))


def log_map(pose: SE3Pose, fallback: bool = False) -> Twist:
    """Logarithm map SE(3) -> se(3), principal branch ||omega|| <= pi.

    Raises NearPiRotation inside 1e-6 of the pi singularity unless
    ``fallback=True``, which switches to the deterministic axis-extraction
    variant (axis from the symmetric part of R, sign fixed by the largest
    diagonal element).
    """
    angle = rotation_angle(pose.rotation)
    if not fallback and angle > np.pi - PI_MARGIN:
        raise NearPiRotation(
            f"rotation angle {angle:.9f} within {PI_MARGIN} of pi; "
            "use fallback=True for the axis-extraction variant"
        )
    tw = backend.active().log_se3(pose.rotation[None], pose.translation[None])
    return Twist.from_vector(tw[0])


def compose(a: SE3Pose, b: SE3Pose) -> SE3Pose:
    """Pose composition a * b (homogeneous-matrix product)."""
    R, t = backend.active().compose(
        a.rotation[None], a.translation[None], b.rotation[None], b.translation[None]
    )
    return SE3Pose(R[0], t[0])


def inverse(a: SE3Pose) -> SE3Pose:
    """Pose inverse: (R, t) -> (R^T, -R^T t)."""
    R, t = backend.active().invert(a.rotation[None], a.translation[None])
    return SE3Pose(R[0], t[0])


def adjoint(a: SE3Pose) -> np.ndarray:
    """6x6 adjoint [[R, skew(t) R], [0, R]].

    Satisfies a * exp(d) == exp(Adj_a d) * a.
    """
    R = a.rotation
    t = a.translation
    tx = np.array([
        [0.0, -t[2], t[1]],
        [t[2], 0.0, -t[0]],
        [-t[1], t[0], 0.0],
    ])
    out = np.zeros((6, 6))
    out[:3, :3] = R
    out[:3, 3:] = tx @ R
    out[3:, 3:] = R
    return out


def interpolate(tau: float, a: SE3Pose, b: SE3Pose) -> SE3Pose:
    """Geodesic blend Exp((1 - tau) Log(b a^-1)) a.

    tau = 1 returns a, tau = 0 returns b; the parameter weights the *first*
    endpoint. Raises NearPiRotation when the relative rotation sits at the
    log singularity.
    """
    if not 0.0 <= tau <= 1.0:
        raise BadParameter(f"tau must be in [0, 1], got {tau}")
    rel = compose(b, inverse(a))
    delta = log_map(rel)  # strict branch: propagate NearPiRotation
    scaled = Twist.from_vector((1.0 - tau) * delta.as_vector())
    return compose(exp_map(scaled), a)


def geodesic_distance(a: SE3Pose, b: SE3Pose) -> float:
    """sqrt(||Log(Ra^T Rb)||^2 + ||tb - ta||^2).

    Left-invariant: applying the same rigid transform to both arguments
    leaves the distance unchanged.
    """
    ang = backend.active().rot_angle(a.rotation[None], b.rotation[None])[0]
    dt = b.translation - a.translation
    return float(np.sqrt(ang * ang + float(dt @ dt)))


def sample_gaussian(g: SE3Gaussian, rng: np.random.Generator) -> SE3Pose:
    """Draw x = exp(delta) * mean with delta ~ N(0, Sigma) in twist coordinates.

    Cholesky of Sigma; when that fails (singular PSD matrices, e.g. Sigma=0)
    an eigh-based square root takes over, clamping eigenvalues above -1e-12
    to zero so that Sigma=0 reproduces the mean exactly. Eigenvalues below
    -1e-12 raise CovarianceNotPSD. Deterministic given the generator state.
    """
    cov = g.covariance
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(cov)
        if np.min(eigvals) < -1e-12:
            raise CovarianceNotPSD(
                f"covariance eigenvalue {np.min(eigvals):.3e} below -1e-12"
            )
        L = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    z = rng.standard_normal(6)
    delta = Twist.from_vector(L @ z)
    return compose(exp_map(delta), g.mean)


def rotation_about_z(angle: float) -> SE3Pose:
    """Pure rotation about the z axis (test/demo convenience)."""
    c, s = np.cos(angle), np.sin(angle)
    return SE3Pose(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.zeros(3))
