"""Diffusion-constant bookkeeping.

Keeps the beta/alpha/alpha-bar sequences (1-based step index k in [1, K]),
the tangent-space noise scale gamma, and the reverse-step mixing
coefficients. The reverse process is deterministic: no noise is injected
during denoising, so only the posterior-mean coefficients are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameter

KINDS = ("linear", "cosine")

LINEAR_BETA_START = 1e-4
LINEAR_BETA_END = 0.02
COSINE_OFFSET = 0.008
BETA_CLIP = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable diffusion constants; beta is primary, the rest derived.

    beta[i] is the step-(i+1) coefficient; accessors take 1-based k.
    An optional 6-vector ``gamma_diag`` scales twist components
    anisotropically (rotation radians vs translation units); when unset the
    scalar ``gamma`` applies isotropically.
    """

    K: int
    kind: str
    gamma: float
    beta: np.ndarray
    gamma_diag: np.ndarray | None = None
    alpha: np.ndarray = field(init=False, repr=False)
    alpha_bar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if self.K < 1 or beta.shape != (self.K,):
            raise BadParameter(f"beta must have shape ({self.K},)")
        if np.any(beta <= 0.0) or np.any(beta >= 1.0):
            raise BadParameter("beta values must lie in (0, 1)")
        if self.gamma <= 0.0:
            raise BadParameter("gamma must be positive")
        if self.kind not in KINDS:
            raise BadParameter(f"kind must be one of {KINDS}")
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        if np.any(np.diff(alpha_bar) >= 0.0):
            raise BadParameter("alpha_bar must be strictly decreasing")
        gd = self.gamma_diag
        if gd is not None:
            gd = np.asarray(gd, dtype=np.float64).reshape(6)
            if np.any(gd <= 0.0):
                raise BadParameter("gamma_diag entries must be positive")
            gd.setflags(write=False)
        beta.setflags(write=False)
        alpha.setflags(write=False)
        alpha_bar.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma_diag", gd)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    def alpha_bar_at(self, k: int) -> float:
        """Cumulative product up to step k (1-based)."""
        if not 1 <= k <= self.K:
            raise BadParameter(f"k must be in [1, {self.K}], got {k}")
        return float(self.alpha_bar[k - 1])

    def noise_scale(self, k: int) -> np.ndarray:
        """Per-component twist noise scale gamma * sqrt(1 - alpha_bar_k)."""
        base = self.gamma * np.sqrt(1.0 - self.alpha_bar_at(k))
        if self.gamma_diag is None:
            return np.full(6, base)
        return self.gamma_diag * np.sqrt(1.0 - self.alpha_bar_at(k))

    def terminal_scale(self) -> np.ndarray:
        """Twist standard deviation of the fully-noised pose distribution."""
        if self.gamma_diag is None:
            return np.full(6, self.gamma)
        return np.asarray(self.gamma_diag, dtype=np.float64)

    def to_dict(self) -> dict:
        out = {
            "K": self.K,
            "kind": self.kind,
            "gamma": self.gamma,
            "beta": [float(b) for b in self.beta],
        }
        if self.gamma_diag is not None:
            out["gamma_diag"] = [float(g) for g in self.gamma_diag]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(
            K=int(d["K"]),
            kind=str(d["kind"]),
            gamma=float(d["gamma"]),
            beta=np.asarray(d["beta"], dtype=np.float64),
            gamma_diag=np.asarray(d["gamma_diag"], dtype=np.float64)
            if d.get("gamma_diag") is not None
            else None,
        )


def build_schedule(
    K: int, kind: str = "linear", gamma: float = 1.0,
    gamma_diag=None,
) -> NoiseSchedule:
    """Construct a schedule.

    linear: beta ramps 1e-4 -> 0.02 over K steps.
    cosine: alpha_bar(k) = cos^2((k/K + 0.008)/1.008 * pi/2) normalized to
    alpha_bar(0), with per-step beta clipped to 0.999.
    """
    if K < 1:
        raise BadParameter(f"K must be >= 1, got {K}")
    if gamma <= 0.0:
        raise BadParameter(f"gamma must be positive, got {gamma}")
    if kind == "linear":
        beta = np.linspace(LINEAR_BETA_START, LINEAR_BETA_END, K)
    elif kind == "cosine":
        ks = np.arange(K + 1, dtype=np.float64)
        f = np.cos((ks / K + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * np.pi / 2.0) ** 2
        abar = f / f[0]
        beta = np.clip(1.0 - abar[1:] / abar[:-1], None, BETA_CLIP)
    else:
        raise BadParameter(f"kind must be one of {KINDS}, got {kind!r}")
    return NoiseSchedule(K=K, kind=kind, gamma=gamma, beta=beta,
                         gamma_diag=gamma_diag)


def reverse_coefficients(s: NoiseSchedule, k: int) -> tuple[float, float]:
    """Posterior-mean mixing coefficients for the denoise step at k in [2, K].

    lambda0 = sqrt(abar_{k-1}) (1 - alpha_k) / (1 - abar_k)
    lambda1 = sqrt(alpha_k) (1 - abar_{k-1}) / (1 - abar_k)

    They satisfy lambda0 sqrt(abar_k) + lambda1 = sqrt(alpha_k) and
    lambda0 + lambda1 sqrt(abar_k) = sqrt(abar_{k-1}) exactly; with an exact
    clean-pose prediction and zero noise the reverse step therefore maps the
    scalar analog x_k = sqrt(abar_k) x_0 onto sqrt(abar_{k-1}) x_0, walking
    monotonically back to x_0 as k decreases.
    """
    if not 2 <= k <= s.K:
        raise BadParameter(f"k must be in [2, {s.K}], got {k}")
    a_k = float(s.alpha[k - 1])
    ab_k = float(s.alpha_bar[k - 1])
    ab_prev = float(s.alpha_bar[k - 2])
    lam0 = np.sqrt(ab_prev) * (1.0 - a_k) / (1.0 - ab_k)
    lam1 = np.sqrt(a_k) * (1.0 - ab_prev) / (1.0 - ab_k)
    return float(lam0), float(lam1)
