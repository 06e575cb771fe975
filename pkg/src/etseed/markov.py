"""Exact finite-group verification of the equivariant Markov chain layouts.

The continuous statement - condition-invariant initial distribution, then
K-n+1 condition-invariant transitions, one output-equivariant transition,
and n-2 fully equivariant transitions yield an equivariant marginal - is
checked here on finite shadows: states and conditions are group elements
acting on themselves by left multiplication, kernels are stochastic
matrices, and the chain marginal is an exact matrix product. The three
transition families are

    p1(y | x, c) = p1(y | x, Tc)        condition-invariant
    p2(y | x, c) = p2(Ty | x, Tc)       output-equivariant
    p3(y | x, c) = p3(Ty | Tx, Tc)      fully equivariant

realized bit-exactly by construction: p1 shares one matrix across
conditions, p2 permutes output states by the condition, p3 permutes both
input and output states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import AxiomViolation, BadParameter, LayoutMismatch

KERNEL_KINDS = ("p1", "p2", "p3")


@dataclass(frozen=True)
class FiniteGroup:
    """Multiplication table with identity at index 0."""

    name: str
    order: int
    mult: np.ndarray     # (order, order) index table: mult[a, b] = a*b
    inverse: np.ndarray  # (order,)

    def __post_init__(self):
        m = np.asarray(self.mult, dtype=np.intp)
        if m.shape != (self.order, self.order):
            raise AxiomViolation("multiplication table has wrong shape")
        if np.any(m < 0) or np.any(m >= self.order):
            raise AxiomViolation("table entries escape the element set")
        if not (np.all(m[0] == np.arange(self.order))
                and np.all(m[:, 0] == np.arange(self.order))):
            raise AxiomViolation("index 0 is not the identity")
        # exhaustive associativity: left[a,b,c] = (ab)c, right[a,b,c] = a(bc)
        left = m[m, :]
        right = m[:, m]
        if not np.array_equal(left, right):
            raise AxiomViolation("multiplication table is not associative")
        inv = np.asarray(self.inverse, dtype=np.intp)
        if not np.all(m[np.arange(self.order), inv] == 0):
            raise AxiomViolation("inverse table is wrong")
        m.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "mult", m)
        object.__setattr__(self, "inverse", inv)


def _table_from_elements(name: str, elements: list, op, eq) -> FiniteGroup:
    order = len(elements)
    mult = np.empty((order, order), dtype=np.intp)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            prod = op(a, b)
            matches = [k for k, e in enumerate(elements) if eq(prod, e)]
            if len(matches) != 1:
                raise AxiomViolation(f"{name}: product escapes the element set")
            mult[i, j] = matches[0]
    inverse = np.empty(order, dtype=np.intp)
    for i in range(order):
        hits = np.nonzero(mult[i] == 0)[0]
        if hits.size != 1:
            raise AxiomViolation(f"{name}: element {i} lacks a unique inverse")
        inverse[i] = hits[0]
    return FiniteGroup(name, order, mult, inverse)


def build_group(spec: str, m: int | None = None) -> FiniteGroup:
    """cyclic(m), dihedral(m), or the 24-element cube rotation group.

    All tables pass the exhaustive axiom check at construction.
    """
    if spec == "cyclic":
        if m is None or m < 2:
            raise BadParameter("cyclic group needs m >= 2")
        idx = np.arange(m)
        mult = (idx[:, None] + idx[None, :]) % m
        inv = (-idx) % m
        return FiniteGroup(f"cyclic({m})", m, mult, inv)
    if spec == "dihedral":
        if m is None or m < 2:
            raise BadParameter("dihedral group needs m >= 2")
        # elements (flip, shift) acting on m-gon vertices as
        # v -> shift + (-1)^flip v; composition in closed form
        elements = [(f, s) for f in (0, 1) for s in range(m)]

        def op(a, b):
            f1, s1 = a
            f2, s2 = b
            return (f1 ^ f2, (s1 + (s2 if f1 == 0 else -s2)) % m)

        return _table_from_elements(f"dihedral({m})", elements, op,
                                    lambda a, b: a == b)
    if spec == "octahedral":
        mats = _cube_rotations()
        mats.sort(key=lambda r: tuple(-r.reshape(-1)))  # identity lands first
        return _table_from_elements(
            "octahedral", mats, lambda a, b: a @ b,
            lambda a, b: np.array_equal(a, b),
        )
    raise BadParameter(f"unknown group spec {spec!r}")


def _cube_rotations() -> list[np.ndarray]:
    """All signed permutation matrices with determinant +1."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            mat = np.zeros((3, 3), dtype=np.int64)
            for row, (col, s) in enumerate(zip(perm, signs)):
                mat[row, col] = s
            if round(np.linalg.det(mat)) == 1:
                out.append(mat)
    return out


# ---------------------------------------------------------------------------
# kernels

@dataclass(frozen=True)
class GroupKernel:
    """Condition-indexed stochastic matrices over the state set."""

    kind: str
    matrices: np.ndarray  # (order, order, order): [condition, x_in, x_out]

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.float64)
        if self.kind not in KERNEL_KINDS + ("free",):
            raise BadParameter(f"kind must be one of {KERNEL_KINDS}")
        if np.any(m < 0.0):
            raise BadParameter("kernel entries must be non-negative")
        if np.max(np.abs(m.sum(axis=2) - 1.0)) > 1e-12:
            raise BadParameter("kernel rows must sum to 1 within 1e-12")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)


def _random_stochastic(rng: np.random.Generator, n: int) -> np.ndarray:
    raw = rng.uniform(0.1, 1.0, size=(n, n))
    return raw / raw.sum(axis=1, keepdims=True)


def make_kernel(g: FiniteGroup, kind: str, rng: np.random.Generator) -> GroupKernel:
    """Random kernel of the requested kind; the defining identity holds
    bit-exactly because the per-condition matrices are index permutations
    (p2, p3) or orbit averages (p1) of one base matrix."""
    n = g.order
    mats = np.empty((n, n, n))
    if kind == "p1":
        base = np.mean(
            [_random_stochastic(rng, n) for _ in range(n)], axis=0
        )
        mats[:] = base
    elif kind == "p2":
        base = _random_stochastic(rng, n)
        for c in range(n):
            # matrix(c)[x, c*y] = base[x, y]
            mats[c][:, g.mult[c, np.arange(n)]] = base
    elif kind == "p3":
        base = _random_stochastic(rng, n)
        for c in range(n):
            perm = g.mult[c, np.arange(n)]
            mats[c][np.ix_(perm, perm)] = base
    elif kind == "free":
        # unconstrained per-condition matrices: the negative control
        for c in range(n):
            mats[c] = _random_stochastic(rng, n)
    else:
        raise BadParameter(f"unknown kernel kind {kind!r}")
    return GroupKernel(kind, mats)


def kernel_satisfies(g: FiniteGroup, kernel: GroupKernel, kind: str) -> bool:
    """Bit-level check of a defining identity over all (T, c, x, y)."""
    mats = kernel.matrices
    idx = np.arange(g.order)
    for T in range(g.order):
        tc = g.mult[T, idx]
        if kind == "p1":
            # p(y|x,c) == p(y|x,Tc)
            if not np.array_equal(mats, mats[tc]):
                return False
        elif kind == "p2":
            # p(y|x,c) == p(Ty|x,Tc)
            ty = g.mult[T, idx]
            if not np.array_equal(mats, mats[tc][:, :, ty]):
                return False
        elif kind == "p3":
            tx = g.mult[T, idx]
            if not np.array_equal(mats, mats[tc][:, tx][:, :, tx]):
                return False
        else:
            raise BadParameter(f"unknown kernel kind {kind!r}")
    return True


# ---------------------------------------------------------------------------
# chain layouts and the marginal

@dataclass(frozen=True)
class KernelLayout:
    """Prop-style block layout: K-n+1 p1 blocks, one p2, n-2 p3 blocks.

    n ranges over [2, K+1]; the special value n=None denotes the all-p3
    layout (the prior-work special case, which additionally needs a
    state-invariant initial distribution).
    """

    K: int
    n: int | None

    def kinds(self) -> list[str]:
        if self.n is None:
            return ["p3"] * self.K
        if not 2 <= self.n <= self.K + 1:
            raise BadParameter(f"n must be in [2, {self.K + 1}], got {self.n}")
        return (["p1"] * (self.K - self.n + 1) + ["p2"] + ["p3"] * (self.n - 2))


def uniform_initial(g: FiniteGroup) -> np.ndarray:
    """Condition-indexed uniform initial distribution (order x order)."""
    return np.full((g.order, g.order), 1.0 / g.order)


def random_conditionless_initial(g: FiniteGroup, rng) -> np.ndarray:
    """Random distribution over states, shared by every condition."""
    row = rng.uniform(0.1, 1.0, size=g.order)
    row /= row.sum()
    return np.tile(row, (g.order, 1))


def marginal(
    layout: KernelLayout,
    kernels: list[GroupKernel],
    initial: np.ndarray,
    c: int,
) -> np.ndarray:
    """Exact end-of-chain distribution p(x^0 | c) as a matrix product."""
    kinds = layout.kinds()
    if [k.kind for k in kernels] != kinds:
        raise LayoutMismatch(
            f"kernel kinds {[k.kind for k in kernels]} do not match layout {kinds}"
        )
    dist = np.asarray(initial, dtype=np.float64)[c]
    if abs(dist.sum() - 1.0) > 1e-12:
        raise BadParameter("initial distribution rows must sum to 1")
    for kernel in kernels:
        dist = dist @ kernel.matrices[c]
    return dist


def check_prop1(
    layout: KernelLayout,
    kernels: list[GroupKernel],
    initial: np.ndarray,
    g: FiniteGroup,
) -> dict:
    """Equivariance residual max_(T,c,x) |p(x|c) - p(Tx|Tc)|; PASS < 1e-10."""
    n = g.order
    P = np.stack([marginal(layout, kernels, initial, c) for c in range(n)])
    idx = np.arange(n)
    residual = 0.0
    for T in range(n):
        shifted = P[np.ix_(g.mult[T, idx], g.mult[T, idx])]
        residual = max(residual, float(np.max(np.abs(P - shifted))))
    return {
        "group": g.name,
        "K": layout.K,
        "n": layout.n,
        "residual": residual,
        "pass": bool(residual < 1e-10),
    }


def make_chain(
    g: FiniteGroup, layout: KernelLayout, rng: np.random.Generator
) -> list[GroupKernel]:
    """Random kernels matching the layout's kind sequence."""
    return [make_kernel(g, kind, rng) for kind in layout.kinds()]


def negative_control(
    g: FiniteGroup, layout: KernelLayout, seeds: range | list
) -> dict:
    """Replace the p2 slot with an unconstrained kernel and record residuals.

    Generic violations are expected: the report counts how many seeds leave
    the equivariance residual above 1e-3.
    """
    kinds = layout.kinds()
    if "p2" not in kinds:
        raise BadParameter("layout has no p2 slot to corrupt")
    slot = kinds.index("p2")
    residuals = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        kernels = make_chain(g, layout, rng)
        corrupted = make_kernel(g, "free", rng)
        kernels[slot] = GroupKernel("p2", corrupted.matrices)  # smuggled in
        initial = uniform_initial(g)
        report = check_prop1(layout, kernels, initial, g)
        residuals.append(report["residual"])
    residuals = np.asarray(residuals)
    return {
        "group": g.name,
        "K": layout.K,
        "n": layout.n,
        "seeds": len(residuals),
        "violations_above_1e-3": int(np.sum(residuals > 1e-3)),
        "min_residual": float(residuals.min()),
        "max_residual": float(residuals.max()),
        "negative_control_residuals": [float(r) for r in residuals],
    }
