"""Geometry of the unit ball of C^n.

Points are complex numpy arrays whose last axis holds the n coordinates.
Every function broadcasts over leading axes, so a batch of points of shape
``(N, n)`` can be pushed through the same code as a single point of shape
``(n,)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BallDomainError",
    "MobiusMap",
    "as_point",
    "bergman_pseudometric",
    "inner",
    "kernel_weight_k",
    "comparability_bounds",
    "lemma43_triple",
    "mobius_apply",
    "mobius_jacobian_at_zero",
    "norm_sq",
    "one_minus_phi_sq",
    "phi",
    "points_close",
    "proj_orthogonal",
    "proj_parallel",
    "projection_kernel",
    "projection_kernel_factored",
    "reciprocal_identity_sides",
]


class BallDomainError(ValueError):
    """A point or parameter lies outside the domain of a ball operation."""


def as_point(coords, *, interior: bool = True) -> np.ndarray:
    """Coerce ``coords`` to a complex coordinate array.

    A bare scalar becomes a point of C^1. With ``interior=True`` every point
    in the batch must satisfy ``|z| < 1``.
    """
    z = np.asarray(coords, dtype=complex)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.shape[-1] < 1:
        raise BallDomainError("points need at least one coordinate")
    if interior and np.any(norm_sq(z) >= 1.0):
        raise BallDomainError("point is not in the open unit ball")
    return z


def norm_sq(z) -> np.ndarray:
    z = np.asarray(z)
    return np.sum(z.real * z.real + z.imag * z.imag, axis=-1)


def _check_dims(z: np.ndarray, w: np.ndarray) -> None:
    if z.shape[-1] != w.shape[-1]:
        raise BallDomainError(
            f"dimension mismatch: {z.shape[-1]} vs {w.shape[-1]}"
        )


def inner(z, w) -> np.ndarray:
    """Hermitian inner product <z, w> = sum_k z_k conj(w_k)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_dims(z, w)
    return np.sum(z * np.conj(w), axis=-1)


def points_close(z, w, atol: float = 1e-12) -> bool:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    _check_dims(z, w)
    return bool(np.all(np.abs(z - w) <= atol))


def _require_nonzero(a: np.ndarray) -> np.ndarray:
    a2 = norm_sq(a)
    if np.any(np.all(a == 0, axis=-1)):
        raise BallDomainError("projection onto span(a) needs a != 0")
    return a2


def proj_parallel(a, z) -> np.ndarray:
    """P_a z = (<z,a>/|a|^2) a, the orthogonal projection onto span(a)."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    _require_nonzero(a)
    unit = _unit(a)
    return inner(z, unit)[..., None] * unit


def proj_orthogonal(a, z) -> np.ndarray:
    """Q_a z = z - P_a z (identically zero in one variable)."""
    z = np.asarray(z, dtype=complex)
    q = z - proj_parallel(a, z)
    return np.zeros_like(q) if z.shape[-1] == 1 else q


def phi(a, z) -> np.ndarray:
    """Involutive automorphism Phi_a(z), broadcasting over ``a`` and ``z``.

    Rows with ``a = 0`` use Phi_0(z) = -z.
    """
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    _check_dims(a, z)
    a2 = norm_sq(a)
    za = inner(z, a)
    unit = _unit(a)
    p_z = inner(z, unit)[..., None] * unit
    s_a = np.sqrt(1.0 - a2)
    num = a - p_z - s_a[..., None] * (z - p_z)
    return num / (1.0 - za)[..., None]


def _unit(a: np.ndarray) -> np.ndarray:
    """a/|a| with rows a = 0 mapped to 0; rescaled first so tiny |a| cannot underflow."""
    scale = np.max(np.abs(a), axis=-1, keepdims=True)
    safe = np.where(scale == 0.0, 1.0, scale)
    b = a.real / safe + 1j * (a.imag / safe)  # complex division would overflow for subnormal scale
    nb = np.sqrt(norm_sq(b))[..., None]
    return np.where(scale == 0.0, 0.0, b / np.where(nb == 0.0, 1.0, nb))


@dataclass(frozen=True)
class MobiusMap:
    """Phi_a with its cached scalars ``|a|^2`` and ``s_a = sqrt(1-|a|^2)``."""

    a: np.ndarray
    a_norm_sq: float = field(init=False)
    s_a: float = field(init=False)

    def __post_init__(self):
        a = as_point(self.a)
        if a.ndim != 1:
            raise BallDomainError("MobiusMap takes a single parameter point")
        a.setflags(write=False)
        a2 = float(norm_sq(a))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a_norm_sq", a2)
        object.__setattr__(self, "s_a", float(np.sqrt(1.0 - a2)))

    @property
    def n(self) -> int:
        return self.a.shape[-1]

    def __call__(self, z) -> np.ndarray:
        return mobius_apply(self, z)


def mobius_apply(m: MobiusMap, z) -> np.ndarray:
    z = as_point(z)
    return phi(m.a, z)


def one_minus_phi_sq(a, z) -> np.ndarray:
    """1 - |Phi_a(z)|^2 in product form (1-|a|^2)(1-|z|^2)/|1-<z,a>|^2.

    ``a`` may be a :class:`MobiusMap` or a raw parameter array.
    """
    if isinstance(a, MobiusMap):
        a = a.a
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    den = np.abs(1.0 - inner(z, a)) ** 2
    # the exact value never exceeds 1; rounding can push z = a a few ulps above
    return np.minimum((1.0 - norm_sq(a)) * (1.0 - norm_sq(z)) / den, 1.0)


def reciprocal_identity_sides(z, w, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of 1/|1-<Phi_z(w),z>|^{2g} = |1-<z,w>|^{2g}/(1-|z|^2)^{2g}."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    lhs = 1.0 / np.abs(1.0 - inner(phi(z, w), z)) ** (2.0 * gamma)
    rhs = np.abs(1.0 - inner(z, w)) ** (2.0 * gamma) / (1.0 - norm_sq(z)) ** (
        2.0 * gamma
    )
    return lhs, rhs


def kernel_weight_k(z, w, gamma: float) -> np.ndarray:
    """k_z(w) = (1-|z|^2)^g / |1-<z,w>|^{2g}."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return (1.0 - norm_sq(z)) ** gamma / np.abs(1.0 - inner(z, w)) ** (2.0 * gamma)


def lemma43_triple(z, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(|z - Phi_z(w)|, lower, upper_sq)``.

    ``lower = |w|(1-|z|^2)/|1-<z,w>|`` bounds the first entry from below and
    ``upper_sq = 2(1-|z|^2)/|1-<z,w>|`` bounds its square from above.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(np.all(z == w, axis=-1)):
        raise BallDomainError("lemma43_triple needs z != w")
    dist = np.sqrt(norm_sq(z - phi(z, w)))
    one_z = 1.0 - norm_sq(z)
    den = np.abs(1.0 - inner(z, w))
    lower = np.sqrt(norm_sq(w)) * one_z / den
    upper_sq = 2.0 * one_z / den
    return dist, lower, upper_sq


def comparability_bounds(z, w, r: float) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Quantitative comparability on the Bergman ball E(z, r).

    For ``d(z, w) < r`` the following chains hold:

    * ``(1-|z|^2)/2 <= |1-<z,w>| <= 2(1-|z|^2)/(1-r^2)``
    * ``(1-r^2)/4 <= (1-|w|^2)/(1-|z|^2) <= 4/(1-r^2)``

    Returns ``{name: (lower, middle, upper)}`` so callers can test
    ``lower <= middle <= upper`` elementwise.
    """
    if not 0.0 < r < 1.0:
        raise BallDomainError("Bergman radius must lie in (0, 1)")
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    one_z = 1.0 - norm_sq(z)
    one_w = 1.0 - norm_sq(w)
    den = np.abs(1.0 - inner(z, w))
    c = 1.0 - r * r
    return {
        "kernel": (one_z / 2.0, den, 2.0 * one_z / c),
        "ratio": (np.full_like(one_z, c / 4.0), one_w / one_z, np.full_like(one_z, 4.0 / c)),
    }


def mobius_jacobian_at_zero(a) -> np.ndarray:
    """Holomorphic derivative Phi_a'(0) = -(1-|a|^2) P_a - s_a Q_a as an n x n matrix."""
    if isinstance(a, MobiusMap):
        a = a.a
    a = as_point(a)
    n = a.shape[-1]
    eye = np.eye(n, dtype=complex)
    a2 = float(norm_sq(a))
    if a2 == 0.0:
        return -eye
    p = np.outer(a, np.conj(a)) / a2
    return -(1.0 - a2) * p - np.sqrt(1.0 - a2) * (eye - p)


def bergman_pseudometric(z, w) -> np.ndarray:
    """d(z, w) = |Phi_z(w)|, taken from the symmetric product form."""
    t = 1.0 - one_minus_phi_sq(z, w)
    return np.sqrt(np.clip(t, 0.0, None))


def projection_kernel(z, w) -> np.ndarray:
    """|w - P_w z - s_w Q_w z| evaluated directly (with P_0 = 0, s_0 = 1)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    w2 = norm_sq(w)
    unit = _unit(w)
    p = inner(z, unit)[..., None] * unit
    s = np.sqrt(1.0 - w2)
    return np.sqrt(norm_sq(w - p - s[..., None] * (z - p)))


def projection_kernel_factored(z, w) -> np.ndarray:
    """Same kernel as |Phi_w(z)| * |1 - <z,w>|."""
    return np.sqrt(norm_sq(phi(w, z))) * np.abs(1.0 - inner(z, w))
