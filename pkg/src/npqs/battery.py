"""Randomized identity and inequality checks for the ball geometry.

Each check draws its own points from a seeded stream and reports the largest
violation together with the index of the worst case, so a failure can be
reproduced from ``(seed, index)`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ball
from .integrate import _directions, stream

__all__ = ["CheckResult", "MUTATIONS", "identity_checks", "inequality_checks", "random_points", "run_battery"]

IDENTITY_TOL = 1e-9
# relative rounding allowance; some bounds are equalities when n = 1
INEQUALITY_SLACK = 1e-9
FD_TOL = 1e-6
R_MAX = 0.999


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_violation: float
    tolerance: float
    worst_index: int
    cases: int

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)


def random_points(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Half uniform in the ball, half with 1-|z| log-uniform in [1e-3, 1]."""
    half = size // 2
    r_uni = rng.random(half) ** (1.0 / (2 * n))
    r_edge = 1.0 - 10.0 ** (-3.0 * rng.random(size - half))
    r = np.minimum(np.concatenate([r_uni, r_edge]), R_MAX)
    return _directions(n, rng, size) * r[:, None]


def _phi_sa_flipped(a, z):
    """Mobius map with the sign of s_a reversed; used to check that the battery bites."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    a2 = ball.norm_sq(a)
    za = ball.inner(z, a)
    zero = a2 == 0.0
    coef = np.where(zero, 0.0, za / np.where(zero, 1.0, a2))
    p_z = coef[..., None] * a
    s_a = np.sqrt(1.0 - a2)
    return (a - p_z + s_a[..., None] * (z - p_z)) / (1.0 - za)[..., None]


MUTATIONS: dict[str, Callable] = {"sa-sign": _phi_sa_flipped}


def _result(name: str, viol: np.ndarray, tol: float) -> CheckResult:
    viol = np.where(np.isnan(viol), np.inf, np.where(viol > 0.0, viol, 0.0))
    i = int(np.argmax(viol))
    return CheckResult(name, float(viol[i]), tol, i, int(viol.size))


def _norm(x) -> np.ndarray:
    return np.sqrt(ball.norm_sq(x))


def _jacobian_error(a: np.ndarray, phi: Callable, h: float = 1e-5) -> np.ndarray:
    """Largest column error of central differences of phi_a at 0 against -(1-|a|^2)P_a - s_a Q_a."""
    n = a.shape[-1]
    a2 = ball.norm_sq(a)
    s_a = np.sqrt(1.0 - a2)
    worst = np.zeros(a.shape[0])
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        fd = (phi(a, np.broadcast_to(e, a.shape)) - phi(a, np.broadcast_to(-e, a.shape))) / (2.0 * h)
        pe = np.conj(a[:, j])[:, None] * a / a2[:, None]
        qe = np.eye(n)[j] - pe
        exact = -(1.0 - a2)[:, None] * pe - s_a[:, None] * qe
        worst = np.maximum(worst, _norm(fd - exact))
    return worst


def identity_checks(n: int, samples: int, seed: int, phi: Callable = ball.phi) -> list[CheckResult]:
    rng = stream(seed, f"identities:{n}")
    a = random_points(n, samples, rng)
    z = random_points(n, samples, rng)
    tol = IDENTITY_TOL
    out = []
    out.append(_result("involution", _norm(phi(a, phi(a, z)) - z), tol))
    out.append(_result("phi_a(0)=a", _norm(phi(a, np.zeros_like(z)) - a), tol))
    out.append(_result("phi_a(a)=0", _norm(phi(a, a)), tol))
    prod = ball.one_minus_phi_sq(a, z)
    direct = 1.0 - ball.norm_sq(phi(a, z))
    out.append(_result("product_form", np.abs(prod - direct) / np.maximum(1.0, prod), tol))
    worst = np.zeros(samples)
    for gamma in (1.5, 2.0, 4.0):
        lhs = 1.0 / np.abs(1.0 - ball.inner(phi(z, a), z)) ** (2.0 * gamma)
        rhs = np.abs(1.0 - ball.inner(z, a)) ** (2.0 * gamma) / (1.0 - ball.norm_sq(z)) ** (2.0 * gamma)
        worst = np.maximum(worst, np.abs(lhs - rhs) / np.maximum(np.abs(lhs), np.abs(rhs)))
    out.append(_result("reciprocal_identity", worst, tol))
    out.append(_result("symmetry |phi_a(z)|=|phi_z(a)|", np.abs(_norm(phi(a, z)) - _norm(phi(z, a))), tol))
    direct_k = ball.projection_kernel(z, a)
    factored = _norm(phi(a, z)) * np.abs(1.0 - ball.inner(z, a))
    out.append(_result("projection_kernel_factorization", np.abs(direct_k - factored), tol))
    out.append(_result("derivative at 0", _jacobian_error(a, phi), FD_TOL))
    if n == 1:
        out.append(_result("projection_kernel=euclidean (n=1)", np.abs(direct_k - _norm(z - a)), tol))
    return out


def inequality_checks(n: int, samples: int, seed: int, phi: Callable = ball.phi) -> list[CheckResult]:
    """Violations are reported as positive excess over the bound (relative where scale matters)."""
    rng = stream(seed, f"inequalities:{n}")
    z = random_points(n, samples, rng)
    w = random_points(n, samples, rng)
    slack = INEQUALITY_SLACK
    out = []
    one_z = 1.0 - ball.norm_sq(z)
    den = np.abs(1.0 - ball.inner(z, w))
    dist = _norm(z - phi(z, w))
    lower = _norm(w) * one_z / den
    upper_sq = 2.0 * one_z / den
    out.append(_result("distortion lower bound", (lower - dist) / np.maximum(dist, 1e-300) * (lower > dist), slack))
    out.append(_result("distortion upper bound", (dist * dist - upper_sq) / upper_sq * (dist * dist > upper_sq), slack))
    kern = ball.projection_kernel(z, w)
    out.append(_result("kernel dominance", np.maximum(kern - den, 0.0) / den, slack))
    for r in (0.3, 0.5, 0.8):
        # pairs inside the Bergman ball E(z, r): w = phi_z(u) with |u| < r
        u = _directions(n, rng, samples) * (r * np.sqrt(rng.random(samples)))[:, None]
        wz = phi(z, u)
        b = ball.comparability_bounds(z, wz, r)
        viol = np.zeros(samples)
        for lo, mid, hi in b.values():
            viol = np.maximum(viol, np.maximum(lo - mid, 0.0) / lo)
            viol = np.maximum(viol, np.maximum(mid - hi, 0.0) / hi)
        out.append(_result(f"comparability on E(z,{r})", viol, slack))
    return out


def run_battery(n: int, samples: int, seed: int, mutation: str | None = None) -> list[CheckResult]:
    phi = ball.phi if mutation is None else MUTATIONS[mutation]
    return identity_checks(n, samples, seed, phi) + inequality_checks(n, samples, seed, phi)
