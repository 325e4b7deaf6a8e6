"""N(p,q,s) functionals and the finite/infinite membership verdict.

Every functional has the shape

    sup_a  integral of H(z) (1-|z|^2)^q (1-|Phi_a(z)|^2)^(ns) dlambda(z)

where ``H`` is ``|f|^p``, a derivative size, or an inner integral over a
second variable. The double integrals are rewritten with ``w = Phi_z(u)``,
after which the kernel and the Jacobian collapse to functions of ``(z, u)``
that stay bounded on the diagonal.

All the work that does not depend on ``a`` is done once in :func:`prepare`.
Each probe ``a`` only reweights the stored samples, which makes a supremum
search over hundreds of parameters affordable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ball, holo
from .holo import HoloExpr
from .integrate import (
    IntegralEstimate,
    OuterSampler,
    RECENTER_RADII,
    SamplerConfig,
    TRUNCATION_RADII,
    _directions,
    _map_shards,
    dv_alpha_constant,
    estimate_from_moments,
    moments,
    recenter_points,
    sample_ball,
    stream,
    summarize,
)

__all__ = [
    "FunctionalKind",
    "ParameterError",
    "InnerSampler",
    "ProbeTable",
    "SpaceParams",
    "SupFunctional",
    "boundary_peak",
    "centered",
    "centered_pullback",
    "d_alpha_at",
    "gradient_functional_at",
    "hw_euclid_at",
    "hw_proj_at",
    "j_mean_osc_at",
    "mean_oscillation",
    "n_norm_at",
    "prepare",
    "sup_functional",
]

INNER_SAMPLES = 16  # inner draws per outer point for the mean oscillation
ANISO_SHARE = 0.25  # inner draws squeezed towards the z direction (paired kinds, n >= 2)


class ParameterError(ValueError):
    """Invalid space parameters; the message names the violated constraint."""


@dataclass(frozen=True)
class SpaceParams:
    n: int
    p: float
    q: float
    s: float
    alpha: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ParameterError("n>=1 violated: dimension must be a positive integer")
        for name in ("p", "q", "s", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if not self.q > 0:
            raise ParameterError(f"q>0 violated (q={self.q})")
        if not self.p >= 1:
            raise ParameterError(f"p>=1 violated (p={self.p})")
        if not self.s > 0:
            raise ParameterError(f"s>0 violated (s={self.s})")
        if not self.s > 1.0 - self.q / self.n:
            raise ParameterError(
                f"s>max{{0,1-q/n}} violated (s={self.s}, 1-q/n={1.0 - self.q / self.n})"
            )
        if not self.alpha > self.tilt:
            raise ParameterError(
                f"alpha>q+ns-n-1 violated (alpha={self.alpha}, q+ns-n-1={self.tilt})"
            )

    @property
    def gamma(self) -> float:
        return self.n + 1.0 + self.alpha

    @property
    def boundary_order(self) -> float:
        return self.q + self.n * self.s

    @property
    def tilt(self) -> float:
        """q+ns-n-1, the radial exponent left after absorbing dlambda."""
        return self.q + self.n * self.s - self.n - 1.0

    @property
    def hw_valid(self) -> bool:
        return self.p >= 2.0 * self.gamma

    @property
    def hw_remark(self) -> bool:
        return self.p > 2.0 * self.boundary_order


class FunctionalKind(enum.Enum):
    NNorm = "NNorm"
    I1_Grad = "I1_Grad"
    I2_InvGrad = "I2_InvGrad"
    I3_Radial = "I3_Radial"
    DAlpha = "DAlpha"
    HWEuclid = "HWEuclid"
    HWProj = "HWProj"
    JMeanOsc = "JMeanOsc"

    @classmethod
    def parse(cls, name: str) -> "FunctionalKind":
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(k.value for k in cls)
            raise ParameterError(f"unknown functional kind {name!r} (known: {known})") from None


DERIVATIVE_KINDS = (FunctionalKind.I1_Grad, FunctionalKind.I2_InvGrad, FunctionalKind.I3_Radial)
PAIRED_KINDS = (FunctionalKind.DAlpha, FunctionalKind.HWEuclid, FunctionalKind.HWProj)
DIFFERENCE_KINDS = PAIRED_KINDS + (FunctionalKind.JMeanOsc,)


def _check_hw_gate(P: SpaceParams, override_hw: bool) -> None:
    if P.hw_valid:
        return
    if override_hw and P.hw_remark:
        return
    if override_hw:
        raise ParameterError(
            f"p>2(q+ns) violated (p={P.p}, 2(q+ns)={2 * P.boundary_order}); "
            "the override needs it"
        )
    raise ParameterError(f"p>=2(n+1+alpha) violated (p={P.p}, 2(n+1+alpha)={2 * P.gamma})")


# -- pointwise helpers ----------------------------------------------------------------


def centered_pullback(f: HoloExpr, z, w) -> np.ndarray | complex:
    """F_z(w) = f(z) - f(Phi_z(w))."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return holo.evaluate(f, z) - holo.evaluate(f, ball.phi(z, w))


def centered(f: HoloExpr, n: int) -> HoloExpr:
    """f - f(0)."""
    f0 = holo.evaluate(f, np.zeros(n, dtype=complex))
    return holo.sub(f, holo.Const(f0))


def boundary_peak(f: HoloExpr, n: int, *, seed: int = 0, n_random: int = 2048, r: float = 0.999):
    """Direction on the sphere along which ``f`` grows fastest near the boundary.

    Scores directions by ``|f(r zeta) - f(0)| + (1-r^2)|grad f(r zeta)|`` over
    the coordinate axes and random directions. Returns ``None`` when nothing
    stands out, for instance when ``f`` is constant.
    """
    dirs = [np.eye(n, dtype=complex), -np.eye(n, dtype=complex), 1j * np.eye(n), -1j * np.eye(n)]
    dirs.append(_directions(n, stream(seed, "boundary_peak"), n_random))
    zeta = np.concatenate(dirs)
    pts = r * zeta
    try:
        f0 = holo.evaluate(f, np.zeros(n, dtype=complex))
        grad = holo.gradient_values(holo.gradient(f, n), pts)
        with np.errstate(all="ignore"):
            score = np.abs(holo.evaluate(f, pts) - f0) + (1.0 - r * r) * np.linalg.norm(grad, axis=-1)
    except holo.EvaluationError:
        return None
    score = np.where(np.isfinite(score), score, np.inf)
    best = int(np.argmax(score))
    # a peak only matters if it clearly beats the typical direction
    if not score[best] > 2.0 * np.median(score):
        return None
    return zeta[best]


# -- inner sampling ---------------------------------------------------------------------


@dataclass(frozen=True)
class InnerSampler:
    """Law of u for the substitution w = Phi_z(u), given the outer point z.

    Component 0 draws u from dV_alpha. The anisotropic component draws v from
    dV_alpha and shrinks its part orthogonal to z, ``u = P_z v + t Q_z v`` with
    ``t = sqrt(1-|z|^2)``; near the boundary the Euclidean kernel lives on
    exactly that sliver. Component k draws v from dV_alpha and sets
    w = Phi_{c_k}(v), u = Phi_z(w), which concentrates w near c_k no matter
    where z is. Against dV_alpha(u) the anisotropic component has density
    ``((1-|T^-1 u|^2)/(1-|u|^2))^alpha / t^(2(n-1))`` on the image of the ball,
    and the k-th recentred one
    ((1-|c_k|^2)|1-<w,z>|^2 / ((1-|z|^2)|1-<w,c_k>|^2))^(n+1+alpha).
    """

    n: int
    alpha: float
    centers: tuple = ()
    base_share: float = 0.5
    aniso_share: float = 0.0

    def shares(self) -> np.ndarray:
        aniso = self.aniso_share if self.n > 1 else 0.0
        base = self.base_share if self.centers else 1.0 - aniso
        rest = (1.0 - base - aniso) / len(self.centers) if self.centers else 0.0
        return np.array([base, aniso] + [rest] * len(self.centers))

    def sample(self, z: np.ndarray, omz: np.ndarray, rng: np.random.Generator):
        """Return ``(u, w, weight)`` for a batch of outer points."""
        size = z.shape[0]
        v = sample_ball(self.n, self.alpha, rng, size).z
        pis = self.shares()
        if pis[0] == 1.0:
            return v, ball.phi(z, v), np.ones(size)
        comp = rng.choice(len(pis), size=size, p=pis)
        u = v.copy()
        sel = comp == 1
        if np.any(sel):
            par = _parallel(z[sel], v[sel])
            u[sel] = par + np.sqrt(omz[sel])[:, None] * (v[sel] - par)
        w = ball.phi(z, u)
        for k, c in enumerate(self.centers, start=2):
            sel = comp == k
            if np.any(sel):
                w[sel] = ball.phi(np.asarray(c), v[sel])
                u[sel] = ball.phi(z[sel], w[sel])
        total = np.full(size, pis[0])
        if pis[1] > 0.0:
            par = _parallel(z, u)
            q2 = ball.norm_sq(u - par)
            s2 = ball.norm_sq(par) + q2 / omz
            one_u = 1.0 - ball.norm_sq(u)
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = np.where(s2 < 1.0, (np.maximum(1.0 - s2, 0.0) / one_u) ** self.alpha, 0.0)
            total += pis[1] * dens / omz ** (self.n - 1)
        gamma = self.n + 1.0 + self.alpha
        wz = np.abs(1.0 - ball.inner(w, z)) ** 2 / omz
        for pi, c in zip(pis[2:], self.centers):
            c = np.asarray(c, dtype=complex)
            wc = np.abs(1.0 - ball.inner(w, c)) ** 2
            total += pi * ((1.0 - float(ball.norm_sq(c))) * wz / wc) ** gamma
        return u, w, 1.0 / total


def _parallel(z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """P_z u row by row, with P_0 = 0."""
    z2 = ball.norm_sq(z)
    safe = np.where(z2 > 0, z2, 1.0)
    coef = np.where(z2 > 0, ball.inner(u, z) / safe, 0.0)
    return coef[..., None] * z


# -- per-sample integrands ------------------------------------------------------------


def _pow(x: np.ndarray, p: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.power(x, p)


def _outer_values(f, P: SpaceParams, kind: FunctionalKind, z, omz, grad_exprs):
    """H(z) for the kinds that need no second variable."""
    if kind is FunctionalKind.NNorm:
        return _pow(np.abs(holo.evaluate(f, z)), P.p)
    g = holo.gradient_values(grad_exprs, z)
    if kind is FunctionalKind.I1_Grad:
        return _pow(np.linalg.norm(g, axis=-1) * omz, P.p)
    if kind is FunctionalKind.I3_Radial:
        return _pow(np.abs(np.sum(z * g, axis=-1)) * omz, P.p)
    ig = holo.invariant_gradient_values(g, z, omz)
    return _pow(np.linalg.norm(ig, axis=-1), P.p)


def _paired_values(f, P: SpaceParams, kind: FunctionalKind, z, omz, u, w, alpha: float):
    """c_alpha H(z, u) after the substitution w = Phi_z(u).

    With u ~ dV_alpha the kernel 1/|1-<z,w>|^(2 gamma), the Jacobian k_z(u) and
    the outer weight (1-|z|^2)^gamma cancel, leaving |F_z(u)|^p for DAlpha.
    The other kernels differ from it by the ratio of distances:

    * projection: |w - P_w z - s_w Q_w z| = |Phi_w(z)| |1-<z,w>| and
      |Phi_w(z)| = |u|, |1-<z,w>| = (1-|z|^2)/|1-<z,u>|, so the ratio is |u|;
    * Euclidean: z - Phi_z(u) = ((1-|z|^2) P_z u + s_z Q_z u)/(1-<u,z>), so the
      ratio squared is |P_z u|^2 + |Q_z u|^2/(1-|z|^2).
    """
    gamma = P.n + 1.0 + alpha
    F = holo.evaluate(f, z) - holo.evaluate(f, w)
    base = _pow(np.abs(F), P.p) * dv_alpha_constant(P.n, alpha)
    if kind is FunctionalKind.DAlpha:
        return base
    u2 = ball.norm_sq(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is FunctionalKind.HWProj:
            ratio_sq = u2
        else:
            # Q_z u as a vector: forming u2 - |P_z u|^2 would cancel badly near the boundary
            q2 = ball.norm_sq(u - _parallel(z, u))
            ratio_sq = (u2 - q2) + q2 / omz
        return np.where(base == 0.0, 0.0, base / _pow(ratio_sq, gamma))


def _mean_osc_terms(f, p: float, z, omz, u, w):
    """Integrand of MO_p^p(f)(z) in u, with the kernel evaluated directly at w."""
    g = z.shape[-1] + 1.0
    jac = omz**g / np.abs(1.0 - ball.inner(z, u)) ** (2.0 * g)
    kern = omz**g / np.abs(1.0 - ball.inner(z, w)) ** (2.0 * g)
    F = holo.evaluate(f, z) - holo.evaluate(f, w)
    return _pow(np.abs(F), p) * kern * jac


def _mean_osc_values(f, P: SpaceParams, z, omz, rng, m: int, inner: InnerSampler):
    """MO_p^p(f)(z) averaged over m inner draws per outer point.

    Also returns per-z truncated averages over |w| <= rho for each truncation radius.
    """
    n = P.n
    size = z.shape[0]
    zz = np.repeat(z, m, axis=0)
    oo = np.repeat(omz, m)
    u, w, wt = inner.sample(zz, oo, rng)
    term = (_mean_osc_terms(f, P.p, zz, oo, u, w) * wt).reshape(size, m)
    wr = np.sqrt(ball.norm_sq(w)).reshape(size, m)
    trunc = np.stack([np.mean(np.where(wr <= rho, term, 0.0), axis=1) for rho in TRUNCATION_RADII])
    return np.mean(term, axis=1), trunc


# -- the a-independent sample table ---------------------------------------------------


@dataclass(frozen=True)
class ProbeTable:
    """Samples of one functional with the ``a``-dependent factor left out.

    ``at(a)`` multiplies by ``((1-|a|^2)/|1-<z,a>|^2)^(ns)``, which together
    with the stored values gives the integrand weighted for the parameter a.
    """

    params: SpaceParams
    kind: FunctionalKind
    z: np.ndarray
    values: np.ndarray
    levels: np.ndarray

    def factor(self, a) -> np.ndarray:
        a = ball.as_point(a)
        if a.shape != (self.params.n,):
            raise ball.BallDomainError(f"a must be a single point of C^{self.params.n}")
        za = self.z @ np.conj(a)
        re = 1.0 - za.real
        base = (1.0 - float(ball.norm_sq(a))) / (re * re + za.imag * za.imag)
        e = self.params.n * self.params.s
        return base * base if e == 2.0 else (base if e == 1.0 else base**e)

    def at(self, a) -> IntegralEstimate:
        fac = self.factor(a)
        with np.errstate(over="ignore", invalid="ignore"):
            return estimate_from_moments(moments(self.values, self.levels, fac, self.band2))

    @property
    def band2(self) -> np.ndarray:
        cached = self.__dict__.get("_band2")
        if cached is None:
            band = self.levels[-1] - self.levels[-2]
            cached = band * band
            object.__setattr__(self, "_band2", cached)
        return cached


def _peak_centers(f: HoloExpr, n: int, seed: int) -> tuple:
    peak = boundary_peak(f, n, seed=seed)
    return () if peak is None else recenter_points(peak, RECENTER_RADII)


def prepare(
    f: HoloExpr,
    P: SpaceParams,
    kind: FunctionalKind,
    cfg: SamplerConfig,
    *,
    alpha: float | None = None,
    inner_samples: int = INNER_SAMPLES,
) -> ProbeTable:
    """Draw and evaluate the samples of one functional.

    ``alpha`` replaces ``P.alpha`` for the paired kinds; it is how DAlpha is
    evaluated at alpha = 0 when that value is outside the validated range.
    JMeanOsc spends ``cfg.n_samples`` on outer points times ``inner_samples``
    inner draws, keeping its total cost comparable with the other kinds.
    """
    kind = FunctionalKind(kind)
    if holo.dimension_needed(f) > P.n and not isinstance(f, holo.Const):
        raise ParameterError(f"expression needs dimension {holo.dimension_needed(f)} > n={P.n}")
    a_alpha = P.alpha if alpha is None else float(alpha)
    if a_alpha <= -1:
        raise ParameterError(f"alpha>-1 violated (alpha={a_alpha})")
    n = P.n
    centers = _peak_centers(f, n, cfg.seed)
    sampler = OuterSampler(n, P.tilt, centers)
    if kind is FunctionalKind.JMeanOsc:
        inner = InnerSampler(n, 0.0, centers)
    else:
        inner = InnerSampler(n, a_alpha, centers, aniso_share=ANISO_SHARE)
    scale = 1.0 / dv_alpha_constant(n, sampler.tilt)
    grad_exprs = holo.gradient(f, n) if kind in DERIVATIVE_KINDS else ()
    if kind in PAIRED_KINDS:
        label = f"pairs:{a_alpha!r}"
    elif kind is FunctionalKind.JMeanOsc:
        label = "nested"
    else:
        label = "outer"
    n_outer = cfg.n_samples
    if kind is FunctionalKind.JMeanOsc:
        n_outer = max(cfg.n_samples // inner_samples, 1)

    def shard(i: int, size: int):
        rng = stream(cfg.seed, label, i)
        pts = sampler.sample(rng, size)
        w_out = pts.weight * scale
        rad = pts.radius
        if kind in PAIRED_KINDS:
            u, w, wt = inner.sample(pts.z, pts.omz, rng)
            h = _paired_values(f, P, kind, pts.z, pts.omz, u, w, a_alpha)
            rad = np.maximum(rad, np.sqrt(ball.norm_sq(w)))
            v = h * wt * w_out
            lv = np.stack([np.where(rad <= rho, v, 0.0) for rho in TRUNCATION_RADII])
        elif kind is FunctionalKind.JMeanOsc:
            h, trunc = _mean_osc_values(f, P, pts.z, pts.omz, rng, inner_samples, inner)
            v = h * w_out
            inside = np.stack([rad <= rho for rho in TRUNCATION_RADII])
            lv = np.where(inside, trunc * w_out, 0.0)
        else:
            v = _outer_values(f, P, kind, pts.z, pts.omz, grad_exprs) * w_out
            lv = np.stack([np.where(rad <= rho, v, 0.0) for rho in TRUNCATION_RADII])
        return pts.z, v, lv

    with np.errstate(over="ignore", invalid="ignore"):
        parts = _map_shards(shard, cfg, n_outer)
    z = np.concatenate([p[0] for p in parts])
    values = np.concatenate([p[1] for p in parts])
    levels = np.concatenate([p[2] for p in parts], axis=1)
    return ProbeTable(P, kind, z, values, levels)


# -- functionals at a fixed parameter a ---------------------------------------------------


def n_norm_at(f: HoloExpr, P: SpaceParams, a, cfg: SamplerConfig) -> IntegralEstimate:
    return prepare(f, P, FunctionalKind.NNorm, cfg).at(a)


def gradient_functional_at(
    f: HoloExpr, P: SpaceParams, a, kind: FunctionalKind, cfg: SamplerConfig
) -> IntegralEstimate:
    kind = FunctionalKind(kind)
    if kind not in DERIVATIVE_KINDS:
        raise ParameterError(f"{kind.value} is not a derivative functional")
    return prepare(f, P, kind, cfg).at(a)


def d_alpha_at(
    f: HoloExpr, P: SpaceParams, a, cfg: SamplerConfig, *, alpha: float | None = None
) -> IntegralEstimate:
    return prepare(f, P, FunctionalKind.DAlpha, cfg, alpha=alpha).at(a)


def hw_euclid_at(
    f: HoloExpr, P: SpaceParams, a, cfg: SamplerConfig, *, override_hw: bool = False
) -> IntegralEstimate:
    _check_hw_gate(P, override_hw)
    return prepare(f, P, FunctionalKind.HWEuclid, cfg).at(a)


def hw_proj_at(
    f: HoloExpr, P: SpaceParams, a, cfg: SamplerConfig, *, override_hw: bool = False
) -> IntegralEstimate:
    _check_hw_gate(P, override_hw)
    return prepare(f, P, FunctionalKind.HWProj, cfg).at(a)


def j_mean_osc_at(f: HoloExpr, P: SpaceParams, a, cfg: SamplerConfig) -> IntegralEstimate:
    return prepare(f, P, FunctionalKind.JMeanOsc, cfg).at(a)


def mean_oscillation(f: HoloExpr, z, p: float, cfg: SamplerConfig) -> IntegralEstimate:
    """MO_p(f)(z) with a delta-method standard error.

    The returned ``value`` is the p-th root of the averaged kernel integral.
    """
    if not p >= 1:
        raise ParameterError(f"p>=1 violated (p={p})")
    z = ball.as_point(z)
    n = z.shape[-1]
    omz = 1.0 - float(ball.norm_sq(z))
    inner = InnerSampler(n, 0.0, _peak_centers(f, n, cfg.seed))

    def shard(i: int, size: int):
        rng = stream(cfg.seed, "mean_osc", i)
        zz = np.broadcast_to(z, (size, n))
        oo = np.full(size, omz)
        u, w, wt = inner.sample(zz, oo, rng)
        return _mean_osc_terms(f, p, zz, oo, u, w) * wt, np.sqrt(ball.norm_sq(w))

    parts = _map_shards(shard, cfg)
    est = summarize(np.concatenate([x[0] for x in parts]), np.concatenate([x[1] for x in parts]))
    if not math.isfinite(est.value) or est.value <= 0.0:
        return est
    root = est.value ** (1.0 / p)
    se = root * est.std_error / (p * est.value)
    return IntegralEstimate(root, se, est.n_samples, est.diverged, est.truncated)


# -- supremum over a -----------------------------------------------------------------------


@dataclass(frozen=True)
class SupFunctional:
    """Probed lower bound for the supremum over a, with its argmax."""

    value: float
    std_error: float
    a_star: np.ndarray
    table: tuple  # ((a, IntegralEstimate), ...) in probe order
    diverged: bool

    @property
    def estimate(self) -> IntegralEstimate:
        for a, est in self.table:
            if a is self.a_star:
                return est
        raise LookupError("a_star missing from the probe table")


def sup_functional(
    f: HoloExpr,
    P: SpaceParams,
    kind: FunctionalKind,
    cfg: SamplerConfig,
    *,
    budget: int = 264,
    r_max: float = 0.95,
    override_hw: bool = False,
    alpha: float | None = None,
    stop_on_divergence: bool = True,
    probes: Sequence | None = None,
    table: ProbeTable | None = None,
) -> SupFunctional:
    """Supremum over |a| <= r_max of the chosen functional.

    Divergence at any probe makes the result diverged; by default the search
    stops there. ``probes`` replaces the search by a fixed list of parameters;
    ``table`` reuses samples drawn earlier by :func:`prepare`.
    """
    from .integrate import sup_search

    kind = FunctionalKind(kind)
    if kind in (FunctionalKind.HWEuclid, FunctionalKind.HWProj):
        _check_hw_gate(P, override_hw)
    if table is None:
        table = prepare(f, P, kind, cfg, alpha=alpha)
    rows: list[tuple[np.ndarray, IntegralEstimate]] = []

    def F(a: np.ndarray) -> float:
        est = table.at(a)
        rows.append((a, est))
        return est.value

    def stop(a, v) -> bool:
        return stop_on_divergence and rows[-1][1].diverged

    if probes is not None:
        for a in probes:
            F(ball.as_point(a))
            if stop(None, None):
                break
    else:
        sup_search(F, P.n, r_max, budget, seed=cfg.seed, stop=stop)

    best = 0
    for i, (_, est) in enumerate(rows):
        if est.value > rows[best][1].value:
            best = i
    a_star, est = rows[best]
    diverged = any(e.diverged for _, e in rows)
    value = math.inf if diverged else est.value
    return SupFunctional(value, est.std_error, a_star, tuple(rows), diverged)
