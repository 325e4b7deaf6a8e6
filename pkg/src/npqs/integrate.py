"""Monte Carlo integration over the unit ball of C^n.

Randomness comes from counter-based Philox streams keyed by
``(seed, label, shard)``: any shard can be regenerated on its own, and shard
results are always combined in shard order, so estimates do not depend on
how many workers evaluated them.

Measures handled here:

* ``dV_alpha = c_alpha (1-|z|^2)^alpha dV`` (probability measures),
* ``dlambda = (1-|z|^2)^(-n-1) dV`` (infinite mass, Mobius invariant).

Near-boundary singularities are handled by importance sampling: the radius is
drawn from a Beta law matched to the integrand's boundary order, optionally
mixed with copies of that law pushed forward by Mobius maps centred near a
boundary peak. The mixture density has a closed form because ``dlambda`` is
invariant, so the estimator stays unbiased.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from . import ball

__all__ = [
    "IntegralEstimate",
    "OuterSampler",
    "PointBatch",
    "SamplerConfig",
    "RECENTER_RADII",
    "SupResult",
    "TRUNCATION_RADII",
    "double_integral",
    "dv_alpha_constant",
    "integrate_ball",
    "integrate_lambda",
    "recenter_points",
    "sample_ball",
    "sample_uniform_ball",
    "shard_sizes",
    "stream",
    "estimate_from_moments",
    "moments",
    "summarize",
    "truncation_levels",
    "sup_search",
    "weight_dV_alpha",
]

TRUNCATION_RADII = tuple(1.0 - 10.0**-k for k in range(1, 8))  # 0.9 ... 1 - 1e-7
GROWTH_FACTOR = 10.0  # per-decade increment ratio that counts as blow-up on its own
DECAY_FLOOR = 0.7  # increments shrinking faster than this over a decade read as convergence
RECENTER_RADII = tuple(1.0 - 10.0**-k for k in range(1, 7))


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    n_samples: int = 1_000_000
    radial_mode: str = "beta_tilt"
    shards: int = 8
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.shards < 1:
            raise ValueError("shards must be at least 1")
        if self.radial_mode not in ("beta_tilt", "uniform_volume"):
            raise ValueError(f"unknown radial_mode {self.radial_mode!r}")

    def with_samples(self, n_samples: int) -> "SamplerConfig":
        return SamplerConfig(self.seed, n_samples, self.radial_mode, self.shards, self.workers)

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(seed, self.n_samples, self.radial_mode, self.shards, self.workers)


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    std_error: float
    n_samples: int
    diverged: bool = False
    truncated: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.std_error >= 0 and not math.isnan(self.std_error):
            raise ValueError("std_error must be nonnegative")

    def combined_sigma(self, other: "IntegralEstimate") -> float:
        return math.hypot(self.std_error, other.std_error)


# -- random streams ---------------------------------------------------------------


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode())


def stream(seed: int, label: str = "", shard: int = 0) -> np.random.Generator:
    """Independent Philox stream for ``(seed, label, shard)``."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _label_key(label), shard])
    return np.random.Generator(np.random.Philox(ss))


def shard_sizes(n_samples: int, shards: int) -> list[int]:
    base, extra = divmod(n_samples, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _map_shards(fn: Callable[[int, int], object], cfg: SamplerConfig, n_samples: int | None = None) -> list:
    sizes = shard_sizes(cfg.n_samples if n_samples is None else n_samples, cfg.shards)
    jobs = [(i, s) for i, s in enumerate(sizes) if s > 0]
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(i, s) for i, s in jobs]


# -- sampling -----------------------------------------------------------------------


def _directions(n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    g = rng.standard_normal((size, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, :n] + 1j * g[:, n:]


def sample_uniform_ball(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform point(s) for normalized volume: Gaussian direction, radius U^(1/2n)."""
    m = 1 if size is None else size
    r = rng.random(m) ** (1.0 / (2 * n))
    z = _directions(n, rng, m) * r[:, None]
    return z[0] if size is None else z


@dataclass(frozen=True)
class PointBatch:
    """Sample points with ``1-|z|^2`` carried separately at full precision."""

    z: np.ndarray
    omz: np.ndarray
    weight: np.ndarray  # importance correction relative to the target law

    @property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.clip(1.0 - self.omz, 0.0, None))


def sample_ball(n: int, tilt: float, rng: np.random.Generator, size: int) -> PointBatch:
    """Draw from c_tilt (1-|z|^2)^tilt dV, i.e. ``1-|z|^2 ~ Beta(tilt+1, n)``."""
    if tilt <= -1:
        raise ValueError("radial tilt must exceed -1")
    omz = rng.beta(tilt + 1.0, n, size)
    # keep the point strictly inside even when the Beta draw underflows
    omz = np.maximum(omz, np.finfo(float).tiny)
    r = np.sqrt(1.0 - omz)
    z = _directions(n, rng, size) * r[:, None]
    return PointBatch(z, omz, np.ones(size))


def dv_alpha_constant(n: int, alpha: float) -> float:
    """c_alpha = Gamma(n+alpha+1) / (n! Gamma(alpha+1))."""
    if alpha <= -1:
        raise ValueError(f"alpha must exceed -1 (got {alpha})")
    return math.exp(special.gammaln(n + alpha + 1) - special.gammaln(n + 1) - special.gammaln(alpha + 1))


def weight_dV_alpha(z, alpha: float) -> np.ndarray:
    """Density of dV_alpha with respect to normalized volume."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    return dv_alpha_constant(n, alpha) * (1.0 - ball.norm_sq(z)) ** alpha


@dataclass(frozen=True)
class OuterSampler:
    """Mixture of the tilted law with Mobius-recentred copies of itself.

    Component 0 draws from ``mu = c (1-|z|^2)^tilt dV``; component k draws
    ``u ~ mu`` and returns ``Phi_{c_k}(u)``. Relative to ``mu`` the k-th
    component has density ``((1-|c_k|^2)/|1-<z,c_k>|^2)^(tilt+n+1)``, so the
    weight ``1 / sum_k pi_k rho_k(z)`` makes the mixture unbiased for ``mu``.
    """

    n: int
    tilt: float
    centers: tuple = ()
    base_share: float = 0.5

    def shares(self) -> np.ndarray:
        if not self.centers:
            return np.ones(1)
        rest = (1.0 - self.base_share) / len(self.centers)
        return np.array([self.base_share] + [rest] * len(self.centers))

    def density_ratio(self, z: np.ndarray, omz: np.ndarray) -> np.ndarray:
        pis = self.shares()
        total = np.full(z.shape[0], pis[0])
        power = self.tilt + self.n + 1.0
        for pi, c in zip(pis[1:], self.centers):
            c = np.asarray(c, dtype=complex)
            ratio = (1.0 - ball.norm_sq(c)) / np.abs(1.0 - ball.inner(z, c)) ** 2
            total += pi * ratio**power
        return total

    def sample(self, rng: np.random.Generator, size: int) -> PointBatch:
        base = sample_ball(self.n, self.tilt, rng, size)
        if not self.centers:
            return base
        comp = rng.choice(len(self.centers) + 1, size=size, p=self.shares())
        z = base.z.copy()
        omz = base.omz.copy()
        for k, c in enumerate(self.centers, start=1):
            sel = comp == k
            if not np.any(sel):
                continue
            c = np.asarray(c, dtype=complex)
            u = base.z[sel]
            z[sel] = ball.phi(c, u)
            omz[sel] = (1.0 - ball.norm_sq(c)) * base.omz[sel] / np.abs(1.0 - ball.inner(u, c)) ** 2
        return PointBatch(z, omz, 1.0 / self.density_ratio(z, omz))


def recenter_points(direction, radii: Sequence[float] = RECENTER_RADII) -> tuple:
    d = np.asarray(direction, dtype=complex)
    d = d / math.sqrt(float(ball.norm_sq(d)))
    return tuple(r * d for r in radii)


# -- estimation -------------------------------------------------------------------


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    n = v.size
    m = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return m, se


def truncation_levels(values: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Per-sample contributions to the integrals truncated at |z| <= rho."""
    return np.stack([np.where(radius <= rho, values, 0.0) for rho in TRUNCATION_RADII])


@dataclass(frozen=True)
class Moments:
    """Sufficient statistics for an estimate and its divergence diagnostics.

    ``blocks`` holds (count, sum, sum of squares) for the sample ranges
    [0, n/4), [n/4, n/2) and [n/2, n), so the running estimates at n/4, n/2
    and n can be rebuilt. ``levels`` are the truncated-integral sums and
    ``band_sq`` the sum of squared contributions of the outermost band.
    """

    blocks: tuple
    levels: tuple = ()
    band_sq: float = 0.0
    nonnegative: bool = True

    @property
    def n(self) -> int:
        return sum(b[0] for b in self.blocks)


def _block_edges(n: int) -> list[tuple[int, int]]:
    return [(0, n // 4), (n // 4, n // 2), (n // 2, n)]


def moments(
    values: np.ndarray,
    levels: np.ndarray | None = None,
    weights: np.ndarray | None = None,
    band2: np.ndarray | None = None,
) -> Moments:
    """Collect :class:`Moments` of ``values * weights`` (weights default to one).

    Passing ``weights`` separately lets a caller reweight stored samples
    without materializing the weighted truncation levels; ``band2`` may carry
    the precomputed squared outermost-band contributions.
    """
    v = values if weights is None else values * weights
    blocks = []
    for a, b in _block_edges(v.size):
        seg = v[a:b]
        blocks.append((b - a, float(np.sum(seg)), float(np.dot(seg, seg))))
    if levels is None:
        return Moments(tuple(blocks), nonnegative=bool(np.all(v >= 0)))
    if band2 is None:
        band = levels[-1] - levels[-2]
        band2 = band * band
    if weights is None:
        totals = levels.sum(axis=1)
        band_sq = float(np.sum(band2))
    else:
        totals = levels @ weights
        band_sq = float(np.dot(band2, weights * weights))
    return Moments(tuple(blocks), tuple(float(x) for x in totals), band_sq, bool(np.all(v >= 0)))


def _prefix(blocks) -> tuple[float, float]:
    n = sum(b[0] for b in blocks)
    s = sum(b[1] for b in blocks)
    q = sum(b[2] for b in blocks)
    m = s / n
    if n < 2:
        return m, 0.0
    var = max(q - s * m, 0.0) / (n - 1)
    return m, math.sqrt(var / n)


def _doubling_flag(mo: Moments, threshold: float = 5.0) -> bool:
    if mo.n < 16:
        return False
    est = [_prefix(mo.blocks[:1]), _prefix(mo.blocks[:2]), _prefix(mo.blocks)]
    for (m0, s0), (m1, s1) in zip(est, est[1:]):
        if not abs(m1 - m0) > threshold * math.hypot(s0, s1):
            return False
    return True


def _truncation(mo: Moments) -> tuple[tuple[float, ...], bool]:
    """Truncated integrals I(rho) and the no-slope-decay verdict.

    A convergent integral has increments over successive decades of
    1 - rho that eventually shrink geometrically, while a divergent one keeps
    them level (logarithmic growth) or rising. The sequence counts as growing
    when the last three increments are positive, the last one has not decayed
    below ``DECAY_FLOOR`` times either predecessor, and either it is resolved
    above noise or each increment is at least ``GROWTH_FACTOR`` times the
    previous one. The second clause catches blow-ups so strong that one
    sample carries the whole outer band, which makes its standard error as
    large as the increment itself.
    """
    n = mo.n
    totals = tuple(x / n for x in mo.levels)
    d = np.diff(totals)
    mean_band = d[-1]
    se_last = math.sqrt(max(mo.band_sq / n - mean_band * mean_band, 0.0) / n) if n > 1 else 0.0
    level = bool(np.all(d[-3:] > 0.0) and d[-1] >= DECAY_FLOOR * max(d[-2], d[-3]))
    resolved = d[-1] > 2.0 * se_last
    steep = d[-1] >= GROWTH_FACTOR * d[-2] and d[-2] >= GROWTH_FACTOR * d[-3]
    return totals, level and bool(resolved or steep)


def estimate_from_moments(mo: Moments) -> IntegralEstimate:
    n = mo.n
    flat = [x for b in mo.blocks for x in b[1:]] + list(mo.levels) + [mo.band_sq]
    if not all(math.isfinite(x) for x in flat):
        return IntegralEstimate(math.inf, math.inf, n, True)
    m, se = _prefix(mo.blocks)
    diverged = _doubling_flag(mo)
    truncated: tuple[float, ...] = ()
    if mo.levels and mo.nonnegative:
        truncated, grows = _truncation(mo)
        diverged = diverged or grows
    return IntegralEstimate(m, se, n, diverged, truncated)


def summarize(
    values: np.ndarray,
    radius: np.ndarray | None = None,
    *,
    levels: np.ndarray | None = None,
) -> IntegralEstimate:
    """Mean, standard error and divergence verdict for weighted samples.

    The truncation diagnostic runs for nonnegative samples when either the
    sample radii or precomputed truncation ``levels`` are supplied.
    """
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return IntegralEstimate(math.inf, math.inf, v.size, True)
    if levels is None and radius is not None:
        levels = truncation_levels(v, np.asarray(radius))
    with np.errstate(over="ignore", invalid="ignore"):
        return estimate_from_moments(moments(v, levels))


def _collect(parts: list) -> tuple[np.ndarray, np.ndarray]:
    vals = np.concatenate([p[0] for p in parts])
    rads = np.concatenate([p[1] for p in parts])
    return vals, rads


def integrate_ball(
    g: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    cfg: SamplerConfig,
    *,
    n: int,
    label: str = "ball",
) -> IntegralEstimate:
    """Estimate the integral of ``g`` against dV_alpha.

    ``beta_tilt`` draws directly from dV_alpha; ``uniform_volume`` draws
    uniform points and multiplies by the dV_alpha density.
    """
    c_alpha = dv_alpha_constant(n, alpha)

    def shard(i: int, size: int):
        rng = stream(cfg.seed, label, i)
        if cfg.radial_mode == "beta_tilt":
            pts = sample_ball(n, alpha, rng, size)
            return _apply(g, pts), pts.radius
        pts = sample_ball(n, 0.0, rng, size)
        return _apply(g, pts) * (c_alpha * pts.omz**alpha), pts.radius

    return summarize(*_collect(_map_shards(shard, cfg)))


def _apply(g, pts: PointBatch) -> np.ndarray:
    try:
        return np.asarray(g(pts.z), dtype=float)
    except Exception as exc:  # attach a sample point to evaluation errors
        if hasattr(exc, "with_point") and getattr(exc, "point", None) is None:
            raise exc.with_point(pts.z[0]) from exc
        raise


def integrate_lambda(
    g: Callable[[np.ndarray], np.ndarray],
    cfg: SamplerConfig,
    boundary_order: float,
    *,
    n: int,
    centers: tuple = (),
    label: str = "lambda",
) -> IntegralEstimate:
    """Estimate the integral of ``g`` against the invariant measure dlambda.

    ``g`` is declared to vanish like ``(1-|z|^2)^boundary_order``; the radial
    law uses tilt ``boundary_order - n - 1`` (floored at -1/2 when that would
    not be a probability law, in which case the integral is infinite anyway
    and the diagnostics are expected to say so).
    """
    tilt = max(boundary_order - n - 1.0, -0.5)
    sampler = OuterSampler(n, tilt, tuple(centers))
    scale = 1.0 / dv_alpha_constant(n, tilt)

    def shard(i: int, size: int):
        pts = sampler.sample(stream(cfg.seed, label, i), size)
        vals = _apply(g, pts) * pts.omz ** (-(n + 1.0 + tilt)) * scale * pts.weight
        return vals, pts.radius

    return summarize(*_collect(_map_shards(shard, cfg)))


def double_integral(
    G: Callable[[np.ndarray, np.ndarray], np.ndarray],
    alpha: float,
    cfg: SamplerConfig,
    mode: str = "desingularized",
    *,
    n: int,
    label: str = "double",
) -> IntegralEstimate:
    """Estimate the double integral of ``G(z, w)`` against dV_alpha x dV_alpha.

    ``plain`` samples the pair independently. ``desingularized`` samples
    ``(z, u)`` and uses ``w = Phi_z(u)`` with
    ``dV_alpha(Phi_z(u)) = k_z(u) dV_alpha(u)``, moving a diagonal
    singularity of ``G`` to ``u = 0``.
    """
    if mode not in ("plain", "desingularized"):
        raise ValueError(f"unknown mode {mode!r}")
    gamma = n + 1.0 + alpha
    dv_alpha_constant(n, alpha)

    def shard(i: int, size: int):
        rng = stream(cfg.seed, f"{label}:{mode}", i)
        zs = sample_ball(n, alpha, rng, size)
        us = sample_ball(n, alpha, rng, size)
        if mode == "plain":
            w = us.z
            vals = G(zs.z, w)
        else:
            w = ball.phi(zs.z, us.z)
            k = zs.omz**gamma / np.abs(1.0 - ball.inner(zs.z, us.z)) ** (2.0 * gamma)
            vals = G(zs.z, w) * k
        # truncate on the pair so both variables approach the boundary together
        rad = np.maximum(zs.radius, np.sqrt(ball.norm_sq(w)))
        return np.asarray(vals, dtype=float), rad

    return summarize(*_collect(_map_shards(shard, cfg)))


# -- supremum search -------------------------------------------------------------


@dataclass(frozen=True)
class SupResult:
    a_star: np.ndarray
    value: float
    table: tuple  # ((a, value), ...) in probe order
    stopped: bool = False


def _clamp(x: np.ndarray, r_max: float) -> np.ndarray:
    r = float(np.linalg.norm(x))
    return x if r <= r_max else x * (r_max / r)


def _to_point(x: np.ndarray, n: int) -> np.ndarray:
    return x[:n] + 1j * x[n:]


def _to_real(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a.real, a.imag])


def coarse_points(n: int, r_max: float, n_random: int, seed: int) -> list[np.ndarray]:
    radii = sorted({0.3, 0.6, 0.8, r_max})
    pts = [np.zeros(n, dtype=complex)]
    for r in radii:
        for k in range(n):
            for unit in (1.0, 1j):
                for sign in (1.0, -1.0):
                    a = np.zeros(n, dtype=complex)
                    a[k] = sign * unit * r
                    pts.append(a)
    if n_random:
        rng = stream(seed, "sup_search")
        dirs = _directions(n, rng, n_random)
        rad = r_max * rng.random(n_random) ** (1.0 / (2 * n))
        pts.extend(dirs * rad[:, None])
    return pts


def sup_search(
    F: Callable[[np.ndarray], float],
    n: int,
    r_max: float = 0.95,
    budget: int = 264,
    *,
    seed: int = 0,
    stop: Callable[[np.ndarray, float], bool] | None = None,
) -> SupResult:
    """Maximize ``F`` over ``|a| <= r_max``: coarse probes, then Nelder-Mead.

    The coarse stage visits ``a = 0``, ``+-r e_k`` and ``+-i r e_k`` for
    ``r`` in {0.3, 0.6, 0.8, r_max}, and ``budget // 4`` random points; the
    simplex stage spends what is left of ``budget`` on the 2n real
    coordinates with a radial clamp (skipped when every coarse probe returned
    the same value). The returned value is the best probe,
    hence a lower bound for the supremum. ``stop(a, value)`` returning true
    ends the search early.
    """
    if not 0.0 < r_max < 1.0:
        raise ValueError("r_max must lie in (0, 1)")
    coarse = coarse_points(n, r_max, budget // 4, seed)
    if budget < len(coarse):
        raise ValueError(f"budget {budget} is smaller than the {len(coarse)} coarse probes")
    table: list[tuple[np.ndarray, float]] = []

    def probe(a: np.ndarray) -> float:
        v = float(F(a))
        table.append((a, v))
        return v

    for a in coarse:
        v = probe(a)
        if stop is not None and stop(a, v):
            return _result(table, stopped=True)

    remaining = budget - len(coarse)
    values = [v for _, v in table]
    if remaining > 0 and max(values) > min(values):
        start = max(table, key=lambda t: t[1])[0]
        scale = max(abs(v) for v in values if math.isfinite(v)) if any(map(math.isfinite, values)) else 1.0

        class _Stop(Exception):
            pass

        def objective(x):
            if len(table) >= budget:
                raise _Stop
            a = _to_point(_clamp(x, r_max), n)
            v = probe(a)
            if stop is not None and stop(a, v):
                raise _Stop
            return -v if math.isfinite(v) else -1e300

        x0 = _to_real(start)
        step = 0.1
        simplex = [x0]
        for e in np.eye(2 * n):
            v = x0 + step * e
            simplex.append(v if np.linalg.norm(v) <= r_max else x0 - step * e)
        try:
            optimize.minimize(
                objective,
                x0,
                method="Nelder-Mead",
                options={
                    "maxfev": remaining,
                    "initial_simplex": np.array(simplex),
                    "xatol": 5e-4,
                    "fatol": max(1e-5 * scale, 1e-300),
                },
            )
        except _Stop:
            return _result(table, stopped=stop is not None and len(table) < budget)
    return _result(table)


def _result(table, stopped: bool = False) -> SupResult:
    best_a, best_v = table[0]
    for a, v in table[1:]:
        if v > best_v:
            best_a, best_v = a, v
    return SupResult(best_a, best_v, tuple(table), stopped)
