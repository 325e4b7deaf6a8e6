"""Acceptance criteria, one test each, every one reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
Criteria 5 and 6 share one full-budget report per dimension (about a quarter of an
hour in total on one core).
"""

import filecmp
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE
from npqs import ball, battery
from npqs.cli import main
from npqs.functionals import FunctionalKind as K
from npqs.functionals import SpaceParams, prepare
from npqs.integrate import SamplerConfig, integrate_ball, integrate_lambda
from npqs.parser import parse
from npqs.report import RunConfig, run_report

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
OUTER = (K.NNorm, K.I1_Grad, K.I2_InvGrad, K.I3_Radial)


def record(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append((name, ok, detail))
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def test_1_identity_battery():
    t0 = time.perf_counter()
    worst = {}
    for n in (1, 2, 3):
        for r in battery.identity_checks(n, 10_000, seed=1):
            if r.name == "derivative at 0":
                continue  # finite-difference check with its own 1e-6 tolerance
            worst[r.name] = max(worst.get(r.name, 0.0), r.max_violation)
    elapsed = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    ok = worst[top] <= 1e-9 and elapsed < 10
    record("1 identity battery", ok, f"max violation {worst[top]:.2e} ({top}), {elapsed:.1f}s")


def test_2_inequality_battery():
    t0 = time.perf_counter()
    failed, checks = [], 0
    for n in (1, 2, 3):
        for r in battery.inequality_checks(n, 100_000, seed=2):
            checks += 1
            if not r.passed:
                failed.append(f"{r.name} n={n} ({r.max_violation:.2e})")
    elapsed = time.perf_counter() - t0
    ok = not failed and elapsed < 30
    record("2 inequality battery", ok, f"{checks} checks, violations: {failed or 'none'}, {elapsed:.1f}s")


def test_3_measure_correctness():
    # default sampler: total mass and the second moment n/(n+alpha+1) of |z|^2 under dV_alpha
    worst_z, worst_se, uv_z, uv_se = 0.0, 0.0, 0.0, 0.0
    one = lambda z: np.ones(z.shape[0])
    cfg = SamplerConfig(seed=3, n_samples=1_000_000)
    uv = SamplerConfig(seed=3, n_samples=1_000_000, radial_mode="uniform_volume")
    for n in (1, 2):
        for alpha in (0.0, 1.0, 2.5):
            for g, target in ((one, 1.0), (ball.norm_sq, n / (n + alpha + 1.0))):
                est = integrate_ball(g, alpha, cfg, n=n)
                worst_se = max(worst_se, est.std_error)
                err = abs(est.value - target)
                worst_z = max(worst_z, err / est.std_error if est.std_error > 0 else (0.0 if err < 1e-12 else math.inf))
            # uniform-volume draws reweighted by the dV_alpha density; reported, its sigma is not bounded
            est = integrate_ball(one, alpha, uv, n=n)
            uv_se = max(uv_se, est.std_error)
            uv_z = max(uv_z, abs(est.value - 1.0) / est.std_error if est.std_error > 0 else 0.0)
    a = np.array([0.6, 0.3j])
    g = lambda z: (1 - ball.norm_sq(z)) ** 3.5 * (1 + np.abs(z[:, 0]) ** 2)
    g_a = lambda z: g(ball.phi(a, z))
    cfg = SamplerConfig(seed=4, n_samples=1_000_000)
    e1 = integrate_lambda(g, cfg, 3.5, n=2)
    e2 = integrate_lambda(g_a, cfg.with_seed(5), 3.5, n=2, centers=(a,))
    mz = abs(e1.value - e2.value) / e1.combined_sigma(e2)
    ok = worst_z <= 3 and worst_se <= 1e-3 and mz <= 3 and uv_z <= 3
    record(
        "3 measure correctness",
        ok,
        f"dV_alpha mass and moment: worst {worst_z:.2f} sigma, sigma <= {worst_se:.1e}; "
        f"uniform-volume mode {uv_z:.2f} sigma (sigma <= {uv_se:.1e}); mobius invariance {mz:.2f} sigma",
    )


def test_4_oracle_equivalence():
    t0 = time.perf_counter()
    P = SpaceParams(n=1, p=7, q=1, s=1, alpha=0.5)
    cfg = SamplerConfig(seed=6, n_samples=1_000_000)
    bad, worst = [], 0.0
    for text in ("z1", "z1^2"):
        f = parse(text, 1)
        for kind in K:
            table = prepare(f, P, kind, cfg)
            for a in (0.0, 0.5):
                est = table.at(np.array([a]))
                if kind in OUTER:
                    quad = oracles.outer_functional(f, kind.value, 7, 1, 1, a=a)
                else:
                    quad = oracles.pair_functional(f, kind.value, 7, 1, 1, 0.5, a=a)
                tol = max(3 * est.std_error, 0.01 * abs(quad))
                worst = max(worst, abs(est.value - quad) / tol)
                if est.diverged or abs(est.value - quad) > tol:
                    bad.append(f"{text}/{kind.value}/a={a}: {est.value:.5g} vs {quad:.5g}")
    # divergent member: both sides must show unbounded growth of the truncated integrals
    f = parse("(1 - z1)^-0.5", 1)
    for kind in K:
        est = prepare(f, P, kind, cfg).at(np.zeros(1))
        if kind in OUTER:
            lb = oracles.outer_lower_bounds(f, kind.value, 7, 1, 1)
        else:
            lb = oracles.pair_lower_bounds(f, kind.value, 7, 1, 1, 0.5)
        quad_grows = all(y > 10 * x > 0 for x, y in zip(lb, lb[1:]))
        if not (est.diverged and quad_grows):
            bad.append(f"(1-z)^-1/2 {kind.value}: mc diverged={est.diverged}, quadrature grows={quad_grows}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 300
    record("4 oracle equivalence", ok, f"worst |mc-quad|/tol {worst:.2f}, mismatches {bad or 'none'}, {elapsed:.0f}s")


@pytest.fixture(scope="module")
def reports():
    out = {}
    for n in (1, 2):
        rc = RunConfig.load(CONFIGS / f"n{n}.json")
        t0 = time.perf_counter()
        jobs, summary = run_report(rc)
        out[n] = (rc, jobs, summary, time.perf_counter() - t0)
    return out


def test_5_verdict_agreement(reports):
    total = sum(r[3] for r in reports.values())
    notes, ok = [], total < 1800
    for n, (rc, jobs, summary, secs) in reports.items():
        disagree = [f for a in summary["agreement"].values() for f, v in a.items() if not v]
        onsets = {
            lab: sorted({str(v["onset"]) for v in th.values() if v is not None})
            for lab, th in summary["thresholds"].items()
        }
        complete = all(
            v in ("finite", "infinite") for row in summary["verdicts"].values() for kv in row.values() for v in kv.values()
        )
        thr = all(summary["threshold_consistent"].values())
        ok = ok and not disagree and thr and complete and summary["dominance_violations"] == 0
        notes.append(f"n={n}: disagreements {disagree or 'none'}, onset {onsets}, {secs:.0f}s")
    record("5 verdict agreement", ok, "; ".join(notes) + f"; total {total:.0f}s")


def test_6_fubini_path(reports):
    bad, worst = [], 0.0
    for n, (rc, jobs, summary, _) in reports.items():
        for lab, per_f in summary["fubini"].items():
            for f, fb in per_f.items():
                if fb is None:
                    bad.append(f"n={n} {f}: missing")
                    continue
                jd, dd = fb["diverged"]
                if jd or dd:
                    if jd != dd:
                        bad.append(f"n={n} {f}: diverged J={jd} D0={dd}")
                    continue
                z = float(fb["z"])
                worst = max(worst, z)
                if z > 3:
                    bad.append(f"n={n} {f}: {z:.2f} sigma")
    record("6 fubini path", not bad, f"worst {worst:.2f} combined sigma over finite functions; {bad or 'no mismatches'}")


def test_7_homogeneity():
    worst = 0.0
    cfg = SamplerConfig(seed=7, n_samples=200_000)
    for n in (1, 2):
        P = SpaceParams(n=n, p=7, q=1, s=1, alpha=0.5)
        rc = RunConfig(n=n)
        polys = [e for e in rc.functions() if "log" not in e and "dot" not in e]
        a = np.zeros(n, dtype=complex)
        a[0] = 0.4j
        for text in polys:
            f = parse(text, n)
            g = parse(f"2*({text})", n)
            for kind in K:
                x = prepare(f, P, kind, cfg).at(a).value
                y = prepare(g, P, kind, cfg).at(a).value
                if x == 0:
                    assert y == 0
                    continue
                worst = max(worst, abs(y / x / 2**7 - 1))
    record("7 homogeneity", worst <= 0.02, f"max |ratio/2^p - 1| = {worst:.2e}")


def test_8_determinism(tmp_path):
    cfg = {"n": 1, "corpus": ["z1", "z1^2 - z1", "(1 - z1)^-1", "log(1 - z1)"], "samples": 100_000, "seed": 8}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    codes = [main(["equivalence-report", "--config", str(path), "--out-dir", str(tmp_path / d)]) for d in ("a", "b")]
    same = filecmp.cmp(tmp_path / "a" / "report.csv", tmp_path / "b" / "report.csv", shallow=False)
    record("8 determinism", same and codes == [0, 0], f"CSV byte-identical: {same}; exit codes {codes}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
