"""Run configuration and the cross-kind equivalence report."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import holo
from .corpus import default_corpus, kernel_power
from .functionals import (
    FunctionalKind,
    ParameterError,
    SpaceParams,
    _check_hw_gate,
    centered,
    d_alpha_at,
    prepare,
    sup_functional,
)
from .integrate import SamplerConfig, coarse_points
from .parser import ParseError, parse

__all__ = ["COLUMNS", "ConfigError", "JobResult", "RunConfig", "Row", "format_point", "run_report", "write_report"]

COLUMNS = (
    "function", "kind", "n", "p", "q", "s", "alpha", "a_star",
    "value", "std_error", "samples", "diverged", "seconds", "seed",
)
ALL_KINDS = tuple(k.value for k in FunctionalKind)
HW_KINDS = (FunctionalKind.HWEuclid, FunctionalKind.HWProj)
DOMINANCE_SLACK = 1e-12


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything that determines a report. ``corpus=None`` means the default corpus."""

    n: int = 2
    params: list = field(default_factory=lambda: [{"p": 7.0, "q": 1.0, "s": 1.0, "alpha": 0.5}])
    corpus: list | None = None
    t_grid: list = field(default_factory=list)
    kinds: list = field(default_factory=lambda: list(ALL_KINDS))
    seed: int = 0
    samples: int = 1_000_000
    shards: int = 8
    radial_mode: str = "beta_tilt"
    budget: int = 264
    r_max: float = 0.95
    override_hw_gate: bool = False
    workers: int = 1
    time_limit: float | None = None
    record_seconds: bool = False
    out_dir: str = "npqs-report"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError("n>=1 violated")
        for k in self.kinds:
            try:
                FunctionalKind.parse(k)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        for e in self.functions():
            try:
                parse(e, self.n)
            except ParseError as err:
                raise ConfigError(f"corpus entry {e!r}: {err}") from None
        self.space_params()
        if not 0.0 < self.r_max < 1.0:
            raise ConfigError("r_max must lie in (0, 1)")
        n_coarse = len(coarse_points(self.n, self.r_max, self.budget // 4, 0))
        if self.budget < n_coarse:
            raise ConfigError(f"budget {self.budget} is smaller than the {n_coarse} coarse probes for n={self.n}")

    def functions(self) -> list[str]:
        out = list(default_corpus(self.n) if self.corpus is None else self.corpus)
        for t in self.t_grid:
            e = kernel_power(self.n, t)
            if e not in out:
                out.append(e)
        return out

    def space_params(self) -> list[SpaceParams]:
        out = []
        for d in self.params:
            unknown = set(d) - {"p", "q", "s", "alpha"}
            if unknown:
                raise ConfigError(f"unknown parameter keys {sorted(unknown)}")
            try:
                out.append(_space_params(self.n, d["p"], d["q"], d["s"], d.get("alpha")))
            except KeyError as e:
                raise ConfigError(f"parameter set missing {e.args[0]!r}") from None
        return out

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(self.seed, self.samples, self.radial_mode, self.shards, 1)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def _space_params(n, p, q, s, alpha=None) -> SpaceParams:
    q, s, p = float(q), float(s), float(p)
    if alpha is None:
        alpha = q + n * s - n - 1 + 0.5
    return SpaceParams(n, p, q, s, float(alpha))


def params_label(P: SpaceParams) -> str:
    return f"p={P.p:g},q={P.q:g},s={P.s:g},alpha={P.alpha:g}"


def format_point(a) -> str:
    a = np.asarray(a, dtype=complex).ravel()
    return ";".join(f"{v.real:.6g}{v.imag:+.6g}j" for v in a)


def _num(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


@dataclass
class Row:
    function: str
    kind: str
    P: SpaceParams
    seed: int
    a_star: str = ""
    value: str = ""
    std_error: str = ""
    samples: str = ""
    diverged: str = ""
    seconds: float | None = None

    @property
    def verdict(self) -> str:
        if self.value in ("skipped", "error"):
            return self.value
        return "infinite" if self.diverged == "true" else "finite"

    def cells(self, record_seconds: bool) -> list[str]:
        P = self.P
        secs = f"{self.seconds:.3f}" if record_seconds and self.seconds is not None else ""
        return [
            self.function, self.kind, str(P.n), f"{P.p:g}", f"{P.q:g}", f"{P.s:g}", f"{P.alpha:g}",
            self.a_star, self.value, self.std_error, self.samples, self.diverged, secs, str(self.seed),
        ]


@dataclass
class JobResult:
    function: str
    P: SpaceParams
    rows: list
    dominance_violations: int = 0
    dominance_checked: int = 0
    collapse_max_rel: float | None = None
    fubini: dict | None = None
    sufficiency: dict | None = None
    errors: list = field(default_factory=list)


def _sup_row(row: Row, sup) -> None:
    row.a_star = format_point(sup.a_star)
    row.value = _num(sup.value)
    row.std_error = _num(sup.std_error)
    row.samples = str(sup.estimate.n_samples)
    row.diverged = "true" if sup.diverged else "false"


def run_job(rc: RunConfig, expr: str, P: SpaceParams, deadline: float | None) -> JobResult:
    cfg = rc.sampler()
    f = parse(expr, rc.n)
    job = JobResult(expr, P, [])
    values: dict[FunctionalKind, np.ndarray] = {}
    verdict: dict[FunctionalKind, bool] = {}
    for name in rc.kinds:
        kind = FunctionalKind.parse(name)
        row = Row(expr, kind.value, P, rc.seed)
        job.rows.append(row)
        if deadline is not None and time.monotonic() > deadline:
            row.value = "skipped"
            continue
        t0 = time.perf_counter()
        try:
            if kind in HW_KINDS:
                _check_hw_gate(P, rc.override_hw_gate)
            table = prepare(f, P, kind, cfg)
            sup = sup_functional(
                f, P, kind, cfg, budget=rc.budget, r_max=rc.r_max,
                override_hw=rc.override_hw_gate, table=table,
            )
        except (ParameterError, holo.EvaluationError) as e:
            row.value = "error"
            job.errors.append(f"{expr} / {kind.value} / {params_label(P)}: {e}")
            continue
        finally:
            row.seconds = time.perf_counter() - t0
        _sup_row(row, sup)
        verdict[kind] = sup.diverged
        if kind in (FunctionalKind.DAlpha, *HW_KINDS):
            values[kind] = table.values
        if kind is FunctionalKind.JMeanOsc:
            j0 = table.at(np.zeros(rc.n))
            d0 = d_alpha_at(f, P, np.zeros(rc.n), cfg, alpha=0.0)
            sig = j0.combined_sigma(d0)
            z = abs(j0.value - d0.value) / sig if sig > 0 else (0.0 if j0.value == d0.value else math.inf)
            job.fubini = {
                "j": j0.value, "j_se": j0.std_error, "d0": d0.value, "d0_se": d0.std_error,
                "z": z, "diverged": [j0.diverged, d0.diverged],
            }

    d, hp, he = (values.get(k) for k in (FunctionalKind.DAlpha, FunctionalKind.HWProj, FunctionalKind.HWEuclid))
    if d is not None and hp is not None:
        with np.errstate(invalid="ignore"):
            bad = d > hp * (1.0 + DOMINANCE_SLACK) + 1e-300
        job.dominance_violations = int(np.count_nonzero(bad))
        job.dominance_checked = int(d.size)
    if rc.n == 1 and hp is not None and he is not None:
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(hp - he) / np.maximum(np.abs(he), 1e-300)
        job.collapse_max_rel = float(np.max(rel, initial=0.0))

    if FunctionalKind.HWEuclid in verdict and not (deadline is not None and time.monotonic() > deadline):
        g = centered(f, rc.n)
        nn = sup_functional(g, P, FunctionalKind.NNorm, cfg, budget=rc.budget, r_max=rc.r_max)
        job.sufficiency = {
            "centered_nnorm_infinite": nn.diverged,
            "hw_euclid_infinite": verdict[FunctionalKind.HWEuclid],
            "agree": nn.diverged == verdict[FunctionalKind.HWEuclid],
        }
    return job


def _thresholds(rc: RunConfig, jobs: list[JobResult], P: SpaceParams) -> tuple[dict, bool]:
    grid = sorted(rc.t_grid)
    by_t = {}
    for job in jobs:
        if job.P == P:
            for t in grid:
                if job.function == kernel_power(rc.n, t):
                    by_t[t] = {r.kind: r.verdict for r in job.rows}
    out = {}
    for kind in rc.kinds:
        seq = [by_t[t].get(kind) for t in grid if t in by_t]
        if not seq or any(v not in ("finite", "infinite") for v in seq):
            out[kind] = None
            continue
        first = next((i for i, v in enumerate(seq) if v == "infinite"), len(seq))
        monotone = all(v == "infinite" for v in seq[first:])
        out[kind] = {"onset": grid[first] if first < len(seq) else None, "monotone": monotone}
    known = [v for v in out.values() if v is not None]
    consistent = all(v["monotone"] for v in known) and len({v["onset"] for v in known}) <= 1
    return out, consistent


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _jsonable(x.item())
    return x


def summarize_jobs(rc: RunConfig, jobs: list[JobResult], wall: float) -> dict:
    verdicts, agreement, fubini, sufficiency, ratios, thresholds, thr_ok = {}, {}, {}, {}, {}, {}, {}
    for P in rc.space_params():
        lab = params_label(P)
        verdicts[lab], agreement[lab], fubini[lab], sufficiency[lab], ratios[lab] = {}, {}, {}, {}, {}
        for job in (j for j in jobs if j.P == P):
            row_v = {r.kind: r.verdict for r in job.rows}
            verdicts[lab][job.function] = row_v
            decided = {v for v in row_v.values() if v in ("finite", "infinite")}
            agreement[lab][job.function] = len(decided) <= 1
            fubini[lab][job.function] = job.fubini
            sufficiency[lab][job.function] = job.sufficiency
            vals = {r.kind: float(r.value) for r in job.rows if r.verdict == "finite"}
            pairs = {}
            for i, k1 in enumerate(rc.kinds):
                for k2 in rc.kinds[i + 1:]:
                    if k1 in vals and k2 in vals and vals[k2] > 0:
                        pairs[f"{k1}/{k2}"] = vals[k1] / vals[k2]
            ratios[lab][job.function] = pairs
        thresholds[lab], thr_ok[lab] = _thresholds(rc, jobs, P)
    dominance = sum(j.dominance_violations for j in jobs)
    collapse = [j.collapse_max_rel for j in jobs if j.collapse_max_rel is not None]
    collapse_max = max(collapse) if collapse else None
    all_agree = all(all(a.values()) for a in agreement.values())
    consistent = all_agree and dominance == 0 and all(thr_ok.values())
    if collapse_max is not None:
        consistent = consistent and collapse_max <= 1e-9
    return _jsonable({
        "config": rc.to_dict(),
        "functions": rc.functions(),
        "verdicts": verdicts,
        "agreement": agreement,
        "all_agree": all_agree,
        "dominance_violations": dominance,
        "dominance_pairs_checked": sum(j.dominance_checked for j in jobs),
        "projection_euclid_collapse_max_rel": collapse_max,
        "fubini": fubini,
        "sufficiency": sufficiency,
        "ratios": ratios,
        "thresholds": thresholds,
        "threshold_consistent": thr_ok,
        "skipped_rows": sum(r.value == "skipped" for j in jobs for r in j.rows),
        "errors": [e for j in jobs for e in j.errors],
        "consistent": consistent,
        "wall_seconds": wall,
        "row_seconds": [[r.function, r.kind, params_label(r.P), r.seconds] for j in jobs for r in j.rows],
    })


def run_report(rc: RunConfig) -> tuple[list[JobResult], dict]:
    start = time.monotonic()
    deadline = None if rc.time_limit is None else start + rc.time_limit
    tasks = [(e, P) for P in rc.space_params() for e in rc.functions()]
    if rc.workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=rc.workers) as ex:
            jobs = list(ex.map(lambda sp: run_job(rc, sp[0], sp[1], deadline), tasks))
    else:
        jobs = [run_job(rc, e, P, deadline) for e, P in tasks]
    return jobs, summarize_jobs(rc, jobs, time.monotonic() - start)


def csv_text(rc: RunConfig, jobs: list[JobResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for job in jobs:
        for row in job.rows:
            w.writerow(row.cells(rc.record_seconds))
    return buf.getvalue()


def write_report(rc: RunConfig, jobs: list[JobResult], summary: dict, out_dir=None) -> tuple[Path, Path]:
    out = Path(out_dir if out_dir is not None else rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "report.csv", out / "summary.json"
    csv_path.write_text(csv_text(rc, jobs))
    json_path.write_text(json.dumps(summary, indent=2) + "\n")
    return csv_path, json_path
