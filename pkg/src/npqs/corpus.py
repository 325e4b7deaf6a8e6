"""The default corpus of test functions, as expression strings."""

from __future__ import annotations

import itertools

import numpy as np

from .integrate import stream

__all__ = ["CORPUS_SEED", "KERNEL_POWERS", "default_corpus", "kernel_power", "random_polynomial"]

CORPUS_SEED = 20240611
KERNEL_POWERS = (0.5, 1.0, 3.0)


def _fmt(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def kernel_power(n: int, t: float) -> str:
    """(1 - <z, e_1>)^-t; real t goes to the principal branch."""
    b = ", ".join(["1"] + ["0"] * (n - 1))
    return f"(1 - dot(z,[{b}]))^-{_fmt(t)}"


def random_polynomial(n: int, degree: int = 5, terms: int = 6, seed: int = CORPUS_SEED) -> str:
    """Sparse polynomial of exact total degree ``degree`` with two-decimal complex coefficients."""
    rng = stream(seed, f"corpus:poly:{n}:{degree}")
    monos = [
        e for d in range(1, degree + 1) for e in itertools.product(range(d + 1), repeat=n) if sum(e) == d
    ]
    top = [e for e in monos if sum(e) == degree]
    picks = [top[int(rng.integers(len(top)))]]
    rest = [e for e in monos if e != picks[0]]
    for i in rng.permutation(len(rest))[: terms - 1]:
        picks.append(rest[int(i)])
    picks.sort(key=lambda e: (sum(e), e))
    parts = []
    for e in picks:
        re_, im = np.round(rng.uniform(-1.0, 1.0, size=2), 2)
        coef = f"({_fmt(re_)}{'+' if im >= 0 else '-'}{_fmt(abs(im))}i)"
        factors = [f"z{k + 1}" if m == 1 else f"z{k + 1}^{m}" for k, m in enumerate(e) if m]
        parts.append("*".join([coef] + factors))
    return " + ".join(parts)


def default_corpus(n: int) -> list[str]:
    out = ["1"] + [f"z{k}" for k in range(1, n + 1)]
    if n >= 2:
        out.append("z1*z2")
    out.append(random_polynomial(n))
    out += [kernel_power(n, t) for t in KERNEL_POWERS]
    out.append("log(1 - z1)")
    return out
