"""Random model configurations spanning every variant and coefficient kind."""

from __future__ import annotations

import numpy as np

from .model import ModelSpec, ReleaseSchedule, SeasonalFunction, Variant

VARIANTS = tuple(Variant)


def random_seasonal(rng: np.random.Generator, lo: float, hi: float, period: float) -> SeasonalFunction:
    """Constant, two-level piecewise, or cosine function with values in ``[lo, hi]``."""
    kind = rng.integers(3)
    if kind == 0:
        return SeasonalFunction.constant(float(rng.uniform(lo, hi)))
    if kind == 1:
        split = float(rng.uniform(0.2, 0.8)) * period
        vals = rng.uniform(lo, hi, size=2)
        return SeasonalFunction.piecewise(period, [0.0, split], [float(v) for v in vals])
    mean = float(rng.uniform(lo, hi))
    amp = float(rng.uniform(0.0, 0.9)) * min(mean - lo, hi - mean, mean)
    return SeasonalFunction.cosine(mean, amp, period, float(rng.uniform(0.0, period)))


def random_model(rng: np.random.Generator, variant: Variant | None = None) -> ModelSpec:
    variant = Variant(variant) if variant is not None else VARIANTS[rng.integers(len(VARIANTS))]
    T = float(rng.uniform(1.0, 14.0))
    T_bar = float(rng.uniform(0.2, 0.8)) * T
    n0 = 1 if rng.random() < 0.8 else 2
    # Coefficient base period: the release period, a fraction of it, or the full n0*T.
    period = float(rng.choice([T, T / 2, n0 * T]))
    a = random_seasonal(rng, 1.0, 6.0, period)
    mu = random_seasonal(rng, 0.2, 2.0, period)
    extras: dict = {}
    xi = None
    if variant is Variant.COMPETITION_SURVIVAL:
        extras["eta"] = random_seasonal(rng, 0.1, 1.5, period)
    else:
        xi = random_seasonal(rng, 0.1, 1.5, period)
    if variant is Variant.IMPERFECT_CI:
        extras["s_h"] = float(rng.uniform(0.0, 1.0))
    elif variant is Variant.SATURATED_RELEASE:
        extras["b"] = float(rng.uniform(0.1, 5.0))
    elif variant is Variant.ALLEE:
        extras["alpha"] = float(rng.uniform(0.1, 5.0))
    g0 = float(rng.uniform(0.0, 3.0)) if rng.random() < 0.9 else 0.0
    return ModelSpec(variant, a, mu, xi, ReleaseSchedule(g0, T_bar, T, n0), **extras)


def battery(n: int, seed: int = 0) -> list[ModelSpec]:
    """``n`` configurations cycling through the variants so each is represented."""
    rng = np.random.default_rng(seed)
    return [random_model(rng, VARIANTS[i % len(VARIANTS)]) for i in range(n)]
