"""Payoff specifications and the full path-functional assembly.

For one scalar path x with exit time tau against the configured barriers,
the engine evaluates

    g(Pi(x, tau nu1), Pi(x, nu2), Pi(M(x), tau nu3), Pi(M(x), nu4), tau)

where Pi projects onto sampling instants and M is the running maximum.  A
payoff g always takes the flat argument vector of length 4m + 1, laid out as
[z1 | z2 | z3 | z4 | tau]; in the option payoffs below the terminal price is
argument 2m (the last entry of z2, with nu2 = (1/m, ..., 1)) and the terminal
running maximum is argument 4m.

Payoffs declare a growth class: linear-growth payoffs are only trusted after
a uniform-integrability diagnostic (see the estimator module), and each
built-in payoff declares the distance to its discontinuity locus so the
almost-sure-continuity condition can be monitored empirically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import EvaluationError, PreconditionError
from .paths import (BarrierPair, SampleVector, StepPath, hitting_time,
                    project, running_max)

__all__ = [
    "Growth",
    "FunctionalSpec",
    "PathObservables",
    "observe",
    "evaluate",
    "observe_args_batch",
    "up_and_in_call",
    "discrete_barrier_call",
    "custom_terminal",
    "constant_payoff",
    "discontinuity_mass_estimate",
]


@dataclass(frozen=True)
class Growth:
    """Growth class of a payoff: bounded by B, or linear growth."""

    kind: str  # "bounded" | "linear"
    bound: float | None = None

    @classmethod
    def bounded(cls, B: float) -> "Growth":
        return cls("bounded", float(B))

    @classmethod
    def linear(cls) -> "Growth":
        return cls("linear")


@dataclass(frozen=True)
class FunctionalSpec:
    """The four sampling vectors, barriers, and payoff of one functional.

    ``payoff`` maps the flat (4m+1,) argument vector to a float;
    ``payoff_batch``, when present, maps an (N, 4m+1) block to (N,) and lets
    the estimator evaluate whole batches at once.  ``locus_distance`` maps
    argument vectors to the distance from the payoff's discontinuity set
    (vectorized over a leading axis).  ``coordinate`` picks the scalar state
    component the barriers and payoff read on multi-dimensional models.
    """

    m: int
    nu1: SampleVector
    nu2: SampleVector
    nu3: SampleVector
    nu4: SampleVector
    payoff: Callable[[np.ndarray], float]
    growth: Growth
    barriers: BarrierPair
    coordinate: int = 0
    payoff_batch: Callable[[np.ndarray], np.ndarray] | None = None
    locus_distance: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = "custom"

    def __post_init__(self):
        for nu in (self.nu1, self.nu2, self.nu3, self.nu4):
            if len(nu) != self.m:
                raise ValueError("all four sampling vectors must have length m")

    def with_coordinate(self, k: int) -> "FunctionalSpec":
        return replace(self, coordinate=k)

    def args_size(self) -> int:
        return 4 * self.m + 1


@dataclass(frozen=True)
class PathObservables:
    """The four projections and the exit time of one path."""

    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    z4: np.ndarray
    tau: float

    def args(self) -> np.ndarray:
        return np.concatenate([self.z1, self.z2, self.z3, self.z4, [self.tau]])


def observe(path: StepPath, spec: FunctionalSpec) -> PathObservables:
    """Exit time and the four projections of one path.

    Multi-dimensional paths are read through the configured coordinate.
    """
    x = path.coordinate(spec.coordinate) if not path.is_scalar else path
    tau = hitting_time(x, spec.barriers)
    mx = running_max(x)
    return PathObservables(
        z1=project(x, spec.nu1.scaled(tau)),
        z2=project(x, spec.nu2),
        z3=project(mx, spec.nu3.scaled(tau)),
        z4=project(mx, spec.nu4),
        tau=tau,
    )


def evaluate(path: StepPath, spec: FunctionalSpec) -> float:
    """Payoff of one path: g applied to the observable vector."""
    obs = observe(path, spec)
    val = float(spec.payoff(obs.args()))
    if not np.isfinite(val):
        raise EvaluationError("payoff returned a non-finite value", observables=obs)
    return val


def observe_args_batch(times: np.ndarray, values: np.ndarray,
                       spec: FunctionalSpec) -> np.ndarray:
    """Argument vectors for a batch of paths sharing one grid.

    ``values`` has shape (B, n+1, d); returns (B, 4m+1).  Produces exactly
    the same numbers as :func:`observe` applied row by row, which is what
    the test suite checks.
    """
    V = values[:, :, spec.coordinate] if values.ndim == 3 else values
    B, n1 = V.shape
    lo = spec.barriers.lower.values_on(times)
    hi = spec.barriers.upper.values_on(times)
    out = (V <= lo[None, :]) | (V >= hi[None, :])
    has = out.any(axis=1)
    first = np.argmax(out, axis=1)
    tau = np.where(has, times[first], 1.0)

    M = np.maximum.accumulate(V, axis=1)

    def cols(instants):
        return np.searchsorted(times, instants, side="right") - 1

    def sample_at_scaled(A, nu):
        tt = tau[:, None] * nu.entries[None, :]
        idx = np.searchsorted(times, tt.ravel(), side="right") - 1
        return A[np.repeat(np.arange(B), len(nu)), idx].reshape(B, len(nu))

    z1 = sample_at_scaled(V, spec.nu1)
    z2 = V[:, cols(spec.nu2.entries)]
    z3 = sample_at_scaled(M, spec.nu3)
    z4 = M[:, cols(spec.nu4.entries)]
    return np.concatenate([z1, z2, z3, z4, tau[:, None]], axis=1)


def _uniform_spec(m: int) -> dict:
    nu = SampleVector.uniform(m)
    return dict(m=m, nu1=nu, nu2=nu, nu3=nu, nu4=nu)


def up_and_in_call(strike: float, barrier_level: float, r: float, m: int = 1,
                   coordinate: int = 0) -> FunctionalSpec:
    """Up-and-in call: e^{-r} (X(1) - K)^+ activated when the running
    maximum reaches the barrier level.

    The knock-in condition reads the terminal running maximum (argument 4m),
    so the band barriers stay infinite and tau is identically 1.  Linear
    growth; discontinuous exactly on {x_{4m} = barrier}.
    """
    if barrier_level <= 0.0:
        raise ValueError("barrier level must be positive")
    disc = float(np.exp(-r))
    k = float(strike)
    b = float(barrier_level)
    mm = m

    def payoff(x):
        return disc * max(x[2 * mm - 1] - k, 0.0) * (1.0 if x[4 * mm - 1] >= b else 0.0)

    def payoff_batch(x):
        return disc * np.maximum(x[:, 2 * mm - 1] - k, 0.0) * (x[:, 4 * mm - 1] >= b)

    def locus_distance(x):
        x = np.atleast_2d(x)
        return np.abs(x[:, 4 * mm - 1] - b)

    return FunctionalSpec(
        **_uniform_spec(m),
        payoff=payoff,
        payoff_batch=payoff_batch,
        locus_distance=locus_distance,
        growth=Growth.linear(),
        barriers=BarrierPair.unbounded(),
        coordinate=coordinate,
        label="up_in_call",
    )


def discrete_barrier_call(strike: float, barrier_level: float, r: float,
                          m: int, coordinate: int = 0) -> FunctionalSpec:
    """Up-and-in call with the barrier monitored at the m instants i/m.

    The knock-in condition reads the maximum of the monitored path values
    (arguments m+1 .. 2m); the call leg reads the terminal value (argument
    2m).  Linear growth; discontinuous on {max monitored = barrier}.
    """
    if m < 1:
        raise ValueError("need at least one monitoring date")
    if barrier_level <= 0.0:
        raise ValueError("barrier level must be positive")
    disc = float(np.exp(-r))
    k = float(strike)
    b = float(barrier_level)
    mm = m

    def payoff(x):
        hit = np.max(x[mm : 2 * mm]) >= b
        return disc * max(x[2 * mm - 1] - k, 0.0) * (1.0 if hit else 0.0)

    def payoff_batch(x):
        hit = np.max(x[:, mm : 2 * mm], axis=1) >= b
        return disc * np.maximum(x[:, 2 * mm - 1] - k, 0.0) * hit

    def locus_distance(x):
        x = np.atleast_2d(x)
        return np.abs(np.max(x[:, mm : 2 * mm], axis=1) - b)

    return FunctionalSpec(
        **_uniform_spec(m),
        payoff=payoff,
        payoff_batch=payoff_batch,
        locus_distance=locus_distance,
        growth=Growth.linear(),
        barriers=BarrierPair.unbounded(),
        coordinate=coordinate,
        label="discrete_barrier_call",
    )


def custom_terminal(kind: str, strike: float = 0.0, r: float = 0.0,
                    coordinate: int = 0) -> FunctionalSpec:
    """Payoffs of the terminal value only: identity, call or put.

    ``identity`` returns the discounted terminal value itself and is the
    payoff used by the martingale sanity checks.
    """
    disc = float(np.exp(-r))
    k = float(strike)
    if kind == "identity":
        payoff = lambda x: disc * x[1]
        payoff_batch = lambda x: disc * x[:, 1]
    elif kind == "call":
        payoff = lambda x: disc * max(x[1] - k, 0.0)
        payoff_batch = lambda x: disc * np.maximum(x[:, 1] - k, 0.0)
    elif kind == "put":
        payoff = lambda x: disc * max(k - x[1], 0.0)
        payoff_batch = lambda x: disc * np.maximum(k - x[:, 1], 0.0)
    else:
        raise ValueError(f"unknown terminal payoff kind {kind!r}")
    return FunctionalSpec(
        **_uniform_spec(1),
        payoff=payoff,
        payoff_batch=payoff_batch,
        locus_distance=None,
        growth=Growth.linear(),
        barriers=BarrierPair.unbounded(),
        coordinate=coordinate,
        label=f"terminal_{kind}",
    )


def constant_payoff(c: float) -> FunctionalSpec:
    """g identically c; handy for exactness tests (stderr must be 0)."""
    c = float(c)
    return FunctionalSpec(
        **_uniform_spec(1),
        payoff=lambda x: c,
        payoff_batch=lambda x: np.full(x.shape[0], c),
        locus_distance=None,
        growth=Growth.bounded(abs(c)),
        barriers=BarrierPair.unbounded(),
        label="constant",
    )


def discontinuity_mass_estimate(spec: FunctionalSpec, paths, delta: float) -> float:
    """Fraction of paths whose observables fall within delta of the payoff's
    discontinuity locus.

    A diagnostic for almost-sure continuity: the frequency should be small
    and shrink with delta.  Payoffs with no declared locus report 0.
    """
    if delta <= 0.0:
        raise PreconditionError("delta must be positive")
    if spec.locus_distance is None:
        return 0.0
    n = 0
    close = 0
    for p in paths:
        args = observe(p, spec).args()
        close += int(float(spec.locus_distance(args[None, :])[0]) < delta)
        n += 1
    if n == 0:
        raise PreconditionError("need at least one path")
    return close / n
