"""Redundancy estimators: greedy disjoint-fragment counts N_delta, the
lower bound R_delta, mean sufficient fragment size, specific redundancy,
scaled PIPs and the redundant / non-redundant / quantum split."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath
from ._pool import ordered_map
from .branching import (
    BranchingState,
    FLUSH_TINY,
    _entropy_of_gamma,
    mutual_information,
    sample_branching_state,
    system_entropy,
)
from .errors import InvalidInputError
from .haar_ensemble import Pip, UniverseSpec

DEFAULT_N_PERMUTATIONS = 64
# a fragment must carry more than this to count, so H_S = 0 gives no fragments
MIN_INFO = 1e-12
THRESHOLD_MODES = ("plateau", "total")


def _check_delta(delta, closed=False):
    ok = 0.0 <= delta <= 1.0 if closed else 0.0 < delta < 1.0
    if not ok:
        raise InvalidInputError(f"delta must lie in {'[0, 1]' if closed else '(0, 1)'}, got {delta!r}")


def sufficient_threshold(h_sys: float, delta: float, mode: str = "plateau") -> float:
    """Information a fragment must carry to count as sufficient.

    ``"plateau"``: ``(1 - delta) H_S``. ``"total"``: ``(1 - delta) 2 H_S``,
    a fraction of the full system-environment mutual information; disjoint
    fragments can never jointly meet it more than once, so it is provided
    for comparison only.
    """
    _check_delta(delta, closed=True)
    if mode == "plateau":
        return (1.0 - delta) * h_sys
    if mode == "total":
        return (1.0 - delta) * 2.0 * h_sys
    raise InvalidInputError(f"unknown threshold mode {mode!r}")


# ---------------------------------------------------------------------------
# greedy packing
# ---------------------------------------------------------------------------

def greedy_fragments(state: BranchingState, order: Sequence[int], threshold: float) -> list[tuple[int, ...]]:
    """Walk ``order``, growing a fragment until it carries ``threshold``
    nats, then start a new one. Returns the closed (sufficient) fragments;
    a trailing insufficient run is discarded.

    Straightforward reference version of :func:`greedy_counts`.
    """
    closed: list[tuple[int, ...]] = []
    current: list[int] = []
    for k in order:
        current.append(int(k))
        info = mutual_information(state, current)
        if info >= threshold and info > MIN_INFO:
            closed.append(tuple(current))
            current = []
    return closed


def random_orders(n_env: int, count: int, rng) -> np.ndarray:
    gen = qmath.as_generator(rng)
    return np.argsort(gen.random((count, n_env)), axis=1)


def greedy_counts(state: BranchingState, orders: np.ndarray, threshold: float, h_sys: float | None = None):
    """Greedy packing for many orders at once.

    Returns ``(counts, first_sizes)``: the number of sufficient fragments per
    order and the size of the first one (``nan`` when none closes).

    All orders advance in lockstep. With prefix/suffix products ``P``, ``S``
    of the overlap matrices along each order, the complement of the open run
    ``[a, t]`` has decoherence matrix ``P[a] * S[t+1]``.
    """
    orders = np.asarray(orders)
    n_ord, n = orders.shape
    d = state.d_sys
    s = state.amplitudes.s
    if h_sys is None:
        h_sys = system_entropy(state)
    g = state.overlaps[orders]  # (n_ord, n, d, d)
    ones = np.ones((n_ord, 1, d, d), dtype=complex)
    pre = np.concatenate([ones, np.cumprod(g, axis=1)], axis=1)
    suf = np.concatenate([np.cumprod(g[:, ::-1], axis=1)[:, ::-1], ones], axis=1)
    pre[np.abs(pre) < FLUSH_TINY] = 0.0
    suf[np.abs(suf) < FLUSH_TINY] = 0.0

    rows = np.arange(n_ord)
    start = np.zeros(n_ord, dtype=int)
    run = np.ones((n_ord, d, d), dtype=complex)
    counts = np.zeros(n_ord, dtype=int)
    first = np.full(n_ord, np.nan)
    for t in range(n):
        run = run * g[:, t]
        run[np.abs(run) < FLUSH_TINY] = 0.0
        comp = pre[rows, start] * suf[:, t + 1]
        h = _entropy_of_gamma(s, np.concatenate([run, comp]))
        info = h_sys + h[:n_ord] - h[n_ord:]
        done = (info >= threshold) & (info > MIN_INFO)
        if done.any():
            new_first = done & (counts == 0)
            first[new_first] = t + 1 - start[new_first]
            counts[done] += 1
            start[done] = t + 1
            run[done] = 1.0
    return counts, first


def n_delta(state: BranchingState, delta: float, n_permutations: int, rng, mode: str = "plateau") -> float:
    """Mean greedy count of disjoint sufficient fragments over random orders."""
    return report_for_state(state, delta, n_permutations, rng, mode).n_delta_mean


@dataclass
class RedundancyReport:
    """Redundancy summary at one deficit ``delta``.

    ``r_delta = (1 - delta) n_delta_mean - 1`` is kept unfloored; use
    ``r_display`` for presentation. ``specific_r = (1 - delta)/m_delta_mean``
    (0 when no sufficient fragment was found).
    """

    delta: float
    n_delta_mean: float
    r_delta: float
    m_delta_mean: float
    specific_r: float
    threshold_nats: float
    samples: int
    n_delta_std: float = 0.0
    mode: str = "plateau"

    @property
    def r_display(self) -> float:
        return max(self.r_delta, 0.0)


def _report(delta, n_mean, m_mean, threshold, samples, n_std=0.0, mode="plateau") -> RedundancyReport:
    specific = (1.0 - delta) / m_mean if np.isfinite(m_mean) and m_mean > 0 else 0.0
    return RedundancyReport(
        delta=delta,
        n_delta_mean=float(n_mean),
        r_delta=(1.0 - delta) * float(n_mean) - 1.0,
        m_delta_mean=float(m_mean),
        specific_r=float(specific),
        threshold_nats=float(threshold),
        samples=int(samples),
        n_delta_std=float(n_std),
        mode=mode,
    )


def _nanmean(x) -> float:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    return float(x.mean()) if x.size else float("nan")


def report_for_state(state: BranchingState, delta: float, n_permutations: int, rng, mode: str = "plateau") -> RedundancyReport:
    """Per-state report: ``n_delta_mean`` and ``m_delta_mean`` are averages
    over ``n_permutations`` random orders; ``samples`` counts the orders."""
    _check_delta(delta)
    if n_permutations < 1:
        raise InvalidInputError("n_permutations must be >= 1")
    h_sys = system_entropy(state)
    threshold = sufficient_threshold(h_sys, delta, mode)
    orders = random_orders(state.n_env, n_permutations, rng)
    counts, first = greedy_counts(state, orders, threshold, h_sys)
    return _report(delta, counts.mean(), _nanmean(first), threshold, n_permutations, counts.std(), mode)


r_delta = report_for_state


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def _ensemble_task(args):
    spec, stream, deltas, n_permutations, mode = args
    state = sample_branching_state(spec, stream.substream(0))
    h_sys = system_entropy(state)
    orders = random_orders(spec.n_env, n_permutations, stream.substream(2))
    out = []
    for delta in deltas:
        counts, first = greedy_counts(state, orders, sufficient_threshold(h_sys, delta, mode), h_sys)
        out.append((counts.mean(), _nanmean(first), h_sys))
    return out


def ensemble_redundancy(
    spec: UniverseSpec,
    deltas: Sequence[float] | float,
    n_states: int,
    n_permutations: int = DEFAULT_N_PERMUTATIONS,
    rng: qmath.RngStream | None = None,
    mode: str = "plateau",
    workers: int = 1,
) -> list[RedundancyReport]:
    """Ensemble-mean redundancy reports, one per ``delta``.

    Every ``delta`` is evaluated on the same states and the same orders
    (state ``i`` from ``rng.substream(i, 0)``, orders from
    ``rng.substream(i, 2)``), so counts are monotone in ``delta``.
    ``n_delta_mean`` and ``m_delta_mean`` average the per-state means;
    ``samples`` is ``n_states``.
    """
    deltas = [float(deltas)] if np.ndim(deltas) == 0 else [float(x) for x in deltas]
    for dlt in deltas:
        _check_delta(dlt)
    if mode not in THRESHOLD_MODES:
        raise InvalidInputError(f"unknown threshold mode {mode!r}")
    if n_states < 1 or n_permutations < 1:
        raise InvalidInputError("n_states and n_permutations must be >= 1")
    rng = rng if rng is not None else qmath.RngStream(0)
    tasks = [(spec, rng.substream(i), deltas, n_permutations, mode) for i in range(n_states)]
    per_state = ordered_map(_ensemble_task, tasks, workers=workers)
    h_mean = float(np.mean([ps[0][2] for ps in per_state]))
    reports = []
    for j, delta in enumerate(deltas):
        n_vals = np.array([ps[j][0] for ps in per_state])
        m_vals = [ps[j][1] for ps in per_state]
        reports.append(
            _report(
                delta,
                n_vals.mean(),
                _nanmean(m_vals),
                sufficient_threshold(h_mean, delta, mode),
                n_states,
                n_vals.std(ddof=1) if n_states > 1 else 0.0,
                mode,
            )
        )
    return reports


@dataclass
class SpecificRedundancySweep:
    """Ensemble-mean ``R_delta`` against ``n_env`` with a least-squares line.

    ``slope`` is the numerical specific redundancy; ``r_squared`` measures
    linearity; ``ratio`` is ``R_delta / n_env`` per point.
    """

    delta: float
    n_env: np.ndarray
    r_delta: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    reports: list = field(default_factory=list)

    @property
    def ratio(self) -> np.ndarray:
        return self.r_delta / self.n_env


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``(slope, intercept, R^2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def specific_redundancy_sweep(
    spec: UniverseSpec,
    n_envs: Sequence[int],
    delta: float,
    n_states: int,
    n_permutations: int = DEFAULT_N_PERMUTATIONS,
    rng: qmath.RngStream | None = None,
    mode: str = "plateau",
    workers: int = 1,
) -> SpecificRedundancySweep:
    """Fit ``R_delta`` vs ``n_env``; ``spec.n_env`` is replaced by each entry
    of ``n_envs``, whose ensemble uses ``rng.substream(n_env)``."""
    n_envs = [int(n) for n in n_envs]
    if len(set(n_envs)) < 3:
        raise InvalidInputError("need at least three distinct n_env values")
    rng = rng if rng is not None else qmath.RngStream(0)
    reports = [
        ensemble_redundancy(spec.with_n_env(n), delta, n_states, n_permutations, rng.substream(n), mode, workers)[0]
        for n in n_envs
    ]
    r = np.array([rep.r_delta for rep in reports])
    slope, intercept, r2 = linear_fit(n_envs, r)
    return SpecificRedundancySweep(
        delta=delta,
        n_env=np.array(n_envs),
        r_delta=r,
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        reports=reports,
    )


# ---------------------------------------------------------------------------
# scaled PIPs and the information split
# ---------------------------------------------------------------------------

@dataclass
class ScaledPip:
    f_cap: np.ndarray
    f_info: np.ndarray
    label: str = ""


def scaled_pip(pip: Pip) -> ScaledPip:
    """Axes as fractions: ``m/N`` and ``I/(2 H_S)``."""
    if pip.h_sys <= 0:
        raise InvalidInputError("scaling needs h_sys > 0")
    return ScaledPip(
        f_cap=np.arange(pip.n_env + 1) / pip.n_env,
        f_info=np.asarray(pip.i_mean) / (2.0 * pip.h_sys),
        label=pip.label,
    )


def interpolate_scaled(curve: ScaledPip, f_cap) -> np.ndarray:
    return np.interp(f_cap, curve.f_cap, curve.f_info)


@dataclass
class InfoDecomposition:
    """Split of ``2 H_S`` into redundant, non-redundant and quantum parts (nats)."""

    i_redundant: float
    i_nonredundant: float
    i_quantum: float
    m_star: int | None = None

    @property
    def total(self) -> float:
        return self.i_redundant + self.i_nonredundant + self.i_quantum


def decompose_information(pip: Pip, delta: float, mode: str = "plateau", atol: float = 1e-9) -> InfoDecomposition:
    """``I_R`` is ``I(m*)`` for the smallest ``m* < N/2`` reaching the
    threshold, ``I_Q = 2 H_S - I(N-1)`` needs the whole environment, and
    ``I_NR`` is the rest. Without such an ``m*``, ``I_R = 0``.

    Sizes from ``N/2`` up are excluded: antisymmetry puts every pure-state
    PIP at ``H_S`` there, so reaching the plateau threshold at half the
    environment says nothing about redundancy.
    """
    _check_delta(delta)
    total = 2.0 * pip.h_sys
    i = np.asarray(pip.i_mean, dtype=float)
    n = pip.n_env
    threshold = sufficient_threshold(pip.h_sys, delta, mode)
    hits = [m for m in range(1, n) if 2 * m < n and i[m] >= threshold]
    m_star = hits[0] if hits else None
    i_almost = i[n - 1] if n >= 1 else 0.0
    i_r = min(i[m_star], i_almost) if m_star is not None else 0.0
    i_q = total - i_almost
    i_nr = total - i_r - i_q

    def clamp(x):
        return 0.0 if -atol <= x < 0.0 else x

    return InfoDecomposition(clamp(i_r), clamp(i_nr), clamp(i_q), m_star)
