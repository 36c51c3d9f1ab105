"""Uniform (Haar) ensemble: Page's mean subsystem entropy and the
ensemble-average partial information plot, analytic and Monte Carlo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath
from ._pool import ordered_map
from .errors import GuardError, InvalidInputError

INITIAL_STATES = ("hadamard", "thermal", "ghz", "custom")

MONTECARLO_MAX_DIM = 2 ** 14
HARMONIC_MAX_TERMS = 10 ** 6


@dataclass(frozen=True)
class UniverseSpec:
    """A ``d_sys``-dimensional system plus ``n_env`` subenvironments of
    dimension ``d_env``.

    ``initial_state`` selects the system amplitudes used by the branching
    ensemble; ``"custom"`` takes them from ``amplitudes``.
    """

    d_sys: int
    d_env: int
    n_env: int
    initial_state: str = "hadamard"
    amplitudes: tuple[complex, ...] | None = None

    def __post_init__(self):
        if int(self.d_sys) < 2 or int(self.d_env) < 2 or int(self.n_env) < 1:
            raise InvalidInputError(
                f"need d_sys >= 2, d_env >= 2, n_env >= 1 (got {self.d_sys}, {self.d_env}, {self.n_env})"
            )
        if self.initial_state not in INITIAL_STATES:
            raise InvalidInputError(f"unknown initial state {self.initial_state!r}")
        if self.initial_state == "custom":
            if self.amplitudes is None or len(self.amplitudes) != self.d_sys:
                raise InvalidInputError("custom initial state needs d_sys amplitudes")
            object.__setattr__(self, "amplitudes", tuple(complex(a) for a in self.amplitudes))

    @property
    def env_dim(self) -> int:
        """Total environment dimension as an exact integer."""
        return self.d_env ** self.n_env

    @property
    def total_dim(self) -> int:
        return self.d_sys * self.env_dim

    @property
    def capacity(self) -> float:
        """Environment information capacity ``n_env * ln d_env`` (nats)."""
        return self.n_env * math.log(self.d_env)

    def with_n_env(self, n_env: int) -> "UniverseSpec":
        return UniverseSpec(self.d_sys, self.d_env, n_env, self.initial_state, self.amplitudes)


@dataclass
class Pip:
    """Partial information plot: mean mutual information vs fragment size.

    ``i_mean[m]`` and ``i_std[m]`` are in nats for ``m = 0..n_env``;
    ``samples[m]`` is the number of independent ensemble members behind
    each point (zero for analytic curves).
    """

    n_env: int
    i_mean: np.ndarray
    i_std: np.ndarray
    samples: np.ndarray
    h_sys: float
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.n_env + 1)

    @property
    def std_error(self) -> np.ndarray:
        n = np.maximum(self.samples, 1)
        return np.where(self.samples > 0, self.i_std / np.sqrt(n), 0.0)


# ---------------------------------------------------------------------------
# Page's formula
# ---------------------------------------------------------------------------

def page_mean_entropy_harmonic(m: int, n: int) -> float:
    """Page's mean entropy by the finite harmonic sum (needs ``m*n`` small)."""
    m, n = _page_args(m, n)
    if m * n > HARMONIC_MAX_TERMS:
        raise GuardError(f"harmonic path limited to m*n <= {HARMONIC_MAX_TERMS}")
    return math.fsum(1.0 / k for k in range(n + 1, m * n + 1)) - (m - 1) / (2 * n)


def page_mean_entropy(m: int, n: int) -> float:
    """Mean entanglement entropy (nats) of an ``m``-dimensional subsystem of
    a Haar-random pure state on ``m*n`` dimensions, ``1 <= m <= n``.

    Evaluated in digamma form, ``psi(mn+1) - psi(n+1) - (m-1)/(2n)``, which
    equals the harmonic sum ``sum_{k=n+1}^{mn} 1/k - (m-1)/(2n)``. Integer
    arguments may exceed float range; logarithms are taken of the exact
    integers.
    """
    m, n = _page_args(m, n)
    if m == 1:
        return 0.0
    # psi(mn+1) - psi(n+1) = ln((mn+1)/(n+1)) + c(mn+1) - c(n+1), c = psi - ln
    mn = m * n
    diff = (
        math.log(m) + math.log1p(1.0 / mn) - math.log1p(1.0 / n)
        + _psi_minus_log(mn + 1) - _psi_minus_log(n + 1)
    )
    return diff - (m - 1) / (2 * n)


def _psi_minus_log(x: int) -> float:
    if x < 1 << 40:
        return qmath.digamma(x) - math.log(x)
    if x.bit_length() > 1000:
        return 0.0
    return qmath._digamma_minus_log(float(x))


def _page_args(m, n):
    if int(m) != m or int(n) != n:
        raise InvalidInputError("Page's formula takes integer dimensions")
    m, n = int(m), int(n)
    if m < 1:
        raise InvalidInputError("subsystem dimension must be >= 1")
    if m > n:
        raise InvalidInputError(f"need m <= n (got m={m}, n={n}); swap the arguments")
    return m, n


def page_symmetric(a: int, b: int) -> float:
    """Mean entropy of either side of an ``a x b`` Haar bipartition."""
    return page_mean_entropy(min(a, b), max(a, b))


# ---------------------------------------------------------------------------
# PIPs
# ---------------------------------------------------------------------------

def haar_mutual_information_mean(spec: UniverseSpec, m: int) -> float:
    """Ensemble-average I(S : E_m) for the uniform ensemble."""
    ds, de, n = spec.d_sys, spec.d_env, spec.n_env
    if not 0 <= m <= n:
        raise InvalidInputError(f"fragment size {m} outside 0..{n}")
    env_m = de ** m
    env_rest = de ** (n - m)
    return (
        page_symmetric(ds, de ** n)
        + page_symmetric(env_m, ds * env_rest)
        - page_symmetric(ds * env_m, env_rest)
    )


def haar_pip_analytic(spec: UniverseSpec) -> Pip:
    """Uniform-ensemble PIP from Page's formula (exact ensemble average)."""
    n = spec.n_env
    means = np.array([haar_mutual_information_mean(spec, m) for m in range(n + 1)])
    means[0] = 0.0
    return Pip(
        n_env=n,
        i_mean=means,
        i_std=np.zeros(n + 1),
        samples=np.zeros(n + 1, dtype=int),
        h_sys=page_symmetric(spec.d_sys, spec.env_dim),
        label=f"haar analytic DS={spec.d_sys} DE={spec.d_env} N={n}",
    )


def _haar_sample_mi(args):
    spec, stream, fragments = args
    psi = qmath.haar_state(spec.total_dim, stream)
    dims = [spec.d_sys] + [spec.d_env] * spec.n_env
    h_s = qmath.entropy_of_bipartite_cut(psi, dims, [0])
    out = np.empty(len(fragments))
    for k, frag in enumerate(fragments):
        if not frag:
            out[k] = 0.0
            continue
        env_idx = [i + 1 for i in frag]
        h_e = qmath.entropy_of_bipartite_cut(psi, dims, env_idx)
        h_se = qmath.entropy_of_bipartite_cut(psi, dims, [0] + env_idx)
        out[k] = h_s + h_e - h_se
    return out


def haar_pip_montecarlo(
    spec: UniverseSpec,
    n_samples: int,
    rng: qmath.RngStream,
    fragments: Sequence[Sequence[int]] | None = None,
    workers: int = 1,
) -> Pip:
    """Monte Carlo PIP over Haar-random universe states.

    State ``k`` is drawn from substream ``k`` of ``rng``. By default the
    fragment of size ``m`` is the first ``m`` subenvironments; pass
    ``fragments`` (one index list per ``m``, zero-based) to use others.
    """
    if spec.total_dim > MONTECARLO_MAX_DIM:
        raise GuardError(
            f"total dimension {spec.total_dim} exceeds Monte Carlo guard {MONTECARLO_MAX_DIM}; "
            "use haar_pip_analytic"
        )
    if n_samples < 1:
        raise InvalidInputError("n_samples must be >= 1")
    n = spec.n_env
    if fragments is None:
        fragments = [tuple(range(m)) for m in range(n + 1)]
    fragments = [tuple(sorted(f)) for f in fragments]
    if [len(f) for f in fragments] != list(range(n + 1)):
        raise InvalidInputError("need one fragment of each size 0..n_env")
    tasks = [(spec, rng.substream(k), fragments) for k in range(n_samples)]
    values = np.array(ordered_map(_haar_sample_mi, tasks, workers=workers))
    return Pip(
        n_env=n,
        i_mean=values.mean(axis=0),
        i_std=values.std(axis=0, ddof=1) if n_samples > 1 else np.zeros(n + 1),
        samples=np.full(n + 1, n_samples),
        h_sys=page_symmetric(spec.d_sys, spec.env_dim),
        label=f"haar montecarlo DS={spec.d_sys} DE={spec.d_env} N={n}",
    )
