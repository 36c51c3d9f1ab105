"""Singly-branching universe states stored as per-subenvironment overlap
(decoherence-factor) matrices.

A branching state ``sum_n s_n |n> (x)_k |E_n^(k)>`` is determined, for every
reduced state that matters here, by the amplitudes ``s`` and the Gram
matrices ``gamma[k, i, j] = <E_j^(k)|E_i^(k)>``. Every reduced density
matrix lives on the ``d_sys``-dimensional pointer support and has entries
``s_i conj(s_j) Gamma_ij`` where ``Gamma`` is the elementwise product of
``gamma[k]`` over some subset of subenvironments:

* ``rho_S``   uses all subenvironments,
* ``rho_F``   uses the members of ``F``,
* ``rho_SF``  uses the complement of ``F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import qmath
from ._pool import ordered_map
from .errors import GuardError, InvalidInputError, NumericalError
from .haar_ensemble import Pip, UniverseSpec

NORM_ATOL = 1e-12
GRAM_PSD_ATOL = 1e-9
FLUSH_TINY = 1e-300
MAX_N_ENV = 512
DENSE_MAX_DIM = 2 ** 14

DEFAULT_N_STATES = 200
DEFAULT_N_FRAGMENTS = 32


@dataclass(frozen=True)
class SystemAmplitudes:
    """Pointer-basis amplitudes ``s_n`` of the initial system state."""

    s: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=complex).ravel()
        if s.size < 2:
            raise InvalidInputError("need at least two amplitudes")
        norm = float(np.sum(np.abs(s) ** 2))
        if abs(norm - 1.0) > NORM_ATOL:
            raise InvalidInputError(f"amplitudes have squared norm {norm!r}, expected 1")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @classmethod
    def normalized(cls, s) -> "SystemAmplitudes":
        s = np.asarray(s, dtype=complex).ravel()
        return cls(s / np.linalg.norm(s))

    @property
    def d_sys(self) -> int:
        return self.s.size

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.s) ** 2

    @property
    def h0(self) -> float:
        """Entropy of the fully decohered system, ``-sum |s_n|^2 ln |s_n|^2``."""
        return qmath.entropy_from_spectrum(self.probabilities)


def hadamard_amplitudes(d_sys: int) -> SystemAmplitudes:
    """Uniform superposition ``s_n = 1/sqrt(d_sys)``."""
    if d_sys < 2:
        raise InvalidInputError("d_sys must be >= 2")
    return SystemAmplitudes(np.full(d_sys, 1.0 / math.sqrt(d_sys), dtype=complex))


def thermal_amplitudes(d_sys: int) -> SystemAmplitudes:
    """Geometric amplitudes ``s_n ~ 2^(-n/2)``, so ``|s_n|^2 ~ 2^-n``.

    The decohered entropy approaches 2 bits from below as ``d_sys`` grows.
    """
    if d_sys < 2:
        raise InvalidInputError("d_sys must be >= 2")
    return SystemAmplitudes.normalized(2.0 ** (-np.arange(d_sys) / 2.0))


def amplitudes_for(spec: UniverseSpec) -> SystemAmplitudes:
    if spec.initial_state in ("hadamard", "ghz"):
        return hadamard_amplitudes(spec.d_sys)
    if spec.initial_state == "thermal":
        return thermal_amplitudes(spec.d_sys)
    return SystemAmplitudes.normalized(spec.amplitudes)


# ---------------------------------------------------------------------------
# the state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchingState:
    """Amplitudes plus one ``d_sys x d_sys`` overlap matrix per subenvironment.

    ``overlaps`` has shape ``(n_env, d_sys, d_sys)`` with unit diagonal.
    ``d_env`` is kept for provenance only; nothing below depends on it.
    """

    amplitudes: SystemAmplitudes
    overlaps: np.ndarray
    d_env: int | None = None

    def __post_init__(self):
        g = np.array(self.overlaps, dtype=complex)
        d = self.amplitudes.d_sys
        if g.ndim != 3 or g.shape[1:] != (d, d) or g.shape[0] < 1:
            raise InvalidInputError(f"overlaps must have shape (n_env, {d}, {d}), got {g.shape}")
        if g.shape[0] > MAX_N_ENV:
            raise GuardError(f"n_env={g.shape[0]} exceeds guard {MAX_N_ENV}")
        g.setflags(write=False)
        object.__setattr__(self, "overlaps", g)

    @property
    def d_sys(self) -> int:
        return self.amplitudes.d_sys

    @property
    def n_env(self) -> int:
        return self.overlaps.shape[0]

    def validate(self, atol: float = GRAM_PSD_ATOL) -> "BranchingState":
        """Check that every overlap matrix is a Gram matrix of unit vectors."""
        g = self.overlaps
        if np.max(np.abs(np.diagonal(g, axis1=1, axis2=2) - 1.0)) > atol:
            raise NumericalError("overlap matrices need unit diagonal")
        if np.max(np.abs(g - np.conj(np.swapaxes(g, 1, 2)))) > atol:
            raise NumericalError("overlap matrices are not Hermitian")
        if np.max(np.abs(g)) > 1.0 + atol:
            raise NumericalError("overlap magnitude exceeds 1")
        if np.linalg.eigvalsh(g).min() < -atol:
            raise NumericalError("overlap matrix is not positive semidefinite")
        return self

    @classmethod
    def from_vectors(cls, amplitudes: SystemAmplitudes, vectors) -> "BranchingState":
        """Build from conditional states ``vectors[k, n, :] = |E_n^(k)>``."""
        v = np.asarray(vectors, dtype=complex)
        if v.ndim != 3 or v.shape[1] != amplitudes.d_sys:
            raise InvalidInputError("vectors must have shape (n_env, d_sys, d_env)")
        gram = v @ np.conj(np.swapaxes(v, 1, 2))
        idx = np.arange(amplitudes.d_sys)
        gram[:, idx, idx] = 1.0
        return cls(amplitudes, gram, d_env=v.shape[2])

    @property
    def d_factors(self) -> np.ndarray:
        """Additive decoherence factors ``-ln|gamma|`` (inf where gamma = 0)."""
        with np.errstate(divide="ignore"):
            return -np.log(np.abs(self.overlaps))


def sample_conditional_states(spec: UniverseSpec, rng) -> np.ndarray:
    """Haar conditional states, shape ``(n_env, d_sys, d_env)``."""
    if spec.n_env > MAX_N_ENV:
        raise GuardError(f"n_env={spec.n_env} exceeds guard {MAX_N_ENV}")
    v = qmath.haar_states(spec.d_env, spec.n_env * spec.d_sys, rng)
    return v.reshape(spec.n_env, spec.d_sys, spec.d_env)


def ghz_conditional_states(spec: UniverseSpec) -> np.ndarray:
    """``|E_n^(k)> = |n>`` for every subenvironment."""
    if spec.d_env < spec.d_sys:
        raise InvalidInputError("GHZ construction needs d_env >= d_sys")
    v = np.zeros((spec.n_env, spec.d_sys, spec.d_env), dtype=complex)
    v[:, np.arange(spec.d_sys), np.arange(spec.d_sys)] = 1.0
    return v


def ghz_branching_state(spec: UniverseSpec, amplitudes: SystemAmplitudes | None = None) -> BranchingState:
    """Generalized GHZ state: orthogonal conditional states everywhere."""
    if spec.d_env < spec.d_sys:
        raise InvalidInputError("GHZ construction needs d_env >= d_sys")
    amps = amplitudes if amplitudes is not None else amplitudes_for(spec)
    g = np.broadcast_to(np.eye(spec.d_sys, dtype=complex), (spec.n_env, spec.d_sys, spec.d_sys))
    return BranchingState(amps, g, d_env=spec.d_env)


def sample_branching_state(spec: UniverseSpec, rng) -> BranchingState:
    """Draw each conditional state independently from its subenvironment's
    Haar ensemble. GHZ specs are deterministic and ignore ``rng``."""
    if spec.initial_state == "ghz":
        return ghz_branching_state(spec)
    return BranchingState.from_vectors(amplitudes_for(spec), sample_conditional_states(spec, rng))


def dense_state(amplitudes: SystemAmplitudes, vectors) -> np.ndarray:
    """Explicit universe vector ``sum_n s_n |n> (x)_k |E_n^(k)>``.

    Ordering is system first, then subenvironments 1..N. Only for small
    dimensions (used as an oracle).
    """
    v = np.asarray(vectors, dtype=complex)
    n_env, d_sys, d_env = v.shape
    dim = d_sys * d_env ** n_env
    if dim > DENSE_MAX_DIM:
        raise GuardError(f"dense dimension {dim} exceeds guard {DENSE_MAX_DIM}")
    out = np.zeros(dim, dtype=complex)
    for n in range(d_sys):
        branch = np.ones(1, dtype=complex)
        for k in range(n_env):
            branch = np.kron(branch, v[k, n])
        e_n = np.zeros(d_sys)
        e_n[n] = 1.0
        out += amplitudes.s[n] * np.kron(e_n, branch)
    return out


# ---------------------------------------------------------------------------
# reduced states
# ---------------------------------------------------------------------------

def _as_fragment(state: BranchingState, frag: Iterable[int]) -> tuple[int, ...]:
    members = tuple(sorted(int(k) for k in frag))
    if len(set(members)) != len(members):
        raise InvalidInputError(f"fragment {members} has duplicate members")
    if members and (members[0] < 0 or members[-1] >= state.n_env):
        raise InvalidInputError(f"fragment {members} outside 0..{state.n_env - 1}")
    return members


def _complement(n_env: int, members: Sequence[int]) -> tuple[int, ...]:
    s = set(members)
    return tuple(k for k in range(n_env) if k not in s)


def _flush(g: np.ndarray) -> np.ndarray:
    g[np.abs(g) < FLUSH_TINY] = 0.0
    return g


def fragment_decoherence(state: BranchingState, frag: Iterable[int]) -> np.ndarray:
    """``Gamma_ij = prod_{k in frag} gamma^(k)_ij`` (all ones when empty).

    Fragment members are zero-based subenvironment indices.
    """
    members = _as_fragment(state, frag)
    if not members:
        return np.ones((state.d_sys, state.d_sys), dtype=complex)
    return _flush(np.prod(state.overlaps[list(members)], axis=0))


def _masked_products(overlaps: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Products of ``overlaps[k]`` over each boolean row of ``masks``."""
    factors = np.where(masks[:, :, None, None], overlaps[None], 1.0 + 0j)
    return _flush(np.prod(factors, axis=1))


def _density(s: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return s[:, None] * np.conj(s)[None, :] * gamma


def reduced_density(state: BranchingState, which: str = "system", frag: Iterable[int] = ()) -> np.ndarray:
    """Reduced density matrix on the ``d_sys``-dimensional pointer support.

    ``which`` is ``"system"``, ``"fragment"`` or ``"system_plus_fragment"``.
    The fragment spectra are those of the full reduced states (the other
    eigenvalues vanish).
    """
    members = _as_fragment(state, frag)
    if which == "system":
        subset: Sequence[int] = range(state.n_env)
    elif which == "fragment":
        subset = members
    elif which == "system_plus_fragment":
        subset = _complement(state.n_env, members)
    else:
        raise InvalidInputError(f"unknown reduced state {which!r}")
    rho = _density(state.amplitudes.s, fragment_decoherence(state, subset))
    qmath.entropy_from_spectrum(np.linalg.eigvalsh(rho))  # PSD check
    return rho


def _entropy_of_gamma(s: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    rho = s[:, None] * np.conj(s)[None, :] * gamma
    return qmath.entropies(rho)


def system_entropy(state: BranchingState) -> float:
    return float(_entropy_of_gamma(state.amplitudes.s, fragment_decoherence(state, range(state.n_env))))


def mutual_information(state: BranchingState, frag: Iterable[int]) -> float:
    """``I(S:F) = H_S + H_F - H_SF`` in nats."""
    members = _as_fragment(state, frag)
    if not members:
        return 0.0
    masks = np.zeros((1, state.n_env), dtype=bool)
    masks[0, list(members)] = True
    return float(mutual_information_masks(state, masks)[0][0])


def mutual_information_masks(state: BranchingState, masks: np.ndarray, h_sys: float | None = None):
    """Batched mutual information for fragments given as boolean masks.

    Returns ``(I(F), I(complement F))`` arrays. Both come from the same two
    entropies, ``H(Gamma_F)`` and ``H(Gamma_Fbar)``.
    """
    masks = np.asarray(masks, dtype=bool)
    if masks.ndim != 2 or masks.shape[1] != state.n_env:
        raise InvalidInputError("masks must have shape (count, n_env)")
    s = state.amplitudes.s
    if h_sys is None:
        h_sys = system_entropy(state)
    h_f = _entropy_of_gamma(s, _masked_products(state.overlaps, masks))
    h_fbar = _entropy_of_gamma(s, _masked_products(state.overlaps, ~masks))
    return h_sys + h_f - h_fbar, h_sys + h_fbar - h_f


# ---------------------------------------------------------------------------
# PIPs
# ---------------------------------------------------------------------------

def fragment_masks(n_env: int, m: int, count: int, rng) -> np.ndarray:
    """Size-``m`` fragments as boolean masks.

    All ``C(n_env, m)`` subsets when that is at most ``count``, otherwise
    ``count`` uniformly random subsets (each drawn without replacement).
    """
    total = math.comb(n_env, m)
    if total <= count:
        masks = np.zeros((total, n_env), dtype=bool)
        for r, c in enumerate(combinations(range(n_env), m)):
            masks[r, list(c)] = True
        return masks
    gen = qmath.as_generator(rng)
    keys = gen.random((count, n_env))
    chosen = np.argsort(keys, axis=1)[:, :m]
    masks = np.zeros((count, n_env), dtype=bool)
    np.put_along_axis(masks, chosen, True, axis=1)
    return masks


def state_pip(state: BranchingState, n_fragments: int, rng: qmath.RngStream) -> np.ndarray:
    """Fragment-averaged ``I(m)`` for one state, ``m = 0..n_env``.

    Fragments of size ``m <= N/2`` are sampled from ``rng.substream(m)``;
    size ``N - m`` uses their complements, so ``I(m) + I(N-m) = 2 H_S``
    holds exactly for every state.
    """
    n = state.n_env
    h_sys = system_entropy(state)
    out = np.zeros(n + 1)
    for m in range(1, n // 2 + 1):
        masks = fragment_masks(n, m, n_fragments, rng.substream(m))
        i_f, i_fbar = mutual_information_masks(state, masks, h_sys)
        if 2 * m == n:
            out[m] = 0.5 * (i_f.mean() + i_fbar.mean())
        else:
            out[m] = i_f.mean()
            out[n - m] = i_fbar.mean()
    out[n] = 2.0 * h_sys
    return out


def _state_task(args):
    spec, stream, n_fragments = args
    state = sample_branching_state(spec, stream.substream(0))
    return state_pip(state, n_fragments, stream.substream(1)), system_entropy(state)


def exact_pip(
    spec: UniverseSpec,
    n_states: int = DEFAULT_N_STATES,
    n_fragments: int = DEFAULT_N_FRAGMENTS,
    rng: qmath.RngStream | None = None,
    workers: int = 1,
) -> Pip:
    """Ensemble PIP over sampled branching states.

    State ``i`` comes from ``rng.substream(i, 0)``; its fragments from
    ``rng.substream(i, 1, m)``. ``i_std`` is the spread across states of the
    per-state fragment average.
    """
    if spec.n_env > MAX_N_ENV:
        raise GuardError(f"n_env={spec.n_env} exceeds guard {MAX_N_ENV}")
    if n_states < 1 or n_fragments < 1:
        raise InvalidInputError("n_states and n_fragments must be >= 1")
    rng = rng if rng is not None else qmath.RngStream(0)
    tasks = [(spec, rng.substream(i), n_fragments) for i in range(n_states)]
    results = ordered_map(_state_task, tasks, workers=workers)
    curves = np.array([r[0] for r in results])
    h = np.array([r[1] for r in results])
    n = spec.n_env
    return Pip(
        n_env=n,
        i_mean=curves.mean(axis=0),
        i_std=curves.std(axis=0, ddof=1) if n_states > 1 else np.zeros(n + 1),
        samples=np.full(n + 1, n_states),
        h_sys=float(h.mean()),
        label=f"branching {spec.initial_state} DS={spec.d_sys} DE={spec.d_env} N={n}",
        meta={"n_fragments": n_fragments},
    )
