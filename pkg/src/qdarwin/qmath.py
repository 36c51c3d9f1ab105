"""Numerical kernel: Hermitian eigenproblems, entropies, partial traces,
Haar sampling, digamma/trigamma and seedable random substreams.

All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, InvalidInputError, NumericalError

EULER_GAMMA = 0.57721566490153286060651209

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-10
NEGATIVE_EIG_CLAMP = 1e-10
JACOBI_RTOL = 1e-13

_SEED_MASK = (1 << 64) - 1


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Counter-based random substream identified by ``(seed, stream_id)``.

    ``stream_id`` is a tuple of non-negative integers, so substreams nest:
    ``RngStream(7).substream(3, 1)`` is stream ``(3, 1)`` of seed 7. The
    stream is realised as a Philox generator keyed by a ``SeedSequence``;
    equal ids give bitwise-identical draws no matter which process or in
    which order they are evaluated.
    """

    seed: int
    stream_id: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _SEED_MASK)
        ids = tuple(int(i) for i in self.stream_id)
        if any(i < 0 for i in ids):
            raise InvalidInputError("stream ids must be non-negative")
        object.__setattr__(self, "stream_id", ids)

    def substream(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidInputError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Hermitian eigenproblems
# ---------------------------------------------------------------------------

def check_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise InvalidInputError(f"expected square matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) if m.size else 0.0
    if dev > atol:
        raise InvalidInputError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return m


def jacobi_eigh(a: np.ndarray, rtol: float = JACOBI_RTOL, max_sweeps: int = 100):
    """Cyclic Jacobi diagonalisation of a complex Hermitian matrix.

    Returns ``(w, v)`` with ``a @ v[:, k] == w[k] * v[:, k]`` and ``w``
    unsorted. Sweeps stop once the off-diagonal Frobenius norm drops below
    ``rtol * ||a||_F``.
    """
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return a.diagonal().real.copy(), v
    target = rtol * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off < target:
            return a.diagonal().real.copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                b = abs(apq)
                if b < 1e-300:
                    continue
                phase = apq / b
                tau = (a[q, q].real - a[p, p].real) / (2.0 * b)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ph = np.conj(phase)
                # columns: A <- A G, G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                colp = a[:, p].copy()
                colq = a[:, q]
                a[:, p] = c * colp - s * ph * colq
                a[:, q] = s * colp + c * ph * colq
                # rows: A <- G^H A
                rowp = a[p, :].copy()
                rowq = a[q, :]
                a[p, :] = c * rowp - s * phase * rowq
                a[q, :] = s * rowp + c * phase * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * ph * vq
                v[:, q] = s * vp + c * ph * vq
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def hermitian_eigh(m: np.ndarray, method: str = "lapack"):
    """Eigenvalues (descending) and matching eigenvector columns."""
    m = check_hermitian(m)
    if method == "jacobi":
        w, v = jacobi_eigh(m)
    elif method == "lapack":
        w, v = np.linalg.eigh(m)
    else:
        raise InvalidInputError(f"unknown eigen method {method!r}")
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def hermitian_eigenvalues(m: np.ndarray, method: str = "lapack") -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, sorted descending.

    ``method`` is ``"lapack"`` (numpy) or ``"jacobi"`` (cyclic Jacobi).
    """
    m = check_hermitian(m)
    if method == "jacobi":
        w, _ = jacobi_eigh(m)
    elif method == "lapack":
        w = np.linalg.eigvalsh(m)
    else:
        raise InvalidInputError(f"unknown eigen method {method!r}")
    return np.sort(w)[::-1]


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

def entropy_from_spectrum(w: np.ndarray, axis: int = -1) -> np.ndarray | float:
    """Shannon entropy (nats) of eigenvalue arrays along ``axis``.

    Eigenvalues in ``[-1e-10, 0]`` are clamped to zero; anything more
    negative raises ``NumericalError``.
    """
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -NEGATIVE_EIG_CLAMP:
        raise NumericalError(f"negative eigenvalue {w.min():.3e} beyond clamp")
    w = np.clip(w, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0.0, -w * np.log(np.where(w > 0.0, w, 1.0)), 0.0)
    out = terms.sum(axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def entropies(stack: np.ndarray) -> np.ndarray:
    """Von Neumann entropies of a stack of Hermitian matrices ``(..., d, d)``."""
    return entropy_from_spectrum(np.linalg.eigvalsh(stack))


def check_density_matrix(m: np.ndarray) -> np.ndarray:
    m = check_hermitian(m)
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_ATOL:
        raise InvalidInputError(f"trace {tr!r} differs from 1")
    return m


def von_neumann_entropy(m: np.ndarray, method: str = "lapack") -> float:
    """``-Tr(rho ln rho)`` in nats."""
    m = check_density_matrix(m)
    return entropy_from_spectrum(hermitian_eigenvalues(m, method=method))


def to_bits(nats):
    return np.asarray(nats) / math.log(2.0) if np.ndim(nats) else nats / math.log(2.0)


# ---------------------------------------------------------------------------
# pure states and partial traces
# ---------------------------------------------------------------------------

def _check_layout(state: np.ndarray, dims: Sequence[int], keep: Sequence[int]):
    state = np.asarray(state, dtype=complex).ravel()
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise InvalidInputError("subsystem dimensions must be positive")
    if math.prod(dims) != state.size:
        raise InvalidInputError(f"product of dims {dims} != state dimension {state.size}")
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(dims):
        raise InvalidInputError(f"invalid subsystem selection {keep}")
    return state, dims, keep


def _bipartite_matrix(state, dims, keep):
    """Reshape ``state`` into a (kept, traced) coefficient matrix."""
    rest = [i for i in range(len(dims)) if i not in keep]
    psi = state.reshape(dims).transpose(keep + rest)
    d_keep = math.prod(dims[i] for i in keep)
    return psi.reshape(d_keep, -1)


def partial_trace(state: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of the subsystems ``keep`` of a pure state.

    Kept subsystems appear in ascending index order in the result.
    """
    state, dims, keep = _check_layout(state, dims, keep)
    m = _bipartite_matrix(state, dims, keep)
    return m @ m.conj().T


def entropy_of_bipartite_cut(state: np.ndarray, dims: Sequence[int], left: Sequence[int]) -> float:
    """Entanglement entropy across the cut ``left | rest`` of a pure state.

    Works on the Gram matrix of whichever side is smaller.
    """
    state, dims, left = _check_layout(state, dims, left)
    if len(left) == len(dims):
        return 0.0
    m = _bipartite_matrix(state, dims, left)
    gram = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.T @ m.conj()
    return entropy_from_spectrum(np.linalg.eigvalsh(gram))


def cut_entropies(states: np.ndarray, dims: Sequence[int], left: Sequence[int]) -> np.ndarray:
    """Batched ``entropy_of_bipartite_cut`` over a stack of states ``(k, D)``."""
    states = np.asarray(states, dtype=complex)
    dims = [int(d) for d in dims]
    left = sorted(set(int(i) for i in left))
    if len(left) == len(dims):
        return np.zeros(states.shape[0])
    rest = [i for i in range(len(dims)) if i not in left]
    k = states.shape[0]
    psi = states.reshape([k] + dims).transpose([0] + [i + 1 for i in left + rest])
    d_left = math.prod(dims[i] for i in left)
    m = psi.reshape(k, d_left, -1)
    if m.shape[1] <= m.shape[2]:
        gram = m @ np.conj(np.swapaxes(m, 1, 2))
    else:
        gram = np.swapaxes(m, 1, 2) @ np.conj(m)
    return entropy_from_spectrum(np.linalg.eigvalsh(gram))


def haar_states(dim: int, count: int, rng) -> np.ndarray:
    """``count`` independent Haar-random unit vectors of dimension ``dim``."""
    if dim < 1:
        raise InvalidInputError("dimension must be >= 1")
    gen = as_generator(rng)
    z = gen.standard_normal((count, dim)) + 1j * gen.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_state(dim: int, rng) -> np.ndarray:
    """One Haar-random pure state (normalised complex Gaussian vector)."""
    return haar_states(dim, 1, rng)[0]


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

# Bernoulli numbers B_2k for the asymptotic series
_B2K = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)
_SHIFT = 12.0


def _digamma_minus_log(x: float) -> float:
    """``psi(x) - ln(x)`` for ``x >= _SHIFT`` by the asymptotic series."""
    inv2 = 1.0 / (x * x)
    acc = 0.0
    p = inv2
    for k, b in enumerate(_B2K, start=1):
        acc += b / (2 * k) * p
        p *= inv2
    return -0.5 / x - acc


def digamma(x: float) -> float:
    """Digamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0:
        raise InvalidInputError("digamma requires x > 0")
    shift = 0.0
    while x < _SHIFT:
        shift -= 1.0 / x
        x += 1.0
    return shift + math.log(x) + _digamma_minus_log(x)


def trigamma(x: float) -> float:
    """Trigamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0:
        raise InvalidInputError("trigamma requires x > 0")
    shift = 0.0
    while x < _SHIFT:
        shift += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    # psi_1(x) ~ 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    acc = inv + 0.5 * inv2
    p = inv2 * inv
    for b in _B2K:
        acc += b * p
        p *= inv2
    return shift + acc


def digamma_difference(big: int, small: int) -> float:
    """``psi(big) - psi(small)`` for positive integers of any size.

    Uses exact integer logarithms so arguments beyond float range work.
    """
    big, small = int(big), int(small)
    if big < 1 or small < 1:
        raise InvalidInputError("arguments must be positive integers")
    if big <= 1 << 50:
        return digamma(big) - digamma(small)

    def corr(n: int) -> float:
        if n < _SHIFT:
            return digamma(n) - math.log(n)
        if n.bit_length() > 1000:
            return 0.0
        return _digamma_minus_log(float(n))

    return (math.log(big) - math.log(small)) + corr(big) - corr(small)
