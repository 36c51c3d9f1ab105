"""Closed-form approximations for branching-state entropies, PIPs and
specific redundancy, plus the statistics of Haar overlap decoherence
factors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qmath
from .errors import ConvergenceError, InvalidInputError
from .haar_ensemble import UniverseSpec

H_SERIES_TOL = 1e-10
H_SERIES_MAX_DIAGONALS = 100_000
SPECTRUM_ATOL = 1e-9


# ---------------------------------------------------------------------------
# the h(rho0) series
# ---------------------------------------------------------------------------

def _support(spectrum) -> np.ndarray:
    lam = np.asarray(spectrum, dtype=float).ravel()
    if lam.size == 0 or lam.min() < -SPECTRUM_ATOL:
        raise InvalidInputError("spectrum must be nonempty and nonnegative")
    if abs(lam.sum() - 1.0) > SPECTRUM_ATOL:
        raise InvalidInputError(f"spectrum sums to {lam.sum()!r}, expected 1")
    lam = lam[lam > 0.0]
    return lam / lam.sum()


def h_series(spectrum, tol: float = H_SERIES_TOL, max_diagonals: int = H_SERIES_MAX_DIAGONALS) -> float:
    """``h = sum_{n,p>=0} a_n a_p / (n+p+1)`` with ``a_p = sum_i l_i (1-l_i)^p``.

    Summed along anti-diagonals ``s = n+p``. Writing
    ``S_s(i,j) = sum_{p=0}^{s} b_i^p b_j^(s-p)`` with ``b = 1 - l``, diagonal
    ``s`` contributes ``sum_ij l_i l_j S_s(i,j) / (s+1)``. Zero eigenvalues
    are dropped first. Summation stops once the bound on the remaining tail,
    ``sum_ij l_i l_j max(b_i,b_j)^(s+1) / (1 - max(b_i,b_j))``, is below
    ``tol``; that makes ``tol`` an absolute error bound.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    lam = _support(spectrum)
    if lam.size == 1:
        return 1.0
    b = 1.0 - lam
    w = np.outer(lam, lam)
    b_max = np.maximum.outer(b, b)
    tail_w = w / (1.0 - b_max)
    bi = b[:, None]
    bj = b[None, :]
    s_mat = np.ones_like(w)  # S_0
    bi_pow = np.ones_like(bi)
    bm_pow = np.ones_like(b_max)
    total = 0.0
    for s in range(max_diagonals):
        total += float(np.sum(w * s_mat)) / (s + 1)
        bm_pow = bm_pow * b_max
        if float(np.sum(tail_w * bm_pow)) < tol:
            return total
        bi_pow = bi_pow * bi
        s_mat = bj * s_mat + bi_pow
    raise ConvergenceError(f"h series did not reach tol={tol} within {max_diagonals} anti-diagonals")


def h_closed_form(spectrum) -> float:
    """Resummed ``h``: ``sum_ij l_i l_j (ln l_i - ln l_j)/(l_i - l_j)``, with
    the ``i = j`` (and equal-eigenvalue) terms read as ``l_i``."""
    lam = _support(spectrum)
    li = lam[:, None]
    lj = lam[None, :]
    diff = li - lj
    logdiff = np.log(li) - np.log(lj)
    close = np.abs(diff) <= 1e-8 * np.maximum(li, lj)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.where(close, 2.0 / (li + lj), logdiff / np.where(close, 1.0, diff))
    return float(np.sum(li * lj * kern))


# ---------------------------------------------------------------------------
# entropy and PIP approximations
# ---------------------------------------------------------------------------

def approx_entropy(h0: float, mean_gamma_sq: float) -> float:
    """``H0 - (g/2)(e^H0 - 1)`` with ``g`` the mean squared decoherence factor.

    Only meaningful for small ``g``; the result is not clamped.
    """
    if h0 < 0 or not 0.0 <= mean_gamma_sq <= 1.0:
        raise InvalidInputError("need h0 >= 0 and 0 <= mean_gamma_sq <= 1")
    return h0 - 0.5 * mean_gamma_sq * math.expm1(h0)


@dataclass
class TheoryCurve:
    """Approximate PIP: ``i_approx[m]`` for ``m = 0..n_env`` (nats).

    ``valid[m]`` marks fragments on the plateau side of both linear
    regimes, ``min(m, N-m) ln d_env >= H0``.
    """

    n_env: int
    i_approx: np.ndarray
    valid: np.ndarray
    h0: float

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.n_env + 1)


def approx_pip(spec: UniverseSpec, h0: float) -> TheoryCurve:
    """``I(m) ~ H0 - (e^H0 - 1)/2 (D_E^-m - D_E^-(N-m))``.

    Obtained from the fragment and system-plus-fragment entropies with mean
    squared decoherence factors ``D_E^-m`` and ``D_E^-(N-m)``; the
    ``D_E^-N`` correction to ``H_S`` is dropped. Odd about ``m = N/2``.
    """
    n = spec.n_env
    m = np.arange(n + 1)
    ln_de = math.log(spec.d_env)
    diff = np.exp(-m * ln_de) - np.exp(-(n - m) * ln_de)
    i_approx = h0 - 0.5 * math.expm1(h0) * diff
    valid = np.minimum(m, n - m) * ln_de >= h0
    return TheoryCurve(n_env=n, i_approx=i_approx, valid=valid, h0=h0)


def exact_entropy_correction(spectrum, gamma) -> float:
    """``H(rho) - H(rho0)`` where ``rho_ij = sqrt(l_i l_j) gamma_ij`` and
    ``rho0 = diag(l)``, by direct diagonalization."""
    lam = np.asarray(spectrum, dtype=float).ravel()
    g = _check_gamma(gamma, lam.size)
    s = np.sqrt(np.clip(lam, 0.0, None))
    rho = s[:, None] * s[None, :] * g
    return qmath.entropy_from_spectrum(np.linalg.eigvalsh(rho)) - qmath.entropy_from_spectrum(lam)


def _check_gamma(gamma, d):
    g = np.asarray(gamma, dtype=complex)
    if g.shape != (d, d):
        raise InvalidInputError(f"gamma must be {d}x{d}")
    qmath.check_hermitian(g, atol=1e-12)
    if np.max(np.abs(np.diag(g) - 1.0)) > 1e-12:
        raise InvalidInputError("gamma needs unit diagonal")
    return g


def mean_offdiag_gamma_sq(gamma) -> float:
    g = np.asarray(gamma)
    d = g.shape[0]
    off = ~np.eye(d, dtype=bool)
    return float(np.mean(np.abs(g[off]) ** 2))


def entropy_correction_leading(spectrum, gamma, tol: float = H_SERIES_TOL) -> float:
    """Leading-order ``H(rho) - H(rho0)``: ``-(g/2)(h(rho0) - 1)`` with ``g``
    the mean of ``|gamma_ij|^2`` over ``i != j`` and ``h`` from ``h_series``."""
    lam = np.asarray(spectrum, dtype=float).ravel()
    gsq = mean_offdiag_gamma_sq(_check_gamma(gamma, lam.size))
    if gsq == 0.0:
        return 0.0
    return -0.5 * gsq * (h_series(lam, tol=tol) - 1.0)


# ---------------------------------------------------------------------------
# decoherence-factor statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DFactorStats:
    """Mean and standard deviation of ``d = -ln|<psi|psi'>|`` for independent
    Haar states of dimension ``d_env``."""

    d_env: int
    mean_d: float
    std_d: float

    @property
    def var_d(self) -> float:
        return self.std_d ** 2


def d_factor_stats(d_env: int) -> DFactorStats:
    """``mean = (psi(D) + gamma_EM)/2``, ``var = pi^2/24 - psi_1(D)/4``."""
    _check_d_env(d_env)
    mean = 0.5 * (qmath.digamma(d_env) + qmath.EULER_GAMMA)
    var = math.pi ** 2 / 24.0 - 0.25 * qmath.trigamma(d_env)
    return DFactorStats(d_env=int(d_env), mean_d=mean, std_d=math.sqrt(var))


def _check_d_env(d_env):
    if int(d_env) != d_env or d_env < 2:
        raise InvalidInputError("d_env must be an integer >= 2")


def pdf_gamma(gamma, d_env: int):
    """Density of ``|<psi|psi'>|`` on ``[0, 1]``: ``2(D-1) g (1-g^2)^(D-2)``."""
    _check_d_env(d_env)
    g = np.asarray(gamma, dtype=float)
    if np.any((g < 0) | (g > 1)):
        raise InvalidInputError("gamma must lie in [0, 1]")
    out = 2.0 * (d_env - 1) * g * (1.0 - g * g) ** (d_env - 2)
    return float(out) if out.ndim == 0 else out


def cdf_gamma(gamma, d_env: int):
    _check_d_env(d_env)
    g = np.asarray(gamma, dtype=float)
    out = 1.0 - (1.0 - np.clip(g, 0.0, 1.0) ** 2) ** (d_env - 1)
    return float(out) if out.ndim == 0 else out


def pdf_d(d, d_env: int):
    """Density of ``d = -ln gamma`` on ``[0, inf)``: ``2(D-1) e^-2d (1-e^-2d)^(D-2)``."""
    _check_d_env(d_env)
    x = np.asarray(d, dtype=float)
    if np.any(x < 0):
        raise InvalidInputError("d must be >= 0")
    e = np.exp(-2.0 * x)
    out = 2.0 * (d_env - 1) * e * (-np.expm1(-2.0 * x)) ** (d_env - 2)
    return float(out) if out.ndim == 0 else out


def sample_gamma(d_env: int, rng, size=None):
    """Inverse-CDF draws ``gamma = sqrt(1 - u^(1/(D-1)))``."""
    _check_d_env(d_env)
    u = qmath.as_generator(rng).random(size)
    return np.sqrt(1.0 - u ** (1.0 / (d_env - 1)))


def sample_d(d_env: int, rng, size=None):
    """Draws of ``d = -ln gamma``, i.e. ``-ln(1 - u^(1/(D-1)))/2``."""
    _check_d_env(d_env)
    u = qmath.as_generator(rng).random(size)
    return -0.5 * np.log1p(-(u ** (1.0 / (d_env - 1))))


# ---------------------------------------------------------------------------
# fragment size and specific redundancy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RedundancyEstimate:
    """Random-walk estimate of the mean sufficient fragment size ``m_bar``
    and specific redundancy ``r = (1 - delta)/m_bar``.

    ``degenerate`` is set when ``2 delta H_S >= D_S - 1``: the threshold
    decoherence ``d_delta`` is not positive, so a single subenvironment
    suffices and ``m_bar = 1``.
    """

    m_bar: float
    r_delta: float
    d_delta: float
    degenerate: bool


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta!r}")


def redundancy_estimate(d_sys: int, d_env: int, delta: float, h_sys: float | None = None) -> RedundancyEstimate:
    """``m_bar = d_delta/d_bar + Dd^2/(2 d_bar^2) + 1/2`` with
    ``d_delta = [ln(D_S - 1) - ln(2 delta H_S)]/2`` and ``H_S`` in nats
    (defaults to ``ln D_S``)."""
    _check_delta(delta)
    if d_sys < 2:
        raise InvalidInputError("d_sys must be >= 2")
    if h_sys is None:
        h_sys = math.log(d_sys)
    if h_sys <= 0:
        raise InvalidInputError("h_sys must be positive")
    st = d_factor_stats(d_env)
    d_delta = 0.5 * (math.log(d_sys - 1) - math.log(2.0 * delta * h_sys))
    if d_delta <= 0.0:
        return RedundancyEstimate(m_bar=1.0, r_delta=1.0 - delta, d_delta=d_delta, degenerate=True)
    dbar, var = st.mean_d, st.var_d
    m_bar = d_delta / dbar + var / (2.0 * dbar ** 2) + 0.5
    r = 2.0 * dbar ** 2 * (1.0 - delta) / (var + dbar ** 2 + 2.0 * dbar * d_delta)
    return RedundancyEstimate(m_bar=m_bar, r_delta=r, d_delta=d_delta, degenerate=False)


def mean_fragment_size(d_sys: int, d_env: int, delta: float, h_sys: float | None = None) -> float:
    return redundancy_estimate(d_sys, d_env, delta, h_sys).m_bar


def approx_specific_redundancy(d_sys: int, d_env: int, delta: float, h_sys: float | None = None) -> float:
    return redundancy_estimate(d_sys, d_env, delta, h_sys).r_delta


def thumbnail_specific_redundancy(d_sys: int, d_env: int, delta: float) -> float:
    """Rule of thumb ``ln D_E / (ln D_S - ln delta)``."""
    _check_delta(delta)
    return math.log(d_env) / (math.log(d_sys) - math.log(delta))
