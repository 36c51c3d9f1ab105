"""Self-validation suite: thirteen numbered acceptance checks, each
returning a :class:`CheckResult`. Used by ``qdarwin validate`` and the
test suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import branching, haar_ensemble, qmath, redundancy, theory
from .haar_ensemble import UniverseSpec

SEED = 20_240_611


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number: int, name: str):
    def wrap(fn: Callable[[], tuple[bool, str, dict]]):
        def run() -> CheckResult:
            t0 = time.perf_counter()
            ok, detail, data = fn()
            return CheckResult(number, name, bool(ok), detail, time.perf_counter() - t0, data)

        run.number = number
        run.check_name = name
        return run

    return wrap


# 1 ---------------------------------------------------------------------------
@_timed(1, "Page formula vs Haar Monte Carlo")
def check_page_montecarlo():
    spec = UniverseSpec(2, 2, 6)
    t0 = time.perf_counter()
    mc = haar_ensemble.haar_pip_montecarlo(spec, 2000, qmath.RngStream(SEED, (1,)))
    elapsed = time.perf_counter() - t0
    an = haar_ensemble.haar_pip_analytic(spec)
    se = mc.std_error
    z = np.where(se > 0, np.abs(mc.i_mean - an.i_mean) / np.where(se > 0, se, 1.0), 0.0)
    ok = bool(np.all(z <= 4.0)) and np.abs(mc.i_mean[0]) == 0.0 and elapsed <= 120.0
    return ok, f"max |z| = {z.max():.2f} (limit 4), MC time {elapsed:.1f}s", {"z": z}


# 2 ---------------------------------------------------------------------------
@_timed(2, "uniform-ensemble encoding profile")
def check_encoding_profile():
    pip = haar_ensemble.haar_pip_analytic(UniverseSpec(2, 2, 12))
    h = pip.h_sys
    i4, i8 = pip.i_mean[4], pip.i_mean[8]
    anti = abs(i4 + i8 - 2.0 * h)
    ok = i4 < 0.05 * h and i8 > 1.95 * h - i4 and i8 > 1.95 * h and anti <= 1e-9
    return ok, f"I(4)/H = {i4 / h:.4f}, I(8)/H = {i8 / h:.4f}, antisymmetry error {anti:.1e}", {}


# 3 ---------------------------------------------------------------------------
def _random_partition(n: int, gen: np.random.Generator) -> list[list[int]]:
    order = gen.permutation(n)
    cuts = np.sort(gen.choice(np.arange(1, n), size=gen.integers(1, n), replace=False)) if n > 1 else []
    return [list(p) for p in np.split(order, cuts)]


@_timed(3, "mutual information symmetry theorem")
def check_symmetry_theorem():
    gen = qmath.RngStream(SEED, (3,)).generator()
    worst_sum = 0.0
    violations = 0
    dims_choices = [(2, 2, 6), (3, 2, 5), (2, 3, 4), (4, 2, 4), (2, 2, 10)]
    for k in range(100):
        spec = UniverseSpec(*dims_choices[k % len(dims_choices)])
        st = branching.sample_branching_state(spec, qmath.RngStream(SEED, (3, 1, k)))
        h = branching.system_entropy(st)
        n = spec.n_env
        f = list(gen.choice(n, size=gen.integers(1, n), replace=False))
        fbar = [i for i in range(n) if i not in f]
        worst_sum = max(worst_sum, abs(branching.mutual_information(st, f) + branching.mutual_information(st, fbar) - 2 * h))
        big = sum(branching.mutual_information(st, p) > h + 1e-9 for p in _random_partition(n, gen))
        violations += big > 1
    for k in range(100):
        ds, de, n = dims_choices[k % 4]
        dims = [ds] + [de] * n
        psi = qmath.haar_state(math.prod(dims), qmath.RngStream(SEED, (3, 2, k)))
        h = qmath.entropy_of_bipartite_cut(psi, dims, [0])

        def info(frag):
            env = [i + 1 for i in frag]
            return h + qmath.entropy_of_bipartite_cut(psi, dims, env) - qmath.entropy_of_bipartite_cut(psi, dims, [0] + env)

        f = list(gen.choice(n, size=gen.integers(1, n), replace=False))
        fbar = [i for i in range(n) if i not in f]
        worst_sum = max(worst_sum, abs(info(f) + info(fbar) - 2 * h))
        big = sum(info(p) > h + 1e-9 for p in _random_partition(n, gen))
        violations += big > 1
    ok = worst_sum <= 1e-8 and violations == 0
    return ok, f"max |I(F)+I(Fbar)-2H_S| = {worst_sum:.1e}, families with >1 fragment above H_S: {violations}", {}


# 4 ---------------------------------------------------------------------------
@_timed(4, "decoherence factors vs dense partial trace")
def check_oracle_equivalence():
    gen = qmath.RngStream(SEED, (4,)).generator()
    worst = 0.0
    for k in range(50):
        ds = int(gen.integers(2, 5))
        de = int(gen.integers(2, 4))
        n_max = int(math.floor(math.log(4096 / ds) / math.log(de) + 1e-12))
        n = int(gen.integers(1, n_max + 1))
        spec = UniverseSpec(ds, de, n)
        amps = branching.SystemAmplitudes.normalized(gen.standard_normal(ds) + 1j * gen.standard_normal(ds))
        vecs = branching.sample_conditional_states(spec, qmath.RngStream(SEED, (4, k)))
        st = branching.BranchingState.from_vectors(amps, vecs)
        psi = branching.dense_state(amps, vecs)
        dims = [ds] + [de] * n
        f = sorted(gen.choice(n, size=gen.integers(1, n + 1), replace=False).tolist())
        env = [i + 1 for i in f]
        pairs = [
            (qmath.von_neumann_entropy(branching.reduced_density(st, "system")), qmath.entropy_of_bipartite_cut(psi, dims, [0])),
            (qmath.von_neumann_entropy(branching.reduced_density(st, "fragment", f)), qmath.entropy_of_bipartite_cut(psi, dims, env)),
            (
                qmath.von_neumann_entropy(branching.reduced_density(st, "system_plus_fragment", f)),
                qmath.entropy_of_bipartite_cut(psi, dims, [0] + env),
            ),
        ]
        worst = max(worst, max(abs(a - b) for a, b in pairs))
        rho_dense = qmath.partial_trace(psi, dims, [0])
        worst = max(worst, float(np.linalg.norm(rho_dense - branching.reduced_density(st, "system"))))
    return worst <= 1e-8, f"max entropy / Frobenius discrepancy {worst:.1e} (limit 1e-8)", {}


# 5 ---------------------------------------------------------------------------
@_timed(5, "GHZ exactness")
def check_ghz():
    worst = 0.0
    counts_ok = True
    for ds, de, n in [(2, 2, 8), (3, 4, 6), (2, 2, 16)]:
        spec = UniverseSpec(ds, de, n, "ghz")
        st = branching.ghz_branching_state(spec)
        h0 = st.amplitudes.h0
        for m in range(1, n):
            worst = max(worst, abs(branching.mutual_information(st, range(m)) - h0))
        worst = max(worst, abs(branching.mutual_information(st, range(n)) - 2 * h0))
        for delta in (0.01, 0.1, 0.25):
            rep = redundancy.report_for_state(st, delta, 16, qmath.RngStream(SEED, (5,)))
            counts_ok &= rep.n_delta_mean == n
    return worst <= 1e-12 and counts_ok, f"max |I - exact| = {worst:.1e}, N_delta = N: {counts_ok}", {}


# 6 ---------------------------------------------------------------------------
@_timed(6, "classical plateau and theory overlay")
def check_plateau():
    spec = UniverseSpec(2, 2, 32)
    pip = branching.exact_pip(spec, 200, 32, qmath.RngStream(SEED, (6,)))
    rel = abs(pip.i_mean[16] - math.log(2)) / math.log(2)
    approx = theory.approx_pip(spec, math.log(2))
    gap = float(np.max(np.abs(approx.i_approx[8:25] - pip.i_mean[8:25])))
    return rel <= 0.01 and gap <= 0.02, f"I(16) off ln 2 by {rel:.2%}, max theory gap on 8..24 = {gap:.4f} nats", {}


# 7 ---------------------------------------------------------------------------
TABLE_D = {
    2: (Fraction(1, 2), 1 / 2),
    3: (Fraction(3, 4), math.sqrt(5) / 4),
    4: (Fraction(11, 12), 7 / 12),
    5: (Fraction(25, 24), math.sqrt(205) / 24),
    6: (Fraction(137, 120), math.sqrt(5269) / 120),
    8: (Fraction(363, 280), math.sqrt(266681) / 840),
}


@_timed(7, "decoherence-factor table and sampled moments")
def check_d_table():
    worst = 0.0
    worst_z = 0.0
    for de, (mean, std) in TABLE_D.items():
        st = theory.d_factor_stats(de)
        worst = max(worst, abs(st.mean_d - float(mean)), abs(st.std_d - std))
        d = theory.sample_d(de, qmath.RngStream(SEED, (7, de)), size=1_000_000)
        n = d.size
        z_mean = abs(d.mean() - st.mean_d) / (d.std(ddof=1) / math.sqrt(n))
        dev = d - d.mean()
        var_se = math.sqrt(max(np.mean(dev ** 4) - np.var(dev) ** 2, 0.0) / n)
        z_var = abs(d.var(ddof=1) - st.var_d) / var_se
        worst_z = max(worst_z, z_mean, z_var)
    return worst <= 1e-12 and worst_z <= 4.0, f"max table error {worst:.1e}, max moment |z| = {worst_z:.2f}", {}


# 8 ---------------------------------------------------------------------------
@_timed(8, "redundancy grows linearly with N")
def check_redundancy_scaling():
    rng = qmath.RngStream(SEED, (8,))
    sweeps = {
        de: redundancy.specific_redundancy_sweep(UniverseSpec(5, de, 16), [16, 32, 64], 0.1, 20, 32, rng.substream(de))
        for de in (5, 2, 8)
    }
    r2 = sweeps[5].r_squared
    ok = r2 >= 0.98 and sweeps[8].slope > sweeps[2].slope
    return ok, (
        f"R^2 = {r2:.4f} (D_E=5), slope D_E=2: {sweeps[2].slope:.3f}, D_E=8: {sweeps[8].slope:.3f}"
    ), {"sweeps": sweeps}


# 9 ---------------------------------------------------------------------------
@_timed(9, "specific redundancy vs random-walk estimate")
def check_specific_redundancy_theory():
    rng = qmath.RngStream(SEED, (9,))
    delta = 0.01
    parts = []
    ok = True
    for ds, de in [(2, 2), (2, 4), (16, 2), (16, 4)]:
        sw = redundancy.specific_redundancy_sweep(UniverseSpec(ds, de, 32), [32, 64, 128], delta, 20, 32, rng.substream(ds, de))
        pred = theory.approx_specific_redundancy(ds, de, delta, math.log(ds))
        if ds == 2:
            rel = abs(sw.slope - pred) / pred
            ok &= rel <= 0.2
            parts.append(f"DS=2 DE={de}: {sw.slope:.3f} vs {pred:.3f} ({rel:.1%})")
        else:
            ok &= pred > sw.slope
            parts.append(f"DS=16 DE={de}: theory {pred:.3f} > {sw.slope:.3f}")
    return ok, "; ".join(parts), {}


# 10 --------------------------------------------------------------------------
@_timed(10, "redundancy insensitive to delta")
def check_delta_insensitivity():
    deltas = [0.02, 0.05, 0.1, 0.15, 0.2, 0.25]
    reps = redundancy.ensemble_redundancy(UniverseSpec(5, 5, 64), deltas, 20, 32, qmath.RngStream(SEED, (10,)))
    r = np.array([rep.r_delta for rep in reps])
    ratio = r.max() / r.min() if r.min() > 0 else math.inf
    return ratio < 2.0, f"R over delta in [0.02, 0.25]: {r.min():.2f}..{r.max():.2f}, ratio {ratio:.3f}", {}


# 11 --------------------------------------------------------------------------
@_timed(11, "thermal D_S=16 vs Hadamard D_S=4")
def check_thermal_equivalence():
    n = 16
    plateau = slice(n // 4, 3 * n // 4 + 1)
    worst = 0.0
    rng = qmath.RngStream(SEED, (11,))
    for de in (2, 3):
        pt = branching.exact_pip(UniverseSpec(16, de, n, "thermal"), 200, 32, rng.substream(de, 0))
        ph = branching.exact_pip(UniverseSpec(4, de, n, "hadamard"), 200, 32, rng.substream(de, 1))
        worst = max(worst, float(np.max(np.abs(pt.i_mean[plateau] - ph.i_mean[plateau]))))
    amps = branching.thermal_amplitudes(16)
    bits = amps.h0 / math.log(2)
    lam = np.array([2.0 ** -k for k in range(16)])
    lam /= lam.sum()
    exact_bits = float(-np.sum(lam * np.log2(lam)))
    ok = worst <= 0.05 and abs(bits - exact_bits) <= 1e-3 and bits < 2.0
    return ok, f"max plateau gap (m = 4..12) {worst:.4f} nats, thermal entropy {bits:.5f} bits", {}


# 12 --------------------------------------------------------------------------
def entropy_scaling_errors(d_sys: int, gammas=(0.1, 0.05, 0.025)) -> list[float]:
    """``|exact - leading|`` for uniform spectra with every off-diagonal
    decoherence factor equal to ``g``."""
    lam = np.full(d_sys, 1.0 / d_sys)
    out = []
    for g in gammas:
        gm = np.full((d_sys, d_sys), g, dtype=complex)
        np.fill_diagonal(gm, 1.0)
        out.append(abs(theory.exact_entropy_correction(lam, gm) - theory.entropy_correction_leading(lam, gm)))
    return out


@_timed(12, "leading-order entropy correction scaling")
def check_entropy_scaling():
    ok = True
    parts = []
    for ds in (2, 4):
        err = entropy_scaling_errors(ds)
        ratios = [err[i] / err[i + 1] for i in range(len(err) - 1)]
        ok &= all(r >= 8.0 for r in ratios)
        parts.append(f"DS={ds} halving ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    return ok, "; ".join(parts) + " (need >= 8)", {}


# 13 --------------------------------------------------------------------------
@_timed(13, "h series for uniform spectra")
def check_h_series():
    worst = max(abs(theory.h_series(np.full(d, 1.0 / d)) - d) for d in (2, 4, 16, 64))
    return worst <= 1e-8, f"max |h - D| = {worst:.1e}", {}


CHECKS = [
    check_page_montecarlo,
    check_encoding_profile,
    check_symmetry_theorem,
    check_oracle_equivalence,
    check_ghz,
    check_plateau,
    check_d_table,
    check_redundancy_scaling,
    check_specific_redundancy_theory,
    check_delta_insensitivity,
    check_thermal_equivalence,
    check_entropy_scaling,
    check_h_series,
]


def run_all(numbers=None, echo=None) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        if numbers and check.number not in numbers:
            continue
        res = check()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
