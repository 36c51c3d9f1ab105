"""Command-line experiment runner.

Settings come from built-in defaults, then ``QDARWIN_SEED``, then an
optional JSON config file (``--config``), then command-line flags. The
effective configuration is written next to the outputs so a run can be
replayed with ``--config <prefix>.config.json``.

Exit codes: 0 ok, 1 I/O failure, 2 invalid configuration, 3 size guard,
4 numerical failure, 5 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _svg, branching, haar_ensemble, qmath, redundancy, theory, validation
from ._pool import resolve_workers
from .errors import GuardError, InvalidInputError, NumericalError
from .haar_ensemble import UniverseSpec

COMMANDS = (
    "haar-pip",
    "branch-pip",
    "spip",
    "redundancy",
    "spec-r-sweep",
    "theory-overlay",
    "dfactor-stats",
    "validate",
)
SEED_ENV = "QDARWIN_SEED"
PIP_COLUMNS = ("m", "i_mean", "i_std", "n_samples", "units")
REDUNDANCY_COLUMNS = ("delta", "n_delta", "r_delta", "m_delta", "specific_r", "samples")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_GUARD, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3, 4, 5


@dataclass
class ExperimentConfig:
    command: str = "branch-pip"
    universe: dict = field(default_factory=lambda: {"d_sys": 2, "d_env": 2, "n_env": 8, "initial_state": "hadamard", "amplitudes": None})
    delta: float = 0.1
    n_states: int = branching.DEFAULT_N_STATES
    n_fragments: int = branching.DEFAULT_N_FRAGMENTS
    n_permutations: int = redundancy.DEFAULT_N_PERMUTATIONS
    seed: int = 0
    units: str = "nats"
    output: str = ""
    emit_svg: bool = False
    method: str = "analytic"
    source: str = "branch"
    deltas: list | None = None
    n_envs: list | None = None
    d_envs: list | None = None
    n_samples: int = 100_000
    threshold_mode: str = "plateau"
    checks: list | None = None

    def universe_spec(self) -> UniverseSpec:
        u = dict(self.universe)
        amps = u.get("amplitudes")
        if amps is not None:
            u["amplitudes"] = tuple(complex(a) for a in amps)
        return UniverseSpec(
            int(u["d_sys"]), int(u["d_env"]), int(u["n_env"]), u.get("initial_state", "hadamard"), u.get("amplitudes")
        )

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise InvalidInputError(f"unknown command {self.command!r}")
        for name in ("n_states", "n_fragments", "n_permutations", "n_samples"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if self.units not in ("nats", "bits"):
            raise InvalidInputError("units must be 'nats' or 'bits'")
        if self.method not in ("analytic", "montecarlo"):
            raise InvalidInputError("method must be 'analytic' or 'montecarlo'")
        if self.source not in ("haar", "branch"):
            raise InvalidInputError("source must be 'haar' or 'branch'")
        if self.threshold_mode not in redundancy.THRESHOLD_MODES:
            raise InvalidInputError(f"threshold_mode must be one of {redundancy.THRESHOLD_MODES}")
        for d in [self.delta] + list(self.deltas or []):
            if not 0.0 < float(d) < 1.0:
                raise InvalidInputError(f"delta {d!r} outside (0, 1)")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        self.universe_spec()
        return self

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_UNIVERSE_KEYS = ("d_sys", "d_env", "n_env", "initial_state", "amplitudes")


def _merge(cfg: dict, updates: dict) -> None:
    for key, value in updates.items():
        if key not in _FIELDS:
            raise InvalidInputError(f"unknown config key {key!r}")
        if key == "universe":
            if not isinstance(value, dict) or set(value) - set(_UNIVERSE_KEYS):
                raise InvalidInputError(f"universe must be an object with keys from {_UNIVERSE_KEYS}")
            cfg["universe"] = {**cfg["universe"], **value}
        else:
            cfg[key] = value


def _int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _complex_list(text):
    return [str(complex(t.strip().replace(" ", ""))) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdarwin", description="Redundancy and partial-information experiments for branching and Haar-random universes.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--d-sys", type=int)
    p.add_argument("--d-env", type=int)
    p.add_argument("--n-env", type=int)
    p.add_argument("--initial-state", choices=haar_ensemble.INITIAL_STATES)
    p.add_argument("--amplitudes", type=_complex_list, help="comma-separated amplitudes for --initial-state custom")
    p.add_argument("--delta", type=float)
    p.add_argument("--deltas", type=_float_list, help="comma-separated deficits (redundancy)")
    p.add_argument("--n-states", type=int)
    p.add_argument("--n-fragments", type=int)
    p.add_argument("--n-permutations", type=int)
    p.add_argument("--n-envs", type=_int_list, help="comma-separated environment sizes (spec-r-sweep)")
    p.add_argument("--d-envs", type=_int_list, help="comma-separated subenvironment dimensions (dfactor-stats)")
    p.add_argument("--n-samples", type=int, help="Monte Carlo draws per dimension (dfactor-stats)")
    p.add_argument("--method", choices=("analytic", "montecarlo"), help="haar-pip evaluation")
    p.add_argument("--source", choices=("haar", "branch"), help="ensemble behind spip")
    p.add_argument("--threshold-mode", choices=redundancy.THRESHOLD_MODES)
    p.add_argument("--checks", type=_int_list, help="subset of acceptance checks to run (validate)")
    p.add_argument("--seed", type=int)
    p.add_argument("--units", choices=("nats", "bits"))
    p.add_argument("--output", help="output path prefix")
    svg = p.add_mutually_exclusive_group()
    svg.add_argument("--emit-svg", dest="emit_svg", action="store_const", const=True)
    svg.add_argument("--no-svg", dest="emit_svg", action="store_const", const=False)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    return p


def resolve_config(args: argparse.Namespace, environ=os.environ) -> ExperimentConfig:
    cfg = dataclasses.asdict(ExperimentConfig())
    if environ.get(SEED_ENV):
        try:
            cfg["seed"] = int(environ[SEED_ENV])
        except ValueError as exc:
            raise InvalidInputError(f"{SEED_ENV} must be an integer") from exc
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidInputError("config file must hold a JSON object")
        _merge(cfg, data)
    universe = {k: getattr(args, k) for k in _UNIVERSE_KEYS if getattr(args, k) is not None}
    flags = {
        k: getattr(args, k)
        for k in (
            "delta", "deltas", "n_states", "n_fragments", "n_permutations", "n_envs", "d_envs", "n_samples",
            "method", "source", "threshold_mode", "checks", "seed", "units", "output", "emit_svg",
        )
        if getattr(args, k) is not None
    }
    if universe:
        flags["universe"] = universe
    _merge(cfg, flags)
    cfg["command"] = args.command
    if not cfg["output"]:
        cfg["output"] = f"qdarwin-{args.command}"
    try:
        config = ExperimentConfig(**cfg)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from exc
    return config.validate()


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _scale(units: str) -> float:
    return 1.0 / math.log(2.0) if units == "bits" else 1.0


def pip_rows(pip: haar_ensemble.Pip, units: str = "nats"):
    k = _scale(units)
    for m in range(pip.n_env + 1):
        yield (m, float(pip.i_mean[m]) * k, float(pip.i_std[m]) * k, int(pip.samples[m]), units)


def emit_pip_csv(pip, path, units="nats") -> Path:
    return write_csv(path, PIP_COLUMNS, pip_rows(pip, units) if pip is not None else [])


def redundancy_rows(reports):
    for r in reports:
        yield (r.delta, r.n_delta_mean, r.r_delta, r.m_delta_mean, r.specific_r, r.samples)


def emit_redundancy_csv(reports, path) -> Path:
    return write_csv(path, REDUNDANCY_COLUMNS, redundancy_rows(reports))


def _write_text(path, text) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _pip_for(cfg: ExperimentConfig, spec: UniverseSpec, workers: int, haar: bool) -> haar_ensemble.Pip:
    rng = qmath.RngStream(cfg.seed)
    if haar:
        if cfg.method == "montecarlo":
            return haar_ensemble.haar_pip_montecarlo(spec, cfg.n_states, rng, workers=workers)
        return haar_ensemble.haar_pip_analytic(spec)
    return branching.exact_pip(spec, cfg.n_states, cfg.n_fragments, rng, workers=workers)


def _pip_svg(pip, cfg, extra=(), hlines=None, title=""):
    k = _scale(cfg.units)
    series = [(pip.m, pip.i_mean * k, "mean I(m)")] + list(extra)
    if hlines is None:
        hlines = [(pip.h_sys * k, "H_S")]
    return _svg.line_plot(series, hlines, xlabel="fragment size m", ylabel=f"mutual information ({cfg.units})", title=title or pip.label)


def run(cfg: ExperimentConfig, workers: int | None = None, echo=print) -> int:
    """Execute one configured command; returns the exit status."""
    workers = resolve_workers(workers)
    out = cfg.output
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    written = []
    status = EXIT_OK
    cmd = cfg.command

    if cmd == "validate":
        results = validation.run_all(cfg.checks, echo=echo)
        passed = sum(r.passed for r in results)
        echo(f"{passed}/{len(results)} checks passed")
        written.append(write_csv(f"{out}.csv", ("check", "name", "passed", "seconds", "detail"),
                                 ((r.number, r.name, r.passed, round(r.seconds, 3), r.detail) for r in results)))
        status = EXIT_OK if passed == len(results) else EXIT_VALIDATION

    elif cmd == "dfactor-stats":
        rows = []
        for de in cfg.d_envs or [2, 3, 4, 5, 6, 8]:
            st = theory.d_factor_stats(de)
            d = theory.sample_d(de, qmath.RngStream(cfg.seed, (de,)), size=cfg.n_samples)
            rows.append((de, st.mean_d, st.std_d, float(d.mean()), float(d.std(ddof=1)), cfg.n_samples))
        written.append(write_csv(f"{out}.csv", ("d_env", "mean_d", "std_d", "mc_mean_d", "mc_std_d", "samples"), rows))

    else:
        spec = cfg.universe_spec()
        if cmd in ("haar-pip", "branch-pip"):
            pip = _pip_for(cfg, spec, workers, haar=cmd == "haar-pip")
            written.append(emit_pip_csv(pip, f"{out}.csv", cfg.units))
            if cfg.emit_svg:
                written.append(_write_text(f"{out}.svg", _pip_svg(pip, cfg)))

        elif cmd == "spip":
            pip = _pip_for(cfg, spec, workers, haar=cfg.source == "haar")
            sp = redundancy.scaled_pip(pip)
            written.append(write_csv(f"{out}.csv", ("m", "f_cap", "f_info"),
                                     ((m, sp.f_cap[m], sp.f_info[m]) for m in range(pip.n_env + 1))))
            if cfg.emit_svg:
                svg = _svg.line_plot([(sp.f_cap, sp.f_info, "SPIP")], [(0.5, "H_S"), ((1 - cfg.delta) / 2, "threshold")],
                                     xlabel="fraction of environment captured", ylabel="fraction of information",
                                     title=pip.label)
                written.append(_write_text(f"{out}.svg", svg))

        elif cmd == "redundancy":
            deltas = cfg.deltas or [cfg.delta]
            reps = redundancy.ensemble_redundancy(spec, deltas, cfg.n_states, cfg.n_permutations,
                                                  qmath.RngStream(cfg.seed), cfg.threshold_mode, workers)
            written.append(emit_redundancy_csv(reps, f"{out}.csv"))
            for r in reps:
                echo(f"delta={r.delta:g} N_delta={r.n_delta_mean:.3f} R_delta={r.r_display:.3f} specific_r={r.specific_r:.4f}")
            if cfg.emit_svg:
                pip = branching.exact_pip(spec, cfg.n_states, cfg.n_fragments, qmath.RngStream(cfg.seed), workers=workers)
                k = _scale(cfg.units)
                h = [(pip.h_sys * k, "H_S")] + [(r.threshold_nats * k, f"threshold d={r.delta:g}") for r in reps]
                written.append(_write_text(f"{out}.svg", _pip_svg(pip, cfg, hlines=h)))

        elif cmd == "spec-r-sweep":
            n_envs = cfg.n_envs or [16, 32, 64]
            sw = redundancy.specific_redundancy_sweep(spec, n_envs, cfg.delta, cfg.n_states, cfg.n_permutations,
                                                      qmath.RngStream(cfg.seed), cfg.threshold_mode, workers)
            rows = ((n, r.delta, r.n_delta_mean, r.r_delta, r.m_delta_mean, r.specific_r, r.samples)
                    for n, r in zip(sw.n_env, sw.reports))
            written.append(write_csv(f"{out}.csv", ("n_env",) + REDUNDANCY_COLUMNS, rows))
            est = theory.redundancy_estimate(spec.d_sys, spec.d_env, cfg.delta, math.log(spec.d_sys))
            summary = {
                "slope": sw.slope,
                "intercept": sw.intercept,
                "r_squared": sw.r_squared,
                "theory_specific_r": est.r_delta,
                "theory_degenerate": est.degenerate,
                "thumbnail_specific_r": theory.thumbnail_specific_redundancy(spec.d_sys, spec.d_env, cfg.delta),
            }
            written.append(_write_text(f"{out}.summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"))
            echo(f"slope={sw.slope:.4f} R^2={sw.r_squared:.4f} theory={est.r_delta:.4f}")
            if cfg.emit_svg:
                svg = _svg.line_plot([(sw.n_env, sw.r_delta, "R_delta"), (sw.n_env, sw.slope * sw.n_env + sw.intercept, "fit")],
                                     xlabel="number of subenvironments", ylabel="R_delta", title="redundancy vs environment size")
                written.append(_write_text(f"{out}.svg", svg))

        elif cmd == "theory-overlay":
            pip = branching.exact_pip(spec, cfg.n_states, cfg.n_fragments, qmath.RngStream(cfg.seed), workers=workers)
            h0 = branching.amplitudes_for(spec).h0
            approx = theory.approx_pip(spec, h0)
            k = _scale(cfg.units)
            rows = ((m, pip.i_mean[m] * k, pip.i_std[m] * k, approx.i_approx[m] * k, bool(approx.valid[m]), cfg.units)
                    for m in range(spec.n_env + 1))
            written.append(write_csv(f"{out}.csv", ("m", "i_exact", "i_std", "i_theory", "valid", "units"), rows))
            if cfg.emit_svg:
                extra = [(approx.m, approx.i_approx * k, "theory")]
                written.append(_write_text(f"{out}.svg", _pip_svg(pip, cfg, extra=extra)))

    written.append(_write_text(f"{out}.config.json", cfg.to_json()))
    for path in written:
        echo(f"wrote {path}")
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return run(cfg, workers=args.workers)
    except GuardError as exc:
        print(f"qdarwin: size guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InvalidInputError as exc:
        print(f"qdarwin: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"qdarwin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, KeyError) as exc:
        print(f"qdarwin: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"qdarwin: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
