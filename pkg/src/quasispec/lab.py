"""Experiment orchestration: configs, disk cache, CLI, dataset emission.

Every experiment is described by a single JSON config; CLI flags override
config fields.  Primary outputs are CSV/JSON files with round-trip-exact
(17 significant digit) decimals, plus a manifest echoing the config.  Runs
are deterministic for a fixed config and version: parallel workers only
ever compute independent tasks whose results are assembled in task order.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, intervals
from .cocycle import (EnergyShift, FejerReplace, cocycle_det_identity_check,
                      det_truncated, energy_window, lyapunov_profile,
                      perturbation_profile, restricted_matrix,
                      uniform_upper_check)
from .rotation import ContinuedFraction, Approximant, approximants, cf_expand
from .sampling import SamplingFunction, TrigPolynomial, from_descriptor
from .spectrum import (EmptySpectrumError, SpectrumRecord, convergence_table,
                       holder_fit, l_plus_set, spectrum_rational)
from .subadditive import schrodinger_cocycle, uniform_usc_probe

EXPERIMENT_KINDS = (
    "cf", "spectrum", "lyapunov", "measure-convergence", "holder-fit",
    "butterfly", "furman-check", "perturbation-check", "identity-check",
)

EXPERIMENT_LABELS = {
    "cf": "continued-fraction expansion and approximants",
    "spectrum": "band spectrum of a rational-frequency operator",
    "lyapunov": "Lyapunov-exponent profile over the energy window",
    "measure-convergence": "convergence of rational-approximant spectral measures",
    "holder-fit": "empirical Holder exponent of spectrum motion in frequency",
    "butterfly": "band intervals for all reduced rationals up to q_max",
    "furman-check": "uniform upper bound probe for the subadditive cocycle",
    "perturbation-check": "cocycle perturbation error versus growth bound",
    "identity-check": "transfer product versus truncated determinants",
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    kind: str
    sampling: dict = field(default_factory=lambda: {"kind": "cosine", "lambda": 2.0})
    frequency: dict = field(default_factory=lambda: {"quotients": [1] * 40})
    e_res: float = 1e-3
    theta_grid: int = 0
    k: int = 10_000
    m_theta: int = 10_000
    chi: float = 0.5
    q_min: int = 1
    q_max: int = 89
    energy: Optional[float] = None
    delta: float = 1e-8
    epsilon: float = 0.1
    fejer_degree: int = 64
    perturbation: str = "energy"
    cases: int = 1000
    k_max: int = 300
    seed: int = 20240801
    lyap_points: int = 200
    theta_mode: str = "orbit"
    use_l_plus: bool = False
    out: str = "results"
    cache_dir: Optional[str] = None
    workers: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "kind" not in raw:
            raise ConfigError("config must set 'kind'")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        for name in ("e_res", "chi", "epsilon"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("k", "m_theta", "q_min", "q_max", "cases", "k_max",
                     "lyap_points", "fejer_degree"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.theta_grid < 0 or self.workers < 0:
            raise ConfigError("theta_grid and workers must be >= 0")
        if self.q_min > self.q_max:
            raise ConfigError("q_min must not exceed q_max")
        if self.theta_mode not in ("orbit", "uniform"):
            raise ConfigError("theta_mode must be 'orbit' or 'uniform'")
        if self.perturbation not in ("energy", "fejer"):
            raise ConfigError("perturbation must be 'energy' or 'fejer'")
        if not isinstance(self.sampling, dict) or not isinstance(self.frequency, dict):
            raise ConfigError("sampling and frequency must be JSON objects")
        try:
            from_descriptor(self.sampling)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad sampling descriptor: {exc}") from exc
        try:
            frequency_from_descriptor(self.frequency)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad frequency descriptor: {exc}") from exc


def frequency_from_descriptor(desc: dict) -> ContinuedFraction:
    d = dict(desc)
    if "quotients" in d:
        quots = d.pop("quotients")
        rational = bool(d.pop("rational", False))
        if d:
            raise ConfigError(f"unused frequency fields {sorted(d)}")
        return ContinuedFraction.from_quotients(quots, rational=rational)
    if "value" in d:
        value = float(d.pop("value"))
        max_terms = int(d.pop("max_terms", 64))
        tol = float(d.pop("tol", 1e-12))
        if d:
            raise ConfigError(f"unused frequency fields {sorted(d)}")
        return cf_expand(value, max_terms, tol)
    raise ConfigError("frequency needs 'quotients' or 'value'")


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply key=value strings; dotted keys reach into nested objects and
    values are parsed as JSON with a plain-string fallback."""
    out = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        target = out
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"cannot descend into {part!r} of {key!r}")
        target[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# result cache

def cache_key(parts: dict) -> str:
    payload = json.dumps({"v": __version__, **parts}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def cache_lookup(cache_dir: Optional[str], key: str) -> Optional[dict]:
    if not cache_dir:
        return None
    path = Path(cache_dir) / f"{key}.json"
    if not path.exists():
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"warning: discarding corrupt cache entry {path}: {exc}",
              file=sys.stderr)
        try:
            path.unlink()
        except OSError:
            pass
        return None


def cache_store(cache_dir: Optional[str], key: str, record: dict) -> None:
    if not cache_dir:
        return
    try:
        os.makedirs(cache_dir, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh)
        os.replace(tmp, Path(cache_dir) / f"{key}.json")
    except OSError as exc:
        print(f"warning: cache write failed, continuing uncached: {exc}",
              file=sys.stderr)


def record_to_dict(rec: SpectrumRecord) -> dict:
    return {
        "p": rec.frequency.p,
        "q": rec.frequency.q,
        "index": rec.frequency.index,
        "bands": intervals.to_pairs(rec.bands),
        "e_res": rec.e_res,
        "theta_grid": rec.theta_grid,
        "refined": rec.refined,
    }


def record_from_dict(d: dict) -> SpectrumRecord:
    return SpectrumRecord(
        frequency=Approximant(p=d["p"], q=d["q"], index=d["index"]),
        bands=intervals.from_pairs(d["bands"]),
        e_res=d["e_res"],
        theta_grid=d["theta_grid"],
        refined=d["refined"],
    )


# ---------------------------------------------------------------------------
# parallel task functions (top-level so they pickle)

def _spectrum_task(args: dict) -> dict:
    f = from_descriptor(args["sampling"])
    pq = Approximant(p=args["p"], q=args["q"], index=args["index"])
    rec = spectrum_rational(f, pq, args["e_res"], args["theta_grid"])
    return record_to_dict(rec)


def _lyap_chunk_task(args: dict) -> dict:
    f = from_descriptor(args["sampling"])
    prof = lyapunov_profile(f, args["omega"], np.asarray(args["energies"]),
                            k=args["k"], m_theta=args["m_theta"],
                            mode=args["mode"])
    return {"start": args["start"], "values": prof.values.tolist(),
            "sup": prof.sup_over_theta.tolist()}


def _run_tasks(task_fn, tasks: list[dict], workers: int) -> list[dict]:
    """Run independent tasks, returning results in task order."""
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task_fn, tasks))
    return [task_fn(t) for t in tasks]


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else _fmt(cell) for cell in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# experiment runners

def _resolve_workers(cfg: ExperimentConfig) -> int:
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _cached_spectra(cfg: ExperimentConfig, f: SamplingFunction,
                    apps: list[Approximant], stats: dict) -> dict:
    """Memo dict (p, q, e_res, theta_grid) -> SpectrumRecord, parallel+cached."""
    memo = {}
    todo = []
    for a in apps:
        parts = {"sampling": f.descriptor(), "p": a.p, "q": a.q,
                 "e_res": cfg.e_res, "theta_grid": cfg.theta_grid}
        key = cache_key(parts)
        hit = cache_lookup(cfg.cache_dir, key)
        if hit is not None:
            stats["cache_hits"] += 1
            memo[(a.p, a.q, cfg.e_res, cfg.theta_grid)] = record_from_dict(hit)
        else:
            stats["cache_misses"] += 1
            todo.append((a, key, parts))
    results = _run_tasks(_spectrum_task, [
        {"sampling": f.descriptor(), "p": a.p, "q": a.q, "index": a.index,
         "e_res": cfg.e_res, "theta_grid": cfg.theta_grid}
        for a, _, _ in todo], _resolve_workers(cfg))
    for (a, key, parts), rec_dict in zip(todo, results):
        cache_store(cfg.cache_dir, key, rec_dict)
        memo[(a.p, a.q, cfg.e_res, cfg.theta_grid)] = record_from_dict(rec_dict)
    return memo


def _ladder(cfg: ExperimentConfig, cf: ContinuedFraction) -> list[Approximant]:
    apps = [a for a in approximants(cf) if cfg.q_min <= a.q <= cfg.q_max]
    if not apps:
        raise ConfigError(
            f"no approximants with q in [{cfg.q_min}, {cfg.q_max}]")
    return apps


def _run_cf(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    cf = frequency_from_descriptor(cfg.frequency)
    lines = [json.dumps({"value": cf.value, "quotients": list(cf.quotients),
                         "exact_rational": cf.exact_rational})]
    for a in approximants(cf):
        lines.append(json.dumps({"n": a.index, "p": a.p, "q": a.q,
                                 "value": a.p / a.q}))
    path = out / "cf.jsonl"
    path.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return [path]


def _run_spectrum(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    cf = frequency_from_descriptor(cfg.frequency)
    target = _ladder(cfg, cf)[-1]
    memo = _cached_spectra(cfg, f, [target], stats)
    rec = memo[(target.p, target.q, cfg.e_res, cfg.theta_grid)]
    path = out / "spectrum.json"
    _write_json(path, record_to_dict(rec))
    return [path]


def _run_lyapunov(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    cf = frequency_from_descriptor(cfg.frequency)
    lo, hi = energy_window(f)
    grid = np.linspace(lo, hi, cfg.lyap_points)
    workers = _resolve_workers(cfg)
    chunk = max(1, math.ceil(grid.size / max(workers * 4, 1)))
    tasks = [{"sampling": f.descriptor(), "omega": cf.value,
              "energies": grid[i:i + chunk].tolist(), "k": cfg.k,
              "m_theta": cfg.m_theta, "mode": cfg.theta_mode, "start": i}
             for i in range(0, grid.size, chunk)]
    values = np.empty(grid.size)
    sups = np.empty(grid.size)
    for res in _run_tasks(_lyap_chunk_task, tasks, workers):
        i = res["start"]
        values[i:i + len(res["values"])] = res["values"]
        sups[i:i + len(res["sup"])] = res["sup"]
    path = out / "lyapunov.csv"
    _write_csv(path, ["E", "L_est", "sup_theta", "k"],
               [[e, v, s, str(cfg.k)] for e, v, s in zip(grid, values, sups)])
    return [path]


def _run_measure_convergence(cfg: ExperimentConfig, out: Path,
                             stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    cf = frequency_from_descriptor(cfg.frequency)
    apps = _ladder(cfg, cf)
    memo = _cached_spectra(cfg, f, apps, stats)
    lo, hi = energy_window(f)
    lplus = l_plus_set(f, cf, cfg.chi, (hi - lo) / cfg.lyap_points,
                       cfg.k, cfg.m_theta, mode=cfg.theta_mode)
    rows = convergence_table(f, cf, cfg.q_min, cfg.q_max, cfg.chi, cfg.e_res,
                             cfg.theta_grid, lplus=lplus, memo=memo)
    path = out / "convergence.csv"
    _write_csv(path,
               ["n", "p", "q", "measure", "measure_lplus", "dist_next",
                "dist_next_lplus", "gap_deepest", "gap_deepest_lplus"],
               [[str(r.index), str(r.p), str(r.q), r.measure, r.measure_lplus,
                 r.dist_next, r.dist_next_lplus, r.gap_deepest,
                 r.gap_deepest_lplus] for r in rows])
    return [path]


def _run_holder_fit(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    cf = frequency_from_descriptor(cfg.frequency)
    apps = _ladder(cfg, cf)
    memo = _cached_spectra(cfg, f, apps, stats)
    lplus = None
    if cfg.use_l_plus:
        lo, hi = energy_window(f)
        lplus = l_plus_set(f, cf, cfg.chi, (hi - lo) / cfg.lyap_points,
                           cfg.k, cfg.m_theta, mode=cfg.theta_mode)
    fit = holder_fit(f, cf, cfg.q_min, cfg.q_max, use_l_plus=cfg.use_l_plus,
                     chi=cfg.chi, e_res=cfg.e_res, theta_grid=cfg.theta_grid,
                     lplus=lplus, memo=memo)
    csv_path = out / "holder.csv"
    _write_csv(csv_path, ["n", "q_a", "q_b", "domega", "dist"],
               [[str(p.index), str(p.q_a), str(p.q_b), p.domega, p.dist]
                for p in fit.pairs])
    json_path = out / "holder.json"
    _write_json(json_path, {
        "beta_hat": fit.beta_hat,
        "use_l_plus": fit.use_l_plus,
        "chi": fit.chi,
        "pairs": [[p.q_a, p.q_b, p.domega, p.dist] for p in fit.pairs],
        # the exceptional-set caveat: the empirical exponent is fitted over
        # the full computed set; small excluded subsets cannot be removed
        "note": "exponent fitted over the entire computed spectrum",
    })
    return [csv_path, json_path]


def _run_butterfly(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    pairs = [(0, 1)] + [(p, q) for q in range(2, cfg.q_max + 1)
                        for p in range(1, q) if math.gcd(p, q) == 1]
    apps = [Approximant(p=p, q=q, index=1) for p, q in pairs]
    memo = _cached_spectra(cfg, f, apps, stats)
    rows = []
    for a in apps:
        rec = memo[(a.p, a.q, cfg.e_res, cfg.theta_grid)]
        for bi, (blo, bhi) in enumerate(rec.bands.intervals):
            rows.append([str(a.p), str(a.q), str(bi), blo, bhi])
    path = out / "butterfly.csv"
    _write_csv(path, ["p", "q", "band", "lo", "hi"], rows)
    return [path]


def _run_furman_check(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    cf = frequency_from_descriptor(cfg.frequency)
    if cfg.energy is None:
        raise ConfigError("furman-check needs an explicit energy")
    base = schrodinger_cocycle(f, cf.value, cfg.energy)
    shifted = schrodinger_cocycle(f, cf.value, cfg.energy + cfg.delta)
    rows = uniform_usc_probe(base, [base, shifted], cfg.k, cfg.m_theta)
    path = out / "furman.csv"
    _write_csv(path, ["tag", "distance", "distance_tail", "sup_gap", "n",
                      "m_theta"],
               [[r.tag, r.distance.value, r.distance.tail_bound, r.sup_gap,
                 str(r.n), str(r.m_theta)] for r in rows])
    return [path]


def _run_perturbation_check(cfg: ExperimentConfig, out: Path,
                            stats: dict) -> list[Path]:
    f = from_descriptor(cfg.sampling)
    cf = frequency_from_descriptor(cfg.frequency)
    if cfg.energy is None:
        raise ConfigError("perturbation-check needs an explicit energy")
    pert = (EnergyShift(cfg.delta) if cfg.perturbation == "energy"
            else FejerReplace(cfg.fejer_degree))
    prof = perturbation_profile(f, cf.value, cfg.energy, pert, cfg.k_max,
                                cfg.m_theta, cfg.epsilon)
    path = out / "perturbation.csv"
    _write_csv(path, ["k", "err", "bound", "log_err", "log_bound"],
               [[str(int(k)), e, b, le, lb]
                for k, e, b, le, lb in zip(prof.ks, prof.err, prof.bound,
                                           prof.log_err, prof.log_bound)])
    _write_json(out / "perturbation.json",
                {"delta0": prof.delta0, "epsilon": prof.epsilon,
                 "kind": cfg.perturbation})
    return [path, out / "perturbation.json"]


def _run_identity_check(cfg: ExperimentConfig, out: Path, stats: dict) -> list[Path]:
    rng = np.random.default_rng(cfg.seed)
    cf = frequency_from_descriptor(cfg.frequency)
    omega = cf.value
    rows = []
    worst = 0.0
    for case in range(cfg.cases):
        coeffs = [complex(rng.uniform(-1, 1), 0.0)]
        coeffs += [complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
                   for _ in range(3)]
        f = TrigPolynomial(coeffs=tuple(coeffs))
        lo, hi = energy_window(f)
        energy = float(rng.uniform(lo, hi))
        theta = float(rng.uniform(0, 1))
        k = int(rng.integers(2, min(cfg.k_max, 30) + 1))
        resid = cocycle_det_identity_check(f, omega, theta, energy, k)
        h = restricted_matrix(f, omega, theta, 0, k - 1)
        dense = float(np.linalg.det(energy * np.eye(k) - h))
        rec = det_truncated(f, omega, theta, energy, k)
        scale = max(1.0, abs(dense))
        resid_dense = abs(rec - dense) / scale
        worst = max(worst, resid, resid_dense)
        rows.append([str(case), str(k), resid, resid_dense])
    path = out / "identity.csv"
    _write_csv(path, ["case", "k", "residual_product", "residual_dense"], rows)
    _write_json(out / "identity.json", {"cases": cfg.cases, "worst": worst})
    return [path, out / "identity.json"]


_RUNNERS = {
    "cf": _run_cf,
    "spectrum": _run_spectrum,
    "lyapunov": _run_lyapunov,
    "measure-convergence": _run_measure_convergence,
    "holder-fit": _run_holder_fit,
    "butterfly": _run_butterfly,
    "furman-check": _run_furman_check,
    "perturbation-check": _run_perturbation_check,
    "identity-check": _run_identity_check,
}


def run(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; returns the manifest (also written to disk)."""
    cfg.validate()
    if cfg.cache_dir is None:
        cfg.cache_dir = os.environ.get("QUASISPEC_CACHE") or None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = {"cache_hits": 0, "cache_misses": 0}
    t0 = time.time()
    outputs = _RUNNERS[cfg.kind](cfg, out, stats)
    manifest = {
        "experiment": cfg.kind,
        "description": EXPERIMENT_LABELS[cfg.kind],
        "config": asdict(cfg),
        "outputs": [str(p) for p in outputs],
        "cache": stats,
        "wall_time_s": time.time() - t0,
        "version": __version__,
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="quasispec",
        description="numerical experiments for quasiperiodic operators")
    parser.add_argument("kind", choices=EXPERIMENT_KINDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config field (dotted keys allowed)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--cache-dir", help="result cache directory")
    parser.add_argument("--workers", type=int, help="worker process count")
    args = parser.parse_args(argv)

    try:
        raw = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}")
        raw["kind"] = args.kind
        raw = apply_overrides(raw, args.override)
        if args.out:
            raw["out"] = args.out
        if args.cache_dir:
            raw["cache_dir"] = args.cache_dir
        if args.workers is not None:
            raw["workers"] = args.workers
        cfg = ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        manifest = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EmptySpectrumError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"out": manifest["outputs"],
                      "wall_time_s": manifest["wall_time_s"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
