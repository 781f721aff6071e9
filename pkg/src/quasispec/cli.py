"""Command-line entry point: ``quasispec <command> [flags] [--config run.json]``.

Every run writes its artifacts plus ``manifest.json`` into ``--out``. Outputs
carry no timestamps, so identical configs give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .errors import ArtifactKindError, ConfigError, QuasispecError
from .io import compare_artifacts, read_artifact, write_csv, write_json

WORKERS_ENV = "QUASISPEC_WORKERS"
STURMIAN_PRESETS = {"fibonacci": (1,), "golden_sturmian": (1,), "silver_sturmian": (2,)}
SUBSTITUTION_MODELS = ("thue_morse", "period_doubling", "rudin_shapiro", "tribonacci")
MODEL_NAMES = ("fibonacci", "sturmian", "golden_sturmian", "silver_sturmian", "constant",
               "bernoulli") + SUBSTITUTION_MODELS


# ---------------------------------------------------------------- parsing helpers

def parse_grid(spec, what: str = "grid") -> np.ndarray:
    """'a:b:n' (linear), 'a:b:n:log' (geometric), a comma list, or a JSON list."""
    if isinstance(spec, (list, tuple)):
        vals = np.array([float(x) for x in spec])
    else:
        s = str(spec).strip()
        if ":" in s:
            parts = s.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
                raise ConfigError(f"{what}: expected 'start:stop:num[:log]', got {s!r}")
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n <= 0:
                vals = np.empty(0)
            elif len(parts) == 4:
                if a <= 0 or b <= 0:
                    raise ConfigError(f"{what}: geometric grid needs positive ends")
                vals = np.geomspace(a, b, n)
            else:
                vals = np.linspace(a, b, n)
        else:
            vals = np.array([float(x) for x in s.split(",") if x.strip()])
    if vals.size == 0:
        raise ConfigError(f"{what} is empty")
    return vals


def parse_ints(spec, what: str) -> list[int]:
    if isinstance(spec, (list, tuple)):
        out = [int(x) for x in spec]
    elif isinstance(spec, int):
        out = [spec]
    else:
        out = [int(x) for x in str(spec).split(",") if x.strip()]
    if not out:
        raise ConfigError(f"{what} is empty")
    return out


def parse_complex_list(spec) -> list[complex]:
    if isinstance(spec, (list, tuple)):
        items = spec
    else:
        items = [x for x in str(spec).split(",") if x.strip()]
    out = []
    for x in items:
        if isinstance(x, dict):
            out.append(complex(float(x["re"]), float(x.get("im", 0))))
        else:
            out.append(complex(str(x).replace(" ", "")))
    if not out:
        raise ConfigError("values list is empty")
    return out


def _key_line(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return 1


def load_config(path: str, allowed: set[str]) -> tuple[dict, Callable[[str], int]]:
    """JSON object of flag overrides plus a key -> line-number lookup for messages."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    clean = {}
    for k, v in obj.items():
        dest = k.replace("-", "_")
        if dest not in allowed:
            raise ConfigError(f"{path}:{_key_line(text, k)}: unknown setting {k!r}")
        clean[dest] = v
    return clean, lambda key: _key_line(text, key)


def worker_count(value: int | None) -> int:
    if value is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError("worker count must be >= 1")
    return value


def parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map; shards run in separate processes when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _shards(values: np.ndarray, count: int) -> list[np.ndarray]:
    return [s for s in np.array_split(values, max(1, count)) if s.size]


# ---------------------------------------------------------------- models

def build_model(name: str, lam: float, cf: Sequence[int] | None = None, phases: int = 16,
                seed: int = 0, values: dict | None = None):
    from .presets import load_catalog
    from .spectrum import BernoulliModel, ConstantModel, SturmianModel, SubstitutionModel

    if name in STURMIAN_PRESETS:
        return SturmianModel(lam, STURMIAN_PRESETS[name], phases)
    if name == "sturmian":
        if not cf:
            raise ConfigError("model 'sturmian' needs --cf")
        return SturmianModel(lam, tuple(cf), phases)
    if name == "constant":
        return ConstantModel(lam)
    if name == "bernoulli":
        return BernoulliModel(lam, seed)
    if name in SUBSTITUTION_MODELS:
        entry = load_catalog()[name]
        letters = sorted({int(a) for a in entry["rules"]})
        vals = values or {a: lam * i / max(1, len(letters) - 1) for i, a in enumerate(letters)}
        return SubstitutionModel(entry["rules"], int(entry["seed"]), {int(k): float(v) for k, v in vals.items()})
    raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")


def build_window(name: str, start: int, stop: int, cf=None, phi="0"):
    from .generators import SturmianParams, quadratic_theta, sturmian_window
    from .presets import preset_window

    if stop <= start:
        raise ConfigError("window range is empty")
    if name == "sturmian":
        if not cf:
            raise ConfigError("model 'sturmian' needs --cf")
        return sturmian_window(SturmianParams(quadratic_theta(tuple(cf)), str(phi)), start, stop)
    if name in ("constant", "bernoulli"):
        raise ConfigError(f"model {name!r} has no symbolic window")
    try:
        return preset_window(name, start, stop)
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from None


# ---------------------------------------------------------------- commands

def _lyapunov_shard(job):
    from .spectrum import lyapunov_grid
    model, energies, n, phases = job
    g = lyapunov_grid(model, energies, n, phases)
    return g.mean(axis=0), g.max(axis=0) - g.min(axis=0)


def _orbit_job(job):
    from .tracemap import escape_classify, fib_orbit
    lam, E, k_max = job
    orb = fib_orbit(lam, E, k_max)
    return orb.rows(), escape_classify(orb), orb.invariant_deviation


def cmd_generate(a, out: Path) -> dict:
    w = build_window(a.model, a.start, a.stop, a.cf, a.phi)
    files = [write_json(out / "window.json", "window",
                        {"model": a.model, "start": w.start, "alphabet": list(w.alphabet),
                         "symbols": w.to_string()}).name]
    summary: dict[str, Any] = {"length": len(w)}
    if a.potential:
        from .schrodinger import Potential
        V = Potential(a.lam * w.labels().astype(float), w.start)
        files.append(write_csv(out / "potential.csv", "potential", ["n", "V"],
                               ((w.start + i, v) for i, v in enumerate(V.values))).name)
    return {"outputs": files, "summary": summary}


def cmd_words(a, out: Path) -> dict:
    from .words import complexity_profile, special_factors
    w = build_window(a.model, 0, a.length, a.cf, a.phi)
    prof = complexity_profile(w, a.complexity)
    rows = []
    for n in range(1, a.complexity + 1):
        sf = special_factors(w, n) if a.special else None
        rows.append((n, prof[n], int(prof.saturated[n])) +
                    ((len(sf.right), len(sf.left), len(sf.bispecial)) if sf else ()))
    header = ["n", "complexity", "saturated"] + (["right_special", "left_special", "bispecial"]
                                                 if a.special else [])
    f = write_csv(out / "complexity.csv", "complexity", header, rows)
    return {"outputs": [f.name], "summary": {"aperiodic": prof.aperiodic,
                                             "hedlund_morse": prof.hedlund_morse,
                                             "period": prof.period}}


def cmd_spectrum(a, out: Path) -> dict:
    from .spectrum import box_dimension, grid_to_intervals, spectrum_approx
    files, summary = [], {}
    if a.model not in STURMIAN_PRESETS and a.model != "sturmian" and not a.grid:
        raise ConfigError(f"band approximants need a Sturmian model; use --grid for {a.model!r}")
    if a.model in STURMIAN_PRESETS or a.model == "sturmian":
        cf = tuple(a.cf) if a.model == "sturmian" else STURMIAN_PRESETS[a.model]
        rows, bands = [], {}
        for k in parse_ints(a.k, "k levels"):
            s = spectrum_approx(a.lam, k, cf, a.resolution)
            bands[k] = s
            rows += [(k, i, l, r) for i, (l, r) in enumerate(s.intervals)]
        files.append(write_csv(out / "spectrum.csv", "intervals", ["k", "band_index", "left", "right"], rows).name)
        summary["levels"] = {str(k): {"measure": s.measure, "bands": s.band_count,
                                      "certified": s.certified, "monotone": s.monotone}
                             for k, s in bands.items()}
        if a.dimension:
            scales = np.geomspace(1e-1, 1e-4, 10)
            drows = []
            for k, s in bands.items():
                d = box_dimension(s.intervals, scales)
                drows += [(k, e, c) for e, c in zip(d.scales, d.counts)]
                summary["levels"][str(k)]["box_dimension"] = d.dimension
            files.append(write_csv(out / "boxcount.csv", "boxcount", ["k", "epsilon", "count"], drows).name)
    if a.grid:
        model = build_model(a.model, a.lam, a.cf, a.phases, a.seed)
        grid = parse_grid(a.grid, "energy grid")
        parts = parallel_map(_lyapunov_shard, [(model, g, a.n, a.phase_samples)
                                               for g in _shards(grid, a.workers)], a.workers)
        gamma = np.concatenate([p[0] for p in parts])
        spread = np.concatenate([p[1] for p in parts])
        files.append(write_csv(out / "lyapunov.csv", "lyapunov", ["E", "gamma", "spread"],
                               zip(grid, gamma, spread)).name)
        z = grid_to_intervals(grid, gamma < a.tol)
        h = float(np.max(np.diff(grid))) if grid.size > 1 else 0.0
        z = z.widen(h / 2)
        files.append(write_csv(out / "zset.csv", "intervals", ["k", "band_index", "left", "right"],
                               ((0, i, l, r) for i, (l, r) in enumerate(z))).name)
        summary["zset_measure"] = z.measure
    return {"outputs": files, "summary": summary}


def cmd_trace(a, out: Path) -> dict:
    energies = parse_grid(a.energies, "energy grid")
    res = parallel_map(_orbit_job, [(a.lam, float(E), a.k_max) for E in energies], a.workers)
    rows, esc = [], []
    for E, (orows, rep, dev) in zip(energies, res):
        rows += [(E,) + r for r in orows]
        esc.append((E, int(rep.escaped), "" if rep.k0 is None else rep.k0,
                    "" if rep.fitted_C is None else rep.fitted_C, dev))
    f1 = write_csv(out / "orbit.csv", "orbit", ["E", "k", "re", "im", "log_scale"], rows)
    f2 = write_csv(out / "escape.csv", "escape", ["E", "escaped", "k0", "fitted_C", "invariant_deviation"], esc)
    return {"outputs": [f1.name, f2.name],
            "summary": {"escaped": int(sum(r[1] for r in esc)), "energies": len(esc)}}


def cmd_dynamics(a, out: Path) -> dict:
    from .dynamics import LatticeOperator, abelian_moments, transport_exponents
    model = build_model(a.model, a.lam, a.cf, a.phases, a.seed)
    H = LatticeOperator.from_model(model, a.L, a.phase)
    T = parse_grid(a.T, "T grid")
    ps = [float(p) for p in parse_grid(a.p, "p set")]
    rep = abelian_moments(H, T, ps)
    rows, summary = [], {"leakage_max": float(rep.leakage.max()),
                         "normalization_error": float(rep.normalization_error.max())}
    for p in ps:
        try:
            ex = transport_exponents(rep, p, min_decades=a.min_decades)
            bm, bp = ex.beta_minus, ex.beta_plus
        except ValueError as e:
            bm = bp = math.nan
            summary["fit_error"] = str(e)
        summary[f"beta_{p:g}"] = [bm, bp]
        rows += [(t, p, m, bm, bp, lk) for t, m, lk in zip(rep.T, rep.moments[p], rep.leakage)]
    f = write_csv(out / "transport.csv", "transport",
                  ["T", "p", "moment", "beta_minus", "beta_plus", "leakage"], rows)
    return {"outputs": [f.name], "summary": summary}


def cmd_cmv(a, out: Path) -> dict:
    from .cmv import build_extended_cmv, cmv_spectrum_approx, sturmian_family
    vals = parse_complex_list(a.values)
    fam = sturmian_family(vals, tuple(a.cf or (1,)), a.phases)
    files, rows, summary = [], [], {}
    for size in parse_ints(a.size, "sizes"):
        r = cmv_spectrum_approx(fam, size, a.phase_samples)
        rows += [(size, ph) for ph in r.phases]
        summary[str(size)] = {"covered": list(r.covered), "eps": list(r.eps),
                              "modulus_error": r.max_modulus_error,
                              "unitarity_error": r.max_unitarity_error}
    files.append(write_csv(out / "eigenphases.csv", "eigenphases", ["size", "phase"], rows).name)
    first = parse_ints(a.size, "sizes")[0]
    alpha = fam.coefficients(0, -(first // 2) - 1, first - first // 2 + 1)
    files.append(write_csv(out / "verblunsky.csv", "verblunsky", ["index", "re", "im"],
                           ((alpha.start + i, z.real, z.imag) for i, z in enumerate(alpha.alpha))).name)
    return {"outputs": files, "summary": summary}


# ---------------------------------------------------------------- argument parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys override flags")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")


def _model(p: argparse.ArgumentParser, default: str = "fibonacci") -> None:
    p.add_argument("--model", default=default, help=f"one of {', '.join(MODEL_NAMES)}")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="coupling constant")
    p.add_argument("--cf", type=lambda s: parse_ints(s, "cf"), default=None,
                   help="periodic continued-fraction coefficients for 'sturmian', e.g. 1 or 2,1")
    p.add_argument("--phases", type=int, default=16, help="phase grid size for Sturmian models")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasispec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"quasispec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="symbolic window (and optional potential)")
    _common(p)
    _model(p)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--stop", type=int, default=1000)
    p.add_argument("--phi", default="0", help="rotation phase for 'sturmian'")
    p.add_argument("--potential", action="store_true", help="also write V(n) = lambda * s_n")

    p = sub.add_parser("words", help="factor complexity table")
    _common(p)
    _model(p)
    p.add_argument("--length", type=int, default=4096)
    p.add_argument("--complexity", type=int, default=32, help="largest n for p(n)")
    p.add_argument("--special", action="store_true", help="add special-factor counts")
    p.add_argument("--phi", default="0")

    p = sub.add_parser("spectrum", help="band approximants, Lyapunov scan, zero set")
    _common(p)
    _model(p)
    p.add_argument("--k", default="12", help="level(s) k, comma separated")
    p.add_argument("--resolution", type=float, default=1e-10)
    p.add_argument("--dimension", action="store_true", help="box-counting table per level")
    p.add_argument("--grid", default=None, help="energy grid for a Lyapunov/zero-set scan")
    p.add_argument("--n", type=int, default=5000, help="transfer-matrix length for the scan")
    p.add_argument("--tol", type=float, default=2e-3, help="zero-set threshold on gamma")
    p.add_argument("--phase-samples", type=int, default=4)

    p = sub.add_parser("trace", help="Fibonacci trace-map orbits and escape classification")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--energies", default="-2:3:11")
    p.add_argument("--k-max", type=int, default=30)

    p = sub.add_parser("dynamics", help="Abelian-averaged moments and transport exponents")
    _common(p)
    _model(p)
    p.add_argument("--L", type=int, default=512, help="lattice half-width")
    p.add_argument("--T", default="10:300:8:log", help="T grid")
    p.add_argument("--p", default="1,2", help="moment orders")
    p.add_argument("--phase", type=int, default=0)
    p.add_argument("--min-decades", type=float, default=1.5, help="least T span for exponent fits")

    p = sub.add_parser("cmv", help="CMV eigenphase clouds for Sturmian Verblunsky coefficients")
    _common(p)
    p.add_argument("--values", default="0.3,0.7", help="alpha per symbol, complex allowed")
    p.add_argument("--cf", type=lambda s: parse_ints(s, "cf"), default=None)
    p.add_argument("--size", default="128,256", help="matrix size(s)")
    p.add_argument("--phases", type=int, default=16)
    p.add_argument("--phase-samples", type=int, default=1)

    p = sub.add_parser("compare", help="diff two artifacts of the same kind")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--output", default=None, help="write the JSON report here instead of stdout")
    return ap


COMMANDS = {"generate": cmd_generate, "words": cmd_words, "spectrum": cmd_spectrum,
            "trace": cmd_trace, "dynamics": cmd_dynamics, "cmv": cmd_cmv}


def _versions() -> dict:
    import mpmath
    import numba
    import scipy
    return {"quasispec": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "mpmath": mpmath.__version__}


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not getattr(args, "config", None):
        return
    allowed = set(vars(args)) - {"command", "config"} | {"lambda"}
    cfg, line_of = load_config(args.config, allowed)
    for key, value in cfg.items():
        dest = "lam" if key == "lambda" else key
        try:
            if dest in ("cf",) and value is not None:
                value = parse_ints(value, key)
            setattr(args, dest, value)
        except (ValueError, ConfigError) as e:
            raise ConfigError(f"{args.config}:{line_of(key)}: {key}: {e}") from None
    args._line_of = line_of


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            rep = compare_artifacts(read_artifact(args.a), read_artifact(args.b), args.tolerance)
            text = json.dumps(rep, sort_keys=True, indent=1) + "\n"
            if args.output:
                Path(args.output).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
            return 1 if rep["differences"] else 0
        _apply_config(args, parser)
        args.workers = worker_count(args.workers)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](args, out)
        params = {k: v for k, v in sorted(vars(args).items())
                  if k not in ("out", "config", "workers") and not k.startswith("_")}
        write_json(out / "manifest.json", "manifest",
                   {"command": args.command, "parameters": params, "versions": _versions(),
                    "outputs": result["outputs"], "summary": result["summary"]})
        return 0
    except ArtifactKindError as e:
        print(f"quasispec: {e}", file=sys.stderr)
        return 3
    except (QuasispecError, ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"quasispec: error: {msg}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
