"""Command-line front end: ``peierls run|check <config>`` and ``peierls models``.

A config file has an ``[experiment]`` section (model, seed, outputs,
output_dir) and a ``[parameters]`` section whose keys depend on the model.
Any key can be overridden from the environment as
``PEIERLS_<SECTION>_<KEY>`` (for example ``PEIERLS_PARAMETERS_N=401``).

Exit codes: 0 success, 1 config error, 2 numerical failure or invariant
breach, 3 model or other upstream error.
"""
from __future__ import annotations

import argparse
import configparser
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bracket as br
from . import kg, qm
from .elsolver import BoundaryData, solve_bvp
from .errors import ConfigError, ModelError, NumericalFailure, PeierlsError
from .jacobi import covariant_jacobi_check
from .lagrangian import Trajectory, random_density
from .models import free_particle, great_circle, harmonic_oscillator, sphere
from .report import write_bracket_csv, write_commutator_csv, write_csv, write_json, write_kernel_csv

ENV_PREFIX = "PEIERLS_"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_MODEL = 0, 1, 2, 3

_PARTICLE = {"T": 1.0, "N": 201, "pairs": 50, "functionals": 4}

MODELS: dict[str, dict] = {
    "free": {
        "summary": "free particle L = m/2 v.v on R^n",
        "parameters": {"n": 1, "m": 1.0, "x_minus": 0.0, "x_plus": 0.0, **_PARTICLE},
        "outputs": ["kernel", "brackets", "summary"],
    },
    "harmonic": {
        "summary": "harmonic oscillator L = m/2 (v.v - omega^2 x.x)",
        "parameters": {"n": 1, "m": 1.0, "omega": 1.0, "x_minus": 0.0, "x_plus": 0.0, **_PARTICLE},
        "outputs": ["kernel", "brackets", "summary"],
    },
    "sphere": {
        "summary": "geodesic motion on the unit 2-sphere along the equator",
        "parameters": {"m": 1.0, **_PARTICLE},
        "outputs": ["kernel", "brackets", "summary"],
    },
    "qm": {
        "summary": "d-level Schrodinger dynamics with the canonical first-order Lagrangian",
        "parameters": {"d": 4, "T": 1.0, "N": 201, "hamiltonian": "zero", "pairs": 20, "window": 0.8},
        "outputs": ["brackets", "bivector", "summary"],
    },
    "kg": {
        "summary": "Klein-Gordon field on a periodic lattice",
        "parameters": {"d": 1, "L": 2 * np.pi, "M": 64, "m": 1.0, "separation": np.pi / 2, "dt": 1.0,
                       "study_M": "32,64,128"},
        "outputs": ["commutator", "summary"],
    },
}

EXPERIMENT_KEYS = {"model", "seed", "outputs", "output_dir"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    parameters: dict
    outputs: tuple[str, ...]
    seed: int = 0
    output_dir: str = "peierls-out"


@dataclass
class ReportBundle:
    summary: dict
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.summary["checks"])


def list_models() -> str:
    lines = []
    for name, entry in MODELS.items():
        lines.append(f"{name}: {entry['summary']}")
        for key, val in entry["parameters"].items():
            lines.append(f"    {key} = {val!r} ({type(val).__name__})")
        lines.append(f"    outputs: {', '.join(entry['outputs'])}")
    return "\n".join(lines) + "\n"


# -- configuration ---------------------------------------------------------------

def _key_lines(text: str) -> dict[tuple[str, str], int]:
    found = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section:
            found[(section, m.group(1).strip())] = lineno
    return found


def _coerce(key: str, raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: {key} = {raw!r} is not a valid {type(default).__name__}") from None
    return raw.strip()


def _resolve_key(key: str, known, var: str) -> str:
    """Exact match first, then a unique case-insensitive match."""
    if key in known:
        return key
    hits = [k for k in known if k.lower() == key.lower()]
    if len(hits) == 1:
        return hits[0]
    if len(hits) > 1:
        raise ConfigError(f"environment: {var} is ambiguous between {sorted(hits)}; use the exact case")
    return key


def parse_config(text: str, environ=None, source: str = "<config>") -> ExperimentConfig:
    environ = os.environ if environ is None else environ
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # parameter names are case-sensitive (n vs N)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines = _key_lines(text)

    def where(section, key):
        ln = lines.get((section, key))
        return f"{source}:{ln}" if ln else f"{source} [{section}] {key}"

    for sec in cp.sections():
        if sec not in ("experiment", "parameters"):
            raise ConfigError(f"{source}: unknown section [{sec}]")
    for sec in ("experiment", "parameters"):
        if not cp.has_section(sec):
            cp.add_section(sec)

    model_hint = cp.get("experiment", "model", fallback="").strip()
    for var, val in sorted(environ.items()):
        if not var.startswith(ENV_PREFIX):
            continue
        sec, _, key = var[len(ENV_PREFIX):].partition("_")
        sec = sec.lower()
        if sec not in ("experiment", "parameters") or not key:
            raise ConfigError(f"environment: {var} does not name a config key")
        known = EXPERIMENT_KEYS if sec == "experiment" else set(MODELS.get(model_hint, {}).get("parameters", {}))
        key = _resolve_key(key, known, var)
        cp.set(sec, key, val)
        lines[(sec, key)] = 0
        if sec == "experiment" and key == "model":
            model_hint = val.strip()

    exp = dict(cp.items("experiment"))
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"{where('experiment', key)}: unknown key {key!r}")
    model = exp.get("model", "").strip()
    if model not in MODELS:
        raise ConfigError(f"{where('experiment', 'model')}: unknown model {model!r}; choose from {sorted(MODELS)}")
    entry = MODELS[model]
    seed = _coerce("seed", exp.get("seed", "0"), 0, where("experiment", "seed"))

    params = dict(entry["parameters"])
    for key, raw in cp.items("parameters"):
        if key not in params:
            raise ConfigError(f"{where('parameters', key)}: parameter {key!r} is not defined for model {model!r}")
        params[key] = _coerce(key, raw, entry["parameters"][key], where("parameters", key))

    outputs = tuple(o.strip() for o in exp.get("outputs", ",".join(entry["outputs"])).split(",") if o.strip())
    for o in outputs:
        if o not in entry["outputs"]:
            raise ConfigError(f"{where('experiment', 'outputs')}: output {o!r} not available for {model!r}")
    cfg = ExperimentConfig(model, params, outputs, seed, exp.get("output_dir", "peierls-out").strip())
    validate(cfg, where)
    return cfg


def load_config(path, environ=None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, environ, str(path))


def validate(cfg: ExperimentConfig, where=lambda s, k: f"[{s}] {k}"):
    p = cfg.parameters

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"{where('parameters', key)}: {key} {msg}")

    if "N" in p:
        need(p["N"] >= 3 and p["N"] % 2 == 1, "N", f"must be odd and >= 3, got {p['N']}")
    if "T" in p:
        need(p["T"] > 0, "T", "must be positive")
    if cfg.model in ("free", "harmonic"):
        need(p["n"] >= 1, "n", "must be >= 1")
    if "m" in p and cfg.model != "kg":
        need(p["m"] > 0, "m", "must be positive")
    for key in ("pairs", "functionals"):
        if key in p:
            need(p[key] >= 1, key, "must be >= 1")
    if cfg.model == "qm":
        need(p["d"] >= 1, "d", "must be >= 1")
        need(0 < p["window"] < p["T"], "window", "half-width must lie in (0, T)")
    if cfg.model == "kg":
        need(p["d"] in (1, 2, 3), "d", "must be 1, 2 or 3")
        need(p["M"] >= 2 and p["M"] % 2 == 0, "M", "must be even and >= 2")
        need(p["L"] > 0, "L", "must be positive")
        need(p["m"] >= 0, "m", "must be non-negative")
        try:
            study = [int(v) for v in str(p["study_M"]).split(",")]
        except ValueError:
            raise ConfigError(f"{where('parameters', 'study_M')}: expected comma-separated integers") from None
        need(all(v >= 2 and v % 2 == 0 for v in study), "study_M", "entries must be even and >= 2")


# -- pipelines -----------------------------------------------------------------------

def _check(name, value, tol, passed=None):
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "tolerance": tol, "value": value, "passed": ok}


def _particle(cfg: ExperimentConfig, out: Path, rng):
    p = cfg.parameters
    T, N = p["T"], p["N"]
    if cfg.model == "sphere":
        model = sphere(p["m"])
        traj = Trajectory.from_function(T, N, great_circle, lambda s: np.array([0.0, 1.0]))
    else:
        n = p["n"]
        if cfg.model == "free":
            model = free_particle(n, p["m"])
        else:
            model = harmonic_oscillator(n, p["m"], p["omega"])
        traj = solve_bvp(model, BoundaryData(np.full(n, p["x_minus"]), np.full(n, p["x_plus"]), T, N))
    ctx = br.build_context(model, traj)
    kernel = ctx.kernel
    checks = []
    n = model.n
    G = kernel.G
    checks.append(_check("kernel_antisymmetry", np.max(np.abs(G + G.transpose(2, 3, 0, 1))), 1e-8))
    checks.append(_check("wronskian_constancy", ctx.basis.pairing_drift, 1e-6))
    if cfg.model == "free":
        dev = kernel.max_deviation(lambda s, sp: (s - sp) / p["m"])
        checks.append(_check("kernel_vs_causal_green_function", dev, 1e-8))
    elif cfg.model == "harmonic":
        w, m = p["omega"], p["m"]
        dev = kernel.max_deviation(lambda s, sp: np.sin(w * (s - sp)) / (m * w))
        checks.append(_check("kernel_vs_oscillator_commutator", dev, 1e-6))
    else:
        J = np.stack([np.sin(traj.s), np.zeros(N)], axis=1)
        checks.append(_check("covariant_jacobi_normal_field", covariant_jacobi_check(model, traj, J), 1e-3))

    worst = {"route_omega": 0.0, "route_bivector": 0.0, "conservation": 0.0, "antisymmetry": 0.0}
    for _ in range(p["pairs"]):
        A = random_density(rng, n, T, "A")
        B = random_density(rng, n, T, "B")
        bi = br.bracket_integral(ctx, A, B)
        prof = br.omega_bracket_profile(ctx, A, B)
        bo = float(prof[(N - 1) // 2])
        bv = br.bracket_bivector(ctx, A, B)
        worst["route_omega"] = max(worst["route_omega"], br.relative_gap(bi, bo))
        worst["route_bivector"] = max(worst["route_bivector"], br.relative_gap(bi, bv))
        worst["conservation"] = max(worst["conservation"], br.conservation_spread(prof))
        worst["antisymmetry"] = max(worst["antisymmetry"], abs(bi + br.bracket_integral(ctx, B, A)))
    checks.append(_check("route_equivalence_omega", worst["route_omega"], 1e-6))
    checks.append(_check("route_equivalence_bivector", worst["route_bivector"], 1e-6))
    checks.append(_check("omega_conservation", worst["conservation"], 1e-6))
    checks.append(_check("bracket_antisymmetry", worst["antisymmetry"], 1e-10))

    artifacts = {}
    if "kernel" in cfg.outputs:
        artifacts["kernel"] = str(write_kernel_csv(out / "kernel.csv", kernel))
    if "brackets" in cfg.outputs:
        funcs = [random_density(rng, n, T, f"F{k}") for k in range(p["functionals"])]
        artifacts["brackets"] = str(write_bracket_csv(out / "brackets.csv", br.bracket_table(ctx, funcs)))
    info = {"W": ctx.basis.W.tolist()}
    return checks, artifacts, info


def _hamiltonian(spec: str, d: int, rng) -> np.ndarray:
    if spec == "zero":
        return np.zeros((d, d))
    if spec == "random":
        return qm.random_hermitian(rng, d)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"hamiltonian must be 'zero', 'random' or a file path, got {spec!r}")
    H = np.loadtxt(path, dtype=complex, ndmin=2)
    if H.shape != (d, d):
        raise ConfigError(f"hamiltonian file {path} has shape {H.shape}, expected {(d, d)}")
    return H


def _qm(cfg: ExperimentConfig, out: Path, rng):
    p = cfg.parameters
    d, T, N = p["d"], p["T"], p["N"]
    H = _hamiltonian(p["hamiltonian"], d, rng)
    psi = rng.normal(size=2 * d)
    psi /= np.linalg.norm(psi)
    hm = qm.HilbertModel(H, psi[:d], psi[d:])
    ctx = qm.pipeline_context(hm, T, N)
    hw = p["window"]
    wA = qm.Window(0.0, hw)
    wB = qm.Window(0.0, hw)
    checks = []
    rows = []
    dev_free, dev_heis, imag = 0.0, 0.0, 0.0
    for k in range(p["pairs"]):
        A = qm.QuadraticFunctional(qm.random_hermitian(rng, d), wA, f"A{k}")
        B = qm.QuadraticFunctional(qm.random_hermitian(rng, d), wB, f"B{k}")
        pipe = qm.pipeline_bracket(ctx, A, B)
        heis = qm.heisenberg_bracket_complex(hm, A, B)
        rows.append((A.label, B.label, "pipeline", pipe))
        rows.append((A.label, B.label, "heisenberg", heis.real))
        dev_heis = max(dev_heis, abs(pipe - heis.real))
        imag = max(imag, abs(heis.imag))
        if p["hamiltonian"] == "zero":
            free = qm.free_commutator_bracket(hm, A.A, B.A)
            rows.append((A.label, B.label, "formula", free))
            dev_free = max(dev_free, abs(pipe - free))
    if p["hamiltonian"] == "zero":
        checks.append(_check("pipeline_vs_commutator_formula", dev_free, 1e-8))
    checks.append(_check("pipeline_vs_heisenberg", dev_heis, 1e-7))
    checks.append(_check("heisenberg_realness", imag, 1e-10))
    checks.append(_check("canonical_bivector", qm.canonical_bivector_check(hm, T, N), 1e-8))
    checks.append(_check("unitarity_drift", qm.unitarity_drift(hm, wA), 1e-10))

    artifacts = {}
    if "brackets" in cfg.outputs:
        artifacts["brackets"] = str(write_bracket_csv(out / "brackets.csv", rows))
    if "bivector" in cfg.outputs:
        free_ctx = qm.pipeline_context(hm.with_hamiltonian(np.zeros((d, d))), T, N)
        lam = qm.bivector_coefficients(free_ctx)
        cells = [(a, b, float(lam[a, b])) for a in range(2 * d) for b in range(2 * d)]
        artifacts["bivector"] = str(write_csv(out / "bivector.csv", ["a", "b", "value"], cells))
    return checks, artifacts, {}


def _kg(cfg: ExperimentConfig, out: Path, rng):
    p = cfg.parameters
    spec = kg.LatticeSpec(p["d"], p["L"], p["M"], p["m"])
    checks = []
    offsets = range(-(spec.M // 2) + 1, spec.M // 2 + 1)
    equal_time, delta_dev, route_dev = 0.0, 0.0, 0.0
    for off in offsets:
        dx = np.zeros(spec.d)
        dx[0] = off * spec.a
        equal_time = max(equal_time, abs(kg.commutator_function(spec, dx, 0.0)))
        site = np.zeros(spec.d, dtype=int)
        site[0] = off
        delta_dev = max(delta_dev, abs(kg.commutator_time_derivative(spec, dx, 0.0) - kg.lattice_delta(spec, site)))
        t1, t2 = rng.uniform(-1, 1, size=2)
        origin = np.zeros(spec.d, dtype=int)
        x1 = (t1, np.mod(site, spec.M))
        x2 = (t2, origin)
        A = kg.SpacetimeDensity.point(spec, *x1)
        B = kg.SpacetimeDensity.point(spec, *x2)
        route_dev = max(route_dev, abs(kg.kg_peierls_bracket(spec, A, B) - kg.kg_commutator(spec, x1, x2)))
    checks.append(_check("equal_time_commutator_zero", equal_time, 0.0))
    checks.append(_check("equal_time_derivative_is_lattice_delta", delta_dev, 1e-12))
    checks.append(_check("delta_density_bracket_vs_commutator", route_dev, 1e-12))

    study = [int(v) for v in str(p["study_M"]).split(",")]
    mags = []
    for M in study:
        s = kg.LatticeSpec(p["d"], p["L"], M, p["m"])
        dx = np.zeros(s.d)
        dx[0] = p["separation"]
        mags.append(abs(kg.commutator_function(s, dx, p["dt"])))
    ratio = max(b / a for a, b in zip(mags, mags[1:])) if len(mags) > 1 else 0.0
    checks.append(_check("spacelike_magnitude_ratio_under_refinement", ratio, 1.0, passed=ratio < 1.0))

    artifacts = {}
    if "commutator" in cfg.outputs:
        rows = kg.commutator_table(spec, list(offsets), np.linspace(-2.0, 2.0, 41))
        artifacts["commutator"] = str(write_commutator_csv(out / "commutator.csv", rows))
    return checks, artifacts, {"spacelike_magnitudes": dict(zip(map(str, study), mags))}


def run(cfg: ExperimentConfig) -> ReportBundle:
    out = Path(cfg.output_dir)
    rng = np.random.default_rng(cfg.seed)
    pipeline = {"free": _particle, "harmonic": _particle, "sphere": _particle, "qm": _qm, "kg": _kg}[cfg.model]
    checks, artifacts, info = pipeline(cfg, out, rng)
    summary = {
        "model": cfg.model,
        "seed": cfg.seed,
        "parameters": cfg.parameters,
        "checks": checks,
        "info": info,
        "passed": all(c["passed"] for c in checks),
    }
    bundle = ReportBundle(summary, artifacts)
    if "summary" in cfg.outputs:
        bundle.artifacts["summary"] = str(write_json(out / "summary.json", summary))
    return bundle


def _format_check(c) -> str:
    status = "PASS" if c["passed"] else "FAIL"
    return f"{status} {c['name']}: value={c['value']:.3e} tol={c['tolerance']:.1e}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="peierls", description="Peierls bracket experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_check = sub.add_parser("check", help="validate a config without running it")
    p_check.add_argument("config")
    sub.add_parser("models", help="list the model catalog")
    args = parser.parse_args(argv)

    if args.command == "models":
        sys.stdout.write(list_models())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "check":
            print(f"config ok: model={cfg.model} outputs={','.join(cfg.outputs)}")
            return EXIT_OK
        bundle = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure in {exc.module}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ModelError, PeierlsError) as exc:
        print(f"model error in {exc.module}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    for c in bundle.summary["checks"]:
        print(_format_check(c))
    for name, path in sorted(bundle.artifacts.items()):
        print(f"wrote {name}: {path}")
    return EXIT_OK if bundle.passed else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
