"""Command-line entry point: ``lcushell <subcommand> <config.ini>``.

Subcommands: build, solve, diag, fit, resources, trace-compare, batch.
Exit status: 0 success, 1 runtime failure (or a failed comparison), 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, parse_config
from .fitting import (
    FIT_SET,
    PAPER_PARAMS,
    RankDeficientError,
    fit_parameters,
    fit_record,
    format_report,
    predict_u0,
)
from .interactions import SecondQuantizedHamiltonian, assemble_hamiltonian
from .meanfield import MeanFieldParams, NucleusSpec
from .oracle import ground_state
from .pauli import PauliSum, map_to_qubits
from .presets import get_preset, load_builtin, load_experimental, load_presets
from .resources import complexity_csv, complexity_table, estimate_resources, resources_csv
from .solver import (
    GammaPolicy,
    IterationTrace,
    NoiseSpec,
    SectorHamiltonian,
    SolverDivergence,
    default_admixture,
    hartree_fock_bits,
    initial_weights,
    run_gradient_descent,
    sector_vector,
    tuned_gamma,
)
from .statevec import StateVector

__all__ = ["main", "load_builtin", "execute", "Target", "build_target"]

log = logging.getLogger("lcushell")

TRACE_HEADER = ("step", "energy_MeV", "success_prob", "norm", "gamma")
INCOMPLETE_MARKER = "# incomplete"
FULL_SPACE_LIMIT = 12  # "auto" representation iterates the full 2^n space up to this many qubits


# -- output helpers ----------------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x) -> str:
    return repr(float(x))


def trace_csv(trace: IterationTrace) -> str:
    lines = [",".join(TRACE_HEADER)]
    for s in trace.steps:
        lines.append(",".join([str(s.index), _num(s.energy), _num(s.success_probability), _num(s.norm), _num(s.gamma)]))
    if not trace.complete:
        lines.append(f"{INCOMPLETE_MARKER}: {trace.error or 'run did not finish'}")
    return "\n".join(lines) + "\n"


def read_trace(path) -> tuple[list[dict[str, float]], bool]:
    """Rows of a trace CSV and whether it ends with the incomplete marker."""
    rows, incomplete = [], False
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != TRACE_HEADER:
        raise ValueError(f"{path}: not a trace file (expected header {','.join(TRACE_HEADER)})")
    for lineno, line in enumerate(lines[1:], 2):
        if line.startswith(INCOMPLETE_MARKER):
            incomplete = True
            continue
        parts = line.split(",")
        if len(parts) != len(TRACE_HEADER):
            raise ValueError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} fields")
        rows.append({k: float(v) for k, v in zip(TRACE_HEADER, parts)})
    return rows, incomplete


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def summary_text(summary: dict) -> str:
    return json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"


# -- building the problem ----------------------------------------------------------------


@dataclass
class Target:
    name: str
    pauli: PauliSum
    nucleus: NucleusSpec | None = None
    sq: SecondQuantizedHamiltonian | None = None
    U0: float | None = None


def _nucleus_from(cfg: RunConfig) -> tuple[NucleusSpec, float | None]:
    sec = cfg.nucleus
    preset = get_preset(sec.preset) if sec.preset else None
    Z = sec.Z if sec.Z is not None else preset.Z
    A = sec.A if sec.A is not None else preset.A
    n_p = sec.proton_orbits or preset.n_proton_orbits
    # an explicit proton count without a neutron count applies to both species
    n_n = sec.neutron_orbits or (sec.proton_orbits if sec.proton_orbits else preset.n_neutron_orbits)
    name = cfg.run.name or (preset.symbol if preset else f"Z{Z}A{A}")
    return NucleusSpec.build(Z, A, n_p, n_n, name=name), (preset.U0 if preset else None)


def _depth(cfg: RunConfig, nucleus: NucleusSpec, preset_u0: float | None) -> float:
    u = cfg.field.U0
    if u == "preset":
        if preset_u0 is None:
            raise ConfigError("field.U0 = preset needs [nucleus] preset; give a depth in MeV", cfg.source)
        return preset_u0
    if u == "formula":
        return predict_u0(PAPER_PARAMS, nucleus.Z, nucleus.N)
    return float(u)


def build_target(cfg: RunConfig, with_pauli: bool = True) -> Target:
    if cfg.hamiltonian is not None:
        sec = cfg.hamiltonian
        if sec.builtin is not None:
            h = load_builtin(sec.builtin)
            name = cfg.run.name or sec.builtin
        else:
            path = cfg.resolve(sec.file)
            h = PauliSum.from_text(path.read_text(encoding="utf-8"))
            name = cfg.run.name or path.stem
        return Target(name, h)
    if cfg.nucleus is None:
        raise ConfigError("need a [nucleus] or [hamiltonian] section", cfg.source)
    nucleus, preset_u0 = _nucleus_from(cfg)
    U0 = _depth(cfg, nucleus, preset_u0)
    sq = assemble_hamiltonian(nucleus, MeanFieldParams(U0=U0), cfg.field.G, cfg.field.coulomb)
    pauli = map_to_qubits(sq) if with_pauli else None
    return Target(nucleus.name, pauli, nucleus, sq, U0)


def _parse_bits(text: str) -> str | tuple[str, str]:
    parts = text.split()
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise ConfigError(f"cannot read configuration {text!r}; use 'bits' or 'proton_bits neutron_bits'")


def initial_configuration(cfg: RunConfig, target: Target) -> dict[str, float]:
    sec = cfg.initial
    nucleus = target.nucleus
    if sec.reference == "hf":
        if target.sq is None:
            raise ConfigError("initial.reference = hf needs a nucleus; give explicit bits", cfg.source)
        ref = hartree_fock_bits(target.sq, nucleus)
    else:
        ref = _parse_bits(sec.reference)
    admix = []
    if sec.admixtures == "auto":
        if target.sq is not None:
            admix = [(default_admixture(target.sq, nucleus, ref if isinstance(ref, tuple) else None), sec.weight)]
    elif sec.admixtures != "none":
        for item in sec.admixtures.split(";"):
            item = item.strip()
            if not item:
                continue
            bits, _, w = item.partition(":")
            admix.append((_parse_bits(bits), float(w) if w else sec.weight))
    n_p = nucleus.catalog.n_proton_orbits if nucleus else None
    if n_p is None and isinstance(ref, str):
        n_p = len(ref)  # bare fixture: one register
    return initial_weights(ref, admix, nucleus, sec.strict, n_proton_orbits=n_p)


def _representation(cfg: RunConfig, target: Target) -> str:
    rep = cfg.solver.representation
    if rep == "auto":
        if target.nucleus is None or cfg.solver.mode == "circuit":
            return "full"
        return "full" if target.pauli.n_qubits <= FULL_SPACE_LIMIT else "sector"
    if rep == "sector" and target.nucleus is None:
        raise ConfigError("solver.representation = sector needs a nucleus", cfg.source)
    return rep


def _policy(cfg: RunConfig, h) -> tuple[GammaPolicy, str]:
    g = cfg.solver.gamma
    if g == "tuned":
        return GammaPolicy.fixed(tuned_gamma(h)), "tuned"
    if g == "auto":
        return GammaPolicy("auto", q=cfg.solver.q, Q=cfg.solver.Q), "auto"
    return GammaPolicy("fixed", gamma=float(g), q=cfg.solver.q, Q=cfg.solver.Q), "fixed"


def _noise(cfg: RunConfig) -> NoiseSpec:
    sec = cfg.noise
    return NoiseSpec(sec.kind, sec.scale, cfg.run.seed, sec.targets)


def oracle_energy(target: Target, sector: SectorHamiltonian | None = None) -> float:
    if target.nucleus is None:
        if target.pauli.n_qubits > 14:
            raise ValueError("fixture too large for the dense oracle")
        return float(np.linalg.eigvalsh(target.pauli.to_dense())[0])
    if sector is None:
        sector = SectorHamiltonian.from_second_quantized(target.sq, with_pauli=False)
    return ground_state(sector.matrix)[0]


@dataclass
class RunResult:
    summary: dict
    trace: IterationTrace
    ok: bool


def execute(cfg: RunConfig, outdir: Path | None = None) -> RunResult:
    """Build, iterate and write the configured artifacts."""
    target = build_target(cfg)
    rep = _representation(cfg, target)
    try:
        weights = initial_configuration(cfg, target)
    except ValueError as exc:
        raise ConfigError(f"[initial]: {exc}", cfg.source) from None
    noise = _noise(cfg)
    sector = None
    if rep == "sector" or (target.nucleus is not None and cfg.output.oracle):
        sector = SectorHamiltonian.from_second_quantized(target.sq, with_pauli=False)
        sector.pauli = target.pauli  # reuse the mapped form for the LCU weights
    if rep == "sector":
        h, start = sector, sector_vector(weights, sector.basis)
    else:
        h, start = target.pauli, StateVector.superposition(weights)
        if start.n_qubits != h.n_qubits:
            raise ConfigError(f"initial state has {start.n_qubits} qubits, Hamiltonian {h.n_qubits}", cfg.source)
    policy, gamma_source = _policy(cfg, h)

    summary = {
        "name": target.name,
        "representation": rep,
        "mode": cfg.solver.mode,
        "gamma_source": gamma_source,
        "seed": cfg.run.seed,
        "noise": {"kind": noise.kind, "scale": noise.scale, "targets": noise.targets},
        "n_qubits": target.pauli.n_qubits,
        "pauli_terms": len(target.pauli),
        "initial_state": {b: w for b, w in sorted(weights.items())},
    }
    if target.nucleus is not None:
        summary.update({"Z": target.nucleus.Z, "N": target.nucleus.N, "U0_MeV": target.U0})
    try:
        trace = run_gradient_descent(
            h,
            start,
            policy=policy,
            noise=noise,
            mode=cfg.solver.mode,
            max_iter=cfg.solver.max_iter,
            tol_keV=cfg.solver.tol_keV,
            nucleus=target.nucleus,
            project=cfg.solver.project,
            patience=cfg.solver.patience,
        )
        ok = True
    except SolverDivergence as exc:
        trace, ok = exc.trace, False
        summary["error"] = str(exc)

    summary.update(
        {
            "status": "complete" if trace.complete else "incomplete",
            "converged": trace.converged,
            "converged_step": trace.converged_step,
            "iterations": trace.n_iterations,
            "gamma": trace.steps[0].gamma if trace.steps else None,
            "final_energy_MeV": trace.final_energy if trace.steps else None,
            "warnings": list(trace.warnings),
        }
    )
    if cfg.output.oracle:
        exact = oracle_energy(target, sector)
        summary["oracle_energy_MeV"] = exact
        if trace.steps:
            summary["difference_MeV"] = trace.final_energy - exact
    summary["resources"] = asdict(estimate_resources(target.pauli, target.nucleus, name=target.name))

    def where(p):
        if p is None:
            return None
        if outdir is not None:
            return Path(outdir) / Path(p).name
        return Path(p)

    if cfg.output.pauli:
        atomic_write(where(cfg.output.pauli), target.pauli.to_text())
    if cfg.output.trace:
        atomic_write(where(cfg.output.trace), trace_csv(trace))
    if cfg.output.summary:
        atomic_write(where(cfg.output.summary), summary_text(summary))
    return RunResult(summary, trace, ok)


# -- subcommands -------------------------------------------------------------------------


def cmd_build(args) -> int:
    cfg = load_config(args.config)
    target = build_target(cfg)
    text = target.pauli.to_text()
    out = args.out or cfg.output.pauli
    if out:
        atomic_write(Path(out), text)
        print(f"{target.name}: {len(target.pauli)} Pauli terms on {target.pauli.n_qubits} qubits -> {out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    result = execute(cfg, Path(args.outdir) if args.outdir else None)
    sys.stdout.write(summary_text(result.summary))
    return 0 if result.ok else 1


def cmd_diag(args) -> int:
    cfg = load_config(args.config)
    target = build_target(cfg, with_pauli=cfg.hamiltonian is not None)
    if target.nucleus is None:
        energy = oracle_energy(target)
        dim = 1 << target.pauli.n_qubits
    else:
        sector = SectorHamiltonian.from_second_quantized(target.sq, with_pauli=False)
        energy = ground_state(sector.matrix)[0]
        dim = sector.dim
    sys.stdout.write(summary_text({"name": target.name, "oracle_energy_MeV": energy, "dimension": dim}))
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config) if args.config else parse_config("[fit]\n")
    sec = cfg.fit or parse_config("[fit]\n").fit
    names = [s.strip() for s in sec.nuclei.split(",") if s.strip()] or list(FIT_SET)
    experimental = {r.symbol: r for r in load_experimental()}
    records = []
    for name in names:
        preset = get_preset(name)
        rec = experimental.get(preset.symbol)
        if rec is None:
            raise ConfigError(f"no experimental energy for {name}", cfg.source)
        nucleus = preset.nucleus()
        records.append(fit_record(nucleus, rec.E_exp, name=preset.symbol, tol=sec.tol, guess=preset.U0,
                                  G=cfg.field.G, include_coulomb=cfg.field.coulomb))
        log.info("U*(%s) = %.4f MeV", preset.symbol, records[-1].U_star)
    min_norm = args.min_norm or sec.min_norm
    status = 0
    try:
        params = fit_parameters(records, min_norm=min_norm)
        report = format_report(records, params)
        if min_norm:
            report += "  (minimum-norm least-squares solution)\n"
    except RankDeficientError as exc:
        report = format_report(records, None) + f"\nfit failed: {exc}\n(rerun with --min-norm for the minimum-norm solution)\n"
        status = 1
    sys.stdout.write(report)
    if sec.report:
        atomic_write(Path(sec.report), report)
    return status


def cmd_resources(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        targets = [build_target(cfg)]
    else:
        targets = []
        for p in load_presets().values():
            nucleus = p.nucleus()
            sq = assemble_hamiltonian(nucleus, MeanFieldParams(U0=p.U0))
            targets.append(Target(p.symbol, map_to_qubits(sq), nucleus, sq, p.U0))
    if args.complexity:
        text = complexity_csv(complexity_table([(t.pauli, t.nucleus, t.name) for t in targets if t.nucleus]))
    else:
        text = resources_csv([estimate_resources(t.pauli, t.nucleus, name=t.name) for t in targets])
    if args.out:
        atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def compare_traces(a, b, tol: float = 1e-9) -> list[str]:
    """Differences between two trace files (empty when they agree within ``tol``)."""
    rows_a, inc_a = read_trace(a)
    rows_b, inc_b = read_trace(b)
    problems = []
    if inc_a != inc_b:
        problems.append(f"completeness differs: {a} {'in' if inc_a else ''}complete, {b} {'in' if inc_b else ''}complete")
    if len(rows_a) != len(rows_b):
        problems.append(f"step counts differ: {len(rows_a)} vs {len(rows_b)}")
    for ra, rb in zip(rows_a, rows_b):
        for key in TRACE_HEADER[1:]:
            x, y = ra[key], rb[key]
            if math.isnan(x) and math.isnan(y):
                continue
            if not abs(x - y) <= tol:
                problems.append(f"step {int(ra['step'])} {key}: {x!r} vs {y!r}")
    return problems


def cmd_trace_compare(args) -> int:
    problems = compare_traces(args.first, args.second, args.tol)
    if problems:
        for p in problems[:20]:
            print(p)
        if len(problems) > 20:
            print(f"... {len(problems) - 20} more")
        return 1
    print(f"traces agree within {args.tol}")
    return 0


def _batch_one(text: str, source: str | None, symbol: str, outdir: str) -> tuple[str, dict, bool]:
    cfg = parse_config(text, source)
    cfg = cfg.model_copy(
        update={
            "nucleus": cfg.nucleus.model_copy(update={"preset": symbol}) if cfg.nucleus else
            parse_config(f"[nucleus]\npreset = {symbol}\n").nucleus,
            "hamiltonian": None,
            "output": cfg.output.model_copy(
                update={"trace": f"{symbol}_trace.csv", "summary": f"{symbol}_summary.json", "pauli": None}
            ),
            "batch": None,
        }
    )
    result = execute(cfg, Path(outdir))
    return symbol, result.summary, result.ok


def cmd_batch(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    cfg = parse_config(text, args.config)
    sec = cfg.batch or parse_config("[batch]\n").batch
    names = list(load_presets()) if sec.presets.strip() == "all" else [s.strip() for s in sec.presets.split(",")]
    symbols = [get_preset(n).symbol for n in names]
    outdir = args.outdir or sec.outdir
    jobs = args.jobs or sec.jobs
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_batch_one, text, args.config, s, outdir) for s in symbols]
            results = [f.result() for f in futures]
    else:
        results = [_batch_one(text, args.config, s, outdir) for s in symbols]
    status = 0
    for symbol, summary, ok in results:
        diff = summary.get("difference_MeV")
        diff_txt = f"{diff:+.3e}" if isinstance(diff, float) else "n/a"
        print(f"{symbol:<5} E={summary['final_energy_MeV']:.6f} MeV  iterations={summary['iterations']:>5}  "
              f"vs oracle {diff_txt}  [{summary['status']}]")
        status |= 0 if ok else 1
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcushell", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="assemble the Hamiltonian and dump its Pauli form")
    p.add_argument("config")
    p.add_argument("--out", help="write the Pauli text here (default: [output] pauli or stdout)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="run the gradient-descent iteration")
    p.add_argument("config")
    p.add_argument("--outdir", help="write the artifacts into this directory instead")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diag", help="exact ground energy from the oracle")
    p.add_argument("config")
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("fit", help="fit the depth formula to experimental energies")
    p.add_argument("config", nargs="?")
    p.add_argument("--min-norm", action="store_true", help="accept a rank-deficient design (minimum-norm solution)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("resources", help="qubit and gate counts (all presets without a config)")
    p.add_argument("config", nargs="?")
    p.add_argument("--complexity", action="store_true", help="add the classical comparison columns")
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("trace-compare", help="compare two trace CSVs")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_trace_compare)

    p = sub.add_parser("batch", help="run every listed preset with one config as template")
    p.add_argument("config")
    p.add_argument("--outdir")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
