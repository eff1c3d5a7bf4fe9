"""Command-line driver: enumerate, diagonalize, report, find scars, build circuits.

Artifacts are cached in ``--out`` under names keyed by a hash of the settings
that determine them, so the expensive diagonalization is shared by commands.
Exit codes: 0 ok, 2 configuration error, 3 validation failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3

COMMANDS = ("enumerate", "spectrum", "report", "find-scars", "construct-singlets", "synthesize", "verify")

logger = logging.getLogger("rkscars")


class ConfigError(Exception):
    pass


class ValidationFailure(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    Lx: int
    Ly: int
    coupling: float = 1.0
    out: str = "rkscars-out"
    threads: int = 0
    sre: bool = True
    cluster_tol: float | None = None
    stab_tol: float = 1e-8
    scar_id: int | None = None

    def validate(self) -> None:
        for name, v in (("--lx", self.Lx), ("--ly", self.Ly)):
            if v < 2 or v % 2:
                raise ConfigError(f"{name} must be an even integer >= 2 (got {v})")
        if self.threads < 0:
            raise ConfigError("--threads must be >= 0")
        if self.cluster_tol is not None and self.cluster_tol <= 0:
            raise ConfigError("--cluster-tol must be positive")
        if not 0 < self.stab_tol < 1e-2:
            raise ConfigError("--stab-tol must lie in (0, 1e-2)")

    @property
    def tag(self) -> str:
        return f"{self.Lx}x{self.Ly}"

    def key(self, *fields: str) -> str:
        payload = {f: getattr(self, f) for f in ("Lx", "Ly") + fields}
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
        return f"{self.tag}-{digest}"

    @property
    def spectrum_key(self) -> str:
        return self.key("coupling")

    @property
    def scan_key(self) -> str:
        return self.key("coupling", "cluster_tol", "stab_tol")

    @property
    def outdir(self) -> Path:
        return Path(self.out)


# ---------------------------------------------------------------------------
# artifacts


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_sector(cfg: RunConfig):
    from .lattice import GaugeSector, build_geometry, enumerate_gauge_sector

    path = cfg.outdir / f"sector-{cfg.tag}.txt"
    if path.exists():
        sector = GaugeSector.from_text(path.read_text())
        if (sector.geometry.Lx, sector.geometry.Ly) == (cfg.Lx, cfg.Ly):
            logger.info("reusing %s", path)
            return sector
    sector = enumerate_gauge_sector(build_geometry(cfg.Lx, cfg.Ly))
    _write(path, sector.to_text())
    return sector


def _spectrum_path(cfg: RunConfig) -> Path:
    return cfg.outdir / f"spectrum-{cfg.spectrum_key}.npz"


def compute_spectrum(cfg: RunConfig):
    import numpy as np

    from .operators import build_hamiltonian, check_spectrum, diagonalize

    sector = load_sector(cfg)
    op = build_hamiltonian(sector, cfg.coupling)
    spectrum = diagonalize(op)
    residual, ortho = check_spectrum(op, spectrum)
    path = _spectrum_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        eigenvalues=spectrum.eigenvalues,
        eigenvectors=spectrum.eigenvectors,
        configs=sector.configs,
        coupling=np.array(cfg.coupling),
    )
    summary = {
        "lattice": cfg.tag,
        "lambda": cfg.coupling,
        "dim": len(sector),
        "max_residual_rel": f"{residual:.3e}",
        "max_orthogonality_error": f"{ortho:.3e}",
    }
    _write(path.with_suffix(".json"), _dump_json(summary))
    return spectrum, residual, ortho


def load_spectrum(cfg: RunConfig, validate: bool = True):
    import numpy as np

    from .operators import DiagonalizationError, Spectrum, build_hamiltonian, check_spectrum

    path = _spectrum_path(cfg)
    if not path.exists():
        raise ConfigError(f"no spectrum artifact for {cfg.tag} at lambda={cfg.coupling}; run `spectrum` first")
    sector = load_sector(cfg)
    data = np.load(path)
    if not np.array_equal(data["configs"], sector.configs):
        raise ValidationFailure(f"{path} was built over a different sector")
    spectrum = Spectrum(sector, data["eigenvalues"], data["eigenvectors"], float(data["coupling"]))
    if validate:
        try:
            check_spectrum(build_hamiltonian(sector, cfg.coupling), spectrum)
        except DiagonalizationError as exc:
            raise ValidationFailure(f"{path}: {exc}") from exc
    return spectrum


def run_scan(cfg: RunConfig, spectrum):
    from .scar_search import scan_all

    return scan_all(spectrum, cluster_tol=cfg.cluster_tol, sre=cfg.sre and spectrum.sector.geometry.N <= 16)


# ---------------------------------------------------------------------------
# commands


def cmd_enumerate(cfg: RunConfig) -> int:
    sector = load_sector(cfg)
    print(f"{cfg.tag}: {len(sector)} gauge-invariant configurations ({sector.geometry.N} links)")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    spectrum, residual, ortho = compute_spectrum(cfg)
    print(
        f"{cfg.tag} lambda={cfg.coupling}: {len(spectrum.eigenvalues)} eigenpairs, "
        f"residual {residual:.2e}, orthogonality {ortho:.2e}"
    )
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    from .diagnostics import spectrum_report
    from .report import report_csv

    spectrum = load_spectrum(cfg)
    scan = run_scan(cfg, spectrum)
    rows = spectrum_report(scan.canonical, sre_enabled=cfg.sre)
    path = _write(cfg.outdir / f"report-{cfg.scan_key}.csv", report_csv(rows))
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def _cross_validate(numeric, analytic, tol: float) -> list[str]:
    """Each analytic state must lie in the numeric n=0 span of its parity, and conversely."""
    import numpy as np

    problems = []
    for parity in {r.active_parity for r in numeric if r.kin_eigenvalue == 0} | {r.active_parity for r in analytic}:
        num = [r.state.amps for r in numeric if r.kin_eigenvalue == 0 and r.active_parity is parity]
        ana = [r.state.amps for r in analytic if r.active_parity is parity]
        if not num or not ana:
            problems.append(f"{parity.name.lower()}: {len(num)} numeric vs {len(ana)} analytic zero-mode scars")
            continue
        for label, src, dst in (("analytic", ana, num), ("numeric", num, ana)):
            Q, _ = np.linalg.qr(np.array(dst).T)
            for i, v in enumerate(src):
                resid = float(np.linalg.norm(v - Q @ (Q.conj().T @ v)))
                if resid > tol:
                    problems.append(f"{parity.name.lower()}: {label} state {i} leaves the other span (residual {resid:.2e})")
    return problems


def cmd_find_scars(cfg: RunConfig) -> int:
    from .singlets import enumerate_scar_states

    spectrum = load_spectrum(cfg)
    scan = run_scan(cfg, spectrum)
    analytic = enumerate_scar_states(spectrum.sector, coupling=cfg.coupling)
    problems = _cross_validate(scan.scars, analytic, cfg.stab_tol)
    records = [dict(r.to_json(), id=i) for i, r in enumerate(scan.scars)]
    records += [dict(r.to_json(), id=len(scan.scars) + i) for i, r in enumerate(analytic)]
    path = _write(cfg.outdir / f"scars-{cfg.scan_key}.json", _dump_json(records))
    print(f"{cfg.tag}: {scan.count} stabilizer sublattice scars, {len(analytic)} analytic singlet states -> {path}")
    for r in scan.scars:
        print(f"  E={r.energy:.6f} n={r.kin_eigenvalue:+d} parity={r.active_parity.name.lower()} support={r.support_size}")
    if problems:
        for p in problems:
            print(f"MISMATCH {p}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_construct_singlets(cfg: RunConfig) -> int:
    from .singlets import singlet_census

    sector = load_sector(cfg)
    out = {}
    for parity in ("even", "odd"):
        census = singlet_census(sector, parity)
        cs = census.config_set
        out[parity] = {
            "configs": len(cs),
            "labels": sorted(cs.label_string(lab) for lab in cs.labels),
            "valid_pairings": [[list(p) for p in d.pairs] for d, _ in census.valid],
            "invalid_pairings": [[list(p) for p in d.pairs] for d, _ in census.invalid],
            "span_rank": census.span_rank(),
        }
        print(
            f"{parity}: {len(cs)} sublattice configurations, {len(census.valid)} independent singlet states, "
            f"{len(census.invalid)} pairings with missing branches"
        )
    _write(cfg.outdir / f"singlets-{cfg.tag}.json", _dump_json(out))
    return EXIT_OK


def _load_scar(cfg: RunConfig):
    from .diagnostics import StateVector  # noqa: F401
    from .stabilizer_form import CanonicalStabilizerForm, synthesize_state

    path = cfg.outdir / f"scars-{cfg.scan_key}.json"
    if not path.exists():
        raise ConfigError("no scar artifact; run `find-scars` first")
    records = json.loads(path.read_text())
    if cfg.scar_id is None:
        raise ConfigError("--scar-id is required")
    match = [r for r in records if r["id"] == cfg.scar_id]
    if not match:
        raise ConfigError(f"unknown scar id {cfg.scar_id}; available: {[r['id'] for r in records]}")
    form = CanonicalStabilizerForm.from_json(match[0]["form"])
    return form, synthesize_state(form, load_sector(cfg))


def _build_circuit(form):
    from .clifford import synthesize_from_canonical_form, synthesize_two_branch

    if form.k == 1 and form.linear == (2,):
        return synthesize_two_branch(form.offset, form.offset ^ form.generators[0], form.n_qubits), "two-branch"
    return synthesize_from_canonical_form(form), "canonical-form"


def _verification_json(result, method: str, circuit) -> dict:
    return {
        "method": method,
        "passed": result.passed,
        "gate_counts": dict(sorted(circuit.counts().items())),
        "generators": list(result.generators),
        "expectations": [f"{v + 0.0:.12e}" for v in result.expectations],
    }


def cmd_synthesize(cfg: RunConfig) -> int:
    from .clifford import export_qasm, simulate, verify_preparation

    form, state = _load_scar(cfg)
    circuit, method = _build_circuit(form)
    result = verify_preparation(simulate(circuit), state)
    stem = cfg.outdir / f"circuit-{cfg.scan_key}-{cfg.scar_id}"
    _write(stem.with_suffix(".qasm"), export_qasm(circuit))
    _write(stem.with_suffix(".json"), _dump_json(circuit.to_json()))
    _write(Path(f"{stem}-verify.json"), _dump_json(_verification_json(result, method, circuit)))
    print(f"scar {cfg.scar_id}: {method} circuit {circuit.counts()}, verification {'pass' if result else 'FAIL'}")
    return EXIT_OK if result else EXIT_VALIDATION


def cmd_verify(cfg: RunConfig) -> int:
    """Re-check a stored circuit (or all of them) against its scar."""
    from .clifford import parse_qasm, simulate, verify_preparation

    path = cfg.outdir / f"scars-{cfg.scan_key}.json"
    if not path.exists():
        raise ConfigError("no scar artifact; run `find-scars` first")
    ids = [cfg.scar_id] if cfg.scar_id is not None else [r["id"] for r in json.loads(path.read_text())]
    failed = 0
    checked = 0
    for sid in ids:
        qasm = cfg.outdir / f"circuit-{cfg.scan_key}-{sid}.qasm"
        if not qasm.exists():
            if cfg.scar_id is not None:
                raise ConfigError(f"no circuit for scar {sid}; run `synthesize` first")
            continue
        _, state = _load_scar(RunConfig(**{**asdict(cfg), "scar_id": sid}))
        result = verify_preparation(simulate(parse_qasm(qasm.read_text())), state)
        checked += 1
        failed += not result
        print(f"scar {sid}: {'pass' if result else 'FAIL'} {[round(v, 9) for v in result.expectations]}")
    if not checked:
        raise ConfigError("no circuits to verify")
    return EXIT_VALIDATION if failed else EXIT_OK


HANDLERS = {
    "enumerate": cmd_enumerate,
    "spectrum": cmd_spectrum,
    "report": cmd_report,
    "find-scars": cmd_find_scars,
    "construct-singlets": cmd_construct_singlets,
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rkscars", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--lx", type=int, required=True)
    p.add_argument("--ly", type=int, required=True)
    p.add_argument("--lambda", dest="coupling", type=float, default=1.0)
    p.add_argument("--out", default="rkscars-out")
    p.add_argument("--threads", type=int, default=0, help="BLAS threads (0 = library default)")
    p.add_argument("--no-sre", dest="sre", action="store_false")
    p.add_argument("--cluster-tol", type=float, default=None)
    p.add_argument("--stab-tol", type=float, default=1e-8)
    p.add_argument("--scar-id", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = RunConfig(
        args.lx, args.ly, args.coupling, args.out, args.threads, args.sre, args.cluster_tol, args.stab_tol, args.scar_id
    )
    try:
        cfg.validate()
        if cfg.threads:
            # must precede the first numpy import in this process to take effect
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
                os.environ[var] = str(cfg.threads)
        return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
