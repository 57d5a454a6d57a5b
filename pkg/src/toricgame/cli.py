"""Command-line experiment runner.

Exit status: 0 success, 1 configuration error (JSON on stderr), 2 a check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import lemma1_probability, uniqueness_certificate
from .classical import closed_form_classical, optimal_classical
from .game import (
    exact_win_breakdown,
    play_rounds,
    play_simultaneous,
    round_rng,
    simultaneous_win_breakdown,
)
from .lattice import (
    HORIZONTAL_GAME,
    TorusLattice,
    instance_family,
    instance_from_json,
    instance_to_json,
    straight_instance,
    validate_instance,
)
from .stabilizer import prepare_cat_tableau
from .statevector import DenseState, prepare_cat_dense, prepare_full_cat

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2
DEFAULT_TOL = 1e-9


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class RunConfig:
    command: str
    instance: dict | None = None
    horizontal: dict | None = None
    backend: str | None = None
    rounds: int = 1000
    seed: int = 0
    modulus: int = 2
    teams: list[int] = field(default_factory=list)
    lattice: list[int] = field(default_factory=lambda: [3, 2])
    tol: float = DEFAULT_TOL
    workers: int = 1
    probes: int = 8
    straight_only: bool = False
    expect: float | None = None
    out: str | None = None

    def digest(self) -> str:
        data = asdict(self)
        data.pop("out")
        data.pop("workers")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def meta(self) -> dict:
        return {"version": __version__, "config_hash": self.digest(), "command": self.command}


def _parse_lattice(text: str) -> list[int]:
    try:
        lx, ly = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"lattice must look like 3x2, got {text!r}") from exc
    return [lx, ly]


def _parse_teams(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"teams must be integers separated by commas, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with an instance and run options")
    common.add_argument("--backend", choices=["tableau", "dense"])
    common.add_argument("--rounds", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--modulus", type=int)
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--teams", help="team count, or comma list for classical-opt")
    common.add_argument("--lattice", help="torus size as LXxLY, e.g. 3x2")
    common.add_argument("--tol", type=float)
    common.add_argument("--workers", type=int)

    parser = _Parser(prog="toricgame", description="Toric code nonlocal game experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("play", parents=[common], help="sampled rounds of the quantum strategy")
    exact = sub.add_parser("exact", parents=[common], help="exact winning probability on the cat state")
    exact.add_argument("--expect", type=float, help="fail with exit 2 unless the probability matches")
    sub.add_parser("classical-opt", parents=[common], help="classical optimum vs. closed form (CSV)")
    sub.add_parser("lemma1", parents=[common], help="closed form vs. direct simulation on a random state")
    uniq = sub.add_parser("uniqueness", parents=[common], help="fixed-space certificate (JSON)")
    uniq.add_argument("--probes", type=int)
    uniq.add_argument("--straight-only", action="store_true", default=None)
    sub.add_parser("simul", parents=[common], help="vertical and horizontal games on one shared state")
    return parser


def resolve_config(argv: list[str] | None) -> RunConfig:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "dual_loop" in data:
            data = {"instance": data}
        known = set(RunConfig.__dataclass_fields__) - {"command"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for key in ("backend", "rounds", "seed", "modulus", "out", "tol", "workers", "probes", "expect"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "straight_only", None):
        cfg.straight_only = True
    if args.teams is not None:
        cfg.teams = _parse_teams(args.teams)
    if args.lattice is not None:
        cfg.lattice = _parse_lattice(args.lattice)
    if cfg.instance is not None:
        cfg.modulus = int(cfg.instance.get("M", cfg.modulus)) if args.modulus is None else cfg.modulus
        cfg.instance = dict(cfg.instance, M=cfg.modulus)
    return cfg


def _check_config(cfg: RunConfig) -> None:
    if cfg.modulus < 2:
        raise ConfigError(f"modulus must be >= 2, got {cfg.modulus}")
    if cfg.rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {cfg.rounds}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if cfg.backend == "tableau" and cfg.modulus != 2:
        raise ConfigError("the tableau backend requires modulus 2")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")


def _instance(cfg: RunConfig, direction: str = "vertical"):
    data = cfg.horizontal if direction == HORIZONTAL_GAME else cfg.instance
    if data is not None:
        inst = instance_from_json(data)
    else:
        lattice = TorusLattice(*cfg.lattice)
        span = lattice.lx if direction != HORIZONTAL_GAME else lattice.ly
        T = cfg.teams[0] if cfg.teams else span
        if not 1 <= T <= span:
            raise ConfigError(f"cannot place {T} straight teams on a {lattice.lx}x{lattice.ly} torus")
        inst = straight_instance(lattice, range(T), 0, cfg.modulus, direction)
    problems = validate_instance(inst)
    if problems:
        raise ConfigError(f"invalid instance: {problems}")
    return inst


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cmd_play(cfg: RunConfig) -> int:
    inst = _instance(cfg)
    backend_name = cfg.backend or ("tableau" if cfg.modulus == 2 else "dense")
    if backend_name == "tableau":
        backend = prepare_cat_tableau(inst.lattice)
    else:
        backend = prepare_cat_dense(inst.lattice, cfg.modulus)
    log: list = []
    stats = play_rounds(inst, backend, cfg.rounds, cfg.seed, log, cfg.workers)
    summary = dict(cfg.meta(), backend=backend_name, instance=instance_to_json(inst), **stats.to_dict())
    if cfg.out:
        lines = [json.dumps({"meta": cfg.meta()})] + [r.to_json(i) for i, r in enumerate(log)]
        Path(cfg.out).write_text("\n".join(lines) + "\n")
        sys.stdout.write(_json(summary))
    else:
        for i, r in enumerate(log):
            sys.stdout.write(r.to_json(i) + "\n")
        sys.stderr.write(_json(summary))
    return EXIT_OK


def cmd_exact(cfg: RunConfig) -> int:
    inst = _instance(cfg)
    cat = prepare_cat_dense(inst.lattice, cfg.modulus)
    breakdown = exact_win_breakdown(inst, cat)
    p = sum(breakdown.values()) / len(breakdown)
    result = dict(
        cfg.meta(),
        instance=instance_to_json(inst),
        probability=p,
        per_input={",".join(map(str, a)): v for a, v in breakdown.items()},
    )
    _emit(cfg, _json(result))
    if cfg.expect is not None and abs(p - cfg.expect) > cfg.tol:
        return EXIT_CHECK
    return EXIT_OK


def cmd_classical_opt(cfg: RunConfig) -> int:
    teams = cfg.teams or [3]
    rows = [f"# version={__version__} config_hash={cfg.digest()}", "T,M,optimal_probability,closed_form,match"]
    ok = True
    for T in teams:
        value, _ = optimal_classical(T, cfg.modulus)
        if cfg.modulus == 2:
            closed = closed_form_classical(T)
            match = value == closed
            ok &= match
            rows.append(f"{T},{cfg.modulus},{value},{closed},{str(match).lower()}")
        else:
            rows.append(f"{T},{cfg.modulus},{value},na,na")
    _emit(cfg, "\n".join(rows) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_lemma1(cfg: RunConfig) -> int:
    inst = _instance(cfg)
    rng = np.random.default_rng(cfg.seed)
    state = DenseState.random(2, inst.lattice.n_bonds, rng)
    closed = lemma1_probability(state, inst)
    direct = sum(exact_win_breakdown(inst, state).values()) / (2 ** (inst.n_teams - 1))
    diff = abs(closed - direct)
    _emit(cfg, _json(dict(cfg.meta(), closed_form=closed, direct=direct, difference=diff)))
    return EXIT_OK if diff < cfg.tol else EXIT_CHECK


def cmd_uniqueness(cfg: RunConfig) -> int:
    lattice = TorusLattice(*cfg.lattice)
    family = instance_family(lattice, deformations=not cfg.straight_only)
    name = "straight" if cfg.straight_only else "straight+single-cell deformations"
    cert = uniqueness_certificate(lattice, family, cfg.probes, tol=1e-8, seed=cfg.seed, family_name=name)
    report = dict(cfg.meta(), lattice=cfg.lattice, **json.loads(cert.to_json()))
    _emit(cfg, _json(report))
    cats_ok = max(cert.cat_fixed_residuals) < 1e-8
    return EXIT_OK if cert.converged and cats_ok else EXIT_CHECK


def cmd_simul(cfg: RunConfig) -> int:
    if cfg.modulus != 2:
        raise ConfigError("simul runs on qubits only")
    vertical = _instance(cfg)
    horizontal = _instance(cfg, HORIZONTAL_GAME)
    state = prepare_full_cat(vertical.lattice, 2)
    breakdown = simultaneous_win_breakdown(vertical, horizontal, state)
    both = 0
    for i in range(cfg.rounds):
        rv, rh = play_simultaneous(vertical, horizontal, round_rng(cfg.seed, i), state)
        both += rv.won and rh.won
    p_min = min(breakdown.values())
    result = dict(cfg.meta(), exact_min_probability=p_min, rounds=cfg.rounds, both_won=both)
    _emit(cfg, _json(result))
    return EXIT_OK if abs(p_min - 1) < cfg.tol and both == cfg.rounds else EXIT_CHECK


COMMANDS = {
    "play": cmd_play,
    "exact": cmd_exact,
    "classical-opt": cmd_classical_opt,
    "lemma1": cmd_lemma1,
    "uniqueness": cmd_uniqueness,
    "simul": cmd_simul,
}


def run(cfg: RunConfig) -> int:
    _check_config(cfg)
    return COMMANDS[cfg.command](cfg)


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    except (ValueError, KeyError, TypeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
