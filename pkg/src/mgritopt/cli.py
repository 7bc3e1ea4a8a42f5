"""Command-line front end: ``mgritopt {seq,mgrit,tables,speedup}``.

Settings come from built-in defaults, then an optional TOML file
(``--config``), then flags.  Every command that takes ``--out`` also writes a
``manifest.toml`` with the resolved settings, which reproduces the run when
passed back through ``--config``.

Exit status: 0 converged, 2 stalled or out of iterations, 1 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, speedup
from .mgrit import MGRITConfig, adaptive_horizon_solve, mgrit_solve, snapshot_csv
from .problems import KINDS, build_problem
from .sequential import run_sequential

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2

DEFAULTS = {
    "problem": "mp1",
    "n": 40,
    "m": "4",
    "levels": "2",
    "nt": None,
    "tol": 1e-8,
    "lambda": 900.0,
    "seed": 0,
    "alpha": None,
    "threads": None,
    "out": None,
    "max_iter": 100,
    "variant": "auto",
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_int_list(text) -> list[int]:
    """``"4"``, ``"4,16,64"`` or an inclusive range ``"2..7"``."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"empty range {part!r}")
            out.extend(range(a, b + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError(f"no values in {text!r}")
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=KINDS)
    p.add_argument("--n", type=int, help="interior points per direction")
    p.add_argument("--m", help="coarsening factor(s), e.g. 4 or 4,16,64")
    p.add_argument("--levels", help="level count(s), e.g. 2 or 2..7")
    p.add_argument("--nt", type=int, help="fine intervals (default: sequential N_t)")
    p.add_argument("--tol", type=float, help="relative tolerance")
    p.add_argument("--lambda", dest="lambda", type=float, help="penalty weight (MP2)")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, help="cost ratio t_c/t_f (skip measuring)")
    p.add_argument("--threads", type=int, help="worker threads (env MGRITOPT_THREADS)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="TOML settings file")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--variant", choices=("auto", "fas", "linear"))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mgritopt", description="MGRIT for fixed-step optimization methods")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("seq", help="run the sequential optimizer")
    _common(s)

    s = sub.add_parser("mgrit", help="run MGRIT")
    _common(s)
    s.add_argument("--adaptive", type=int, metavar="H0",
                   help="adaptive windows starting from horizon H0")
    s.add_argument("--growth", choices=("rate", "double"), default="rate")
    s.add_argument("--figures", action="store_true", help="write figure CSVs to --out")
    s.add_argument("--record-times", action="store_true", help="include wall times")

    s = sub.add_parser("tables", help="iteration-count tables")
    _common(s)

    s = sub.add_parser("speedup", help="speedup estimates")
    _common(s)
    s.add_argument("--nf", type=int, help="fine intervals N_f (default: sequential N_t)")
    s.add_argument("--nit", type=int, help="MGRIT iterations (default: run MGRIT at m*)")
    s.add_argument("--repetitions", type=int, default=200, help="timing repetitions")
    return p


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if cfg["threads"] is None and os.environ.get("MGRITOPT_THREADS"):
        cfg["threads"] = int(os.environ["MGRITOPT_THREADS"])
    if cfg["problem"] not in KINDS:
        raise ConfigError(f"unknown problem {cfg['problem']!r}")
    cfg["m"] = parse_int_list(cfg["m"])
    cfg["levels"] = parse_int_list(cfg["levels"])
    return cfg


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(str(v))


def write_manifest(cfg: dict, out: Path) -> None:
    lines = [f"{k} = {_toml_value(v)}" for k, v in cfg.items() if v is not None and k != "out"]
    (out / "manifest.toml").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _outdir(cfg) -> Path | None:
    if cfg["out"] is None:
        return None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out)
    return out


def _problem(cfg):
    return build_problem(cfg["problem"], int(cfg["n"]), int(cfg["seed"]), float(cfg["lambda"]))


def _sequential_nt(P, cfg) -> int:
    res = run_sequential(P, tol=cfg["tol"], store="none")
    if not res.converged:
        raise ConfigError("sequential optimizer did not reach the tolerance")
    return res.N_t


def _single(cfg, key) -> int:
    vals = cfg[key]
    if len(vals) != 1:
        raise ConfigError(f"--{key} takes a single value for this command")
    return vals[0]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def cmd_seq(args, cfg) -> int:
    P = _problem(cfg)
    res = run_sequential(P, tol=cfg["tol"])
    print(f"{P.kind} n={P.n}: N_t={res.N_t} converged={res.converged} "
          f"|G(u_0)|={res.grad_norms[0]:.6e} |G(u_N)|={res.grad_norms[-1]:.6e}")
    out = _outdir(cfg)
    if out is not None:
        _write_json(out / "seq_report.json", res.to_dict())
        res.trajectory.save(out / "trajectory.bin")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def _mgrit_config(cfg, m, levels, nt, **extra) -> MGRITConfig:
    return MGRITConfig(m=m, levels=levels, nt=nt, tol=cfg["tol"], max_iter=cfg["max_iter"],
                       variant=cfg["variant"], threads=cfg["threads"], **extra)


def cmd_mgrit(args, cfg) -> int:
    P = _problem(cfg)
    m, levels = _single(cfg, "m"), _single(cfg, "levels")
    out = _outdir(cfg)
    if args.adaptive is not None:
        mc = _mgrit_config(cfg, m, levels, max(args.adaptive, m ** (levels - 1)),
                           record_times=args.record_times)
        _, rep = adaptive_horizon_solve(P, mc, args.adaptive, growth=args.growth)
        print(f"adaptive: windows={len(rep.windows)} horizons={rep.horizons} "
              f"total={rep.total_points} |G|={rep.final_gradient_norm:.6e} "
              f"reason={rep.halted_reason}")
        if out is not None:
            _write_json(out / "adaptive_report.json", rep.to_dict())
        return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED

    nt = cfg["nt"] if cfg["nt"] is not None else _sequential_nt(P, cfg)
    mc = _mgrit_config(cfg, m, levels, nt, record_profiles=args.figures,
                       record_times=args.record_times)
    state, rep = mgrit_solve(P, mc)
    print(f"{P.kind} n={P.n} N_t={nt} m={m} levels={levels}: iterations={rep.iterations} "
          f"reason={rep.halted_reason} |r|={rep.residual_norms[-1]:.6e}")
    if out is not None:
        _write_json(out / "mgrit_report.json", rep.to_dict())
        if args.figures:
            for which in analysis.FIGURES:
                (out / f"{which}.csv").write_text(analysis.extract_figure_data(rep, which),
                                                  encoding="utf-8")
            # converged trajectory at the C-points
            (out / "trajectory.csv").write_text(snapshot_csv(state.U, state.c_indices),
                                                encoding="utf-8")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


TABLE_SENTINEL = "NC"


def cmd_tables(args, cfg) -> int:
    P = _problem(cfg)
    nt = cfg["nt"] if cfg["nt"] is not None else _sequential_nt(P, cfg)
    levels = cfg["levels"]
    header = ["problem", "n", "N_t", "m"] + [f"l={l}" for l in levels]
    rows = [header]
    print(",".join(header), flush=True)
    ok = True
    for m in cfg["m"]:
        row = [P.kind, str(P.n), str(nt), str(m)]
        for l in levels:
            if m < 2 or l < 2 or m ** (l - 1) > nt:
                row.append("")
                continue
            # fresh hierarchy and generator per cell
            _, rep = mgrit_solve(_problem(cfg), _mgrit_config(cfg, m, l, nt))
            if rep.converged:
                row.append(str(rep.iterations))
            else:
                row.append(TABLE_SENTINEL)
                ok = False
        rows.append(row)
        print(",".join(row), flush=True)
    text = "\n".join(",".join(r) for r in rows) + "\n"
    out = _outdir(cfg)
    if out is not None:
        (out / "tables.csv").write_text(text, encoding="utf-8")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_speedup(args, cfg) -> int:
    P = _problem(cfg)
    nf = args.nf if args.nf is not None else (cfg["nt"] or _sequential_nt(P, cfg))
    alpha = cfg["alpha"]
    timing = None
    if alpha is None:
        fine = P.fine_propagator()
        coarse = P.coarse_propagator(4 * P.step)
        timing = speedup.measure_alpha(fine, coarse, P.u0, repetitions=args.repetitions)
        alpha = timing.alpha
        print(f"measured alpha={alpha:.3f} (fine median {timing.fine.median:.3e}s, "
              f"coarse median {timing.coarse.median:.3e}s)")
    rows, ok = [], True
    for l in cfg["levels"]:
        m = speedup.optimal_m(l, nf, alpha)
        if m < 2 or m ** (l - 1) > nf:
            raise ConfigError(f"m*={m} is not usable with {l} levels and N_f={nf}")
        nit = args.nit
        if nit is None:
            _, rep = mgrit_solve(P, _mgrit_config(cfg, m, l, nf))
            ok = ok and rep.converged
            nit = rep.iterations
        rows.append(speedup.estimate(l, nf, alpha, nit, m))
    text = speedup.estimates_csv(rows)
    sys.stdout.write(text)
    out = _outdir(cfg)
    if out is not None:
        (out / "speedup.csv").write_text(text, encoding="utf-8")
        if timing is not None:
            _write_json(out / "alpha.json", timing.to_dict())
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


COMMANDS = {"seq": cmd_seq, "mgrit": cmd_mgrit, "tables": cmd_tables, "speedup": cmd_speedup}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"mgritopt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
