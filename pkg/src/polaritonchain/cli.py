"""Command-line front end.

Subcommands ``eigenmap``, ``s21map``, ``analyze``, ``fit`` and ``validate``
write their results into ``--out`` together with a run manifest;
``replay`` re-executes a manifest.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 file system error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import closedform, entanglement, spectrum, transmission
from .core import ChipConfig, ConfigError, GridTooLargeError, NumericalError, load_config, validate_config
from .fitting import MODELS, read_trace_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _version() -> str:
    try:
        return version("polaritonchain")
    except PackageNotFoundError:
        return "unknown"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _round(obj):
    """Round every float in a JSON-like object to 12 significant digits."""
    if isinstance(obj, float):
        if not np.isfinite(obj):
            return str(obj)
        return float(_fmt(obj))
    if isinstance(obj, (np.floating, np.integer)):
        return _round(obj.item())
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_round(doc), indent=2) + "\n", encoding="utf-8")


def _grid(start: float, stop: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise ConfigError("number of steps must be at least 1")
    if steps == 1:
        return np.array([float(start)])
    if stop <= start:
        raise ConfigError("grid stop must exceed start")
    return np.linspace(start, stop, steps)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return transmission.default_threads()


def cmd_eigenmap(args, config: ChipConfig, out: Path) -> dict:
    B = _grid(args.B_start, args.B_stop, args.B_steps)
    basis = spectrum.basis_for(config)
    if args.sorted:
        sols = [spectrum.solve(config, b) for b in B]
        freqs = np.array([s.eigenvalues for s in sols]).T
        vecs = np.array([s.eigenvectors.T for s in sols]).transpose(1, 0, 2)
    else:
        branches = spectrum.track_branches(config, B, args.min_overlap)
        freqs = np.array([br.frequency for br in branches])
        vecs = np.array([br.eigenvectors for br in branches])
    path = out / "eigenmap.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["B_mT", "branch_index", "freq_MHz"] + [f"p_{lab}" for lab in basis.labels]) + "\n")
        for k, b in enumerate(B):
            for n in range(len(basis)):
                probs = [_fmt(p) for p in vecs[n, k] ** 2]
                fh.write(",".join([_fmt(b), str(n), _fmt(freqs[n, k])] + probs) + "\n")
    return {"outputs": [str(path)], "grids": {"B_mT": [float(B[0]), float(B[-1]), len(B)]}}


def cmd_s21map(args, config: ChipConfig, out: Path) -> dict:
    omega = _grid(args.omega_start, args.omega_stop, args.omega_steps)
    B = _grid(args.B_start, args.B_stop, args.B_steps)
    tmap = transmission.transmission_map(config, omega, B, normalize=args.normalize, threads=_threads(args),
                                         max_points=args.max_points)
    path = out / f"s21map.{args.format}"
    if args.format == "csv":
        tmap.to_csv(path)
    else:
        tmap.to_json(path)
    grids = {"omega_MHz": [float(omega[0]), float(omega[-1]), len(omega)], "B_mT": [float(B[0]), float(B[-1]), len(B)]}
    return {"outputs": [str(path)], "grids": grids}


def _by_label(config: ChipConfig, values: dict) -> dict:
    # (resonator index, mode) keys -> "label,mode"
    return {f"{config.lers[j].label},{mu}": v for (j, mu), v in values.items()}


def _pair_report(config: ChipConfig, B: float, pair: tuple[int, int]) -> dict:
    p, q = pair
    modes = spectrum.normal_modes(config, pair, B)
    rep = {
        "resonators": [config.lers[p].label, config.lers[q].label],
        "kappa_MHz": config.kappa_between(p, q),
        "normal_modes": {
            "omega_plus_MHz": modes.omega_plus,
            "omega_minus_MHz": modes.omega_minus,
            "phi_rad": modes.phi,
            "G_tilde_MHz": _by_label(config, modes.gtilde),
        },
    }
    hosts = [j for j in pair if config.spins[j] is not None]
    if len(hosts) == 1:
        inputs = closedform.remote_inputs(config, pair, B)
        cross = closedform.crossing_field(config, pair)
        rep["remote_coupling"] = {
            "host": config.lers[hosts[0]].label,
            "G_local_MHz": inputs.G_local,
            "delta_omega_r_MHz": inputs.delta_omega_r,
            "G_remote_MHz": closedform.remote_coupling(inputs),
            "predicted_gap_MHz": closedform.predicted_gap_one_spin(inputs),
        }
        rep["crossing_field"] = {
            "B_mT": cross.B,
            "Omega_S_MHz": cross.Omega_S,
            "bare_B_mT": cross.bare_B,
            "ratio": cross.ratio,
            "valid": cross.valid,
            "host_mode": cross.host_mode,
        }
    if hosts:
        disp = closedform.dispersive_shifts(config, B, pair)
        rep["dispersive"] = {
            "chi_MHz": _by_label(config, disp.shifts),
            "detuning_MHz": _by_label(config, disp.detunings),
            "ratio": _by_label(config, disp.ratios),
            "valid": disp.valid,
        }
    if len(hosts) == 2:
        th1 = spectrum.polariton_angle(p, config, B)
        th2 = spectrum.polariton_angle(q, config, B)
        kappa = config.kappa_between(p, q)
        rep["polariton_gap"] = {
            "theta_rad": [th1, th2],
            "J_plus_MHz": closedform.polariton_coupling(kappa, th1, th2),
            "gap_MHz": closedform.polariton_gap(kappa, th1, th2),
        }
        rep["spin_spin_J_MHz"] = closedform.effective_spin_spin_J(config, B, pair)
        rep["spin_spin_J_valid"] = disp.valid
    else:
        rep["spin_spin_J_MHz"] = 0.0
    return rep


def cmd_analyze(args, config: ChipConfig, out: Path) -> dict:
    B = args.B
    sol = spectrum.solve(config, B)
    basis = sol.basis
    pairs = sorted((i, j) for (i, j) in config.couplings if i < j)
    report = {
        "B_mT": B,
        "eigenvalues_MHz": sol.eigenvalues.tolist(),
        "level_spacings_MHz": np.diff(sol.eigenvalues).tolist(),
        "states": [dict((lab, w) for lab, w, _ in spectrum.probabilities(sol.vector(n), basis)) for n in range(len(sol))],
        "pairs": [_pair_report(config, B, pr) for pr in pairs],
    }
    if config.n_lers >= 2:
        ent_pair = pairs[0] if pairs else (0, 1)
        neg = [entanglement.negativity(entanglement.reduced_cavity_density_matrix(sol.vector(n), basis, ent_pair))
               for n in range(len(sol))]
        free = spectrum.solve(entanglement.photon_only_config(config), B)
        base = [entanglement.negativity(entanglement.reduced_cavity_density_matrix(free.vector(n), free.basis, ent_pair))
                for n in range(len(free))]
        report["negativity"] = {"resonators": [config.lers[i].label for i in ent_pair],
                                "eigenstates": neg, "spin_free_baseline": base}
    path = out / "analysis.json"
    _write_json(path, report)
    return {"outputs": [str(path)], "grids": {"B_mT": [B]}}


def _parse_fixed(items: list[str]) -> dict:
    fixed = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected NAME=VALUE, got {item!r}", "--fixed")
        try:
            fixed[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"not a number: {value!r}", f"--fixed {name}") from None
    return fixed


def cmd_fit(args, config: ChipConfig | None, out: Path) -> dict:
    if args.model not in MODELS:
        raise ConfigError(f"unknown model {args.model!r}; valid models: {', '.join(MODELS)}", "model")
    cls, needed = MODELS[args.model]
    fixed = _parse_fixed(args.fixed)
    missing = [n for n in needed if n not in fixed]
    if missing:
        raise ConfigError(f"model {args.model!r} needs fixed parameters {', '.join(missing)}", "--fixed")
    extra = [n for n in fixed if n not in needed]
    if extra:
        raise ConfigError(f"unexpected fixed parameters {', '.join(extra)}", "--fixed")
    trace = read_trace_csv(args.trace)
    kwargs = dict(fixed)
    if args.model == "resonance":
        kwargs["magnitude_only"] = args.magnitude_only or not trace.is_complex
    est = cls(**kwargs).fit(trace.x, trace.y, trace.weights)
    path = out / "fit.json"
    est.result_.to_json(path)
    return {"outputs": [str(path)], "grids": {}}


def cmd_validate(args, config: ChipConfig, out: Path) -> dict:
    basis = spectrum.basis_for(config)
    print(f"valid configuration: {config.n_lers} resonators, "
          f"{sum(s is not None for s in config.spins)} spin ensembles, basis {', '.join(basis.labels)}")
    return {"outputs": [], "grids": {}}


COMMANDS = {
    "eigenmap": cmd_eigenmap,
    "s21map": cmd_s21map,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
    "validate": cmd_validate,
}
NEEDS_CONFIG = {"eigenmap", "s21map", "analyze", "validate"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polaritonchain", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", type=Path, help="chip configuration JSON")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads for map generation (default: $POLARITON_THREADS or 1)")
    ap.add_argument("--max-points", type=int, default=transmission.DEFAULT_MAX_POINTS,
                    help="largest accepted map size")
    ap.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = ap.add_subparsers(dest="command", required=True)

    def field_grid(p, default_steps=401):
        p.add_argument("--B-start", type=float, required=True, help="mT")
        p.add_argument("--B-stop", type=float, required=True, help="mT")
        p.add_argument("--B-steps", type=int, default=default_steps)

    p = sub.add_parser("eigenmap", help="tracked eigenvalues and slot weights versus field")
    field_grid(p)
    p.add_argument("--sorted", action="store_true", help="plain energy ordering instead of overlap tracking")
    p.add_argument("--min-overlap", type=float, default=0.5)

    p = sub.add_parser("s21map", help="transmission map over frequency and field")
    p.add_argument("--omega-start", type=float, required=True, help="MHz")
    p.add_argument("--omega-stop", type=float, required=True, help="MHz")
    p.add_argument("--omega-steps", type=int, default=401)
    field_grid(p)
    p.add_argument("--normalize", action="store_true", help="divide by the largest |S21| of the map")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("analyze", help="closed-form couplings, gaps and negativities at one field")
    p.add_argument("--B", type=float, required=True, help="mT")

    p = sub.add_parser("fit", help="fit a model to a trace CSV")
    p.add_argument("model", help=f"one of: {', '.join(MODELS)}")
    p.add_argument("--trace", type=Path, required=True)
    p.add_argument("--fixed", action="append", default=[], metavar="NAME=VALUE",
                   help="fixed model parameter, e.g. g=2.001 (repeatable)")
    p.add_argument("--magnitude-only", action="store_true", help="fit |S21| only (resonance model)")

    sub.add_parser("validate", help="check a configuration file")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    return ap


def _run(args, config: ChipConfig | None) -> dict:
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    info = COMMANDS[args.command](args, config, out)
    if args.command == "validate":
        return info
    recorded = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in ("out",)}
    manifest = {
        "command": args.command,
        "arguments": recorded,
        "config": config.to_dict() if config is not None else None,
        "grids": info["grids"],
        "outputs": info["outputs"],
        "version": _version(),
        "duration_s": time.perf_counter() - start,
    }
    (out / f"{args.command}_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return info


def _replay(args) -> dict:
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    if doc.get("command") not in COMMANDS:
        raise ConfigError(f"manifest names unknown command {doc.get('command')!r}", "command")
    ns = argparse.Namespace(**doc["arguments"])
    for key in ("config", "trace"):
        if getattr(ns, key, None) is not None:
            setattr(ns, key, Path(getattr(ns, key)))
    ns.out = args.out
    config = validate_config(doc["config"]) if doc.get("config") is not None else None
    return _run(ns, config)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            _replay(args)
            return EXIT_OK
        config = None
        if args.command in NEEDS_CONFIG:
            if args.config is None:
                raise ConfigError("--config is required for this command", "--config")
            config = load_config(args.config)
        _run(args, config)
        return EXIT_OK
    except (ConfigError, GridTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
