"""Command line interface: ``polyrep <command> GAME``.

GAME is a path to a game file or the name of a bundled example (``ex1``,
``ex2``). Reports are JSON documents written to stdout or to ``--output``;
relative output paths are resolved against ``$POLYREP_OUTPUT_DIR`` when set.

Exit codes: 0 success, 1 runtime failure, 2 parse error, 3 semantic error,
4 an ``--expect`` assertion failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import core
from .conservative import (ConservativeDecomposition, NotConservative, detect_conservative,
                           formal_equilibria, hamiltonian_identity_residual, make_conservative,
                           verify_conservative)
from .core import (GameError, PolymatrixGame, center, games_equivalent, is_interior, is_skew,
                   random_interior_point, random_rational_interior_point, to_model)
from .dynamics import IntegratorConfig, classify_vertices, integrate, monitor_report
from .gamefile import (GameFile, GameSemanticError, GameSyntaxError, dump_report, format_number,
                       parse_game_file)
from .linalg import NoSolution, scale_last_nonzero, to_fraction
from .poisson import (build_poisson_data, casimir_gradients, check_poisson_map, hamiltonian_field,
                      jacobi_residual, leaf_invariant)

EXAMPLES = ("ex1", "ex2")
OUTPUT_DIR_ENV = "POLYREP_OUTPUT_DIR"
EXIT_RUNTIME, EXIT_SYNTAX, EXIT_SEMANTIC, EXIT_EXPECT = 1, 2, 3, 4
EXPECT_KEY = "expectation_failed"


def example_text(name: str) -> str:
    return resources.files("polyrep").joinpath("data", f"{name}.game").read_text()


def load_game_file(source: str) -> GameFile:
    if source in EXAMPLES and not Path(source).exists():
        return parse_game_file(example_text(source))
    try:
        text = Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise GameSyntaxError(f"cannot read {source}: {exc.strerror}", 0, 0) from None
    return parse_game_file(text)


def output_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        output_path(path).write_text(text)


# -- shared pieces ----------------------------------------------------------


def decomposition(gf: GameFile, G: PolymatrixGame):
    """Declared decomposition if the file has one, else the detected one."""
    if gf.skew_model is not None and gf.model_point is not None:
        G1, dec = make_conservative(gf.skew_model, gf.signature, gf.model_point)
        return dec, "declared"
    if gf.skew_model is not None and gf.scaling is not None and gf.equilibrium is not None:
        dec = ConservativeDecomposition(np.array(gf.skew_model, dtype=object),
                                        tuple(gf.scaling), np.array(gf.equilibrium, dtype=object))
        return dec, "declared"
    return detect_conservative(G), "detected"


def skew_model_game(gf: GameFile, G: PolymatrixGame) -> PolymatrixGame:
    if gf.skew_model is not None:
        return gf.skew_game()
    if is_skew(G.payoff):
        return G
    dec = detect_conservative(G)
    if isinstance(dec, NotConservative):
        raise GameSemanticError("payoff is not skew-symmetric, no skew_model given and "
                                f"the game is not conservative ({dec.reason})")
    return dec.model_game(G.signature)


def poisson_data(gf: GameFile, G0: PolymatrixGame):
    return build_poisson_data(G0, incidence=gf.incidence)


def _model_direction(sig, v):
    return scale_last_nonzero(to_model(sig, v), Fraction(-1))


def equilibrium_section(G: PolymatrixGame) -> dict:
    try:
        fe = formal_equilibria(G)
    except NoSolution:
        return {"exists": False}
    sig = G.signature
    return {
        "exists": True,
        "representative": fe.q,
        "representative_model": to_model(sig, fe.q),
        "interior_exists": fe.interior,
        "dimension": fe.dimension,
        "directions_model": [_model_direction(sig, v) for v in fe.nullspace],
    }


def poisson_section(pd) -> dict:
    return {"incidence": pd.E, "B": pd.B, "rank": pd.rank, "kernel": list(pd.kernel)}


def vertex_section(G: PolymatrixGame) -> list:
    sig = G.signature
    out = []
    for vr in classify_vertices(G):
        point = core.vertex_point(sig, vr.support)
        out.append({
            "point": point,
            "model": to_model(sig, point),
            "rates": {str(i + 1): r for i, r in vr.rates.items()},
            "class": vr.classification,
        })
    return out


def residual_sweep(G: PolymatrixGame, G0: PolymatrixGame, dec, samples: int, seed: int) -> dict:
    """Maximum Jacobi, Poisson-map and Hamiltonian-identity residuals over random points."""
    rng = np.random.default_rng(seed)
    sig = G.signature
    fd, ex, pm, hi = 0.0, Fraction(0), 0.0, 0.0
    for _ in range(samples):
        x = random_interior_point(sig, rng)
        fd = max(fd, float(jacobi_residual(G0, x, mode="fd")))
        xr = random_rational_interior_point(sig, rng)
        ex = max(ex, jacobi_residual(G0, xr, mode="exact"))
        u = rng.normal(size=sig.n - sig.p)
        pm = max(pm, float(check_poisson_map(G0, u)))
        if dec is not None:
            hi = max(hi, float(hamiltonian_identity_residual(G, dec, x)))
    out = {"samples": samples, "seed": seed, "jacobi_exact": ex, "jacobi_fd": fd,
           "poisson_map": pm}
    if dec is not None:
        out["hamiltonian_identity"] = hi
    return out


def integrator_config(gf: GameFile, args=None) -> IntegratorConfig:
    kw = {}
    for key in ("rtol", "atol", "max_step", "method", "mode"):
        v = getattr(args, key, None) if args is not None else None
        if v is None:
            v = getattr(gf, key)
        if v is not None:
            kw[key] = float(v) if isinstance(v, Fraction) else v
    return IntegratorConfig(**kw)


# -- commands ---------------------------------------------------------------


def cmd_info(args) -> dict:
    gf = load_game_file(args.game)
    G = gf.game()
    sig = G.signature
    return {
        "command": "info",
        "name": gf.name,
        "signature": list(sig.parts),
        "groups": sig.p,
        "strategies": sig.n,
        "blocks": [{"group": a + 1, "strategies": [s.start + 1, s.stop]}
                   for a, s in enumerate(sig.slices)],
        "exact": G.exact,
        "payoff_skew": is_skew(G.payoff),
        "has_skew_model": gf.skew_model is not None,
        "payoff": G.payoff,
    }


def cmd_equilibrium(args) -> dict:
    G = load_game_file(args.game).game()
    sec = equilibrium_section(G)
    report = {"command": "equilibrium", "formal_equilibria": sec}
    if args.expect:
        ok = {"exists": sec["exists"], "none": not sec["exists"],
              "interior": sec.get("interior_exists", False),
              "exterior": sec["exists"] and not sec["interior_exists"]}[args.expect]
        if not ok:
            report[EXPECT_KEY] = f"expected {args.expect} formal equilibrium"
    return report


def _decomposition_section(G, dec, origin) -> dict:
    if isinstance(dec, NotConservative):
        return {"conservative": False, "origin": origin, "reason": dec.reason}
    verdict = verify_conservative(G, dec)
    sig = G.signature
    return {
        "conservative": bool(verdict),
        "origin": origin,
        "reason": verdict.reason,
        "scaling": list(dec.lam),
        "skew_model": dec.A0,
        "equilibrium": dec.q,
        "equilibrium_model": to_model(sig, dec.q),
        "equilibrium_interior": is_interior(dec.q),
        "residuals": verdict.residuals,
    }


def cmd_conservative(args) -> dict:
    gf = load_game_file(args.game)
    G = gf.game()
    dec, origin = decomposition(gf, G)
    sec = _decomposition_section(G, dec, origin)
    if origin == "declared" and not sec["conservative"]:
        det = detect_conservative(G)
        sec["detected"] = _decomposition_section(G, det, "detected")
    report = {"command": "conservative", "decomposition": sec}
    if args.expect:
        want = args.expect == "conservative"
        got = sec["conservative"] or sec.get("detected", {}).get("conservative", False)
        if got != want:
            report[EXPECT_KEY] = f"expected {args.expect}"
    return report


def cmd_poisson_check(args) -> dict:
    gf = load_game_file(args.game)
    G = gf.game()
    G0 = skew_model_game(gf, G)
    dec, _ = decomposition(gf, G)
    if isinstance(dec, NotConservative):
        dec = None
    res = residual_sweep(G, G0, dec, args.samples, args.seed)
    passed = (res["jacobi_exact"] == 0 and res["jacobi_fd"] <= args.fd_tol
              and res["poisson_map"] <= args.map_tol
              and res.get("hamiltonian_identity", 0.0) <= args.hamiltonian_tol)
    res["thresholds"] = {"jacobi_fd": args.fd_tol, "poisson_map": args.map_tol,
                         "hamiltonian_identity": args.hamiltonian_tol}
    res["pass"] = passed
    report = {"command": "poisson-check", "residuals": res}
    if args.expect and not passed:
        report[EXPECT_KEY] = "poisson check exceeded a threshold"
    return report


def _parse_point(text: str, n: int) -> np.ndarray:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != n:
        raise GameSemanticError(f"point has {len(parts)} entries, expected {n}")
    try:
        return np.array([to_fraction(p) for p in parts], dtype=object)
    except (ValueError, ZeroDivisionError):
        raise GameSyntaxError(f"cannot parse point {text!r}", 0, 0) from None


def cmd_leaves(args) -> dict:
    gf = load_game_file(args.game)
    G = gf.game()
    G0 = skew_model_game(gf, G)
    pd = poisson_data(gf, G0)
    sig = G.signature
    if args.point:
        x = _parse_point(args.point, sig.n)
    elif gf.x0 is not None:
        x = np.array(gf.x0, dtype=object)
    else:
        x = center(sig)
    x = core.check_prism_point(sig, x)
    if not is_interior(x):
        raise GameSemanticError("leaf invariants need an interior point")
    xf = x.astype(float)
    cas = max((float(np.max(np.abs(hamiltonian_field(G0, g, xf)))) for g in casimir_gradients(pd, xf)),
              default=0.0)
    return {"command": "leaves", "poisson": poisson_section(pd), "point": x,
            "leaf_invariant": leaf_invariant(pd, xf), "casimir_field_max": cas}


def trajectory_table(traj) -> str:
    n = traj.x.shape[1]
    k = 0 if traj.leaf is None else traj.leaf.shape[1]
    header = ["t"] + [f"x_{i + 1}" for i in range(n)]
    header += ["H"] if traj.H is not None else []
    header += [f"c_{j + 1}" for j in range(k)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in range(len(traj)):
        row = [traj.t[r], *traj.x[r]]
        if traj.H is not None:
            row.append(traj.H[r])
        if k:
            row.extend(traj.leaf[r])
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def run_integration(gf: GameFile, G: PolymatrixGame, x0, t_span, cfg, samples=None):
    sig = G.signature
    dec, _ = decomposition(gf, G)
    H = None if isinstance(dec, NotConservative) else dec.hamiltonian(sig)
    pd = None
    try:
        pd = poisson_data(gf, skew_model_game(gf, G))
    except GameSemanticError:
        pass
    t_eval = None if samples is None else np.linspace(t_span[0], t_span[1], samples)
    traj = integrate(G, x0, t_span, cfg, t_eval=t_eval)
    if traj.interior:
        traj.attach_monitors(H, pd)
    return traj, H, pd


def cmd_integrate(args) -> dict | None:
    gf = load_game_file(args.game)
    G = gf.game()
    sig = G.signature
    if args.x0:
        x0 = _parse_point(args.x0, sig.n).astype(float)
    elif gf.x0 is not None and args.seed is None:
        x0 = np.array([float(v) for v in gf.x0])
    else:
        x0 = random_interior_point(sig, np.random.default_rng(args.seed or 0))
    t0 = args.t0 if args.t0 is not None else float(gf.t_span[0]) if gf.t_span else 0.0
    t1 = args.t1 if args.t1 is not None else float(gf.t_span[1]) if gf.t_span else 100.0
    traj, _, _ = run_integration(gf, G, x0, (t0, t1), integrator_config(gf, args), args.samples)
    if args.stride > 1:
        keep = np.r_[np.arange(0, len(traj) - 1, args.stride), len(traj) - 1]
        traj.t, traj.x = traj.t[keep], traj.x[keep]
        traj.H = None if traj.H is None else traj.H[keep]
        traj.leaf = None if traj.leaf is None else traj.leaf[keep]
    emit(trajectory_table(traj), args.output)
    return None


def example_report(name: str, samples: int = 100, seed: int = 0) -> dict:
    """Full analysis of a bundled example."""
    gf = parse_game_file(example_text(name))
    G = gf.game()
    sig = G.signature
    G1, dec = make_conservative(gf.skew_model, sig, gf.model_point)
    verdict = verify_conservative(G, dec)
    detected = detect_conservative(G)
    G0 = dec.model_game(sig)
    pd = poisson_data(gf, G0)

    cfg = integrator_config(gf)
    x0 = np.array([float(v) for v in gf.x0])
    t_span = (float(gf.t_span[0]), float(gf.t_span[1]))
    traj, H, _ = run_integration(gf, G, x0, t_span, cfg)
    mon = monitor_report(traj, H, pd)
    vertices = vertex_section(G)
    integration = {
        "x0": gf.x0, "t_span": gf.t_span, "rtol": cfg.rtol, "mode": traj.mode,
        "steps": traj.steps, "rejected": traj.rejected,
        "final_state": traj.x[-1],
        "hamiltonian_drift": mon.hamiltonian_drift,
        "leaf_drift": mon.leaf_drift,
        "block_sum_deviation": mon.block_sum_deviation,
    }
    sinks = [v for v in vertices if v["class"] == "sink"]
    if sinks:
        s = np.array([float(v) for v in sinks[0]["point"]])
        integration["distance_to_sink"] = float(np.max(np.abs(traj.x[-1] - s)))

    return {
        "command": "example",
        "example": name,
        "signature": list(sig.parts),
        "payoff": G.payoff,
        "skew_model": dec.A0,
        "reconstruction": {
            "model_point": gf.model_point,
            "scaling": list(dec.lam),
            "payoff_matches": bool(G1 == G),
            "verdict": verdict.reason or "conservative",
        },
        "equilibrium": {
            "q": dec.q,
            "q_model": to_model(sig, dec.q),
            "interior": is_interior(dec.q),
        },
        "equilibrium_line": equilibrium_section(G),
        "detection": _decomposition_section(G, detected, "detected"),
        "poisson": poisson_section(pd),
        "vertices": vertices,
        "repellers": [v["model"] for v in vertices if v["class"] == "repeller"],
        "sinks": [v["model"] for v in sinks],
        "residuals": residual_sweep(G, G0, dec, samples, seed),
        "integration": integration,
        "equivalent_to_skew_times_scaling": games_equivalent(G, G1),
    }


def cmd_example(args) -> dict:
    report = example_report(args.name, args.samples, args.seed)
    if args.trajectory:
        gf = parse_game_file(example_text(args.name))
        G = gf.game()
        traj, _, _ = run_integration(gf, G, [float(v) for v in gf.x0],
                                     [float(v) for v in gf.t_span], integrator_config(gf),
                                     samples=args.trajectory_samples)
        emit(trajectory_table(traj), args.trajectory)
    return report


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyrep", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        p.add_argument("-o", "--output", help="write the report here instead of stdout")
        return p

    p = add("info", cmd_info, "signature, blocks and skewness")
    p.add_argument("game")
    p = add("equilibrium", cmd_equilibrium, "formal equilibria")
    p.add_argument("game")
    p.add_argument("--expect", choices=("exists", "none", "interior", "exterior"))
    p = add("conservative", cmd_conservative, "verify or detect a conservative decomposition")
    p.add_argument("game")
    p.add_argument("--expect", choices=("conservative", "not-conservative"))
    p = add("poisson-check", cmd_poisson_check, "Jacobi and Poisson-map residual sweeps")
    p.add_argument("game")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--fd-tol", type=float, default=1e-6)
    p.add_argument("--map-tol", type=float, default=1e-12)
    p.add_argument("--hamiltonian-tol", type=float, default=1e-11)
    p.add_argument("--expect", action="store_true", help="exit 4 if a threshold is exceeded")
    p = add("leaves", cmd_leaves, "reduced matrix B, its kernel and leaf invariants")
    p.add_argument("game")
    p.add_argument("--point", help="comma separated prism point, rationals allowed")
    p = add("integrate", cmd_integrate, "write a trajectory table (CSV)")
    p.add_argument("game")
    p.add_argument("--x0")
    p.add_argument("--seed", type=int, help="random interior start (overrides the file's x0)")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--samples", type=int, help="evenly spaced output times instead of steps")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--max-step", dest="max_step", type=float)
    p.add_argument("--method", choices=("dopri5", "rk4"))
    p.add_argument("--mode", choices=("auto", "chart", "prism"))
    p = add("example", cmd_example, "full report for a bundled example")
    p.add_argument("name", choices=EXAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--trajectory", help="also write the example orbit as CSV")
    p.add_argument("--trajectory-samples", type=int, default=2001)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = args.fn(args)
    except GameSyntaxError as exc:
        print(f"polyrep: syntax error: {exc}", file=sys.stderr)
        return EXIT_SYNTAX
    except (GameSemanticError, GameError) as exc:
        print(f"polyrep: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except Exception as exc:  # one-line diagnostic instead of a traceback
        print(f"polyrep: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if report is None:
        return 0
    failed = report.get(EXPECT_KEY)
    emit(dump_report(report), args.output)
    if failed:
        print(f"polyrep: expectation failed: {failed}", file=sys.stderr)
        return EXIT_EXPECT
    return 0


if __name__ == "__main__":
    sys.exit(main())
