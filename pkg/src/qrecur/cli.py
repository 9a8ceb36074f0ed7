"""Command-line interface.

Commands
--------
example NAME     shift-eig, cyclic or crossover toy models with closed-form comparison
site1d           site recurrence of a 1D coined walk, plus a state-versus-site curve
walk2d           eigenvalues of the origin return-probability matrix of a 2D walk
verify SUITE     seeded invariant checks (fast or full)

Exit codes: 0 ok, 1 verification failure, 2 invalid input, 3 resource budget.
A ``--config`` file of ``key = value`` lines overrides command-line flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .checks import TABLE_ROWS, run_suite
from .errors import MemoryBudgetError, RecurrenceError
from .linops import (
    CoinSpec1D,
    CoinSpec2D,
    NAMED_COINS,
    Subspace,
    build_cyclic_shift,
    build_shift_plus_flip,
)
from .monitor import (
    SCHEMA_VERSION,
    berry_phase_loop,
    first_return_until_decay,
    k_invariant,
    k_dim_minus_nu,
    mu_sequence,
    recurrence_report,
    renewal_mu_to_a,
    scalar_first_return,
    spectral_decompose,
    to_jsonable,
)
from .site1d import CurveTable, constant_coin_analytics, site_return_matrix, site_schur, site_tau_matrix, state_vs_site_curve
from .walk2d import DEFAULT_MEMORY_BUDGET, Walk2DJob, origin_mu_sequence, r_eigenvalues, subspace_curves_2d

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3
EXAMPLES = ("shift-eig", "cyclic", "crossover")
# horizon of the shift-plus-flip model; its amplitudes are periodic, so this is plenty
TOY_WIDTH = 200


class InputError(ValueError):
    pass


# --- helpers ---------------------------------------------------------------

def _write_json(out: Path | None, name: str, payload: dict) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable({"schema_version": SCHEMA_VERSION, **payload}), indent=2, sort_keys=True)
    (out / name).write_text(text + "\n")


def _write_csv(out: Path | None, name: str, table: CurveTable) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / name)


def _fmt(m) -> str:
    return np.array2string(np.asarray(m), precision=6, suppress_small=True)


def parse_complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise InputError(f"cannot read {text!r} as a complex number") from None


def parse_coins(text: str) -> tuple:
    return tuple(parse_complex(t) for t in str(text).split(",") if t.strip())


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from None
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{i}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    types = {a.dest: a.type for a in parser._actions if a.dest != "help"}
    for key, value in read_config(args.config).items():
        if key not in types:
            raise InputError(f"unknown config key {key!r}")
        conv = types[key]
        setattr(args, key, conv(value) if conv is not None else value)
    return args


# --- example ---------------------------------------------------------------

def _shift_eig_data():
    U, psi, phi = build_shift_plus_flip(TOY_WIDTH)
    V = Subspace.from_vectors(U.space, [psi, phi])
    mu = mu_sequence(U, V, TOY_WIDTH)
    return U, V, mu, renewal_mu_to_a(mu)


def crossover_point(mu_mats: np.ndarray, R: np.ndarray) -> dict:
    """Where the state and subspace return probabilities of ``sqrt(1 - b) psi + sqrt(b) phi`` cross."""
    def state(b):
        v = np.array([np.sqrt(1 - b), np.sqrt(b)])
        a = scalar_first_return(np.einsum("i,nij,j->n", v, mu_mats, v))
        return float(np.sum(np.abs(a) ** 2))

    def site(b):
        v = np.array([np.sqrt(1 - b), np.sqrt(b)])
        return float(np.vdot(v, R @ v).real)

    root = brentq(lambda b: state(b) - site(b), 0.05, 0.95, xtol=1e-15)
    return {"beta_sq": root, "expected": (5 - np.sqrt(17)) / 2, "state": state, "site": site}


def cmd_example(args) -> int:
    name = args.name
    out = Path(args.out) if args.out else None
    if name in ("shift-eig", "crossover"):
        U, V, mu, a = _shift_eig_data()
        rep = recurrence_report(a, recurrence_tol=args.tol, tail=args.tail)
        cross = crossover_point(mu.mats, rep.R_op)
        printed_R = np.diag([0.75, 0.5])
        printed_a = np.zeros((3, 2, 2))
        printed_a[1] = [[0, 1 / np.sqrt(2)], [1 / np.sqrt(2), 0]]
        printed_a[2] = [[0.5, 0], [0, 0]]
        comparison = {
            "R_expected": printed_R,
            "R_max_error": float(np.abs(rep.R_op - printed_R).max()),
            "a_hat_expected": printed_a,
            "a_hat_max_error": float(max(np.abs(a.mats[:3] - printed_a).max(), np.abs(a.mats[3:]).max())),
            "crossover_beta_sq": cross["beta_sq"],
            "crossover_expected": cross["expected"],
            "crossover_error": abs(cross["beta_sq"] - cross["expected"]),
        }
        print(f"R =\n{_fmt(rep.R_op)}")
        print(f"a_1 =\n{_fmt(a.mats[1])}\na_2 =\n{_fmt(a.mats[2])}")
        print(f"crossover |beta|^2 = {cross['beta_sq']:.12f} (expected {cross['expected']:.12f})")
        if name == "crossover":
            grid = np.linspace(0.0, 1.0, args.grid)
            rows = [[b, cross["state"](b), cross["site"](b)] for b in grid]
            table = CurveTable(("t", "state_return_prob", "site_return_prob"), np.array(rows))
            _write_csv(out, "crossover.csv", table)
            print(f"wrote {len(rows)} curve points" if out else table.to_csv())
        _write_json(out, f"{name}.json", {"example": name, "report": rep.as_dict(), "comparison": comparison})
        ok = comparison["R_max_error"] < 1e-10 and comparison["crossover_error"] < 1e-9
        return EXIT_OK if ok else EXIT_VERIFY
    # cyclic shift on three states, subspace span{|0>, |1>}
    U = build_cyclic_shift(3)
    V = Subspace.from_labels(U.space, [0, 1])
    a = first_return_until_decay(U, V)
    rep = recurrence_report(a, recurrence_tol=args.tol, tail=args.tail)
    dec = spectral_decompose(U)
    ks = {m: k_invariant(m, U, V, dec=dec, a=a).value for m in ("eigen_ranks", "frobenius_survival", "winding")}
    berry = berry_phase_loop(a, np.array([0.0, 1.0]))
    comparison = {
        "tau_expected": np.diag([1.0, 2.0]),
        "tau_max_error": float(np.abs(rep.tau_op - np.diag([1.0, 2.0])).max()),
        "avg_tau": rep.avg_tau,
        "K_by_method": ks,
        "dim_minus_nu": k_dim_minus_nu(dec, V),
        "berry_phase_state_1": berry,
    }
    print(f"tau =\n{_fmt(rep.tau_op)}\naverage tau = {rep.avg_tau}")
    print("K: " + ", ".join(f"{k}={v}" for k, v in ks.items()))
    _write_json(out, "cyclic.json", {"example": name, "report": rep.as_dict(), "comparison": comparison})
    ok = comparison["tau_max_error"] < 1e-10 and set(ks.values()) == {3}
    return EXIT_OK if ok else EXIT_VERIFY


# --- site1d ----------------------------------------------------------------

def _coin_spec_1d(args) -> CoinSpec1D:
    if args.coins:
        gammas = parse_coins(args.coins)
    elif args.coin is not None and args.lattice == "finite":
        if not args.sites:
            raise InputError("a finite lattice with a constant coin needs --sites")
        gammas = (parse_complex(args.coin),) * args.sites
    else:
        gammas = ()
    default = parse_complex(args.coin) if args.coin is not None and args.lattice != "finite" else 0j
    if args.lattice != "finite" and args.coin is None:
        raise InputError("infinite lattices need --coin for the sites outside the --coins window")
    if args.lattice == "finite" and not gammas:
        raise InputError("a finite lattice needs --coins or --coin with --sites")
    return CoinSpec1D(args.lattice, gammas, args.offset, default)


def cmd_site1d(args) -> int:
    spec = _coin_spec_1d(args)
    out = Path(args.out) if args.out else None
    s = site_schur(spec, args.site)
    R = site_return_matrix(s, order=args.nmax, tail=args.tail)
    tau = site_tau_matrix(s)
    payload = {
        "lattice": spec.kind,
        "site": args.site,
        "coins": list(spec.gammas),
        "default_coin": spec.default,
        "R_x": R.matrix,
        "R_eigenvalues": R.eigenvalues,
        "R_intervals": R.intervals,
        "extreme_qubits": R.eigenvectors.T,
        "tau_x": tau.matrix,
        "tau_divergent": tau.divergent,
        "tau_finite_qubit": tau.finite_qubit,
        "tau_finite_value": tau.finite_value,
        "tau_extremes": tau.extremes,
        "tau_average": tau.average,
    }
    if spec.kind != "finite" and not spec.gammas and spec.default != 0:
        cc = constant_coin_analytics(spec.default, 64)
        payload["constant_coin_norm_sq"] = cc.norm_sq
    print(f"R_x =\n{_fmt(R.matrix)}")
    for v, (lo, hi) in zip(R.eigenvalues, R.intervals):
        print(f"  eigenvalue {v:.10f} in [{lo:.10f}, {hi:.10f}]")
    if tau.matrix is not None:
        print(f"tau_x =\n{_fmt(tau.matrix)}\n  extremes {tau.extremes}, average {tau.average}")
    elif tau.finite_value is not None:
        print(f"tau(psi1) = {tau.finite_value}; other qubits diverge")
    else:
        print("expected return time diverges")

    def path(t):
        return np.cos(t) * R.eigenvectors[:, 0] + np.sin(t) * R.eigenvectors[:, 1]

    grid = np.linspace(0.0, np.pi / 2, args.grid)
    curve = state_vs_site_curve(spec, args.site, lambda t: tuple(path(t)), grid, order=min(args.nmax, 2048), tail=args.tail)
    _write_csv(out, "site1d_curve.csv", curve)
    _write_json(out, "site1d.json", payload)
    return EXIT_OK


# --- walk2d ----------------------------------------------------------------

def _nested_frames(d: int):
    """Path psi(t) = cos t e_0 + sin t e_1 inside a chain of coordinate subspaces."""
    def frames(t):
        psi = np.zeros(d, dtype=complex)
        psi[0], psi[1] = np.cos(t), np.sin(t)
        perp = np.zeros(d, dtype=complex)
        perp[0], perp[1] = -np.sin(t), np.cos(t)
        ws = [psi[:, None], np.column_stack([psi, perp])]
        for k in range(2, d - 1):
            ws.append(np.column_stack([ws[-1], np.eye(d)[:, k]]))
        return ws
    return frames


def cmd_walk2d(args) -> int:
    try:
        spec = CoinSpec2D.named(args.lattice, args.coin)
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc)) from None
    out = Path(args.out) if args.out else None
    job = Walk2DJob(spec, args.nmax, args.tail, args.memory_budget, args.workers)
    mu = origin_mu_sequence(job)
    row = r_eigenvalues(job, mu)
    payload = {"coin": args.coin, **row.as_dict()}
    ref = TABLE_ROWS.get((args.lattice, args.coin))
    if ref is not None:
        payload["reference"] = list(ref)
        payload["max_deviation"] = float(np.abs(row.eigenvalues - np.array(ref)).max())
    print(f"{args.lattice} {args.coin} n_max={args.nmax}")
    for v, (lo, hi) in zip(row.eigenvalues, row.intervals):
        print(f"  {v:.6f}  [{lo:.6f}, {hi:.6f}]")
    if row.degenerate:
        print(f"  degenerate pairs: {row.degenerate}")
    if args.curves:
        grid = np.linspace(0.0, np.pi / 2, args.grid)
        table = subspace_curves_2d(mu, _nested_frames(spec.dim), grid, tail=args.tail)
        _write_csv(out, f"walk2d_{args.lattice}_{args.coin}_curves.csv", table)
    _write_json(out, f"walk2d_{args.lattice}_{args.coin}.json", payload)
    return EXIT_OK


# --- verify ----------------------------------------------------------------

def cmd_verify(args) -> int:
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    results = run_suite(args.suite, seed=args.seed, tol_scale=args.tol)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    _write_json(Path(args.out) if args.out else None, f"verify_{args.suite}.json", {
        "suite": args.suite,
        "seed": args.seed,
        # timings are left out so that repeated runs give identical files
        "results": [{k: v for k, v in r.__dict__.items() if k != "seconds"} for r in results],
    })
    return EXIT_VERIFY if failed else EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrecur", description="Monitored recurrence of quantum walks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tail=True):
        sp.add_argument("--config", help="key = value file overriding flags")
        sp.add_argument("--out", help="output directory for JSON/CSV files")
        if tail:
            sp.add_argument("--tail", choices=("none", "powerlaw"), default="powerlaw")

    ex = sub.add_parser("example", help="toy models with closed forms")
    ex.add_argument("name", nargs="?", choices=EXAMPLES)
    ex.add_argument("--model", dest="model", choices=EXAMPLES, help="alias for NAME")
    ex.add_argument("--tol", type=float, default=1e-6, help="recurrence tolerance")
    ex.add_argument("--grid", type=int, default=101, help="curve points (crossover)")
    common(ex)
    ex.set_defaults(func=cmd_example)

    s1 = sub.add_parser("site1d", help="site recurrence of a 1D coined walk")
    s1.add_argument("--lattice", choices=("half_line", "finite", "line"), required=True)
    s1.add_argument("--coin", help="constant coin parameter (outside the --coins window on infinite lattices)")
    s1.add_argument("--coins", help="comma-separated coin parameters of consecutive sites")
    s1.add_argument("--offset", type=int, default=0, help="site of the first --coins entry (line only)")
    s1.add_argument("--sites", type=int, help="number of sites for a constant-coin finite lattice")
    s1.add_argument("--site", type=int, default=0)
    s1.add_argument("--nmax", type=int, default=4096, help="Taylor order of the scalar Schur functions")
    s1.add_argument("--grid", type=int, default=33, help="curve points along the extreme-qubit path")
    common(s1)
    s1.set_defaults(func=cmd_site1d)

    w2 = sub.add_parser("walk2d", help="origin recurrence of a 2D coined walk")
    w2.add_argument("--lattice", choices=tuple(NAMED_COINS), required=True)
    w2.add_argument("--coin", required=True, help="grover, fourier or c0 (hexagonal)")
    w2.add_argument("--nmax", type=int, default=1024)
    w2.add_argument("--curves", action="store_true", help="also emit nested-subspace curves")
    w2.add_argument("--grid", type=int, default=33)
    w2.add_argument("--workers", type=int, default=1)
    w2.add_argument("--memory-budget", type=int, default=DEFAULT_MEMORY_BUDGET, help="bytes")
    common(w2)
    w2.set_defaults(func=cmd_walk2d)

    vf = sub.add_parser("verify", help="seeded invariant checks")
    vf.add_argument("suite", nargs="?", choices=("fast", "full"), default="fast")
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--tol", type=float, default=1.0, help="scale applied to every check tolerance")
    common(vf, tail=False)
    vf.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sp = parser._subparsers._group_actions[0].choices[args.command]
        args = apply_config(args, sp)
        if args.command == "example":
            args.name = args.name or args.model
            if args.name is None:
                raise InputError("example needs a name")
        return args.func(args)
    except MemoryBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InputError, RecurrenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
