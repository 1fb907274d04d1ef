"""Command-line front end: config parsing, subcommand dispatch, reports.

Subcommands: classify | decompose | transport | solve-potential |
solve-quasi | verify.  Exit codes: 0 success, 1 solver non-convergence or
partial continuation, 2 config/validation error, 3 IO error, 4 internal
invariant violation.  All file outputs are atomic (temp file + rename).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import field as fld
from . import gas, hodge, potential, quasipotential, regime, vorticity
from .errors import (ConfigError, DomainError, FormatError, InternalError,
                     NonConvergence, RangeError, SelfsimError,
                     SonicEncroachment)
from .field import Grid2D, ScalarField, VectorField
from .gas import GasLaw, GasVariant

_KNOWN_SECTIONS = {"gas", "grid", "boundary", "solver", "quasi", "output",
                   "seed", "strict"}
_KNOWN_KEYS = {
    "gas": {"a", "gamma", "rho_floor", "variant"},
    "grid": {"x0", "x1", "y0", "y1", "nx", "ny"},
    "boundary": {"kind", "K", "path", "table"},
    "solver": {"relax_theta", "tol_fixed_point", "max_iters", "lin_tol",
               "lin_max_iters", "eps0", "ratio", "eps_min", "c2_floor",
               "cap_M"},
    "quasi": {"delta_targets", "outer_tol", "outer_max_iters", "newton",
              "zeta_b", "anchor", "sonic_margin"},
    "output": {"phi_path", "report_path", "dir", "csv", "fields"},
}


def _configure_threads():
    n = os.environ.get("SELFSIM_THREADS", "1")
    try:
        n = max(1, int(n))
    except ValueError:
        raise ConfigError(f"SELFSIM_THREADS must be an integer, got {n!r}")
    try:  # cap numba's pool when the fast backend is active
        import numba

        numba.set_num_threads(n)
    except (ImportError, ValueError):
        pass
    return n


def atomic_write_text(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_field(field, path: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    try:
        fld.write_field(field, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(field, path: str):
    g = field.grid
    X, Y = g.meshgrid()
    rows = []
    if isinstance(field, ScalarField):
        header = ["xi1", "xi2", "value"]
        for j in range(g.ny):
            for i in range(g.nx):
                rows.append([X[j, i], Y[j, i], field.values[j, i]])
    else:
        header = ["xi1", "xi2", "u", "v"]
        for j in range(g.ny):
            for i in range(g.nx):
                rows.append([X[j, i], Y[j, i], field.u[j, i], field.v[j, i]])
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)),
                               suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# config parsing


def _check_keys(cfg: dict, strict: bool):
    for key in cfg:
        if key not in _KNOWN_SECTIONS:
            _unknown(f"unknown top-level key {key!r}", strict)
        elif key in _KNOWN_KEYS and isinstance(cfg[key], dict):
            for sub in cfg[key]:
                if sub not in _KNOWN_KEYS[key]:
                    _unknown(f"unknown key {key}.{sub}", strict)


def _unknown(msg: str, strict: bool):
    if strict:
        raise ConfigError(msg)
    print(f"warning: {msg}", file=sys.stderr)


def load_config(path: str, strict: bool = False) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    strict = strict or bool(cfg.get("strict", False))
    _check_keys(cfg, strict)
    return cfg


def gas_from_config(cfg: dict) -> GasLaw:
    g = cfg.get("gas", {})
    variant = g.get("variant", "standard")
    try:
        variant = GasVariant(variant)
    except ValueError:
        raise ConfigError(f"unknown gas variant {variant!r}")
    return GasLaw(a=float(g.get("a", 1.0)), gamma=float(g.get("gamma", 2.0)),
                  rho_floor=float(g.get("rho_floor", 0.0)), variant=variant)


def grid_from_config(cfg: dict) -> Grid2D:
    g = cfg.get("grid")
    if g is None:
        raise ConfigError("config requires a grid section")
    try:
        return Grid2D(float(g["x0"]), float(g["x1"]), float(g["y0"]),
                      float(g["y1"]), int(g["nx"]), int(g["ny"]))
    except KeyError as exc:
        raise ConfigError(f"grid section missing key {exc}") from exc


def boundary_from_config(cfg: dict, grid: Grid2D) -> ScalarField:
    b = cfg.get("boundary", {"kind": "quiescent"})
    kind = b.get("kind", "quiescent")
    if kind == "quiescent":
        K = float(b.get("K", -1.0))
        return ScalarField.from_function(
            grid, lambda x, y: -(x ** 2 + y ** 2) / 2.0 + K)
    if kind == "file":
        if "path" not in b:
            raise ConfigError("boundary.kind = 'file' requires boundary.path")
        f = fld.read_field(b["path"])
        if not isinstance(f, ScalarField) or f.grid != grid:
            raise ConfigError("boundary file must be a scalar field on the "
                              "configured grid")
        return f
    if kind == "expression-table":
        table = b.get("table")
        if table is None:
            raise ConfigError("boundary.kind = 'expression-table' requires "
                              "boundary.table (ny rows of nx values)")
        arr = np.asarray(table, dtype=float)
        if arr.shape != grid.shape:
            raise ConfigError(f"boundary.table shape {arr.shape} does not "
                              f"match grid {grid.shape}")
        return ScalarField(grid, arr)
    raise ConfigError(f"unknown boundary kind {kind!r}; expected "
                      "'quiescent', 'file' or 'expression-table'")


def solver_from_config(cfg: dict):
    s = cfg.get("solver", {})
    params = potential.PicardParams(
        relax_theta=float(s.get("relax_theta", 0.7)),
        tol_fixed_point=float(s.get("tol_fixed_point", 1e-10)),
        max_iters=int(s.get("max_iters", 200)),
        lin_tol=float(s.get("lin_tol", 1e-11)),
    )
    schedule = potential.EpsilonSchedule(
        eps0=float(s.get("eps0", 0.1)),
        ratio=float(s.get("ratio", 0.5)),
        eps_min=float(s.get("eps_min", 1e-6)),
    )
    extras = {"c2_floor": float(s.get("c2_floor", 1e-8)),
              "cap_M": float(s.get("cap_M", 1e6))}
    return params, schedule, extras


def quasi_from_config(cfg: dict, grid: Grid2D) -> quasipotential.QuasiConfig:
    q = cfg.get("quasi", {})
    zeta_b = None
    if q.get("zeta_b"):
        f = fld.read_field(q["zeta_b"])
        if not isinstance(f, ScalarField) or f.grid != grid:
            raise ConfigError("quasi.zeta_b must be a scalar field on the "
                              "configured grid")
        zeta_b = f
    return quasipotential.QuasiConfig(
        delta_targets=[float(d) for d in q.get("delta_targets", [0.0])],
        outer_tol=float(q.get("outer_tol", 1e-8)),
        outer_max_iters=int(q.get("outer_max_iters", 50)),
        newton=bool(q.get("newton", False)),
        zeta_b=zeta_b,
        anchor=tuple(q.get("anchor", (0, 0))),
        sonic_margin=float(q.get("sonic_margin", 0.01)),
        strict=bool(cfg.get("strict", False)),
    )


def _out_path(cfg: dict, key: str, default: str) -> str:
    out = cfg.get("output", {})
    base = out.get("dir", ".")
    return os.path.join(base, out.get(key, default))


def _report_payload(report_dict: dict) -> str:
    payload = {"report": report_dict,
               "meta": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve_potential(args) -> int:
    cfg = load_config(args.config, strict=args.strict)
    law = gas_from_config(cfg)
    grid = grid_from_config(cfg)
    phi_b = boundary_from_config(cfg, grid)
    params, schedule, extras = solver_from_config(cfg)
    problem = potential.PotentialProblem(law=law, grid=grid, phi_b=phi_b,
                                         **extras)
    status = 0
    try:
        phi, report = potential.epsilon_continuation(problem, schedule, params)
    except NonConvergence as exc:
        print(f"solve-potential: {exc}", file=sys.stderr)
        return 1
    if report.status != "Converged":
        status = 1
    phi_path = _out_path(cfg, "phi_path", "phi.f2d")
    report_path = _out_path(cfg, "report_path", "report.json")
    out_dir = os.path.dirname(os.path.abspath(phi_path)) or "."
    atomic_write_field(phi, phi_path)
    gp = fld.gradient(phi)
    c2, _ = potential.c2_of_phi(law, phi, gp, c2_floor=extras["c2_floor"])
    L2 = regime.pseudo_mach_field(VectorField(grid, gp.u, gp.v), c2)
    atomic_write_field(c2, os.path.join(out_dir, "c2.f2d"))
    atomic_write_field(L2, os.path.join(out_dir, "L2.f2d"))
    if cfg.get("output", {}).get("csv"):
        _write_csv(phi, os.path.splitext(phi_path)[0] + ".csv")
    atomic_write_text(report_path, _report_payload(report.to_dict()))
    print(f"solve-potential: {report.status} (eps={report.final_eps:g}, "
          f"residual={report.final_residual:.3e}, audit={report.audit}); "
          f"report: {report_path}")
    return status


def cmd_solve_quasi(args) -> int:
    cfg = load_config(args.config, strict=args.strict)
    law = gas_from_config(cfg)
    grid = grid_from_config(cfg)
    phi_b = boundary_from_config(cfg, grid)
    params, _schedule, extras = solver_from_config(cfg)
    problem = potential.PotentialProblem(law=law, grid=grid, phi_b=phi_b,
                                         **extras)
    qcfg = quasi_from_config(cfg, grid)
    try:
        state, report = quasipotential.solve_quasi(qcfg, problem, params)
    except (NonConvergence, SonicEncroachment) as exc:
        print(f"solve-quasi: {exc}", file=sys.stderr)
        return 1
    out = cfg.get("output", {})
    base = out.get("dir", ".")
    for name, f in (("psi", state.psi), ("zeta", state.zeta),
                    ("omega_tilde", state.omega_tilde), ("c2", state.c2),
                    ("N1", state.N1), ("F1", state.F1)):
        atomic_write_field(f, os.path.join(base, f"{name}.f2d"))
    report_path = _out_path(cfg, "report_path", "report.json")
    atomic_write_text(report_path, _report_payload(report.to_dict()))
    print(f"solve-quasi: {report.status} (delta={state.delta:g}, "
          f"stages={len(report.stages)}); report: {report_path}")
    return 0 if report.status == "Converged" else 1


def cmd_classify(args) -> int:
    U = fld.read_field(args.u)
    c2 = fld.read_field(args.c2)
    if not isinstance(U, VectorField) or not isinstance(c2, ScalarField):
        raise ConfigError("classify expects a vector field U and scalar c2")
    if U.grid != c2.grid:
        raise ConfigError("U and c2 must share a grid")
    rr = regime.classify(U, c2)
    base = args.out_dir
    os.makedirs(base, exist_ok=True)
    atomic_write_field(rr.L2, os.path.join(base, "L2.f2d"))
    atomic_write_field(rr.discriminant, os.path.join(base, "discriminant.f2d"))
    counts = {name: int(np.count_nonzero(rr.regime_map == r.value))
              for name, r in (("subsonic", gas.Regime.SUBSONIC),
                              ("sonic", gas.Regime.SONIC),
                              ("supersonic", gas.Regime.SUPERSONIC))}
    payload = {
        "max_L2": rr.max_L2, "max_L2_node": list(rr.max_L2_node),
        "flagged": rr.flagged, "audit": rr.audit.value,
        "audit_details": {k: (list(v) if isinstance(v, tuple) else v)
                          for k, v in rr.audit_details.items()},
        "counts": counts,
    }
    report_path = os.path.join(base, "classify.json")
    atomic_write_text(report_path, _report_payload(payload))
    print(f"classify: audit={rr.audit.value}, max L2={rr.max_L2:.6g}; "
          f"report: {report_path}")
    return 0


def cmd_decompose(args) -> int:
    U = fld.read_field(args.u)
    if not isinstance(U, VectorField):
        raise ConfigError("decompose expects a vector field")
    dec = hodge.decompose(U, lin_tol=args.lin_tol)
    base = args.out_dir
    os.makedirs(base, exist_ok=True)
    atomic_write_field(dec.psi, os.path.join(base, "psi.f2d"))
    atomic_write_field(dec.W, os.path.join(base, "W.f2d"))
    G, H = hodge.bernoulli_GH(U, dec.W)
    F = hodge.reconstruct_F(G, H)
    atomic_write_field(F, os.path.join(base, "F.f2d"))
    payload = {"div_W_norm": dec.div_W_norm,
               "integrability_residual": hodge.integrability_residual(G, H)}
    report_path = os.path.join(base, "decompose.json")
    atomic_write_text(report_path, _report_payload(payload))
    print(f"decompose: |div W| = {dec.div_W_norm:.3e}; report: {report_path}")
    return 0


def _inflow_field(spec_path: str, grid: Grid2D) -> ScalarField:
    """Boundary vorticity data: JSON object side -> constant or CSV path."""
    with open(spec_path) as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict):
        raise ConfigError("inflow spec must map sides to values")
    vals = np.zeros(grid.shape)
    sides = {"left": (np.s_[:, 0], grid.ny), "right": (np.s_[:, -1], grid.ny),
             "bottom": (np.s_[0, :], grid.nx), "top": (np.s_[-1, :], grid.nx)}
    for side, v in spec.items():
        if side not in sides:
            raise ConfigError(f"unknown side {side!r}; expected "
                              "left/right/bottom/top")
        sl, n = sides[side]
        if isinstance(v, (int, float)):
            vals[sl] = float(v)
        elif isinstance(v, str):
            data = np.loadtxt(v, delimiter=",").ravel()
            if data.size != n:
                raise ConfigError(f"side {side} expects {n} values, "
                                  f"got {data.size}")
            vals[sl] = data
        else:
            raise ConfigError(f"side {side}: expected number or CSV path")
    return ScalarField(grid, vals)


def cmd_transport(args) -> int:
    psi = fld.read_field(args.psi)
    if not isinstance(psi, ScalarField):
        raise ConfigError("transport expects a scalar stream potential")
    b = fld.gradient(psi)
    omega_b = _inflow_field(args.inflow, psi.grid)
    omega, rep = vorticity.transport_omega(
        VectorField(psi.grid, b.u, b.v), omega_b,
        step=args.step, strict=args.strict)
    base = args.out_dir
    os.makedirs(base, exist_ok=True)
    atomic_write_field(omega, os.path.join(base, "omega.f2d"))
    resid = vorticity.transport_residual(omega, VectorField(psi.grid, b.u, b.v))
    payload = {"uncovered": rep.uncovered, "stagnated": rep.stagnated,
               "truncated": rep.truncated, "exited": rep.exited,
               "traced": rep.traced,
               "residual_sup": float(np.max(np.abs(resid.values)))}
    report_path = os.path.join(base, "transport.json")
    atomic_write_text(report_path, _report_payload(payload))
    print(f"transport: {rep.uncovered} uncovered of {rep.traced}; "
          f"report: {report_path}")
    return 0


# ---------------------------------------------------------------------------
# verify: built-in invariant suites


def _verify_cases():
    rng = np.random.default_rng(2026)

    def gas_suite():
        for g in (-1.0, -0.5, 0.5, 1.0, 1.4, 2.0, 3.0):
            law = GasLaw(a=1.2, gamma=g, rho_floor=0.1)
            rho = np.linspace(0.2, 3.0, 40)
            dr = 1e-6
            fd = (gas.pressure(law, rho + dr) - gas.pressure(law, rho - dr)) \
                / (2 * dr)
            c2 = gas.sound_speed_sq(law, rho)
            assert np.all(c2 > 0)
            assert np.max(np.abs(fd - c2) / c2) < 1e-6
            h = gas.enthalpy(law, rho)
            back = gas.enthalpy_inverse(law, h)
            assert np.max(np.abs(back - rho) / rho) < 1e-10

    def eigen_goldens():
        t = regime.eigen_steady(2.0, 0.0, 1.0)
        r3 = math.sqrt(3.0) / 3.0
        assert abs(t.lambdas[0] + r3) < 1e-14
        assert abs(t.lambdas[-1] - r3) < 1e-14
        td = regime.eigen_time_dependent(0.0, 0.0, 1.0, (1.0, 0.0))
        assert td.lambdas == (-1.0, 0.0, 1.0)
        assert regime.eigen_steady(0.5, 0.0, 1.0).complex_pair

    def discriminant_identity():
        p = rng.normal(size=(2, 2000))
        c2 = rng.uniform(0.5, 4.0, 2000)
        disc, check = regime.discriminant((p[0], p[1]), c2)
        assert np.max(np.abs(disc - check)) < 1e-12

    def f2d_roundtrip():
        import tempfile as tf

        grid = Grid2D(-1.0, 1.0, -0.5, 0.5, 7, 5)
        f = ScalarField(grid, rng.normal(size=grid.shape))
        with tf.TemporaryDirectory() as d:
            p = os.path.join(d, "x.f2d")
            fld.write_field(f, p)
            g1 = fld.read_field(p)
            fld.write_field(g1, p + "2")
            with open(p) as a, open(p + "2") as b2:
                assert a.read() == b2.read()
        assert np.array_equal(f.values, g1.values)

    def quiescent_residual():
        law = GasLaw(a=1.0, gamma=2.0)
        grid = Grid2D(-0.5, 0.5, -0.5, 0.5, 17, 17)
        phi = ScalarField.from_function(
            grid, lambda x, y: -(x ** 2 + y ** 2) / 2 - 1.0)
        r = potential.residual_Q(law, phi)
        assert np.max(np.abs(r.values)) < 1e-12

    def hodge_roundtrip():
        grid = Grid2D(-0.5, 0.5, -0.5, 0.5, 21, 21)
        U = VectorField.from_function(grid,
                                      lambda x, y: np.sin(x) + y,
                                      lambda x, y: np.cos(y) * x)
        dec = hodge.decompose(U)
        assert dec.div_W_norm < 1e-9
        gap = fld.rot(dec.W).values - fld.rot(U).values
        assert np.max(np.abs(gap[1:-1, 1:-1])) < 1e-9

    def transport_zero_data():
        grid = Grid2D(0.25, 0.75, 0.25, 0.75, 17, 17)
        b = VectorField.from_function(grid, lambda x, y: -x, lambda x, y: -y)
        omega, _ = vorticity.transport_omega(b, ScalarField.zeros(grid))
        assert np.all(omega.values == 0.0)

    return [("gas law suite", gas_suite),
            ("eigenvalue goldens", eigen_goldens),
            ("discriminant identity", discriminant_identity),
            ("F2D round trip", f2d_roundtrip),
            ("quiescent residual", quiescent_residual),
            ("Hodge round trip", hodge_roundtrip),
            ("transport zero data", transport_zero_data)]


def cmd_verify(args) -> int:
    passed = failed = 0
    for name, fn in _verify_cases():
        try:
            fn()
        except BaseException as exc:
            failed += 1
            print(f"FAIL {name}: {exc}")
        else:
            passed += 1
            print(f"pass {name}")
    print(f"verify: {passed} passed, {failed} failed")
    return 0 if failed == 0 else 4


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="selfsim",
        description="Self-similar compressible-flow analysis toolkit")
    p.add_argument("--strict", action="store_true",
                   help="upgrade warnings (e.g. unknown config keys) to errors")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve-potential", help="epsilon-continuation solve")
    sp.add_argument("--config", required=True)
    sp.set_defaults(fn=cmd_solve_potential)

    sq = sub.add_parser("solve-quasi", help="delta-continuation quasi solve")
    sq.add_argument("--config", required=True)
    sq.set_defaults(fn=cmd_solve_quasi)

    sc = sub.add_parser("classify", help="regime map and ellipticity audit")
    sc.add_argument("--u", required=True, help="pseudo-velocity (F2D vector)")
    sc.add_argument("--c2", required=True, help="sound speed squared (F2D)")
    sc.add_argument("--out-dir", default=".")
    sc.set_defaults(fn=cmd_classify)

    sd = sub.add_parser("decompose", help="Hodge-Helmholtz split of U")
    sd.add_argument("--u", required=True)
    sd.add_argument("--out-dir", default=".")
    sd.add_argument("--lin-tol", type=float, default=1e-11)
    sd.set_defaults(fn=cmd_decompose)

    st = sub.add_parser("transport", help="characteristic vorticity transport")
    st.add_argument("--psi", required=True, help="potential (F2D scalar)")
    st.add_argument("--inflow", required=True,
                    help="JSON side->constant or CSV-path inflow data")
    st.add_argument("--out-dir", default=".")
    st.add_argument("--step", type=float, default=None)
    st.set_defaults(fn=cmd_transport)

    sv = sub.add_parser("verify", help="run built-in invariant suites")
    sv.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        _configure_threads()
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except (ConfigError, DomainError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except (NonConvergence, SonicEncroachment) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except (InternalError, SelfsimError, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
