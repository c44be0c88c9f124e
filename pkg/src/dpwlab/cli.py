"""Command-line interface: gen, monodromy, verify, export.

Configuration is a flat ``key = value`` text file (``#`` comments); every
key has a documented default and can be overridden with a flag of the
same name.  Unknown keys are rejected.  Exit codes: 0 all checks passed,
1 a certificate check failed, 2 numerical failure (step underflow, lost
positivity, cell boundary), 3 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import frobenius as frob
from . import holonomy, potentials, surface
from .errors import ConfigError, DpwError, NumericalFailure
from .factorization import iwasawa_su2
from .loops import CircleGrid, LoopMatrix, fro, loop_mul, loop_star, mat2

SCHEMA = {
    "k": (int, 0, "potential degree"),
    "c": (complex, 1 + 0j, "potential constant (complex, e.g. 2-1j)"),
    "real_form": (str, "su2", "su2 | su11"),
    "grid": (str, "auto", "auto | annulus | disk"),
    "r0": (float, 0.5, "inner radius"),
    "r1": (float, 1.5, "outer radius"),
    "theta_turns": (float, 1.0, "angular span in turns"),
    "n_r": (int, 8, "radial samples"),
    "n_theta": (int, 64, "angular cells"),
    "lambda_samples": (int, 32, "lambda circle grid size (even)"),
    "lambda0": (complex, 1 + 0j, "evaluation point on the unit circle"),
    "n_z": (int, 10, "series truncation order in z"),
    "n_lambda": (int, 8, "positive-loop truncation degree in lambda"),
    "h_mean": (float, 0.5, "target mean curvature"),
    "ode_tol": (float, 1e-10, "local integrator tolerance"),
    "tol_close": (float, 1e-6, "closing-condition tolerance"),
    "samples": (int, 100, "random samples for residual certificates"),
    "seed": (int, 7, "seed for every randomized certificate"),
    "vacuum": (bool, False, "use the constant off-diagonal potential"),
    "out_dir": (str, "out", "output directory"),
}

_POSITIVE = {"r0", "r1", "n_r", "n_theta", "lambda_samples", "ode_tol",
             "tol_close", "samples", "n_z", "n_lambda"}


def _coerce(key, raw):
    typ = SCHEMA[key][0]
    try:
        if typ is bool:
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is complex:
            return complex(str(raw).replace(" ", ""))
        return typ(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


class RunConfig(dict):
    def __getattr__(self, key):
        try:
            return self[key]
        except KeyError as exc:
            raise AttributeError(key) from exc


def parse_config(path=None, overrides=None):
    cfg = RunConfig({k: v for k, (_, v, _) in SCHEMA.items()})
    if path:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = (s.strip() for s in line.split("=", 1))
                if key not in SCHEMA:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                cfg[key] = _coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown option {key!r}")
        cfg[key] = _coerce(key, raw)
    for key in _POSITIVE:
        if not (cfg[key] > 0):
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")
    if cfg["lambda_samples"] % 2:
        raise ConfigError("lambda_samples must be even")
    return cfg


def _potential(cfg):
    if cfg.vacuum:
        return potentials.vacuum()
    return potentials.make_xi(cfg.k, cfg.c)


def _domain_grid(cfg):
    kind = cfg.grid
    if kind == "auto":
        kind = "disk" if (cfg.vacuum or cfg.k >= 0) else "annulus"
    if kind == "disk":
        return surface.DomainGrid(cfg.r0, cfg.r1, cfg.n_r, cfg.n_theta,
                                  theta1=2 * np.pi * cfg.theta_turns, from_zero=True)
    if kind == "annulus":
        return surface.DomainGrid(cfg.r0, cfg.r1, cfg.n_r, cfg.n_theta,
                                  theta1=2 * np.pi * cfg.theta_turns)
    raise ConfigError(f"unknown grid kind {kind!r}")


def _init_data(cfg):
    if not cfg.vacuum and cfg.k == -1:
        return frob.build_frobenius(cfg.c, max(cfg.n_z, 16))
    return None


def cmd_gen(cfg, out=sys.stdout):
    os.makedirs(cfg.out_dir, exist_ok=True)
    xi = _potential(cfg)
    grid = _domain_grid(cfg)
    mesh = surface.generate(xi, grid, init=_init_data(cfg), h_mean=cfg.h_mean,
                            lam0=cfg.lambda0, realform=cfg.real_form,
                            m_lambda=cfg.lambda_samples, ode_tol=cfg.ode_tol)
    base = os.path.join(cfg.out_dir, "mesh")
    obj_path, csv_path = surface.export_mesh(mesh, base)
    print(f"wrote {obj_path} and {csv_path}", file=out)
    if mesh.defect_table is not None:
        sup = mesh.sup_defect()
        with open(os.path.join(cfg.out_dir, "defects.csv"), "w") as fh:
            fh.write("r,defect\n")
            for r, d in zip(mesh.r_values, mesh.defect_table):
                fh.write(f"{r:.17g},{d:.17g}\n")
        print(f"seam defect sup = {sup:.6e}", file=out)
        if sup > cfg.tol_close:
            print(f"warning: surface does not close at lambda0 = {cfg.lambda0} "
                  f"(defect {sup:.6e} > {cfg.tol_close:g})", file=out)
    try:
        cmc = surface.verify_cmc(mesh, h_target=cfg.h_mean)
        print(f"mean curvature deviation = {cmc.max_deviation:.6e}", file=out)
    except (ValueError, DpwError) as exc:
        print(f"mean curvature check skipped: {exc}", file=out)
    print(f"determinant drift = {mesh.det_drift:.3e}", file=out)
    return 0


def cmd_monodromy(cfg, out=sys.stdout):
    os.makedirs(cfg.out_dir, exist_ok=True)
    xi = _potential(cfg)
    grid = CircleGrid(cfg.lambda_samples)
    z0 = cfg.r1
    if not cfg.vacuum and cfg.k == -1:
        sol = frob.build_frobenius(cfg.c, max(cfg.n_z, 16))
        l0 = np.asarray(sol.eval(z0, grid.points), dtype=complex)
    elif cfg.vacuum or cfg.k >= 0:
        path = holonomy.PathSpec([holonomy.LineSegment(0.0, z0)], eps_path=0.0)
        l0 = holonomy.integrate(xi, path, np.eye(2, dtype=complex),
                                grid.points, tol=cfg.ode_tol).endpoint
    else:
        l0 = None
    report = holonomy.monodromy(xi, z0, grid, l0=l0, tol=cfg.ode_tol)
    csv_path = os.path.join(cfg.out_dir, "monodromy.csv")
    report.to_csv(csv_path)
    rho = np.minimum(report.dist_plus, report.dist_minus)
    print(f"wrote {csv_path}", file=out)
    print(f"min distance to +-id over grid = {rho.min():.6e}", file=out)
    print(f"trace range: [{report.traces.real.min():.12g}, "
          f"{report.traces.real.max():.12g}]", file=out)
    print(f"max |det - 1| = {report.det_defect.max():.3e}", file=out)
    return 0


class _Checks:
    def __init__(self, out):
        self.out = out
        self.failed = []

    def record(self, name, measured, tol, ok=None):
        if ok is None:
            ok = measured < tol
        tag = "PASS" if ok else "FAIL"
        print(f"{tag} {name}: measured {measured:.6e}, tolerance {tol:g}",
              file=self.out)
        if not ok:
            self.failed.append(name)
        return ok

    def exit_code(self):
        if self.failed:
            print("failed checks: " + ", ".join(self.failed), file=self.out)
            return 1
        return 0


def _verify_gauges(cfg, ck):
    for k in (0, 1, 2, -2):
        rep = potentials.k_equivalence_certificate(k, cfg.c, n_samples=cfg.samples,
                                                   seed=cfg.seed)
        ck.record(f"degree equivalence {k} <-> {rep.partner}", rep.max_residual, 1e-10)
    c_chain = cfg.c.real if cfg.c.real > 0 and cfg.c.imag == 0 else 1.0
    chain = potentials.section5_chain(c_chain)
    rng = np.random.default_rng(cfg.seed)
    zs = rng.uniform(0.6, 1.4, 20) * np.exp(1j * rng.uniform(-2.0, 2.0, 20))
    lams = np.exp(1j * rng.uniform(0, 2 * np.pi, 20))
    ck.record("reduction chain endpoint", chain.final_residual(zs, lams), 1e-10)


def _verify_frobenius(cfg, ck):
    sol = frob.build_frobenius(cfg.c, max(cfg.n_z, 4))
    ck.record("series solves the connection equation", sol.ode_residual(), 1e-12)
    mono_loop = frob.analytic_monodromy(sol)
    tau_err = _tau_defect(sol, mono_loop)
    ck.record("deck transformation matches the analytic monodromy", tau_err, 1e-10)
    grid = CircleGrid(16)
    l0 = np.asarray(sol.eval(1.0, grid.points), dtype=complex)
    rep = holonomy.monodromy(potentials.make_xi(-1, cfg.c), 1.0, grid, l0=l0,
                             tol=cfg.ode_tol)
    err = float(fro(rep.matrices - mono_loop.eval(grid.points)).max())
    ck.record("integrated monodromy matches the analytic formula", err, 1e-8)


def _tau_defect(sol, mono_loop):
    shifted = sol.series.apply_tau()
    target = frob.LogSeries.constant(mono_loop, p_max=sol.series.p_max).mul(sol.series)
    return shifted.add(target, scale=-1.0).max_coeff_norm(through=sol.n_z)


def _verify_isotropy(cfg, ck):
    res = frob.isotropy_kernel(cfg.c, cfg.n_z, cfg.n_lambda)
    ck.record("kernel dimension is 1", float(res.dimension), 0, ok=res.dimension == 1)
    ck.record("kernel basis is scalar", 0.0, 1,
              ok=res.basis_is_scalar())
    control = frob.isotropy_kernel(cfg.c, cfg.n_z, cfg.n_lambda,
                                   series=frob.vacuum_series(cfg.n_z))
    ck.record("log-free control has extra symmetry", float(control.dimension), 0,
              ok=control.dimension > 1)
    print(frob.format_kernel_report(res), file=ck.out)


def _verify_iwasawa(cfg, ck):
    from .factorization import random_positive_loop, random_unitary_loop
    rng = np.random.default_rng(cfg.seed)
    grid = CircleGrid(64)
    worst_f = worst_b = worst_u = 0.0
    for _ in range(3):
        f0 = random_unitary_loop(rng, grid)
        b0 = random_positive_loop(rng, grid)
        l = LoopMatrix.from_samples(f0.samples @ b0.samples, grid)
        pair = iwasawa_su2(l)
        worst_f = max(worst_f, float(fro(pair.f.samples - f0.samples).max()))
        worst_b = max(worst_b, float(fro(pair.b.eval(grid.points) - b0.samples).max()))
        worst_u = max(worst_u, pair.unitarity_defect())
    ck.record("synthetic round-trip recovers the unitary factor", worst_f, 1e-8)
    ck.record("synthetic round-trip recovers the positive factor", worst_b, 1e-8)
    ck.record("frames unitary on the circle", worst_u, 1e-8)
    z = 0.4 + 0.2j
    vac = LoopMatrix.from_samples(_vacuum_solution_samples(z, grid), grid)
    pair = iwasawa_su2(vac)
    want_f = _vacuum_frame_samples(z, grid)
    ck.record("vacuum splitting matches the closed form",
              float(fro(pair.f.samples - want_f).max()), 1e-9)
    b0 = pair.b.coeff(0)
    ok = abs(b0[1, 0]) < 1e-9 and b0[0, 0].real > 0 and b0[1, 1].real > 0 \
        and abs(b0[0, 0].imag) + abs(b0[1, 1].imag) < 1e-9
    ck.record("positive factor is normalized at lambda = 0", 0.0, 1, ok=ok)


def _vacuum_solution_samples(z, grid):
    a = mat2(0, 1, 1, 0)
    s = z / grid.points
    return np.cosh(s)[:, None, None] * np.eye(2) + np.sinh(s)[:, None, None] * a


def _vacuum_frame_samples(z, grid):
    a = mat2(0, 1, 1, 0)
    s = z / grid.points - np.conj(z) * grid.points
    return np.cosh(s)[:, None, None] * np.eye(2) + np.sinh(s)[:, None, None] * a


def _verify_nonclosing(cfg, ck):
    grid = CircleGrid(64)
    sol = frob.build_frobenius(cfg.c, max(cfg.n_z, 16))
    l0 = np.asarray(sol.eval(1.0, grid.points), dtype=complex)
    rep = holonomy.monodromy(potentials.make_xi(-1, cfg.c), 1.0, grid, l0=l0,
                             tol=cfg.ode_tol)
    rho = np.minimum(rep.dist_plus, rep.dist_minus)
    floor = 2 * np.pi * abs(cfg.c) - 1e-6
    ck.record("distance to +-id stays above the analytic floor",
              floor - rho.min(), 1e-6, ok=rho.min() >= floor)
    ck.record("trace pinned to 2", float(np.abs(rep.traces - 2).max()), 1e-8)
    ck.record("determinants stay on SL2", float(rep.det_defect.max()), 1e-8)


SUITES = {
    "gauges": _verify_gauges,
    "frobenius": _verify_frobenius,
    "isotropy": _verify_isotropy,
    "iwasawa": _verify_iwasawa,
    "nonclosing": _verify_nonclosing,
}


def cmd_verify(cfg, suite, out=sys.stdout):
    ck = _Checks(out)
    SUITES[suite](cfg, ck)
    return ck.exit_code()


def cmd_export(cfg, mesh_csv, out_path, out=sys.stdout):
    points, _, _ = surface.load_mesh_points(mesh_csv)
    n_r, n_t, _ = points.shape
    with open(out_path, "w") as fh:
        for i in range(n_r):
            for j in range(n_t):
                x, y, z = points[i, j]
                fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for i in range(n_r - 1):
            for j in range(n_t - 1):
                a = i * n_t + j + 1
                fh.write(f"f {a} {a + 1} {a + n_t + 1} {a + n_t}\n")
    print(f"wrote {out_path}", file=out)
    return 0


def _add_overrides(parser):
    for key, (typ, default, help_text) in SCHEMA.items():
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None,
                            metavar="V", help=f"{help_text} (default {default})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dpwlab",
        description="loop-group surface generation and certificate suites")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (("gen", "generate a surface mesh"),
                       ("monodromy", "monodromy report over the lambda grid"),
                       ("verify", "run a certificate suite"),
                       ("export", "re-export a mesh CSV as OBJ")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", default=None, help="key = value config file")
        if name == "verify":
            p.add_argument("suite", choices=sorted(SUITES))
        if name == "export":
            p.add_argument("--mesh-csv", required=True)
            p.add_argument("--obj", required=True)
        _add_overrides(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in SCHEMA if hasattr(args, k)}
    try:
        cfg = parse_config(args.config, overrides)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "monodromy":
            return cmd_monodromy(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        if args.command == "export":
            return cmd_export(cfg, args.mesh_csv, args.obj)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
