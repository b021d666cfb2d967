"""Command-line entry point: ``screenvp <subcommand> [options]``.

Subcommands: penrose, kernel, linear, simulate, analyze, selftest.  Every
command writes its outputs plus ``manifest.json`` (config snapshot, version,
sha256 of each output, timings) into the output directory.

Exit status: 0 success, 2 validation error, 3 numerical non-convergence
(outputs written so far are kept and listed in the manifest).

Config files are INI files; sections mirror module names and keys are the
field names of :class:`RunConfig` (any section) or of the quasi-neutral data
(``[vlasov]``: envelope, perturbation, perturbation_width, modulation,
mod_strength).  Environment overrides: ``SCREENVP_OUTPUT_DIR`` and
``SCREENVP_THREADS``.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .errors import NumericalError, ScreenVPError, ValidationError
from .model import RunConfig, profile_from_tag
from .penrose import FOURIER_CONVENTION

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
_SPEC_KEYS = ("envelope", "perturbation", "perturbation_width", "modulation", "mod_strength")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


# --------------------------------------------------------------------------
# config


def _coerce(value: str, like):
    if isinstance(like, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"expected a boolean, got {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float) or like is None:
        return float(value)
    return value.strip()


def load_config(path=None, overrides: dict = None):
    """(RunConfig, data-spec overrides) from an INI file plus explicit overrides."""
    defaults = RunConfig()
    fields = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(RunConfig)}
    values, spec = {}, {}
    if path is not None:
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ValidationError(f"config file {path} not found or unreadable")
        for section in cp.sections():
            for key, raw in cp.items(section):
                if key in fields:
                    try:
                        values[key] = _coerce(raw, fields[key])
                    except ValueError as exc:
                        raise ValidationError(f"config [{section}] {key}: {exc}") from None
                elif section == "vlasov" and key in _SPEC_KEYS:
                    spec[key] = raw.strip() if key in ("envelope", "perturbation", "modulation") else float(raw)
                else:
                    raise ValidationError(f"config [{section}]: unknown key {key!r}")
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    return cfg.validate(), spec


# --------------------------------------------------------------------------
# outputs


class Outputs:
    def __init__(self, out_dir: Path, command: str, config: dict):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.files = []
        self.timings = {}
        self._t0 = time.perf_counter()

    def path(self, name):
        self.files.append(name)
        return self.dir / name

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])

    def frames(self, name, array, meta: dict):
        """Flat little-endian float64 array plus a JSON sidecar."""
        arr = np.ascontiguousarray(array, dtype="<f8")
        arr.tofile(self.path(name + ".bin"))
        side = dict(meta, dtype="<f8", shape=list(arr.shape), order="C")
        self.json(name + ".json", side)

    def finish(self, status: str, message: str = ""):
        self.timings["total_seconds"] = time.perf_counter() - self._t0
        inventory = []
        for name in dict.fromkeys(self.files):
            p = self.dir / name
            if p.exists():
                inventory.append({"file": name, "bytes": p.stat().st_size,
                                  "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        manifest = {"command": self.command, "version": __version__, "status": status,
                    "message": message, "config": self.config, "outputs": inventory,
                    "timings": self.timings}
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if dataclasses.is_dataclass(obj):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def verify_manifest(out_dir) -> bool:
    """True if every file listed in the manifest exists with a matching checksum."""
    out_dir = Path(out_dir)
    man = json.loads((out_dir / "manifest.json").read_text())
    for item in man["outputs"]:
        p = out_dir / item["file"]
        if not p.exists() or hashlib.sha256(p.read_bytes()).hexdigest() != item["sha256"]:
            return False
    return True


def read_frames(path):
    """Array stored by :meth:`Outputs.frames` (``path`` without extension)."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    arr = np.fromfile(path.with_suffix(".bin"), dtype=meta["dtype"]).reshape(meta["shape"])
    return arr, meta


# --------------------------------------------------------------------------
# subcommands


def cmd_penrose(args, out: Outputs):
    from .penrose import default_grids, dispersion_table, penrose_margin

    mu = profile_from_tag(args.profile, args.d)
    sign = 1.0 if args.sign == "stable" else -1.0
    t0 = time.perf_counter()
    rep = penrose_margin(mu, sign=sign, raise_on_failure=False)
    out.timings["penrose_margin"] = time.perf_counter() - t0
    out.json("penrose.json", rep.as_dict())
    xi, lam = default_grids(n_xi=20, n_re=41, n_im=11)  # coarse export table
    lam_flat, xi_flat, table = dispersion_table(mu, xi, lam, sign)
    out.csv("penrose_table.csv", ["re_lambda", "im_lambda", "xi", "abs_dispersion"],
            ([l.real, l.imag, x, table[i, j]] for i, x in enumerate(xi_flat) for j, l in enumerate(lam_flat)))
    out.csv("penrose_levels.csv", ["level", "kappa", "n_points", "re_lambda", "im_lambda", "xi"],
            [[lv["level"], lv["kappa"], lv["n_points"], lv["lam"][0], lv["lam"][1], lv["xi"]]
             for lv in rep.levels])
    if not rep.converged:
        raise _Numerical("penrose margin did not converge under refinement")
    return rep.as_dict()


def cmd_kernel(args, out: Outputs):
    from .diagnostics import decay_fit
    from .linres import resolvent_physical

    mu = profile_from_tag(args.profile, args.d)
    times = np.array([float(x) for x in args.times.split(",")])
    t0 = time.perf_counter()
    ker = resolvent_physical(args.d, times, mu)
    out.timings["resolvent_physical"] = time.perf_counter() - t0
    rows = [[t, a, b, c, e, f] for t, a, b, c, e, f in
            zip(ker.times, ker.linf, ker.l1, ker.integral, ker.grad_linf, ker.grad_l1)]
    out.csv("kernel_fourier.csv", ["t", "k", "G_hat"],
            ([t, k, g] for t, row in zip(ker.times, ker.g_hat_time) for k, g in zip(ker.k, row)))
    out.csv("kernel_physical.csv", ["t", "r", "G"],
            ([t, r, g] for t, row in zip(ker.times, ker.values) for r, g in zip(ker.radii, row)))
    out.csv("kernel_norms.csv", ["t", "linf", "l1", "integral", "grad_linf", "grad_l1"], rows)
    report = {"d": args.d, "profile": args.profile,
              "cancellation": (np.abs(ker.integral) / ker.l1).tolist()}
    if times.size >= 4 and times.max() / times.min() >= 2:
        for name, ser, target in (("linf", ker.linf, -(args.d + 1)), ("l1", ker.l1, -1.0)):
            report[name] = decay_fit(ker.times, ser, (times.min(), times.max()), target=target,
                                     name=name).as_dict()
    out.json("kernel_report.json", report)
    return report


def cmd_linear(args, out: Outputs):
    from .linres import LinearData, linear_landau_experiment

    mu = profile_from_tag(args.profile, args.d)
    t0 = time.perf_counter()
    res = linear_landau_experiment(mu, args.d, LinearData(amplitude=args.amplitude, width=args.width),
                                   t_end=args.t_end, window=(args.t_start, args.t_end))
    out.timings["linear_landau_experiment"] = time.perf_counter() - t0
    out.csv("linear.csv", ["t", "rho_linf", "E_linf"], zip(res.times, res.rho_linf, res.E_linf))
    rep = {k: v.as_dict() for k, v in res.reports.items()}
    out.json("decay.json", rep)
    return rep


def cmd_simulate(args, out: Outputs):
    from .vlasov import QuasiNeutralSpec, init_quasi_neutral, semi_lagrangian_run, velocity_grid
    from .field import Grid

    cfg, spec_over = args.cfg, args.spec
    if cfg.d not in (1, 2):
        raise ValidationError("RunConfig invariant violated: the nonlinear solver needs d in {1, 2}")
    mu = profile_from_tag(cfg.profile, cfg.d)
    gx = Grid(cfg.box_length, cfg.nx, cfg.d)
    gv = velocity_grid(cfg.v_max, cfg.nv, cfg.d)
    spec = QuasiNeutralSpec(amplitude=cfg.amplitude, eps0=cfg.eps0, width=cfg.envelope_width,
                            mode=cfg.mode, support_margin=cfg.support_margin, **spec_over)
    pf = init_quasi_neutral(spec, mu, gx, gv, cfg.k, cfg.a)
    out.json("initial_norms.json", pf.report)
    t0 = time.perf_counter()
    tr = semi_lagrangian_run(pf, cfg.dt, cfg.t_end, sign=cfg.field_sign, coupling=cfg.coupling,
                             output_every=cfg.output_every, interpolation=cfg.interpolation,
                             boundary=cfg.boundary, on_breach="stop")
    out.timings["semi_lagrangian_run"] = time.perf_counter() - t0
    meta = {"times": tr.times.tolist(), "L": gx.L, "nx": gx.n, "dim": gx.dim, "v_max": cfg.v_max,
            "nv": gv.n, "sign": tr.sign, "profile": cfg.profile}
    out.frames("rho", tr.rho, meta)
    out.frames("E", tr.E, meta)
    rows = []
    for i, t in enumerate(tr.times):
        rows.append([t, tr.masses[i, 0], tr.masses[i, 1], float(np.max(np.abs(tr.rho[i]))),
                     float(np.max(np.abs(tr.E[i])))])
    out.csv("diagnostics.csv", ["t", "mass_plus", "mass_minus", "rho_linf", "E_linf"], rows)
    summary = {"notes": tr.notes, "mass_drift_rate": tr.mass_drift_rate(), "n_frames": int(tr.times.size),
               "nonlinear_dimension_note": "nonlinear runs are 1x1v/2x2v illustrations, not the d>=3 whole-space result"}
    out.json("run_summary.json", summary)
    if tr.stopped:
        raise _Numerical(tr.notes[-1])
    return summary


def cmd_analyze(args, out: Outputs):
    from .diagnostics import NormSeries, bootstrap_monitor, decay_fit, norm_timeseries
    from .field import Grid

    src = Path(args.frames)
    rho, meta = read_frames(src / "rho")
    E, _ = read_frames(src / "E")
    times = np.asarray(meta["times"], dtype=float)
    grid = Grid(meta["L"], meta["nx"], meta["dim"])
    cfg = args.cfg

    class _Frames:
        pass

    fr = _Frames()
    fr.times, fr.rho, fr.E, fr.grid_x = times, rho, E, grid
    ns = norm_timeseries(fr, cfg.a)
    bt = bootstrap_monitor(ns, grid.dim, cfg.a, cfg.gamma)
    rows = [[t] + list(r) + [s] for t, r, s in zip(times, bt.ratios, bt.running_sup)]
    out.csv("bootstrap.csv", ["t", "rho_Linf", "rho_Binf", "rho_B1", "grad_rho_Linf", "grad_rho_L1",
                              "running_sup"], rows)
    keys = ("Linf", "L1", "Binf", "B1", "grad_Linf", "grad_L1")
    out.csv("norms.csv", ["t"] + [f"rho_{k}" for k in keys] + [f"E_{k}" for k in keys],
            [[t] + [getattr(r, k) for k in keys] + [getattr(e, k) for k in keys]
             for t, r, e in zip(times, ns.rho, ns.E)])
    report = {"bootstrap": bt.as_dict()}
    # fit window: t >= 1, final 10% of frames excluded
    hi = times[max(1, int(0.9 * (times.size - 1)))]
    for name, ser in (("rho_Linf", ns.column("rho", "Linf")), ("E_Linf", ns.column("E", "Linf"))):
        try:
            report[name] = decay_fit(times, ser, (1.0, hi), target=-grid.dim, name=name).as_dict()
        except ScreenVPError as exc:
            report[name] = {"error": str(exc)}
    out.json("decay.json", report)
    return report


def trivial_suite():
    """(name, callable -> (ok, value)) pairs of closed-form examples."""
    from .besov import besov_block, d_a_operator, triebel
    from .diagnostics import decay_fit
    from .field import Grid, bessel_kernel, screened_field
    from .flow import FieldHistory, correction_fields, integrate_characteristic
    from .linres import resolvent_time_kernel, volterra_solve
    from .model import make_maxwellian, make_zero_profile
    from .penrose import dispersion, penrose_margin, time_kernel
    from .vlasov import QuasiNeutralSpec, init_quasi_neutral, semi_lagrangian_run, velocity_grid

    mu = make_maxwellian(1)
    g = Grid(2 * math.pi, 64, 1)
    x = g.axis

    def mass():
        v = np.linspace(-8, 8, 2048)
        val = float(np.squeeze(integrate.trapezoid(mu.evaluate(v[None, :]), v)))
        return abs(val - 1) < 1e-12, val

    def zero_field():
        E = screened_field(np.zeros(g.shape), g).E
        return not np.any(E), float(np.max(np.abs(E)))

    def single_mode():
        err = float(np.max(np.abs(screened_field(np.cos(x), g).E[0] + 0.5 * np.sin(x))))
        return err < 1e-12, err

    def kernel_zero():
        u = np.linspace(0, 5, 11)
        m = float(np.max(np.abs(time_kernel(u, 0.0, mu))) + np.max(np.abs(time_kernel(0.0, u, mu))))
        return m == 0.0, m

    def dispersion_xi0():
        val = complex(dispersion(np.array([0.3 - 0.2j]), 0.0, mu)[0])
        return val == 1.0, abs(val - 1)

    def kappa_xi0():
        rep = penrose_margin(mu, np.array([0.0]), np.array([0.0, 1 - 1j]))
        return rep.kappa_estimate == 1.0, rep.kappa_estimate

    def volterra_free():
        sol = volterra_solve([0.0], lambda t, xi: np.cos(t) + 0 * xi, 0.01, 1.0, mu)
        err = float(np.max(np.abs(sol.rho_hat - sol.source)))
        return err == 0.0, err

    def resolvent_zero_profile():
        G = resolvent_time_kernel(np.array([0.5, 1.0]), 0.05, 2.0, make_zero_profile(1))
        m = float(np.max(np.abs(G)))
        return m == 0.0, m

    def besov_constant():
        m = besov_block(np.full(g.shape, 3.0), 0.5, math.inf, g)
        return m < 1e-12, m

    def triebel_identity():
        phi = np.exp(-x**2) * np.sin(3 * x)
        gap = abs(triebel(phi, 0.5, math.inf, g) - besov_block(phi, 0.5, math.inf, g))
        return gap <= 1e-12, gap

    def d2_of_x_only():
        gv = velocity_grid(6.0, 16, 1)
        h = np.repeat(np.cos(x)[:, None], gv.n, axis=1)
        _, _, d2 = d_a_operator(h, 0.5, g, gv)
        m = float(np.max(np.abs(d2)))
        return m == 0.0, m

    def free_characteristic():
        cs = integrate_characteristic(FieldHistory.zero(1), 1, 2.0, np.array([0.3]), np.array([0.7]), 1e-2)
        err = float(abs(cs.X0[0, 0] - (0.3 - 2 * 0.7)) + abs(cs.V0[0, 0] - 0.7))
        return err < 1e-12, err

    def zero_corrections():
        cf = correction_fields(FieldHistory.zero(1), 1, 0.0, 2.0, np.array([0.1]), np.array([0.2]))
        m = float(np.max(np.abs(cf.Y)) + np.max(np.abs(cf.W)))
        return m == 0.0, m

    def neutral_data():
        gv = velocity_grid(6.0, 32, 1)
        pf = init_quasi_neutral(QuasiNeutralSpec(amplitude=1.0, eps0=0.0, envelope="mode"), mu,
                                Grid(4 * math.pi, 16, 1), gv)
        m = float(np.max(np.abs(pf.density())))
        return m == 0.0, m

    def zero_run():
        gx, gv = Grid(4 * math.pi, 16, 1), velocity_grid(6.0, 32, 1)
        pf = init_quasi_neutral(QuasiNeutralSpec(amplitude=0.0, envelope="mode"), mu, gx, gv)
        tr = semi_lagrangian_run(pf, 0.1, 1.0)
        m = float(np.max(np.abs(tr.rho)) + np.max(np.abs(tr.E)))
        return m == 0.0, m

    def bessel_d3():
        b = bessel_kernel(1.0, 3)
        return abs(b - math.exp(-1) / (4 * math.pi)) < 1e-8, b

    def power_law():
        t = np.linspace(1, 100, 50)
        s = decay_fit(t, 2 * t**-3.0).slope
        return abs(s + 3) < 1e-10, s

    return [("profile_mass", mass), ("zero_density_zero_field", zero_field),
            ("single_mode_field", single_mode), ("kernel_vanishes", kernel_zero),
            ("dispersion_at_xi0", dispersion_xi0), ("penrose_xi0_grid", kappa_xi0),
            ("volterra_zero_kernel", volterra_free), ("resolvent_zero_profile", resolvent_zero_profile),
            ("besov_constant", besov_constant), ("triebel_block_identity", triebel_identity),
            ("d2_vanishes_on_x_only", d2_of_x_only), ("free_characteristic", free_characteristic),
            ("zero_corrections", zero_corrections), ("neutral_initial_density", neutral_data),
            ("zero_run", zero_run), ("bessel_kernel_d3", bessel_d3), ("power_law_fit", power_law)]


def cmd_selftest(args, out: Outputs):
    """Run the closed-form suite; numerical exit if any check fails."""
    checks = []
    for name, fn in trivial_suite():
        t0 = time.perf_counter()
        ok, value = fn()
        out.timings[name] = time.perf_counter() - t0
        checks.append({"name": name, "passed": bool(ok), "value": float(np.real(value))})
    out.json("selftest.json", checks)
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        raise _Numerical("selftest checks failed: " + ", ".join(failed))
    return {"passed": len(checks)}


class _Numerical(NumericalError):
    pass


# --------------------------------------------------------------------------
# argument parsing


def build_parser():
    p = argparse.ArgumentParser(prog="screenvp", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--out", help="output directory (env SCREENVP_OUTPUT_DIR)")
        sp.add_argument("--threads", type=int, help="worker thread cap (env SCREENVP_THREADS)")
        return sp

    sp = common(sub.add_parser("penrose", help="Penrose margin of a profile"))
    sp.add_argument("--profile", default="maxwellian")
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--sign", choices=("stable", "literal"), default="stable")

    sp = common(sub.add_parser("kernel", help="resolvent kernel norms in physical space"))
    sp.add_argument("--profile", default="maxwellian")
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--times", default="10,15,20,30,40")

    sp = common(sub.add_parser("linear", help="linear Landau damping of radial data"))
    sp.add_argument("--profile", default="maxwellian")
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--amplitude", type=float, default=1e-3)
    sp.add_argument("--width", type=float, default=1.0)
    sp.add_argument("--t-start", type=float, default=5.0)
    sp.add_argument("--t-end", type=float, default=50.0)

    sp = common(sub.add_parser("simulate", help="nonlinear 1x1v / 2x2v run"))
    for name in ("d", "nx", "nv", "output_every", "mode", "seed"):
        sp.add_argument("--" + name.replace("_", "-"), dest=name, type=int)
    for name in ("dt", "t_end", "v_max", "box_length", "amplitude", "eps0", "a", "gamma"):
        sp.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    sp.add_argument("--sign-convention", dest="sign_convention", choices=("stable", "literal"))
    sp.add_argument("--profile-tag", dest="profile")

    sp = common(sub.add_parser("analyze", help="norms, decay fits and bootstrap trace of stored frames"))
    sp.add_argument("frames", help="directory written by simulate")
    for name in ("a", "gamma"):
        sp.add_argument("--" + name, dest=name, type=float)

    common(sub.add_parser("selftest", help="closed-form example suite"))
    return p


def _apply_threads(n):
    if n is None:
        env = os.environ.get("SCREENVP_THREADS")
        n = int(env) if env else None
    if n is not None:
        if n < 1:
            raise ValidationError("--threads must be >= 1")
        for var in _THREAD_VARS:
            os.environ[var] = str(n)
    return n


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    out_dir = args.out or os.environ.get("SCREENVP_OUTPUT_DIR") or f"screenvp_{args.command}"
    out = None
    try:
        threads = _apply_threads(args.threads)
        overrides = {}
        if args.command == "simulate":
            overrides = {k: getattr(args, k) for k in ("d", "nx", "nv", "output_every", "mode", "seed", "dt",
                                                       "t_end", "v_max", "box_length", "amplitude", "eps0",
                                                       "a", "gamma", "sign_convention", "profile")}
        elif args.command == "analyze":
            overrides = {"a": args.a, "gamma": args.gamma}
        cfg, spec = load_config(args.config, overrides)
        args.cfg, args.spec = cfg, spec
        snapshot = {"run_config": cfg.as_dict(), "data_spec": spec, "fourier_convention": FOURIER_CONVENTION,
                    "kernel_sign": "K(u, xi) = +u |xi|^2 mu_hat(u |xi|) / (1 + |xi|^2) (stable)"
                    if cfg.sign_convention == "stable" else "literal (flipped) sign", "argv": list(argv or sys.argv[1:]),
                    "threads": threads}
        out = Outputs(Path(out_dir), args.command, snapshot)
        result = globals()["cmd_" + args.command](args, out)
        out.finish("ok")
        print(json.dumps(_jsonable(result), sort_keys=True)[:2000])
        return EXIT_OK
    except ValidationError as exc:
        print(f"screenvp: validation error: {exc}", file=sys.stderr)
        if out is None:
            # rejected before a config snapshot existed: record the arguments only
            out = Outputs(Path(out_dir), args.command, {"argv": list(argv or sys.argv[1:])})
        out.finish("validation_error", str(exc))
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"screenvp: numerical failure: {exc}", file=sys.stderr)
        if out is not None:
            out.finish("numerical_error", str(exc))
        return EXIT_NUMERICAL


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
