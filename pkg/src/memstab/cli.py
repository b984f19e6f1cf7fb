"""Command-line front end: ``memstab <command> [options]``.

Every successful command prints a run manifest (JSON) on stdout and writes
it next to its outputs. Module errors exit with status 1 and a one-line
JSON error on stderr; usage errors exit with status 2.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io

from . import __version__
from .assembly import assemble_coupled, assemble_mass
from .mesh import FULL_DOMAIN, build_unit_square_mesh
from .params import ModelParams, load_params, paper_params
from .riccati import reduce_to_standard, solve_feedback
from .sim import SCENARIOS, SimConfig, simulate
from .spectral import analytic_spectrum, count_unstable, discrete_spectrum
from .steady import SINSIN, manufacture_forcing, newton_steady

log = logging.getLogger("memstab")

MANUFACTURED = {"sinsin": SINSIN}


def _fmt(x):
    return f"{x:.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return str(path)


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return str(path)


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    params: dict = None
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def add(self, path):
        self.outputs.append(str(path))
        return path

    def to_dict(self):
        return {
            "command": self.command,
            "config_hash": config_hash(self.config),
            "config": self.config,
            "params": self.params,
            "outputs": list(self.outputs),
            "results": self.results,
            "timings": self.timings,
            "version": __version__,
        }


class _Timer:
    def __init__(self, manifest, name):
        self.manifest, self.name = manifest, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.manifest.timings[self.name] = round(time.perf_counter() - self.t0, 6)


# argument types: failures here are usage errors (exit 2)

def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def region_arg(text):
    try:
        box = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"region must be a1,b1,a2,b2, got {text!r}") from None
    if len(box) != 4 or not (box[0] < box[1] and box[2] < box[3]):
        raise argparse.ArgumentTypeError(f"region must be a1,b1,a2,b2 with a1<b1, a2<b2, got {text!r}")
    return box


def _params(args, nu=None):
    p = load_params(args.params) if getattr(args, "params", None) else paper_params()
    if nu is not None:
        p = p.replace(nu=nu)
    return p


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


# commands

def cmd_mesh_info(args):
    mesh = build_unit_square_mesh(args.n)
    man = RunManifest("mesh info", _config(args))
    man.results["mesh"] = mesh.info()
    return man


def cmd_assemble(args):
    p = _params(args, args.nu)
    man = RunManifest("assemble", _config(args), p.to_dict())
    mesh = build_unit_square_mesh(args.n)
    with _Timer(man, "assemble"):
        blocks = assemble_coupled(mesh, p, args.region)
    if args.dump:
        out = _outdir(args)
        for name in ("M", "L", "E", "A", "Anu", "B", "R"):
            path = out / f"{name}.mtx"
            scipy.io.mmwrite(str(path), getattr(blocks, name), precision=17)
            man.add(path)
    man.results["dims"] = {"N": blocks.N, "dim": blocks.dim, "controls": blocks.m}
    return man


def spectrum_rows(params, nu, kmax):
    spec = analytic_spectrum(params, kmax)
    rows = []
    for e in spec.entries:
        rows.append([
            float(e.Lambda), e.multiplicity, e.mu_plus.real, e.mu_plus.imag,
            e.mu_minus.real, e.mu_minus.imag, int(e.is_complex_pair), len(e.unstable(nu)),
        ])
    return rows


SPECTRUM_HEADER = ["Lambda", "multiplicity", "mu_plus_re", "mu_plus_im",
                   "mu_minus_re", "mu_minus_im", "complex_pair", "unstable_flag"]


def cmd_spectrum(args):
    p = _params(args)
    man = RunManifest("spectrum", _config(args), p.to_dict())
    out = _outdir(args)
    with _Timer(man, "analytic"):
        count, _ = count_unstable(p, args.nu, args.kmax)
        rows = spectrum_rows(p, args.nu, args.kmax)
    man.add(write_csv(out / "spectrum.csv", SPECTRUM_HEADER, rows))
    man.results["unstable_count"] = count
    if args.discrete:
        with _Timer(man, "discrete"):
            blocks = assemble_coupled(build_unit_square_mesh(args.n), p.replace(nu=args.nu))
            ev = discrete_spectrum(blocks)
        man.add(write_csv(out / "discrete_spectrum.csv", ["re", "im"], [[float(z.real), float(z.imag)] for z in ev]))
    return man


def cmd_riccati(args):
    p = _params(args, args.nu)
    p.check_shift()
    man = RunManifest("riccati", _config(args), p.to_dict())
    out = _outdir(args)
    with _Timer(man, "solve"):
        blocks = assemble_coupled(build_unit_square_mesh(args.n), p, args.region)
        sol = solve_feedback(blocks, tol=args.tol, max_iter=args.max_iter)
    scipy.io.mmwrite(str(out / "P.mtx"), sol.P, precision=17)
    scipy.io.mmwrite(str(out / "G.mtx"), sol.G, precision=17)
    man.add(out / "P.mtx")
    man.add(out / "G.mtx")
    summary = sol.summary()
    summary["history"] = sol.history
    man.add(write_json(out / "riccati_summary.json", summary))
    return man


def read_forcing(path, mesh):
    """Nodal forcing values ``x,y,value`` mapped to the P1 load vector."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"forcing file needs columns x,y,value, got {data.shape[1]} columns")
    index = {(round(x * mesh.n), round(y * mesh.n)): v for x, y, v in data}
    key = np.rint(mesh.nodes * mesh.n).astype(int)
    try:
        f = np.array([index[(i, j)] for i, j in key])
    except KeyError as exc:
        raise ValueError(f"forcing file misses node {exc.args[0]}") from None
    Mfull = assemble_mass(mesh, full=True)
    return (Mfull @ f)[mesh.interior_nodes]


def cmd_steady(args):
    p = _params(args)
    man = RunManifest("steady", _config(args), p.to_dict())
    out = _outdir(args)
    mesh = build_unit_square_mesh(args.n)
    with _Timer(man, "solve"):
        if args.manufactured:
            target = manufacture_forcing(MANUFACTURED[args.manufactured], mesh, p)
            f_load = target.f_inf_load
        else:
            f_load = read_forcing(args.forcing_file, mesh)
        st = newton_steady(f_load, mesh, p, tol=args.tol)
    values = mesh.to_full(st.y_inf)
    rows = [[float(x), float(y), float(v)] for (x, y), v in zip(mesh.nodes, values)]
    man.add(write_csv(out / "steady.csv", ["x", "y", "value"], rows))
    man.results["residual_norm"] = st.residual_norm
    man.results["newton_history"] = st.newton_history
    return man


SIM_KEYS = {"scenario", "shifted", "dt", "T", "n", "params", "initial", "gain", "steady",
            "newton_tol", "newton_max", "theta", "region", "snapshot_every", "name"}


def build_sim_config(data, base_dir="."):
    """``SimConfig`` from a JSON object with ``SimConfig`` field names.

    ``params`` is an object, a path to a parameter file, or absent (reference
    set). ``gain`` may be ``"riccati"`` and ``steady`` ``"sinsin"``; both are
    filled in automatically when the scenario requires them.
    """
    unknown = set(data) - SIM_KEYS
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    d = {k: v for k, v in data.items() if k != "name"}
    prm = d.pop("params", None)
    if prm is None:
        p = paper_params()
    elif isinstance(prm, str):
        p = load_params(Path(base_dir) / prm)
    else:
        p = ModelParams.from_dict(prm)
    scenario = d.get("scenario", "LinearOpen")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    p.check_shift(steady=scenario.startswith("Steady"))
    if "region" in d:
        d["region"] = tuple(d["region"])
    mesh = build_unit_square_mesh(d.get("n", 16))
    steady = d.pop("steady", None)
    if scenario.startswith("Steady"):
        steady = steady or "sinsin"
        if steady not in MANUFACTURED:
            raise ValueError(f"unknown steady state {steady!r}")
        steady = manufacture_forcing(MANUFACTURED[steady], mesh, p)
    elif steady is not None:
        raise ValueError(f"scenario {scenario} forbids a steady state")
    gain = d.pop("gain", None)
    if scenario.endswith("Closed"):
        if gain not in (None, "riccati"):
            raise ValueError(f"gain must be 'riccati', got {gain!r}")
        gain = solve_feedback(assemble_coupled(mesh, p, d.get("region", FULL_DOMAIN)))
    elif gain is not None:
        raise ValueError(f"scenario {scenario} forbids a gain")
    return SimConfig(**d, params=p, gain=gain, steady=steady, mesh=mesh).validate()


def energy_rows(res):
    return [[float(t), float(a), float(b), float(c)]
            for t, a, b, c in zip(res.times, res.l2_energy, res.h1_energy, res.aux_l2)]


def write_sim(out, stem, res, man):
    man.add(write_csv(out / f"{stem}.csv", ["t", "l2", "h1", "aux_l2"], energy_rows(res)))
    man.add(write_json(out / f"{stem}_summary.json", res.summary()))


def cmd_simulate(args):
    data = json.loads(Path(args.config).read_text())
    man = RunManifest("simulate", {"config_file": args.config, "config": data, "out": args.out})
    out = _outdir(args)
    with _Timer(man, "setup"):
        cfg = build_sim_config(data, Path(args.config).parent)
    man.params = cfg.params.to_dict()
    with _Timer(man, "simulate"):
        res = simulate(cfg)
    write_sim(out, data.get("name", Path(args.config).stem), res, man)
    return man


def cmd_reproduce_figures(args):
    p = _params(args)
    man = RunManifest("reproduce-figures", _config(args), p.to_dict())
    out = _outdir(args)
    mesh = build_unit_square_mesh(args.n)
    pz, ps = p.replace(nu=args.nu), p.replace(nu=args.nu_steady)
    pz.check_shift()
    ps.check_shift(steady=True)

    with _Timer(man, "fig1"):
        count_unstable(pz, args.nu, args.kmax)
        man.add(write_csv(out / "fig1_analytic_spectrum.csv", SPECTRUM_HEADER,
                          spectrum_rows(p, args.nu, args.kmax)))
        blocks = assemble_coupled(mesh, pz)
        ev = discrete_spectrum(blocks)
        man.add(write_csv(out / "fig1a_open_loop_eigs.csv", ["re", "im"],
                          [[float(z.real), float(z.imag)] for z in ev]))
        sol = solve_feedback(blocks)
        At, Bt, _, _ = reduce_to_standard(blocks)
        evc = np.sort_complex(np.linalg.eigvals(At - Bt @ sol.G))[::-1]
        man.add(write_csv(out / "fig1b_closed_loop_eigs.csv", ["re", "im"],
                          [[float(z.real), float(z.imag)] for z in evc]))
    common = dict(dt=args.dt, T=args.T, n=args.n, mesh=mesh)
    runs = [
        ("fig2a_linear_open", SimConfig("LinearOpen", params=pz, **common)),
        ("fig2b_linear_closed", SimConfig("LinearClosed", params=pz, gain=sol, **common)),
        ("fig3a_nonlinear_open", SimConfig("NonlinearOpen", params=pz, **common)),
        ("fig3b_nonlinear_closed", SimConfig("NonlinearClosed", params=pz, gain=sol, **common)),
    ]
    for stem, cfg in runs:
        with _Timer(man, stem):
            write_sim(out, stem, simulate(cfg), man)
    with _Timer(man, "fig4"):
        st = manufacture_forcing(SINSIN, mesh, ps)
        sol_s = solve_feedback(assemble_coupled(mesh, ps))
        write_sim(out, "fig4a_steady_open",
                  simulate(SimConfig("SteadyNonlinearOpen", params=ps, steady=st, **common)), man)
        write_sim(out, "fig4b_steady_closed",
                  simulate(SimConfig("SteadyNonlinearClosed", params=ps, steady=st, gain=sol_s, **common)), man)
    return man


def build_parser():
    ap = argparse.ArgumentParser(prog="memstab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        sp = sub.add_parser(name, **kw)
        sp.set_defaults(func=func)
        return sp

    def with_params(sp):
        sp.add_argument("--params", help="parameter JSON file (default: bundled reference set)")
        return sp

    def with_out(sp):
        sp.add_argument("--out", default=".", help="output directory")
        return sp

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    info = msub.add_parser("info", help="print mesh statistics")
    info.add_argument("--n", type=positive_int, required=True)
    info.set_defaults(func=cmd_mesh_info)

    sp = with_out(with_params(add("assemble", cmd_assemble, help="assemble the coupled operator")))
    sp.add_argument("--n", type=positive_int, required=True)
    sp.add_argument("--nu", type=float, default=0.0)
    sp.add_argument("--region", type=region_arg, default=FULL_DOMAIN)
    sp.add_argument("--dump", action="store_true", help="write MatrixMarket files")

    sp = with_out(with_params(add("spectrum", cmd_spectrum, help="analytic (and discrete) spectrum")))
    sp.add_argument("--nu", type=float, required=True)
    sp.add_argument("--kmax", type=positive_int, default=50)
    sp.add_argument("--discrete", action="store_true")
    sp.add_argument("--n", type=positive_int, default=16)

    sp = with_out(with_params(add("riccati", cmd_riccati, help="Riccati feedback gain")))
    sp.add_argument("--nu", type=float, required=True)
    sp.add_argument("--n", type=positive_int, required=True)
    sp.add_argument("--region", type=region_arg, default=FULL_DOMAIN)
    sp.add_argument("--tol", type=positive_float, default=1e-9)
    sp.add_argument("--max-iter", type=positive_int, default=50)

    sp = with_out(with_params(add("steady", cmd_steady, help="stationary solution by Newton")))
    sp.add_argument("--n", type=positive_int, required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--forcing-file", help="CSV x,y,value of nodal forcing")
    src.add_argument("--manufactured", choices=sorted(MANUFACTURED))
    sp.add_argument("--tol", type=positive_float, default=1e-10)

    sp = with_out(add("simulate", cmd_simulate, help="run one scenario from a JSON config"))
    sp.add_argument("--config", required=True)

    sp = with_out(with_params(add("reproduce-figures", cmd_reproduce_figures,
                                  help="all figure data in one run")))
    sp.add_argument("--n", type=positive_int, default=16)
    sp.add_argument("--dt", type=positive_float, default=1e-3)
    sp.add_argument("--T", type=positive_float, default=5.0)
    sp.add_argument("--nu", type=float, default=4.0)
    sp.add_argument("--nu-steady", type=float, default=1.0)
    sp.add_argument("--kmax", type=positive_int, default=50)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        man = args.func(args)
        record = man.to_dict()
        if man.outputs:
            path = Path(getattr(args, "out", ".")) / "manifest.json"
            record["outputs"].append(str(path))
            write_json(path, record)
    except Exception as exc:  # noqa: BLE001 - every module error maps to exit 1
        log.debug("command failed", exc_info=True)
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(json.dumps(record, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
