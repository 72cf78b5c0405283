"""Command-line orchestration: ``hitchlab <subcommand> [options]``.

Configuration is a flat ``key = value`` text file (``--config``) with
command-line overrides (``--set key=value`` and the dedicated flags).  Every
command writes ``<command>.json`` into ``--out`` with the resolved config,
its hash, the mesh level, tolerances, results and verdicts.  Exit status:
0 all verdicts pass, 2 inconclusive (finite-difference noise), 1 failure.
"""
import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

DEFAULTS = {
    "level": 1,
    "seed": 0,
    "n": 2,
    "poly": "1,0,0.3j",
    "directions": "1,0,0.3j; 0,1,0,0.5; 0.2,0,1",
    "theta_length": 5,
    "mu_sup": 0.5,
    "radius": 0.08,
    "grid": 2,
    "harmonic_rel_tol": 1e-12,
    "pde_tol": 1e-10,
    "q_scale": 0.0,
    "base_shift": 0.6,
    "hessian_step": 0.04,
    "crosscheck_tol": 0.02,
    "workers": 1,
}

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2


class ConfigError(ValueError):
    pass


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected key = value" % (path, lineno))
        key, value = (part.strip() for part in line.split("=", 1))
        cfg[key] = value
    return cfg


def _coerce(key, value):
    default = DEFAULTS.get(key)
    if isinstance(default, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        if not Path(args.config).exists():
            raise ConfigError("config file %s does not exist" % args.config)
        cfg.update(read_config(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError("--set expects key=value, got %r" % item)
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    for key in ("level", "seed", "n", "poly", "radius", "grid", "q_scale"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError("unknown config keys: %s" % ", ".join(unknown))
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    for key in ("harmonic_rel_tol", "pde_tol", "radius", "mu_sup", "hessian_step", "crosscheck_tol"):
        if cfg[key] <= 0:
            raise ConfigError("%s must be positive" % key)
    if cfg["level"] < 0:
        raise ConfigError("level must be >= 0")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def parse_poly(text):
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError("cannot parse polynomial %r" % text) from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex) or isinstance(obj, np.complexfloating):
        return {"re": float(np.real(obj)), "im": float(np.imag(obj))}
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# ---------------------------------------------------------------------------
# helpers shared by the commands


def _mesh(cfg, out):
    from .surface.mesh import MESH_FORMAT, SurfaceMesh, triangulate

    cache = out / ("mesh_L%d.npz" % cfg["level"])
    if cache.exists():
        try:
            return SurfaceMesh.load(cache)
        except (ValueError, KeyError):
            pass
    mesh = triangulate(level=cfg["level"])
    mesh.save(cache)
    assert MESH_FORMAT
    return mesh


def _direction(mesh, cfg, poly=None):
    from .surface.theta import beltrami_from_quaddiff, mesh_quaddiff

    coeffs = parse_poly(poly if poly is not None else cfg["poly"])
    if not any(coeffs):
        return np.zeros(mesh.n_points, dtype=complex), None
    q = mesh_quaddiff(mesh, coeffs, L=cfg["theta_length"])
    return beltrami_from_quaddiff(q, sup=cfg["mu_sup"]).values, q


def _direction_polys(cfg):
    return [p for p in cfg["directions"].split(";") if p.strip()]


def _directions(mesh, cfg):
    return [_direction(mesh, cfg, p)[0] for p in _direction_polys(cfg)]


def _provenance(cfg):
    return {
        "harmonic_rel_tol": cfg["harmonic_rel_tol"],
        "pde_tol": cfg["pde_tol"],
        "theta_length": cfg["theta_length"],
        "fd_step": cfg["radius"] / cfg["grid"],
    }


# ---------------------------------------------------------------------------
# commands; each returns (results dict, verdicts dict of "pass"/"fail"/"inconclusive")


def cmd_mesh(cfg, out):
    from .surface.mesh import MESH_FORMAT, stiffness_matrix

    mesh = _mesh(cfg, out)
    K = stiffness_matrix(mesh)
    area = float(mesh.vertex_areas.sum())
    results = {
        "format": MESH_FORMAT,
        "file": "mesh_L%d.npz" % cfg["level"],
        "vertices": mesh.n_vertices,
        "triangles": len(mesh.triangles),
        "euler_characteristic": mesh.euler_characteristic(),
        "area": area,
        "area_relative_error": area / (4 * np.pi) - 1,
        "laplacian_row_sum": float(np.abs(K.sum(axis=1)).max()),
        "mesh_size": float(mesh.mesh_size),
    }
    verdicts = {
        "euler_characteristic": "pass" if results["euler_characteristic"] == -2 else "fail",
        "row_sums": "pass" if results["laplacian_row_sum"] < 1e-10 else "fail",
    }
    return results, verdicts


def cmd_theta(cfg, out):
    mesh = _mesh(cfg, out)
    mu, q = _direction(mesh, cfg)
    with open(out / "theta.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["point", "re_z", "im_z", "re_q", "im_q", "re_mu", "im_mu"])
        qv = q.values if q is not None else np.zeros(mesh.n_points)
        for p in range(mesh.n_points):
            z = mesh.points[p]
            wr.writerow([p, repr(z.real), repr(z.imag), repr(qv[p].real), repr(qv[p].imag), repr(mu[p].real), repr(mu[p].imag)])
    results = {
        "poly": cfg["poly"],
        "length": cfg["theta_length"],
        "invariance_residual": q.invariance_residual if q is not None else 0.0,
        "mu_sup": float(np.abs(mu).max()),
        "file": "theta.csv",
    }
    return results, {"mu_bound": "pass" if results["mu_sup"] < 1 else "fail"}


def cmd_harmonic(cfg, out):
    from .harmonic import hopf_differential, solve_harmonic

    mesh = _mesh(cfg, out)
    mu, _ = _direction(mesh, cfg)
    mu = None if not np.any(mu) else mu
    f, E, hist = solve_harmonic(mesh, mu, rel_tol=cfg["harmonic_rel_tol"])
    f.save(out / "harmonic_map.txt")
    hopf = hopf_differential(mesh, mu, f)
    results = {
        "energy": E.value,
        "gradient_norm": E.gradient_norm,
        "energy_over_4pi": E.value / (4 * np.pi),
        "iterations": len(hist["energy"]) - 1,
        "energy_history": hist["energy"],
        "equivariance_defect": f.equivariance_defect(),
        "hopf_relative_size": hopf.relative_size,
        "hopf_dbar_residual": hopf.dbar_residual,
        "file": "harmonic_map.txt",
    }
    monotone = all(b <= a + 1e-12 * abs(a) for a, b in zip(hist["energy"], hist["energy"][1:]))
    verdicts = {"monotone_descent": "pass" if monotone else "fail"}
    if mu is None:
        verdicts["energy_4pi"] = "pass" if abs(results["energy_over_4pi"] - 1) < 0.01 else "fail"
    return results, verdicts


def _hitchin_data(mesh, cfg):
    from .selfduality import CyclicHiggsData
    from .surface.theta import poincare_theta_series

    n = cfg["n"]
    if cfg["q_scale"] == 0:
        return CyclicHiggsData(n)
    q = poincare_theta_series(parse_poly(cfg["poly"]), cfg["theta_length"], mesh.rep_points, group=mesh.group, weight=n)
    return CyclicHiggsData(n, cfg["q_scale"] * q.values)


def cmd_hitchin(cfg, out):
    from .selfduality import energy_from_higgs, flatness_residual, fuchsian_closed_form, solve_cyclic_metric

    mesh = _mesh(cfg, out)
    data = _hitchin_data(mesh, cfg)
    W = solve_cyclic_metric(mesh, data, tol=cfg["pde_tol"], init="zero")
    n = data.n
    with open(out / "hitchin_weights.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["vertex"] + ["w%d" % (i + 1) for i in range(n)])
        for a, row in enumerate(W.w):
            wr.writerow([a] + [repr(float(x)) for x in row])
    res = W.history["residual"]
    ratios = [res[k + 1] / res[k] ** 2 for k in range(len(res) - 1) if res[k] > 0]
    results = {
        "n": n,
        "residual_history": res,
        "quadratic_constants": ratios,
        "zero_sum_defect": W.history["zero_sum_defect"],
        "flatness_residual": flatness_residual(mesh, data, W),
        "energy": energy_from_higgs(mesh, data, W),
        "energy_over_4pi": energy_from_higgs(mesh, data, W) / (4 * np.pi),
        "file": "hitchin_weights.csv",
    }
    if data.q is None:
        exact = fuchsian_closed_form(mesh, n)
        results["max_deviation_from_closed_form"] = float(np.abs(W.w - exact.w).max())
    verdicts = {
        "converged": "pass" if res[-1] < cfg["pde_tol"] else "fail",
        "zero_sum": "pass" if results["zero_sum_defect"] < 1e-12 else "fail",
    }
    return results, verdicts


def cmd_crosscheck(cfg, out):
    from .harmonic import solve_harmonic
    from .selfduality import CyclicHiggsData, energy_from_higgs, fuchsian_closed_form

    mesh = _mesh(cfg, out)
    n = cfg["n"]
    _, E, _ = solve_harmonic(mesh, None, rel_tol=cfg["harmonic_rel_tol"])
    data = CyclicHiggsData(n)
    higgs = energy_from_higgs(mesh, data, fuchsian_closed_form(mesh, n))
    scale = (n**3 - n) / 6.0
    gap = abs(higgs / scale - E.value) / E.value
    results = {
        "n": n,
        "harmonic_energy": E.value,
        "higgs_energy": higgs,
        "rank_scale": scale,
        "relative_gap": gap,
    }
    return results, {"two_route_agreement": "pass" if gap < cfg["crosscheck_tol"] else "fail"}


def _disk_scenario(mesh, mu0, cfg, base_mu=None):
    from .psh import DiskScenario

    return DiskScenario(mesh, mu0, radius=cfg["radius"], m=cfg["grid"], base_mu=base_mu, rel_tol=cfg["harmonic_rel_tol"])


def cmd_disk(cfg, out):
    from .psh import energy_disk, fd_laplacian, first_derivatives

    mesh = _mesh(cfg, out)
    mu0, _ = _direction(mesh, cfg)
    surface = energy_disk(_disk_scenario(mesh, mu0, cfg))
    lap = fd_laplacian(surface)
    m, h = surface.m, surface.h
    with open(out / "energy_grid.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["s", "t", "E", "residual"])
        for i in range(-m, m + 1):
            for j in range(-m, m + 1):
                wr.writerow([repr(i * h), repr(j * h), repr(float(surface.energy(i, j))), repr(surface.residuals[(i, j)])])
    ds, dt = first_derivatives(surface)
    e0 = surface.energy(0, 0)
    results = {
        "laplacian": lap.value,
        "error_estimate": lap.error,
        "laplacian_2h": lap.value_2h,
        "verdict": "degenerate direction" if lap.verdict == "degenerate" else lap.verdict,
        "center_energy": e0,
        "center_is_grid_minimum": bool(e0 <= np.nanmin(surface.energies) + 1e-12 * e0),
        "dE_ds": ds,
        "dE_dt": dt,
        "file": "energy_grid.csv",
    }
    if lap.verdict == "degenerate":
        verdicts = {"laplacian": "pass"}
    elif lap.verdict == "inconclusive":
        verdicts = {"laplacian": "inconclusive"}
    else:
        verdicts = {"laplacian": "pass" if lap.verdict == "positive" else "fail"}
    return results, verdicts


_WORKER_STATE = {}


def _psh_scenario(job):
    """One (direction, base point) cell of the PSH/Toledo suite; runs in a worker."""
    from .psh import energy_disk, equality_locus_gap, fd_laplacian, toledo_quantities

    cfg, out, k, base_name = job
    key = (out, config_hash(cfg))
    if key not in _WORKER_STATE:
        mesh = _mesh(cfg, Path(out))
        _WORKER_STATE[key] = (mesh, _directions(mesh, cfg))
    mesh, dirs = _WORKER_STATE[key]
    base_mu = None if base_name == "fuchsian" else cfg["base_shift"] * dirs[0]
    surface = energy_disk(_disk_scenario(mesh, dirs[k], cfg, base_mu=base_mu), stencil_only=True)
    lap = fd_laplacian(surface)
    tol = toledo_quantities(surface)
    row = {
        "direction": k,
        "base": base_name,
        "laplacian": lap.value,
        "error_estimate": lap.error,
        "verdict": lap.verdict,
        "a": tol.a,
        "b": tol.b,
        "alpha": tol.alpha,
        "rho": tol.rho,
        "epsilon": tol.epsilon,
        "checks": tol.checks(),
    }
    gap = equality_locus_gap(surface)
    row["gaps"] = {"plus": gap.gap_plus, "minus": gap.gap_minus, "scale": gap.scale, "ratio": gap.ratio}
    return row


def cmd_psh_report(cfg, out):
    _mesh(cfg, out)  # build the cache once before any worker starts
    n_dirs = len(_direction_polys(cfg))
    jobs = [(cfg, str(out), k, b) for k in range(n_dirs) for b in ("fuchsian", "off_minimum")]
    if cfg["workers"] > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            rows = list(pool.map(_psh_scenario, jobs))
    else:
        rows = [_psh_scenario(job) for job in jobs]
    verdicts = {}
    for row in rows:
        key = "d%d_%s" % (row["direction"], row["base"])
        if row["verdict"] == "inconclusive":
            verdicts[key + "_psh"] = "inconclusive"
        else:
            ok = row["verdict"] == "positive" and row["laplacian"] > row["error_estimate"]
            verdicts[key + "_psh"] = "pass" if ok else "fail"
        verdicts[key + "_toledo"] = "pass" if all(row["checks"].values()) else "fail"
    ok = all(v == "pass" for v in verdicts.values())
    summary = "strictly plurisubharmonic at resolvable scale: " + ("PASS" if ok else "FAIL")
    return {"scenarios": rows, "verdict": summary}, verdicts


def cmd_hessian(cfg, out):
    from .psh import hessian_probe

    mesh = _mesh(cfg, out)
    dirs = _directions(mesh, cfg)
    rep = hessian_probe(mesh, dirs, h=cfg["hessian_step"], rel_tol=cfg["harmonic_rel_tol"])
    results = {
        "mixed_hessian": rep.mixed,
        "mixed_eigenvalues": rep.mixed_eigenvalues,
        "noise_bound": rep.noise_bound,
        "real_eigenvalues": rep.real_eigenvalues,
        "index": rep.index,
        "verdict": rep.verdict,
    }
    if rep.verdict == "inconclusive":
        v = "inconclusive"
    else:
        v = "pass" if rep.verdict == "positive definite" else "fail"
    return results, {"mixed_block": v, "index_bound": "pass" if rep.index <= 3 else "fail"}


COMMANDS = {
    "mesh": cmd_mesh,
    "theta": cmd_theta,
    "harmonic": cmd_harmonic,
    "hitchin": cmd_hitchin,
    "disk": cmd_disk,
    "psh-report": cmd_psh_report,
    "hessian": cmd_hessian,
    "crosscheck": cmd_crosscheck,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="hitchlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", default="hitchlab-out", help="output directory")
        p.add_argument("--level", type=int, help="mesh refinement level")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        if name in ("hitchin", "crosscheck"):
            p.add_argument("--n", type=int, help="rank")
        if name == "hitchin":
            p.add_argument("--q-scale", dest="q_scale", type=float, help="multiplier of the theta-series q_n")
        if name in ("theta", "harmonic", "disk", "hitchin"):
            p.add_argument("--poly", help="polynomial coefficients, e.g. '1,0,0.3j' ('0' for none)")
        if name == "disk":
            p.add_argument("--radius", type=float)
            p.add_argument("--grid", type=int, help="grid half-width m")
    return parser


def run(command, cfg, out):
    """Run one command; returns (exit status, report dict)."""
    np.random.seed(cfg["seed"])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    results, verdicts = COMMANDS[command](cfg, out)
    if any(v == "fail" for v in verdicts.values()):
        status = EXIT_FAIL
    elif any(v == "inconclusive" for v in verdicts.values()):
        status = EXIT_INCONCLUSIVE
    else:
        status = EXIT_PASS
    report = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "mesh_level": cfg["level"],
        "tolerances": _provenance(cfg),
        "results": results,
        "verdicts": verdicts,
        "status": status,
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    (out / (command + ".json")).write_text(text + "\n")
    return status, report


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        status, report = run(args.command, cfg, out)
    except Exception as exc:  # structured error report, non-zero exit
        err = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        history = getattr(exc, "history", None)
        if history is not None:
            err["history"] = _jsonable(history)
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(err, indent=2, sort_keys=True) + "\n")
        print(json.dumps(err), file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps(_jsonable({"command": args.command, "status": status, "verdicts": report["verdicts"]})))
    return status


if __name__ == "__main__":
    sys.exit(main())
