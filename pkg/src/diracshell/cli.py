"""Batch front-end: JSON configuration, experiment drivers, serialization.

Commands::

    shellspec scan     --config cfg.json --out dir    # scan.csv, brackets.json
    shellspec eigs     --config cfg.json --out dir    # eigenvalues.json, densities.bin
    shellspec symmetry --config cfg.json --out dir    # symmetry_report.json
    shellspec nonrel   --config cfg.json --out dir    # nonrel.csv
    shellspec verify   --config cfg.json --out dir    # invariant suite, exit code

Every output embeds the resolved configuration and the coupling
classification; floats are written with 17 significant digits so files
round-trip exactly.  Exit codes: 0 success, 1 configuration errors,
2 refused physics (critical coupling, mixed coupling where a pure one is
required).
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (ALPHA, BETA, I4, Coupling, PhysParams, green_function,
                   momentum_k, transmission_matrix)
from .errors import CriticalCoupling, DiracShellError, MixedCoupling, ParseError
from .oracles import (schrodinger_sphere_bound_states, sphere_single_layer_eig,
                      spherical_bessel)
from .spectral import (find_eigenvalues, nonrel_limit_sweep, scan_gap,
                       verify_symmetries)
from .surface import (SurfaceQuadrature, load_triangle_mesh, sphere_grid,
                      spheroid_grid)

__all__ = ["main"]

_FMT = "%.17g"


def _fnum(x: float) -> str:
    return _FMT % float(x)


def _jsonable(obj):
    if isinstance(obj, float):
        return float(_fnum(obj))
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def _build_surface(cfg: dict) -> SurfaceQuadrature:
    try:
        kind = cfg["kind"]
        if kind == "sphere":
            return sphere_grid(float(cfg.get("radius", 1.0)),
                               int(cfg.get("n_polar", 16)),
                               int(cfg.get("n_azimuthal", 32)))
        if kind == "spheroid":
            return spheroid_grid(float(cfg["a"]), float(cfg["b"]),
                                 int(cfg.get("n_polar", 16)),
                                 int(cfg.get("n_azimuthal", 32)))
        if kind == "mesh":
            mesh_path = Path(cfg["path"])
            if not mesh_path.exists():
                raise ParseError(f"mesh file not found: {mesh_path}")
            return load_triangle_mesh(mesh_path)
    except KeyError as exc:
        raise ParseError(f"surface config missing field {exc}") from exc
    raise ParseError(f"unknown surface kind {kind!r}")


class _Run:
    """Resolved configuration shared by all commands."""

    def __init__(self, cfg: dict, out_dir: str):
        self.cfg = cfg
        phys = cfg.get("physics", {})
        self.params = PhysParams(float(phys.get("m", 1.0)),
                                 float(phys.get("c", 1.0)))
        cpl = cfg.get("coupling", {})
        self.coupling = Coupling(float(cpl.get("eta", 0.0)),
                                 float(cpl.get("tau", 0.0)), self.params.c)
        self.surface = _build_surface(cfg.get("surface", {"kind": "sphere"}))
        scan = cfg.get("scan", {})
        self.n_samples = int(scan.get("n_samples", 200))
        self.margin = scan.get("margin")
        if self.margin is not None:
            self.margin = float(self.margin)
        self.threshold = float(scan.get("threshold", 0.02))
        self.accept_tol = float(scan.get("accept_tol", 1e-5))
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)

    def echo(self) -> dict:
        return _jsonable({
            "version": __version__,
            "config": self.cfg,
            "resolved": {
                "m": self.params.m,
                "c": self.params.c,
                "eta": self.coupling.eta,
                "tau": self.coupling.tau,
                "coupling_class": self.coupling.klass.value,
                "surface_nodes": self.surface.n_nodes,
                "n_samples": self.n_samples,
                "threshold": self.threshold,
                "accept_tol": self.accept_tol,
            },
        })


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_scan_csv(path: Path, run: _Run, scan) -> None:
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(run.echo(), sort_keys=True) + "\n")
        fh.write("lambda,sigma_min\n")
        for lam, sig in zip(scan.lams, scan.sigmas):
            fh.write(f"{_fnum(lam)},{_fnum(sig)}\n")


def cmd_scan(run: _Run) -> int:
    scan = scan_gap(run.coupling, run.surface, run.params, run.n_samples,
                    run.margin, run.threshold)
    _write_scan_csv(run.out / "scan.csv", run, scan)
    _write_json(run.out / "brackets.json",
                {**run.echo(), "brackets": scan.brackets,
                 "min_sigma": float(scan.sigmas.min())})
    return 0


_DENS_MAGIC = b"SHDN"


def _write_densities(path: Path, results) -> None:
    with open(path, "wb") as fh:
        fh.write(_DENS_MAGIC + struct.pack("<I", len(results)))
        for res in results:
            fh.write(struct.pack("<dII", res.lam, res.multiplicity,
                                 res.densities.shape[1]))
            fh.write(np.ascontiguousarray(res.densities,
                                          dtype=np.complex128).tobytes())


def cmd_eigs(run: _Run) -> int:
    scan, results = find_eigenvalues(run.coupling, run.surface, run.params,
                                     run.n_samples, run.margin, run.threshold,
                                     run.accept_tol)
    _write_scan_csv(run.out / "scan.csv", run, scan)
    _write_json(run.out / "eigenvalues.json", {
        **run.echo(),
        "eigenvalues": [{
            "lambda": res.lam,
            "sigma_min": res.sigma,
            "multiplicity": res.multiplicity,
            "even_multiplicity": res.multiplicity % 2 == 0,
            "jump_residual": res.residual,
        } for res in results],
    })
    _write_densities(run.out / "densities.bin", results)
    return 0


def cmd_symmetry(run: _Run) -> int:
    report = verify_symmetries(run.coupling, run.surface, run.params,
                               run.n_samples, run.accept_tol)
    _write_json(run.out / "symmetry_report.json", {**run.echo(), **report})
    return 0


def cmd_nonrel(run: _Run) -> int:
    c_list = [float(c) for c in run.cfg.get("c_list", [])]
    if not c_list:
        raise ParseError("nonrel requires a nonempty c_list in the config")
    table = nonrel_limit_sweep(run.coupling, run.surface, run.params.m, c_list)
    with open(run.out / "nonrel.csv", "w") as fh:
        fh.write("# " + json.dumps(run.echo(), sort_keys=True) + "\n")
        fh.write("c,lambda,lambda_shifted,schrodinger_ref,oracle_l,difference\n")
        for row in table["rows"]:
            fh.write(",".join([
                _fnum(row["c"]), _fnum(row["lambda"]), _fnum(row["shifted"]),
                _fnum(row["oracle"]) if row["oracle"] is not None else "",
                str(row["oracle_l"]) if row["oracle_l"] is not None else "",
                _fnum(row["difference"]) if row["difference"] is not None else "",
            ]) + "\n")
    _write_json(run.out / "nonrel_order.json",
                {**run.echo(),
                 "orders": {f"l={l},lam={_fnum(lam)}": v
                            for (l, lam), v in table["orders"].items()},
                 "order": table["order"]})
    return 0


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------


def _check_algebra(dirac_alpha=ALPHA):
    err = 0.0
    for j in range(3):
        for k in range(3):
            acc = dirac_alpha[j] @ dirac_alpha[k] + dirac_alpha[k] @ dirac_alpha[j]
            err = max(err, np.abs(acc - 2.0 * (j == k) * I4).max())
        err = max(err, np.abs(dirac_alpha[j] @ BETA + BETA @ dirac_alpha[j]).max())
    err = max(err, np.abs(BETA @ BETA - I4).max())
    return err, 1e-12


def _check_transmission_inverse():
    rng = np.random.default_rng(0)
    err = 0.0
    for _ in range(10):
        eta, tau, c = rng.normal(size=3)
        c = abs(c) + 0.5
        if abs(eta**2 - tau**2 + 4 * c**2) < 1e-6:
            continue
        nu = rng.normal(size=3)
        nu /= np.linalg.norm(nu)
        cpl = Coupling(eta, tau, c)
        mat = transmission_matrix(cpl, nu)
        alpha_nu = np.einsum("j,jab->ab", nu, ALPHA)
        half = 0.5 * cpl.matrix
        lhs = (1j * c * alpha_nu + half) @ mat + (-1j * c * alpha_nu + half)
        err = max(err, np.abs(lhs).max())
    return err, 1e-12


def _check_kernel_identity():
    rng = np.random.default_rng(1)
    params = PhysParams(1.0, 1.0)
    lam = 0.3 + 0.2j
    k = momentum_k(lam, params)
    err = 0.0
    for _ in range(200):
        x = rng.normal(size=3)
        g = green_function(lam, x, params)
        scal = np.exp(1j * k * np.linalg.norm(x)) / (4 * np.pi * np.linalg.norm(x))
        target = 2.0 * (lam / params.c**2 * BETA + params.m * I4) * scal
        err = max(err, np.abs(BETA @ g + g @ BETA - target).max())
        g_conj = green_function(np.conj(lam), -x, params)
        err = max(err, np.abs(np.conj(g).T - g_conj).max())
    return err, 1e-12


def _check_single_layer_oracle():
    from .assembly import assemble_single_layer
    surf = sphere_grid(1.0, 16, 32)
    op = assemble_single_layer(1j, surf)
    theta = np.arccos(np.clip(surf.nodes[:, 2], -1, 1))
    err = 0.0
    for l in range(4):
        from scipy.special import eval_legendre
        y = eval_legendre(l, np.cos(theta))
        ref = sphere_single_layer_eig(1j, 1.0, l)
        num = np.vdot(y * surf.weights, op.matrix @ y) / np.vdot(y * surf.weights, y)
        err = max(err, abs(num - ref) / abs(ref))
    return err, 1e-6


def _check_wronskian():
    err = 0.0
    for l in range(6):
        z = 0.8 + 0.4j
        eps = 1e-6
        j, h = spherical_bessel(l, z)
        jp = (spherical_bessel(l, z + eps)[0] - spherical_bessel(l, z - eps)[0]) / (2 * eps)
        hp = (spherical_bessel(l, z + eps)[1] - spherical_bessel(l, z - eps)[1]) / (2 * eps)
        err = max(err, abs(j * hp - jp * h - 1j / z**2))
    return err, 1e-9


def _check_radial_oracle():
    modes = schrodinger_sphere_bound_states(-2.0, 1.0, 1.0, 1)
    if len(modes) != 2:
        return 1.0, 1e-12
    return max(mode.residual for mode in modes), 1e-6


def cmd_verify(run: _Run) -> int:
    level = run.cfg.get("level", "quick")
    checks = [
        ("dirac-anticommutation", _check_algebra),
        ("transmission-inverse", _check_transmission_inverse),
        ("kernel-identities", _check_kernel_identity),
    ]
    if level == "full":
        checks += [
            ("single-layer-oracle", _check_single_layer_oracle),
            ("bessel-wronskian", _check_wronskian),
            ("radial-oracle", _check_radial_oracle),
        ]
    failed = 0
    lines = []
    for name, fn in checks:
        err, tol = fn()
        ok = err <= tol
        failed += not ok
        line = f"{'PASS' if ok else 'FAIL'} {name}: error {err:.3e} vs tol {tol:.1e}"
        print(line)
        lines.append(line)
    _write_json(run.out / "verify.json",
                {**run.echo(), "level": level, "results": lines,
                 "failed": failed})
    return 1 if failed else 0


_COMMANDS = {
    "scan": cmd_scan,
    "eigs": cmd_eigs,
    "symmetry": cmd_symmetry,
    "nonrel": cmd_nonrel,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shellspec",
        description="Boundary-integral spectral solver for Dirac shell operators")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        run = _Run(cfg, args.out)
    except (DiracShellError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.threads is not None:
        try:
            import threadpoolctl
            threadpoolctl.threadpool_limits(args.threads)
        except ImportError:
            print("warning: threadpoolctl not installed; --threads ignored",
                  file=sys.stderr)
    try:
        return _COMMANDS[args.command](run)
    except (CriticalCoupling, MixedCoupling) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except DiracShellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
