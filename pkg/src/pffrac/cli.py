"""Command line interface.

    pffrac run <config> [section.key=value ...]   full simulation
    pffrac mesh <config> [--out PATH]             write the mesh file only
    pffrac check                                  quick self-tests
    pffrac preset <name> [--out PATH]             emit a builtin config

The config argument is a file path; the builtin preset names
(example1, example2) are accepted directly if no such file exists.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile

import numpy as np

from .config import PRESETS, ConfigError, parse_config, write_preset
from .mesh import MeshError, write_mesh


def _resolve_config_path(arg: str, tmpdir: str) -> str:
    if os.path.exists(arg):
        return arg
    name = arg[:-4] if arg.endswith(".cfg") else arg
    if name in PRESETS:
        path = os.path.join(tmpdir, f"{name}.cfg")
        write_preset(name, path)
        return path
    raise ConfigError(f"config file not found: {arg}")


def _cmd_run(args) -> int:
    from .runner import run_simulation
    with tempfile.TemporaryDirectory() as tmp:
        cfg = parse_config(_resolve_config_path(args.config, tmp), args.overrides)
        reports, _, _ = run_simulation(cfg)
    bad = sum(1 for r in reports if not r.converged)
    if bad:
        print(f"warning: {bad} of {len(reports)} steps did not converge",
              file=sys.stderr)
    print(f"wrote outputs to {cfg.out_dir}")
    return 0


def _cmd_mesh(args) -> int:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = parse_config(_resolve_config_path(args.config, tmp), args.overrides)
    mesh = cfg.build_mesh()
    out = args.out
    if out is None:
        os.makedirs(cfg.out_dir, exist_ok=True)
        out = os.path.join(cfg.out_dir, "mesh.txt")
    write_mesh(mesh, out)
    print(f"wrote {mesh.n_nodes} nodes / {mesh.n_cells} cells to {out}")
    return 0


def _cmd_preset(args) -> int:
    out = args.out or f"{args.name}.cfg"
    write_preset(args.name, out)
    print(f"wrote preset {args.name} to {out}")
    return 0


def _cmd_check(args) -> int:
    """Fast invariant suite: split identities and Jacobian consistency."""
    from . import material, subsolvers
    from .fem import FeSpace
    from .material import MaterialParams
    from .mesh import generate_unit_square_mesh

    rng = np.random.default_rng(20240517)
    passed = 0

    # split recombination and positive-part spectrum on random tensors
    e = rng.uniform(-10.0, 10.0, size=(2000, 3))
    spxx, spyy, spxy, smxx, smyy, smxy = material.stress_split_batch(
        e[:, 0], e[:, 1], e[:, 2], 3.1, 1.7)
    rxx = spxx + smxx - (2 * 3.1 * e[:, 0] + 1.7 * (e[:, 0] + e[:, 1]))
    ryy = spyy + smyy - (2 * 3.1 * e[:, 1] + 1.7 * (e[:, 0] + e[:, 1]))
    rxy = spxy + smxy - 2 * 3.1 * e[:, 2]
    scale = np.maximum(1.0, np.abs(e).max(axis=1))
    if (np.max(np.abs(np.stack([rxx, ryy, rxy])) / scale) > 1.0e-12):
        print("FAIL: split recombination")
        return 1
    passed += 1

    pxx, pyy, pxy = material.positive_part_batch(e[:, 0], e[:, 1], e[:, 2])
    lam1, lam2, _, _ = material.eig_batch(pxx, pyy, pxy)
    if lam2.min() < -1.0e-10:
        print("FAIL: positive part is not positive semidefinite")
        return 1
    passed += 1

    # tangent consistency on a small mesh, away from kinks
    mesh = generate_unit_square_mesh(3)
    space = FeSpace(mesh)
    params = MaterialParams(5.0, 3.0, 1.0, 1.0e-8, 0.5, 2.0)
    u = 0.1 * rng.standard_normal(space.n_udofs)
    phi = rng.uniform(0.2, 0.9, mesh.n_nodes)
    lf = np.full(mesh.n_nodes, 0.1)
    Ja = subsolvers.elasticity_jacobian(u, phi, lf, params, space).toarray()
    Jf = subsolvers.elasticity_jacobian(u, phi, lf, params, space,
                                        mode="fd").toarray()
    if np.abs(Ja - Jf).max() > 1.0e-5 * max(1.0, np.abs(Ja).max()):
        print("FAIL: displacement Jacobian vs finite differences")
        return 1
    passed += 1

    phi_step = np.ones(mesh.n_nodes)
    xi = np.zeros(mesh.n_nodes)
    Ja = subsolvers.phasefield_jacobian(phi, phi_step, u, lf, params, space).toarray()
    Jf = subsolvers.phasefield_jacobian(phi, phi_step, u, lf, params, space,
                                        mode="fd", xi=xi).toarray()
    if np.abs(Ja - Jf).max() > 1.0e-5 * max(1.0, np.abs(Ja).max()):
        print("FAIL: phase-field Jacobian vs finite differences")
        return 1
    passed += 1

    print(f"all {passed} self-checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pffrac",
                                description="phase-field fracture simulator")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="log every outer iteration")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run a simulation")
    pr.add_argument("config", help="config file or builtin preset name")
    pr.add_argument("overrides", nargs="*", metavar="section.key=value",
                    help="config overrides")
    pr.set_defaults(func=_cmd_run)

    pm = sub.add_parser("mesh", help="write the mesh of a config and exit")
    pm.add_argument("config", help="config file or builtin preset name")
    pm.add_argument("overrides", nargs="*", metavar="section.key=value")
    pm.add_argument("--out", help="mesh output path")
    pm.set_defaults(func=_cmd_mesh)

    pc = sub.add_parser("check", help="run quick self-tests")
    pc.set_defaults(func=_cmd_check)

    pp = sub.add_parser("preset", help="write a builtin config file")
    pp.add_argument("name", choices=sorted(PRESETS))
    pp.add_argument("--out", help="output path (default <name>.cfg)")
    pp.set_defaults(func=_cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
