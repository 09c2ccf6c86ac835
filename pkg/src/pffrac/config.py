"""Run configuration: INI parsing with strict key checking, CLI overrides,
builtin benchmark presets, and builders that turn a configuration into
mesh/material/driver objects.

Sections and keys:

[mesh]      refinement (int, unit square with mid-edge slit, 2*2^level
            cells per side) | file (path to a mesh file); exactly one
[material]  mu_s, lam_s [kN/mm^2]; gc_kn_per_mm | gc_n_per_mm; kappa;
            eps [mm] | eps_over_h (resolved against the mesh)
[lscheme]   strategy, l0, a, l_max, tol, max_outer, gamma, reset_l_each_step,
            reset_xi_each_step, newton_tol, newton_max_iter
[loading]   dt [s], n_steps, ubar [mm/s]
[output]    directory, csv, vtk_every (0 disables snapshots)

Unknown keys and sections are rejected with the offending name.  The
penalty weight gamma defaults to G_c / eps when not given; that is the
largest weight for which the phase field at unloaded points is held in
place instead of being driven below its previous value step after step.
The environment variable PFFRAC_OUTDIR overrides the output directory.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields

from .driver import LSchemeConfig
from .material import MaterialParams
from .mesh import Mesh, load_mesh, notched_unit_square

ENV_OUTDIR = "PFFRAC_OUTDIR"


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_SCHEMA: dict[str, dict[str, type]] = {
    "mesh": {"refinement": int, "file": str},
    "material": {"mu_s": float, "lam_s": float, "gc_kn_per_mm": float,
                 "gc_n_per_mm": float, "kappa": float, "eps": float,
                 "eps_over_h": float},
    "lscheme": {"strategy": str, "l0": float, "a": float, "l_max": float,
                "tol": float, "max_outer": int, "gamma": float,
                "reset_l_each_step": _bool, "reset_xi_each_step": _bool,
                "newton_tol": float, "newton_max_iter": int},
    "loading": {"dt": float, "n_steps": int, "ubar": float},
    "output": {"directory": str, "csv": str, "vtk_every": int},
}

_REQUIRED = {"material": ("mu_s", "lam_s", "kappa"), "loading": ("dt", "n_steps")}


@dataclass(frozen=True)
class RunConfig:
    """Fully parsed run description (mesh not yet constructed)."""

    mesh_refinement: int | None
    mesh_file: str | None
    mu_s: float
    lam_s: float
    g_c: float                      # kN/mm after unit normalization
    kappa: float
    eps: float | None
    eps_over_h: float | None
    lscheme: LSchemeConfig
    dt: float
    n_steps: int
    ubar: float = 1.0
    out_dir: str = "out"
    csv_name: str = "series.csv"
    vtk_every: int = 0

    def __post_init__(self):
        if (self.mesh_refinement is None) == (self.mesh_file is None):
            raise ConfigError("exactly one of mesh.refinement / mesh.file is required")
        if (self.eps is None) == (self.eps_over_h is None):
            raise ConfigError("exactly one of material.eps / material.eps_over_h "
                              "is required")
        if self.dt <= 0.0:
            raise ConfigError("loading.dt must be positive")
        if self.n_steps < 0:
            raise ConfigError("loading.n_steps must be nonnegative")

    # -- builders ---------------------------------------------------------

    def build_mesh(self) -> Mesh:
        if self.mesh_file is not None:
            return load_mesh(self.mesh_file)
        return notched_unit_square(2 * 2 ** self.mesh_refinement)

    def resolve_eps(self, mesh: Mesh) -> float:
        return self.eps if self.eps is not None else self.eps_over_h * mesh.h

    def build_params(self, mesh: Mesh) -> MaterialParams:
        eps = self.resolve_eps(mesh)
        gamma = self.lscheme.gamma
        if gamma is None:
            gamma = self.g_c / eps
        return MaterialParams(self.mu_s, self.lam_s, self.g_c,
                              self.kappa, eps, gamma)


def _apply_overrides(parser: configparser.ConfigParser, overrides) -> None:
    for item in overrides or ():
        text = item[2:] if item.startswith("--") else item
        if "=" not in text or "." not in text.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        target, value = text.split("=", 1)
        section, key = target.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())


def parse_config(path, cli_overrides=()) -> RunConfig:
    """Parse an INI file plus ``section.key=value`` override strings."""
    parser = configparser.ConfigParser(interpolation=None)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            parser.read_file(fh, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _apply_overrides(parser, cli_overrides)

    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            conv = _SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"unknown key {section}.{key}")
            try:
                values[section][key] = conv(raw)
            except ValueError:
                raise ConfigError(
                    f"bad value for {section}.{key}: {raw!r} "
                    f"(expected {getattr(conv, '__name__', 'value')})") from None

    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigError(f"missing required key {section}.{key}")

    mesh_sec = values.get("mesh", {})
    mat = values.get("material", {})
    if ("gc_kn_per_mm" in mat) == ("gc_n_per_mm" in mat):
        raise ConfigError("exactly one of material.gc_kn_per_mm / "
                          "material.gc_n_per_mm is required")
    g_c = mat.get("gc_kn_per_mm", mat.get("gc_n_per_mm", 0.0))
    if "gc_n_per_mm" in mat:
        g_c = g_c * 1.0e-3          # N/mm -> kN/mm

    ls = values.get("lscheme", {})
    ls_kwargs = {f.name: ls[f.name] for f in fields(LSchemeConfig) if f.name in ls}
    try:
        lschemecfg = LSchemeConfig(**ls_kwargs)
    except ValueError as exc:
        raise ConfigError(f"bad lscheme settings: {exc}") from exc

    load = values.get("loading", {})
    out = values.get("output", {})
    out_dir = os.environ.get(ENV_OUTDIR) or out.get("directory", "out")
    try:
        return RunConfig(
            mesh_refinement=mesh_sec.get("refinement"),
            mesh_file=mesh_sec.get("file"),
            mu_s=mat["mu_s"], lam_s=mat["lam_s"], g_c=g_c,
            kappa=mat["kappa"], eps=mat.get("eps"),
            eps_over_h=mat.get("eps_over_h"),
            lscheme=lschemecfg,
            dt=load["dt"], n_steps=load["n_steps"],
            ubar=load.get("ubar", 1.0),
            out_dir=out_dir, csv_name=out.get("csv", "series.csv"),
            vtk_every=out.get("vtk_every", 0),
        )
    except KeyError as exc:
        raise ConfigError(f"missing required key: {exc}") from exc


# ---------------------------------------------------------------------------
# builtin presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, str] = {
    # sheared square with a horizontal edge slit, shear force measured on top
    "example1": """\
[mesh]
refinement = 4

[material]
mu_s = 80.77
lam_s = 121.15
gc_n_per_mm = 2.7
kappa = 1e-10
eps_over_h = 2

[lscheme]
strategy = dynamic
a = 5

[loading]
dt = 1e-4
n_steps = 150
ubar = 1.0

[output]
directory = out_example1
csv = series.csv
vtk_every = 25
""",
    # asymmetrically notched bending specimen; supply the mesh file yourself
    "example2": """\
[mesh]
file = example2_mesh.txt

[material]
mu_s = 8
lam_s = 12
gc_kn_per_mm = 1e-3
kappa = 1e-10
eps_over_h = 2

[lscheme]
strategy = dynamic
a = 5

[loading]
dt = 1e-4
n_steps = 150
ubar = 1.0

[output]
directory = out_example2
csv = series.csv
vtk_every = 25
""",
}


def write_preset(name: str, path) -> None:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} "
                          f"(available: {', '.join(sorted(PRESETS))})")
    with open(path, "w") as fh:
        fh.write(PRESETS[name])
