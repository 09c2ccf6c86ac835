"""Shared fixtures: small meshes and spaces for unit tests, cached full
benchmark runs for the end-to-end checks, and the terminal summary that
prints one line per acceptance criterion."""

import time

import numpy as np
import pytest

import pffrac.driver as driver_mod
from pffrac.driver import LSchemeConfig, run_loading_loop
from pffrac.fem import FeSpace
from pffrac.material import MaterialParams
from pffrac.mesh import generate_unit_square_mesh, notched_unit_square
from pffrac import subsolvers

# registry filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def record_acceptance(label: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[label] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: (len(s), s)):
        ok, detail = ACCEPTANCE_RESULTS[label]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{label} {verdict} - {detail}")


# ---------------------------------------------------------------------------
# small meshes for unit tests
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def square3():
    return generate_unit_square_mesh(3)


@pytest.fixture(scope="session")
def space3(square3):
    return FeSpace(square3)


@pytest.fixture(scope="session")
def notched8():
    return notched_unit_square(8)


@pytest.fixture(scope="session")
def space_notched8(notched8):
    return FeSpace(notched8)


def small_params(**kw):
    base = dict(mu_s=80.77, lam_s=121.15, g_c=2.7e-3, kappa=1.0e-10,
                eps=0.1, gamma=2.7e-2)
    base.update(kw)
    return MaterialParams(**base)


@pytest.fixture
def params_small():
    return small_params()


@pytest.fixture(name="small_params")
def _small_params_factory():
    """The parameter factory itself, for tests needing overrides."""
    return small_params


# ---------------------------------------------------------------------------
# full benchmark runs (session scoped, shared by the end-to-end checks)
# ---------------------------------------------------------------------------

BENCH_MU = 80.77
BENCH_LAM = 121.15
BENCH_GC = 2.7e-3
BENCH_KAPPA = 1.0e-10
BENCH_DT = 1.0e-4
BENCH_STEPS = 150


def bench_material(mesh):
    eps = 2.0 * mesh.h
    return MaterialParams(BENCH_MU, BENCH_LAM, BENCH_GC, BENCH_KAPPA,
                          eps, BENCH_GC / eps)


def march(space, params, cfg, n_steps=BENCH_STEPS, capture_fields=False):
    """Run the loading loop and collect per-step diagnostics.

    The reaction force is the sum over top-boundary x-dofs of the
    residual assembled without constraint elimination; it provides the
    volume-integral route to the boundary load.  Xi monotonicity is
    watched through a wrapper around the penalty update.
    """
    mesh = space.mesh
    top = mesh.boundary_nodes("top")
    data = {"fx": [], "fy": [], "iters": [], "converged": [], "min_phi": [],
            "max_l": [], "reaction_fx": [], "sub01": [], "res_u": [],
            "res_phi": [], "xi_monotone": True, "t": [], "pops": []}
    if capture_fields:
        data["phi_final"] = None
    prev_phi = np.ones(mesh.n_nodes)

    orig_update = driver_mod.update_penalty

    def watched_update(xi_prev, phi_current, phi_prev_step, gamma):
        xi_new = orig_update(xi_prev, phi_current, phi_prev_step, gamma)
        if np.any(xi_new < xi_prev):
            data["xi_monotone"] = False
        return xi_new

    def observer(n, state, rep):
        zero_l = np.zeros(mesh.n_nodes)
        r = subsolvers.elasticity_residual(state.u, state.phi, state.u,
                                           zero_l, params, space)
        data["reaction_fx"].append(float(r[2 * top].sum()))
        data["fx"].append(rep.f_x)
        data["fy"].append(rep.f_y)
        data["iters"].append(rep.outer_iters)
        data["converged"].append(rep.converged)
        data["min_phi"].append(rep.min_phi)
        data["max_l"].append(rep.max_l)
        data["res_u"].append(rep.res_u)
        data["res_phi"].append(rep.res_phi)
        data["t"].append(rep.t)
        sub = np.nonzero(state.phi < 0.1)[0]
        if data["sub01"]:
            # nodes leaving the damaged region; keep their phi on both
            # sides of the step so tests can tell band-edge flicker from
            # genuine healing of well-damaged nodes
            for node in np.setdiff1d(data["sub01"][-1], sub):
                data["pops"].append((n, int(node), float(prev_phi[node]),
                                     float(state.phi[node])))
        data["sub01"].append(sub)
        prev_phi[:] = state.phi

    driver_mod.update_penalty = watched_update
    t0 = time.perf_counter()
    try:
        reports, state = run_loading_loop(space, params, cfg,
                                          dt=BENCH_DT, n_steps=n_steps,
                                          observer=observer)
    finally:
        driver_mod.update_penalty = orig_update
    data["wall_s"] = time.perf_counter() - t0
    data["reports"] = reports
    if capture_fields:
        data["phi_final"] = state.phi.copy()
    for key in ("fx", "fy", "reaction_fx", "min_phi", "max_l",
                "res_u", "res_phi", "t"):
        data[key] = np.asarray(data[key])
    return data


@pytest.fixture(scope="session")
def bench_mesh():
    return notched_unit_square(32)


@pytest.fixture(scope="session")
def bench_space(bench_mesh):
    return FeSpace(bench_mesh)


@pytest.fixture(scope="session")
def bench_params(bench_mesh):
    return bench_material(bench_mesh)


@pytest.fixture(scope="session")
def run_dyn5(bench_space, bench_params):
    cfg = LSchemeConfig(strategy="dynamic", a=5.0)
    return march(bench_space, bench_params, cfg, capture_fields=True)


@pytest.fixture(scope="session")
def run_dyn20(bench_space, bench_params):
    cfg = LSchemeConfig(strategy="dynamic", a=20.0)
    return march(bench_space, bench_params, cfg)


@pytest.fixture(scope="session")
def run_const(bench_space, bench_params):
    cfg = LSchemeConfig(strategy="constant", l0=1.0e-2)
    return march(bench_space, bench_params, cfg)


@pytest.fixture(scope="session")
def run_ref5():
    mesh = notched_unit_square(64)
    space = FeSpace(mesh)
    params = bench_material(mesh)
    cfg = LSchemeConfig(strategy="dynamic", a=5.0)
    return march(space, params, cfg)
