"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the per-criterion summary is
printed at the end of the session by ``conftest.py``.
"""

import time

import meshio
import numpy as np
import pytest
import scipy.sparse as sp

from dgdcr.assembly import assemble_all, assemble_convection, assemble_diffusion, assemble_reaction, set_parameters
from dgdcr.cli import run
from dgdcr.mesh import get_mesh, paper_unit_square_mesh, refined_paper_mesh, uniform_refine
from dgdcr.nonlinear import assemble_nonlinear, newton_solve
from dgdcr.postprocess import dof_count, export_vtk
from dgdcr.problems import ProblemSpec, registry_get
from dgdcr.reference import build_reference, integrate_edge, integrate_volume, volume_rule
from dgdcr.solver import solve
from oracles import GlobalBasis, dense_forms, monomial_moment, segment_rule

# first-build regression baselines: paper-boundary-layer, SIPG, k=1, level 2, zero start
BASELINE_ITERATIONS = 5
BASELINE_L2 = 0.07175685578003442


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


def report(number, ok, detail):
    print(f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.mark.criterion(1, "mesh counts and DoF formula")
def test_mesh_counts():
    with Budget(1.0):
        m0 = paper_unit_square_mesh()
        m1 = uniform_refine(m0)
        m2 = uniform_refine(m1)
        got = (m0.n_nodes, m0.n_elements, len(m0.dirichlet_edges), m1.n_elements, m2.n_elements, dof_count(m2, 1))
    report(1, got == (9, 8, 8, 32, 128, 384), f"(nodes, elements, dirichlet, L1, L2, DoFs) = {got}")


@pytest.mark.criterion(2, "parameter table")
def test_parameter_table():
    with Budget(1.0):
        rows = []
        for k in (1, 2, 3, 4):
            s = 3.0 * k * (k + 1)
            expected = {"sipg": (-1.0, s, 2 * s), "nipg": (1.0, 1.0, 2.0), "iipg": (0.0, s, 2 * s)}
            for method, want in expected.items():
                p = set_parameters(method, k)
                rows.append((p.kappa, p.sigma_interior, p.sigma_boundary) == want)
    report(2, all(rows), f"{sum(rows)}/{len(rows)} (method, k) entries match")


@pytest.mark.criterion(3, "polynomial exactness, all IP variants")
def test_polynomial_exactness():
    with Budget(5.0):
        mesh = refined_paper_mesh(2)
        errors = {m: solve(registry_get("poly-exact"), set_parameters(m, 1), mesh).l2err for m in ("sipg", "nipg", "iipg")}
    report(3, all(e <= 1e-9 for e in errors.values()), ", ".join(f"{m}: {e:.2e}" for m, e in errors.items()))


@pytest.mark.criterion(4, "h-convergence rates, SIPG")
def test_h_convergence():
    problem = registry_get("smooth-sine")
    rates, ok = {}, True
    with Budget(120.0):
        for k in (1, 2):
            params = set_parameters("sipg", k)
            errs, hs = [], []
            for level in (2, 3, 4, 5):
                r = solve(problem, params, refined_paper_mesh(level))
                errs.append(r.l2err)
                hs.append(r.hmax)
            rates[k] = np.log(errs[-2] / errs[-1]) / np.log(hs[-2] / hs[-1])
            ok &= k + 1 - 0.25 <= rates[k] <= k + 1 + 0.35
    report(4, ok, ", ".join(f"k={k}: rate {r:.4f}" for k, r in rates.items()))


@pytest.mark.criterion(5, "SIPG symmetry")
def test_sipg_symmetry():
    with Budget(5.0):
        mesh = refined_paper_mesh(2)
        asym = {}
        for k in (1, 2):
            D, _ = assemble_diffusion(mesh, build_reference(k), registry_get("paper-boundary-layer"), set_parameters("sipg", k))
            asym[k] = sp.linalg.norm(D - D.T) / sp.linalg.norm(D)
    report(5, all(a <= 1e-12 for a in asym.values()), ", ".join(f"k={k}: {a:.1e}" for k, a in asym.items()))


@pytest.mark.criterion(6, "mass matrix structure")
def test_mass_structure():
    with Budget(1.0):
        worst = 0.0
        mesh = refined_paper_mesh(2)
        for k in (1, 2, 3, 4):
            ref = build_reference(k)
            R = assemble_reaction(mesh, ref, registry_get("paper-boundary-layer")).toarray()
            nl = ref.n_local
            expected = np.kron(np.diag(2 * mesh.areas), np.eye(nl))
            worst = max(worst, np.abs(R - expected).max())
    report(6, worst <= 1e-12, f"max |R - 2|K| I| = {worst:.1e}")


@pytest.mark.criterion(7, "nonlinear Jacobian vs finite differences")
def test_jacobian():
    problem = registry_get("paper-boundary-layer")
    with Budget(10.0):
        mesh = refined_paper_mesh(2)
        ref = build_reference(1)
        rng = np.random.default_rng(2024)
        coef = rng.standard_normal(dof_count(mesh, 1))
        HJ = assemble_nonlinear(coef, mesh, ref, problem.nonlinear)[1].toarray()
        h, worst = 1e-6, 0.0
        for j in rng.choice(len(coef), 40, replace=False):
            e = np.zeros_like(coef)
            e[j] = h
            Hp = assemble_nonlinear(coef + e, mesh, ref, problem.nonlinear)[0]
            Hm = assemble_nonlinear(coef - e, mesh, ref, problem.nonlinear)[0]
            fd = (Hp - Hm) / (2 * h)
            worst = max(worst, np.linalg.norm(fd - HJ[:, j]) / np.linalg.norm(HJ[:, j]))
    report(7, worst <= 1e-6, f"max column relative error {worst:.1e} over 40 sampled columns")


@pytest.mark.criterion(8, "Newton behaviour and regression baseline")
def test_newton():
    with Budget(30.0):
        mesh = refined_paper_mesh(2)
        ref = build_reference(1)
        linear = registry_get("paper-boundary-layer-linear")
        s = assemble_all(mesh, ref, linear, set_parameters("sipg", 1))
        _, lin = newton_solve(s, mesh, ref, None)
        r = solve(registry_get("paper-boundary-layer"), set_parameters("sipg", 1), mesh)
    ok = (
        lin.iterations == 1
        and lin.converged
        and r.newton.converged
        and r.iterations <= 50
        and r.newton.final_residual <= 1e-10
        and r.iterations == BASELINE_ITERATIONS
        and abs(r.l2err - BASELINE_L2) <= 1e-8 * BASELINE_L2
    )
    report(
        8,
        ok,
        f"r=0: {lin.iterations} it; paper problem: {r.iterations} it, |Res| {r.newton.final_residual:.1e}, "
        f"L2 {r.l2err:.16g} (baseline {BASELINE_ITERATIONS} it, {BASELINE_L2:.16g})",
    )


def _two_element_problem(b):
    return ProblemSpec(
        name="upwind",
        diffusion=lambda x, y: np.zeros(np.shape(x)),
        advection=lambda x, y: (b[0] * np.ones(np.shape(x)), b[1] * np.ones(np.shape(x))),
        reaction=lambda x, y: np.zeros(np.shape(x)),
        source=lambda x, y: np.zeros(np.shape(x)),
        dirichlet=lambda x, y: 1.0 + x - y,
    )


def _hand_coupling(mesh, b):
    """Block [downstream test, upstream trial] of the upwind form, from the diagonal edge alone.

    On the shared edge the downstream element receives ``-|b.n| v_down u_up``;
    no other term couples the two elements.
    """
    pts, w = segment_rule(mesh.nodes[0], mesh.nodes[2], 6)
    beta = float(np.dot(b, [-1.0, 1.0])) / np.sqrt(2.0)  # normal from element 0 into element 1
    basis = GlobalBasis(mesh, 1)
    V0, _ = basis.on_element(0, pts)
    V1, _ = basis.on_element(1, pts)
    up, down = (V0[:, :3], V1[:, 3:]) if beta > 0 else (V1[:, 3:], V0[:, :3])
    return -np.einsum("q,qa,qb->ab", w * abs(beta), down, up)


@pytest.mark.criterion(9, "upwind convection hand-check")
@pytest.mark.parametrize("b", [(1.0, 2.0), (0.7, -0.4), (-1.0, 0.3)])
def test_upwind_hand_check(b):
    with Budget(1.0):
        mesh = get_mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]], [[0, 1], [1, 2], [2, 3], [3, 0]])
        problem = _two_element_problem(b)
        C, F = assemble_convection(mesh, build_reference(1), problem)
        C = C.toarray()
        _, C_oracle, _, F_oracle = dense_forms(mesh, problem, 1, 0.0, 0.0, 0.0, nq=10)
        err = max(np.abs(C - C_oracle).max(), np.abs(F - F_oracle).max())
        down, up = (1, 0) if np.dot(b, [-1.0, 1.0]) > 0 else (0, 1)
        hand_err = np.abs(C[3 * down : 3 * down + 3, 3 * up : 3 * up + 3] - _hand_coupling(mesh, b)).max()
        # the upstream element does not see the downstream one
        upstream = np.abs(C[3 * up : 3 * up + 3, 3 * down : 3 * down + 3]).max()
    ok = err <= 1e-13 and hand_err <= 1e-13 and upstream == 0.0
    report(9, ok, f"b={b}: |C - oracle| {err:.1e}, |coupling - hand| {hand_err:.1e}, upstream block {upstream:.1e}")


@pytest.mark.criterion(10, "quadrature exactness")
def test_quadrature_exactness():
    with Budget(1.0):
        worst = 0.0
        for k in (1, 2, 3, 4):
            ref = build_reference(k)
            for rule in (ref.volume_rule, volume_rule(2 * k + 3)):
                for a in range(rule.degree + 1):
                    for b in range(rule.degree + 1 - a):
                        exact = monomial_moment(a, b)
                        got = integrate_volume(rule, lambda x, y: x**a * y**b)
                        worst = max(worst, abs(got - exact) / exact)
            er = ref.edge_rule
            for a in range(er.degree + 1):
                worst = max(worst, abs(integrate_edge(er, lambda t: t**a) - 1 / (a + 1)) * (a + 1))
    report(10, worst <= 1e-13, f"max relative moment error {worst:.1e}")


@pytest.mark.criterion(11, "output fidelity")
def test_output_fidelity(tmp_path, capsys):
    with Budget(5.0):
        vtk = tmp_path / "u.vtk"
        code = run(["--problem", "smooth-sine", "--refine", "1", "--vtk", str(vtk)])
        header = capsys.readouterr().out.splitlines()[0]
        mesh = refined_paper_mesh(1)
        ref = build_reference(1)
        r = solve(registry_get("smooth-sine"), set_parameters("sipg", 1), mesh)
        own = tmp_path / "own.vtk"
        export_vtk(r.coef, mesh, ref, own, subdivisions=2)
        m = meshio.read(vtk)
        m2 = meshio.read(own)
    ok = (
        code == 0
        and header.split() == ["DoFs", "h_max", "L2-error", "#it"]
        and len(m.points) == 3 * mesh.n_elements
        and len(m.cells_dict["triangle"]) == mesh.n_elements
        and np.allclose(m.points[:, :2].reshape(-1, 3, 2), mesh.nodes[mesh.elements])
        and len(m2.cells_dict["triangle"]) == 4 * mesh.n_elements
        and np.isfinite(m.point_data["u"]).all()
    )
    report(11, ok, f"header {header.split()}, VTK read back: {len(m.points)} points, {len(m.cells_dict['triangle'])} cells")
