import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from pinnheat.fem import (DegenerateElement, FemSolution, SolverError, assemble, assemble_load,
                          backward_euler_solve, cg_solve, dirichlet_nodes, element_matrices,
                          generate_mesh, interpolate, locate, neumann_load, solve_problem,
                          source_load)
from pinnheat.fem.mms import spatial_convergence, temporal_convergence
from pinnheat.physics import DomainSpec, MaterialProps, SourceSpec, source_value

D = DomainSpec()
M0 = MaterialProps()
INSULATED = DomainSpec(dirichlet_edges=(), neumann_flux={e: 0.0 for e in ("AB", "BC", "CD", "AD")})


# --- mesh -------------------------------------------------------------------

def test_mesh_counts_and_area():
    mesh = generate_mesh(D, 1.0)
    assert mesh.n_nodes == 21 * 11
    assert mesh.triangles.shape == (400, 3)
    assert mesh.areas().sum() == pytest.approx(200.0, rel=1e-14)
    assert np.all(mesh.areas() > 0)  # counter-clockwise


def test_unit_square_has_two_triangles():
    mesh = generate_mesh(DomainSpec(length=1.0, width=1.0), 1.0)
    assert mesh.triangles.shape == (2, 3)


def test_non_divisible_size_snaps_cell_counts():
    mesh = generate_mesh(D, 0.3)
    assert (mesh.nx, mesh.ny) == (67, 33)
    assert mesh.nodes[:, 0].max() == 20.0 and mesh.nodes[:, 1].max() == 10.0
    with pytest.raises(ValueError):
        generate_mesh(D, 0.0)


def test_boundary_edges_belong_to_one_triangle_each():
    mesh = generate_mesh(D, 2.0)
    tri_edges = {}
    for t in mesh.triangles:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            tri_edges[key] = tri_edges.get(key, 0) + 1
    boundary = {k for k, c in tri_edges.items() if c == 1}
    assert boundary == {(min(a, b), max(a, b)) for a, b in mesh.boundary_edges}
    assert set(mesh.boundary_ids) == {"AB", "BC", "CD", "AD"}
    ad = mesh.nodes[mesh.edge_nodes("AD")]
    assert np.all(ad[:, 0] == 0.0) and len(ad) == mesh.ny + 1


# --- assembly ---------------------------------------------------------------

def test_unit_right_triangle_stiffness():
    coords = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    me, ke = element_matrices(coords, MaterialProps(k=1.0))
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(ke[0], expected, atol=1e-15)
    assert np.allclose(me[0].sum(axis=1), M0.gamma * 0.5 / 3.0)


def test_degenerate_element_is_named():
    coords = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]])
    with pytest.raises(DegenerateElement, match="triangle 1"):
        element_matrices(coords, M0)


@pytest.mark.parametrize("lumped", [False, True])
def test_global_matrix_properties(lumped):
    mesh = generate_mesh(D, 1.0)
    M, K = assemble(mesh, M0, lumped=lumped)
    assert abs(M - M.T).max() == 0 and abs(K - K.T).max() < 1e-18
    assert np.allclose(K @ np.ones(mesh.n_nodes), 0.0, atol=1e-15)
    assert M.sum() == pytest.approx(M0.gamma * 200.0, rel=1e-13)
    kd = K.toarray()
    assert np.linalg.eigvalsh(kd).min() > -1e-12
    assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_zero_loads():
    mesh = generate_mesh(D, 1.0)
    f = assemble_load(mesh, SourceSpec(q0=0.0), {"AB": 0.0, "BC": 0.0, "CD": 0.0}, 1.0)
    assert not np.any(f)


def test_source_integral_matches_gaussian_integral():
    # centre well inside a 20x10 mesh with h = r0/4: integral of Q0 exp(-r^2/r0^2) is Q0 pi r0^2
    src = SourceSpec(start=(10.0, 5.0), velocity=0.0)
    mesh = generate_mesh(D, 0.25)
    total = source_load(mesh, lambda p: source_value(src, p), 0.0).sum()
    assert total == pytest.approx(5.0 * np.pi, rel=0.02)


def test_single_neumann_edge_load():
    mesh = generate_mesh(DomainSpec(length=1.0, width=1.0), 1.0)
    f = neumann_load(mesh, {"AB": 0.001})
    ab = mesh.edge_nodes("AB")
    assert np.allclose(f[ab], 0.0005)
    assert f.sum() == pytest.approx(0.001)


def test_dirichlet_nodes_are_left_edge():
    mesh = generate_mesh(D, 1.0)
    nodes = dirichlet_nodes(mesh, D)
    assert np.all(mesh.nodes[nodes, 0] == 0.0) and len(nodes) == 11


# --- linear solver ----------------------------------------------------------

def test_cg_identity_and_hand_solve():
    b = np.array([3.0, -1.0, 2.0])
    assert np.allclose(cg_solve(sp.identity(3, format="csr"), b), b)
    x = cg_solve(np.array([[4.0, 1.0], [1.0, 3.0]]), np.array([1.0, 2.0]))
    assert np.allclose(x, [1 / 11, 7 / 11], rtol=1e-10)
    assert not np.any(cg_solve(np.eye(2), np.zeros(2)))


@given(seed=st.integers(0, 10_000), n=st.integers(2, 40))
def test_cg_matches_dense_solve(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    A = a @ a.T + n * np.eye(n)
    b = rng.normal(size=n)
    x = cg_solve(sp.csr_matrix(A), b, tol=1e-12)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-12
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-8, atol=1e-10)


def test_cg_iteration_cap():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(30, 30))
    A = a @ a.T + 1e-3 * np.eye(30)
    with pytest.raises(SolverError) as info:
        cg_solve(A, rng.normal(size=30), tol=1e-14, maxiter=2)
    assert info.value.residual > 1e-14


# --- time stepping ----------------------------------------------------------

def test_equilibrium_is_preserved():
    cold = DomainSpec(neumann_flux={"AB": 0.0, "BC": 0.0, "CD": 0.0})
    sol = solve_problem(cold, M0, SourceSpec(q0=0.0), h=1.0, dt=0.1, t_end=2.0)
    assert np.max(np.abs(sol.u - 298.0)) < 1e-10
    assert np.array_equal(sol.u[0], np.full(sol.mesh.n_nodes, 298.0))
    assert sol.times[-1] == pytest.approx(2.0)


def test_spatial_convergence_order():
    errors, orders = spatial_convergence(D, M0, hs=(1.0, 0.5, 0.25), dt=0.01, t_end=1.0)
    assert np.all(np.diff(errors) < 0)
    assert np.all(orders >= 1.8)


def test_temporal_convergence_order():
    _, orders = temporal_convergence(D, M0, h=1.0, dts=(0.2, 0.1, 0.05, 0.025), t_end=1.0)
    assert np.all(orders >= 0.9)


def _bump_problem(dt, t_end=1.0, h=0.5):
    mesh = generate_mesh(D, h)
    M, K = assemble(mesh, M0)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u0 = 298.0 + 100.0 * np.exp(-((x - 10) ** 2 + (y - 5) ** 2) / 4.0)
    fixed = dirichlet_nodes(mesh, D)
    u0[fixed] = 298.0
    zero = np.zeros(mesh.n_nodes)
    return backward_euler_solve(M, K, lambda t: zero, fixed, 298.0, u0, dt, t_end, mesh=mesh)


def test_maximum_principle_and_smooth_step_dependence():
    coarse, fine = _bump_problem(0.2), _bump_problem(0.1)
    for sol in (coarse, fine):
        assert sol.u.min() >= 298.0 - 1e-8
        assert sol.u.max() <= sol.u[0].max() + 1e-8
        # peak decays monotonically, no oscillation
        assert np.all(np.diff(sol.u.max(axis=1)) <= 1e-12)
    diff = np.max(np.abs(coarse.u[-1] - fine.u[-1]))
    assert diff < 0.05 * (coarse.u[0].max() - 298.0)


def _energy_budget(dt, t_end=1.0):
    # the source starts near the right edge, so its in-plate power falls as it leaves
    src = SourceSpec(start=(19.0, 5.0))
    mesh = generate_mesh(INSULATED, 0.5)
    M, K = assemble(mesh, M0)
    f_src = lambda p: source_value(src, p)  # noqa: E731
    sol = backward_euler_solve(M, K, lambda t: source_load(mesh, f_src, t), [], 298.0,
                               np.full(mesh.n_nodes, 298.0), dt, t_end, mesh=mesh)
    gained = np.ones(mesh.n_nodes) @ (M @ (sol.u[-1] - sol.u[0]))
    power = lambda t: source_load(mesh, f_src, t).sum()  # noqa: E731
    stepped = dt * sum(power(t) for t in sol.times[1:])
    ts = np.linspace(0.0, t_end, 4001)
    p = np.array([power(t) for t in ts])
    supplied = np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(ts))
    return gained, stepped, supplied


def test_insulated_energy_balance():
    g1, s1, exact = _energy_budget(0.1)
    g2, s2, _ = _energy_budget(0.05)
    # discrete balance: stored heat equals the stepped source power
    assert g1 == pytest.approx(s1, rel=1e-7)  # CG tolerance accumulated over the steps
    assert g2 == pytest.approx(s2, rel=1e-7)
    # against the exact supplied energy the defect is first order in dt
    d1, d2 = abs(g1 - exact), abs(g2 - exact)
    assert d1 > 1e-3 * exact
    assert 0.4 < d2 / d1 < 0.6


# --- interpolation ----------------------------------------------------------

def _linear_solution():
    mesh = generate_mesh(D, 1.0)
    times = np.array([0.0, 0.5, 1.0])
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u = np.stack([300 + 2 * x - y + 10 * t for t in times])
    return FemSolution(mesh, times, u)


def test_interpolate_examples():
    sol = _linear_solution()
    mesh = sol.mesh
    node = 37
    x, y = mesh.nodes[node]
    assert interpolate(sol, (x, y, 0.5)) == sol.u[1, node]
    tri = mesh.triangles[123]
    c = mesh.nodes[tri].mean(axis=0)
    assert interpolate(sol, (c[0], c[1], 1.0)) == pytest.approx(sol.u[2, tri].mean(), rel=1e-14)
    assert interpolate(sol, (x, y, 0.25)) == pytest.approx(0.5 * (sol.u[0, node] + sol.u[1, node]))


@given(x=st.floats(0, 20), y=st.floats(0, 10), t=st.floats(0, 1))
def test_interpolation_reproduces_linear_fields(x, y, t):
    sol = _linear_solution()
    assert interpolate(sol, (x, y, t)) == pytest.approx(300 + 2 * x - y + 10 * t, rel=1e-12)


def test_locate_bary_sums_to_one_and_outside_rejected():
    mesh = generate_mesh(D, 0.5)
    pts = np.random.default_rng(0).uniform([0, 0], [20, 10], (200, 2))
    tri, bary = locate(mesh, pts)
    assert np.allclose(bary.sum(axis=1), 1.0)
    assert np.all(bary >= -1e-12)
    assert np.allclose(np.einsum("ni,nid->nd", bary, mesh.nodes[mesh.triangles[tri]]), pts)
    with pytest.raises(ValueError):
        interpolate(_linear_solution(), (25.0, 5.0, 0.5))
    with pytest.raises(ValueError):
        interpolate(_linear_solution(), (5.0, 5.0, 3.0))


def test_moving_source_peak_follows_source():
    sol = solve_problem(D, M0, SourceSpec(), h=0.25, dt=0.05, t_end=4.0)
    for t in (2.0, 4.0):
        k = int(round(t / sol.dt))
        i = np.argmax(sol.u[k])
        px, py = sol.mesh.nodes[i]
        assert np.hypot(px - 2.0 * t, py - 5.0) <= 1.0  # within r0 of the source centre
        assert sol.u[k].max() > 400.0
