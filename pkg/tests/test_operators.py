import math

import numpy as np
import pytest

from bergerdeck import build_grid
from bergerdeck.errors import ParameterError, SizingError
from bergerdeck.operators import (assemble_bilaplacian, assemble_d2_1d,
                                  assemble_d4_hinged_1d, assemble_dxx,
                                  assemble_dy2, assemble_dy4, dump_triplets,
                                  free_edge_shorthand_coefficients,
                                  free_edge_stencil_report)
from oracles import dense_bilaplacian, dense_dy2, dense_dy4, observed_orders


# --- 1-d second difference ------------------------------------------------

def test_d2_dense_3x3():
    mat = assemble_d2_1d(3, 1.0).toarray()
    expected = np.array([[-2.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -2.0]])
    np.testing.assert_array_equal(mat, expected)


def test_d2_zero_vector():
    mat = assemble_d2_1d(7, 0.25)
    np.testing.assert_array_equal(mat @ np.zeros(7), np.zeros(7))


def test_d2_discrete_eigenvector():
    n, h = 9, 0.1
    mat = assemble_d2_1d(n, h)
    j = np.arange(1, n + 1)
    vec = np.sin(j * math.pi / (n + 1))
    eig = -(4.0 / h ** 2) * math.sin(math.pi / (2 * (n + 1))) ** 2
    np.testing.assert_allclose(mat @ vec, eig * vec, rtol=1e-12, atol=1e-12)


def test_d2_sizing_error():
    with pytest.raises(SizingError, match="3"):
        assemble_d2_1d(2, 1.0)


# --- 1-d hinged fourth difference ------------------------------------------

def test_d4_first_row():
    mat = assemble_d4_hinged_1d(5, 1.0).toarray()
    np.testing.assert_array_equal(mat[0], [5.0, -4.0, 1.0, 0.0, 0.0])


def test_d4_equals_d2_squared_entrywise():
    d2 = assemble_d2_1d(7, 0.5)
    d4 = assemble_d4_hinged_1d(7, 0.5)
    assert np.max(np.abs((d2 @ d2 - d4).toarray())) == 0.0


@pytest.mark.parametrize("n", range(5, 13))
@pytest.mark.parametrize("h", [1.0, 0.5, 0.1])
def test_d4_identity_across_sizes(n, h):
    d2 = assemble_d2_1d(n, h)
    d4 = assemble_d4_hinged_1d(n, h)
    assert np.max(np.abs((d2 @ d2 - d4).toarray())) == 0.0


def test_d4_symmetric():
    mat = assemble_d4_hinged_1d(6, 1.0).toarray()
    np.testing.assert_array_equal(mat, mat.T)


def test_d4_sizing_error():
    with pytest.raises(SizingError, match="5"):
        assemble_d4_hinged_1d(4, 1.0)


# --- y second derivative ----------------------------------------------------

def test_dy2_interior_block_pattern(tiny_grid):
    grid = tiny_grid
    mat = assemble_dy2(grid, 0.2).toarray()
    J = grid.J
    inv = 1.0 / grid.dy ** 2
    block = mat[J:2 * J, :]  # level k = 1
    np.testing.assert_allclose(block[:, :J], inv * np.eye(J), atol=0)
    np.testing.assert_allclose(block[:, J:2 * J], -2 * inv * np.eye(J), atol=0)
    np.testing.assert_allclose(block[:, 2 * J:3 * J], inv * np.eye(J), atol=0)
    assert np.all(block[:, 3 * J:] == 0)


def test_dy2_constant_in_y_interior_rows(tiny_grid):
    grid = tiny_grid
    mat = assemble_dy2(grid, 0.2)
    field = np.tile(np.sin(grid.x_interior()), grid.K + 2)
    out = (mat @ field).reshape(grid.shape)
    np.testing.assert_allclose(out[1:-1], 0.0, atol=1e-14)


def test_dy2_boundary_row_is_bc_identity():
    grid = build_grid(9, 3, 1.0)
    sigma = 0.2
    mat = assemble_dy2(grid, sigma)
    field = np.zeros(grid.n_dof)
    samples = np.sin(grid.x_interior())
    field[:grid.J] = samples  # level k = 0 only
    eig = (4.0 / grid.dx ** 2) * math.sin(grid.dx / 2) ** 2
    out = (mat @ field).reshape(grid.shape)
    np.testing.assert_allclose(out[0], sigma * eig * samples, rtol=1e-12)


def test_dy2_matches_dense_oracle(tiny_grid):
    ours = assemble_dy2(tiny_grid, 0.3).toarray()
    ref = dense_dy2(tiny_grid.J, tiny_grid.K, tiny_grid.l, 0.3)
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_dy2_sigma_bounds(tiny_grid):
    for sigma in (0.0, 0.5, 0.7, -0.1):
        with pytest.raises(ParameterError, match="Poisson"):
            assemble_dy2(tiny_grid, sigma)


# --- y fourth derivative ------------------------------------------------------

def test_shorthand_coefficients():
    sigma1, sigma2 = free_edge_shorthand_coefficients(0.2, 0.1)
    assert sigma1 == pytest.approx(0.01 * (0.4 - 5.4), rel=1e-14)  # -0.05
    assert sigma2 == pytest.approx(0.018, rel=1e-14)


def test_dy4_zero_vector(tiny_grid):
    mat = assemble_dy4(tiny_grid, 0.2)
    np.testing.assert_array_equal(mat @ np.zeros(tiny_grid.n_dof),
                                  np.zeros(tiny_grid.n_dof))


def test_dy4_matches_dense_ghost_elimination(tiny_grid):
    ours = assemble_dy4(tiny_grid, 0.2).toarray()
    ref = dense_dy4(tiny_grid.J, tiny_grid.K, tiny_grid.l, 0.2)
    scale = np.max(np.abs(ref))
    np.testing.assert_allclose(ours, ref, atol=1e-12 * scale)


def test_dy4_boundary_rows_only_reach_three_levels(tiny_grid):
    mat = assemble_dy4(tiny_grid, 0.2).toarray()
    J = tiny_grid.J
    assert np.all(mat[:J, 3 * J:] == 0)


def test_stencil_report_flags_known_mismatches(tiny_grid):
    report = free_edge_stencil_report(tiny_grid, 0.2)
    by_key = {(e["row"], e["col"], e["term"]): e for e in report}
    # row 1 agrees with the compact shorthand
    for col in range(4):
        for term in ("I", "Lx", "Lx^2"):
            assert by_key[(1, col, term)]["match"]
    # row 0 deviates: Lx coefficient on the edge level, the extra Lx^2
    # term, and both neighbor-level Lx coefficients
    assert not by_key[(0, 0, "Lx")]["match"]
    assert not by_key[(0, 0, "Lx^2")]["match"]
    assert not by_key[(0, 1, "Lx")]["match"]
    assert not by_key[(0, 2, "Lx")]["match"]
    assert by_key[(0, 0, "I")]["match"]
    assert by_key[(0, 1, "I")]["match"]
    assert by_key[(0, 2, "I")]["match"]


# --- bilaplacian ---------------------------------------------------------------

def test_bilaplacian_size(preset_grid):
    mat = assemble_bilaplacian(preset_grid, 0.2)
    assert mat.shape == (15049, 15049)


def test_bilaplacian_zero_vector(tiny_grid):
    mat = assemble_bilaplacian(tiny_grid, 0.2)
    np.testing.assert_array_equal(mat @ np.zeros(tiny_grid.n_dof),
                                  np.zeros(tiny_grid.n_dof))


def test_bilaplacian_matches_dense_oracle(tiny_grid):
    ours = assemble_bilaplacian(tiny_grid, 0.2).toarray()
    ref = dense_bilaplacian(tiny_grid.J, tiny_grid.K, tiny_grid.l, 0.2)
    scale = np.max(np.abs(ref))
    np.testing.assert_allclose(ours, ref, atol=1e-12 * scale)


def _interior_probe_error(J, K, l, sigma, m=2):
    grid = build_grid(J, K, l)
    mat = assemble_bilaplacian(grid, sigma)
    X, _ = grid.meshgrid()
    field = np.sin(m * X).ravel()
    out = (mat @ field).reshape(grid.shape)
    exact = (m ** 4) * np.sin(m * grid.x_interior())
    interior = out[2:-2]
    return float(np.max(np.abs(interior - exact[None, :])))


def test_bilaplacian_probe_convergence_order():
    errs = [_interior_probe_error(J, K, math.pi / 4, 0.2)
            for J, K in [(37, 24), (75, 49), (151, 99)]]
    for order in observed_orders(errs):
        assert 1.7 <= order <= 2.3


def test_bilaplacian_mixed_probe_convergence_order():
    l, sigma = math.pi / 4, 0.2
    errs = []
    for J, K in [(37, 24), (75, 49), (151, 99)]:
        grid = build_grid(J, K, l)
        mat = assemble_bilaplacian(grid, sigma)
        X, Y = grid.meshgrid()
        qy = math.pi / (2 * l)
        field = (np.sin(2 * X) * np.cos(qy * (Y + l))).ravel()
        exact = ((4 + qy ** 2) ** 2) * field
        out = mat @ field
        sl = (mat @ field).reshape(grid.shape)[2:-2]
        ex = exact.reshape(grid.shape)[2:-2]
        errs.append(float(np.max(np.abs(sl - ex))))
    for order in observed_orders(errs):
        assert 1.7 <= order <= 2.3


def test_bilaplacian_row_sparsity_and_bandwidth(tiny_grid):
    mat = assemble_bilaplacian(tiny_grid, 0.2)
    J = tiny_grid.J
    nnz_per_row = np.diff(mat.indptr)
    assert nnz_per_row.max() <= 13
    coo = mat.tocoo()
    assert np.max(np.abs(coo.row - coo.col)) <= 2 * J + 3


def test_cross_term_commutes(tiny_grid):
    dxx = assemble_dxx(tiny_grid)
    dy2 = assemble_dy2(tiny_grid, 0.2)
    left = (dxx @ dy2).toarray()
    right = (dy2 @ dxx).toarray()
    np.testing.assert_array_equal(left, right)


def test_csr_invariants(tiny_grid):
    for mat in (assemble_bilaplacian(tiny_grid, 0.2),
                assemble_dy4(tiny_grid, 0.2),
                assemble_dy2(tiny_grid, 0.2)):
        assert np.all(mat.data != 0.0)
        for row in range(mat.shape[0]):
            cols = mat.indices[mat.indptr[row]:mat.indptr[row + 1]]
            assert np.all(np.diff(cols) > 0)


def test_dump_triplets_format():
    mat = assemble_d2_1d(3, 1.0)
    text = dump_triplets(mat)
    lines = text.strip().split("\n")
    assert lines[0] == "0 0 -2"
    assert lines[1] == "0 1 1"
    assert len(lines) == 7
    # 17-significant-digit rendering survives a round trip
    mat2 = assemble_d2_1d(5, 0.3)
    for line in dump_triplets(mat2).strip().split("\n"):
        r, c, v = line.split()
        assert float(v) == mat2[int(r), int(c)]
