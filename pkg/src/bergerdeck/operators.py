"""Sparse difference operators for the plate bilaplacian.

Short edges (x = 0, pi) are hinged: u = u_xx = 0.  Long edges (y = -l, l)
are free: u_yy + sigma*u_xx = 0 and u_yyy + (2 - sigma)*u_xxy = 0.  Ghost
nodes outside the rectangle are eliminated with those identities, which
reshapes the stencils in the first two and last two block rows.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, SizingError
from .grid import Grid

# Operators are plain CSR matrices: sorted column indices within each row,
# no explicitly stored zeros.
SparseOperator = sp.csr_matrix


def _finalize(matrix: sp.spmatrix) -> SparseOperator:
    out = sp.csr_matrix(matrix)
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    return out


def _check_sigma(sigma: float) -> None:
    if not 0.0 < sigma < 0.5:
        raise ParameterError(f"Poisson ratio must lie in (0, 1/2), got {sigma}")


def assemble_d2_1d(n: int, h: float) -> SparseOperator:
    """Second difference [1, -2, 1]/h^2 with homogeneous Dirichlet ends."""
    if n < 3:
        raise SizingError(f"second-difference matrix needs n >= 3, got {n}")
    if h <= 0:
        raise SizingError(f"spacing must be positive, got {h}")
    base = 1.0 / (h * h)
    off = np.full(n - 1, base)
    main = np.full(n, -2.0 * base)
    return _finalize(sp.diags([off, main, off], [-1, 0, 1]))


def assemble_d4_hinged_1d(n: int, h: float) -> SparseOperator:
    """Fourth difference [1, -4, 6, -4, 1]/h^4 with hinged ends.

    At a hinged end both the value and the curvature vanish, so the ghost
    value is the negated mirror of the first interior one and the corner
    diagonal entry becomes 5/h^4.
    """
    if n < 5:
        raise SizingError(f"fourth-difference matrix needs n >= 5, got {n}")
    if h <= 0:
        raise SizingError(f"spacing must be positive, got {h}")
    base = 1.0 / (h * h)
    a = base * base
    # accumulate entries exactly as the sparse self-product of the second
    # difference does, so D4 == D2 @ D2 holds entrywise in floating point
    five = a + 4.0 * a
    six = (a + 4.0 * a) + a
    four = -2.0 * a + -2.0 * a
    main = np.full(n, six)
    main[0] = main[-1] = five
    off1 = np.full(n - 1, four)
    off2 = np.full(n - 2, a)
    return _finalize(sp.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2]))


def assemble_dxx(grid: Grid) -> SparseOperator:
    """x second derivative on the flattened field (one block per level)."""
    lx = assemble_d2_1d(grid.J, grid.dx)
    eye = sp.identity(grid.K + 2, format="csr")
    return _finalize(sp.kron(eye, lx, format="csr"))


def assemble_dy2(grid: Grid, sigma: float) -> SparseOperator:
    """y second derivative on the flattened field.

    Interior block rows carry [I, -2I, I]/dy^2.  The free-edge rows return
    the boundary identity u_yy = -sigma*u_xx directly (no 1/dy^2 factor),
    which is what the ghost elimination of the fourth difference consumes.
    """
    _check_sigma(sigma)
    J, ny = grid.J, grid.K + 2
    lx = assemble_d2_1d(J, grid.dx)
    eye = sp.identity(J, format="csr")
    inv_dy2 = 1.0 / (grid.dy * grid.dy)

    blocks: list[list] = [[None] * ny for _ in range(ny)]
    blocks[0][0] = -sigma * lx
    blocks[ny - 1][ny - 1] = -sigma * lx
    for k in range(1, ny - 1):
        blocks[k][k - 1] = inv_dy2 * eye
        blocks[k][k] = -2.0 * inv_dy2 * eye
        blocks[k][k + 1] = inv_dy2 * eye
    return _finalize(sp.bmat(blocks))


def _edge_blocks(grid: Grid, sigma: float) -> tuple[sp.spmatrix, ...]:
    """Ghost-eliminated blocks of the first two rows of the y fourth
    difference, before the 1/dy^4 scaling.

    With Lx the x second derivative, the two closure identities at the
    bottom edge are

        U_{-1} = 2 U_0 - U_1 - sigma dy^2 Lx U_0
        U_{-2} = 2 U_{-1} - 2 U_1 + U_2 + (2 - sigma) dy^2 Lx (U_1 - U_{-1})

    (centered u_yy + sigma u_xx = 0, centered u_yyy + (2 - sigma) u_xxy = 0
    with u_xxy taken as the centered level difference of Lx).  Substituting
    them into [1, -4, 6, -4, 1] at k = 0 and k = 1 gives the blocks below.
    """
    J = grid.J
    dy2 = grid.dy * grid.dy
    lx = assemble_d2_1d(J, grid.dx)
    eye = sp.identity(J, format="csr")
    row0_0 = 2.0 * eye + (4.0 * sigma - 4.0) * dy2 * lx \
        + sigma * (2.0 - sigma) * dy2 * dy2 * (lx @ lx)
    row0_1 = -4.0 * eye + 2.0 * (2.0 - sigma) * dy2 * lx
    row0_2 = 2.0 * eye
    row1_0 = -2.0 * eye - sigma * dy2 * lx
    return row0_0, row0_1, row0_2, row1_0


def assemble_dy4(grid: Grid, sigma: float) -> SparseOperator:
    """y fourth difference with free-edge ghost levels eliminated."""
    _check_sigma(sigma)
    J, ny = grid.J, grid.K + 2
    eye = sp.identity(J, format="csr")
    row0_0, row0_1, row0_2, row1_0 = _edge_blocks(grid, sigma)

    blocks: list[list] = [[None] * ny for _ in range(ny)]
    blocks[0][0], blocks[0][1], blocks[0][2] = row0_0, row0_1, row0_2
    blocks[1][0], blocks[1][1] = row1_0, 5.0 * eye
    blocks[1][2], blocks[1][3] = -4.0 * eye, eye
    for k in range(2, ny - 2):
        blocks[k][k - 2] = eye
        blocks[k][k - 1] = -4.0 * eye
        blocks[k][k] = 6.0 * eye
        blocks[k][k + 1] = -4.0 * eye
        blocks[k][k + 2] = eye
    blocks[ny - 2][ny - 1], blocks[ny - 2][ny - 2] = row1_0, 5.0 * eye
    blocks[ny - 2][ny - 3], blocks[ny - 2][ny - 4] = -4.0 * eye, eye
    blocks[ny - 1][ny - 1], blocks[ny - 1][ny - 2] = row0_0, row0_1
    blocks[ny - 1][ny - 3] = row0_2
    dy4 = (grid.dy * grid.dy) * (grid.dy * grid.dy)
    return _finalize(sp.bmat(blocks) / dy4)


def assemble_bilaplacian(grid: Grid, sigma: float) -> SparseOperator:
    """Discrete bilaplacian D_x^4 + D_y^4 + 2 D_x^2 D_y^2 on the flat field.

    Block pentadiagonal of size n_dof x n_dof with block size J.  The cross
    term uses the boundary-modified y second derivative, so the free-edge
    identities enter every term consistently.
    """
    _check_sigma(sigma)
    eye_y = sp.identity(grid.K + 2, format="csr")
    dx4 = sp.kron(eye_y, assemble_d4_hinged_1d(grid.J, grid.dx), format="csr")
    dy4 = assemble_dy4(grid, sigma)
    dxx = assemble_dxx(grid)
    dy2 = assemble_dy2(grid, sigma)
    return _finalize(dx4 + dy4 + 2.0 * (dxx @ dy2))


def dump_triplets(op: SparseOperator) -> str:
    """Coordinate-triplet text dump: one ``row col value`` line per entry.

    Values are rendered with 17 significant digits; entries are ordered by
    (row, col), matching the CSR layout.
    """
    coo = op.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [
        f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}"
        for i in order
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def free_edge_shorthand_coefficients(sigma: float, dy: float) -> tuple[float, float]:
    """The compact (sigma1, sigma2) constants of the two-coefficient
    shorthand for the free-edge blocks:

        sigma1 = dy^2 (2 sigma - 3 (2 - sigma)),   sigma2 = dy^2 (2 - sigma)
    """
    dy2 = dy * dy
    return dy2 * (2.0 * sigma - 3.0 * (2.0 - sigma)), dy2 * (2.0 - sigma)


def free_edge_stencil_report(grid: Grid, sigma: float) -> list[dict]:
    """Compare the ghost-eliminated edge blocks with the compact
    sigma1/sigma2 shorthand.

    Each entry describes one (row level, column level, term) coefficient of
    the unscaled fourth-difference blocks, where ``term`` is the multiple of
    I, Lx, or Lx^2 (Lx the x second derivative).  Blocks whose derived
    coefficient deviates from the shorthand are flagged ``match=False``;
    the shorthand's row k = 1 agrees with the derivation, its row k = 0
    does not.
    """
    _check_sigma(sigma)
    dy2 = grid.dy * grid.dy
    sigma1, sigma2 = free_edge_shorthand_coefficients(sigma, grid.dy)
    derived = {
        (0, 0): (2.0, (4.0 * sigma - 4.0) * dy2, sigma * (2.0 - sigma) * dy2 * dy2),
        (0, 1): (-4.0, 2.0 * sigma2, 0.0),
        (0, 2): (2.0, 0.0, 0.0),
        (1, 0): (-2.0, -sigma * dy2, 0.0),
        (1, 1): (5.0, 0.0, 0.0),
        (1, 2): (-4.0, 0.0, 0.0),
        (1, 3): (1.0, 0.0, 0.0),
    }
    shorthand = {
        (0, 0): (2.0, sigma1, 0.0),
        (0, 1): (-4.0, 4.0 * sigma2, 0.0),
        (0, 2): (2.0, -sigma2, 0.0),
        (1, 0): (-2.0, -sigma * dy2, 0.0),
        (1, 1): (5.0, 0.0, 0.0),
        (1, 2): (-4.0, 0.0, 0.0),
        (1, 3): (1.0, 0.0, 0.0),
    }
    report = []
    for key in sorted(derived):
        for slot, term in enumerate(("I", "Lx", "Lx^2")):
            d, s = derived[key][slot], shorthand[key][slot]
            report.append({
                "row": key[0],
                "col": key[1],
                "term": term,
                "derived": d,
                "shorthand": s,
                "match": d == s,
            })
    return report
