"""Discrete radial/angular operator core shared by every solver module.

One first-derivative matrix Dr (centered in s = ln(1+r), second-order
one-sided end rows, mapped to d/dr) backs all gradients and divergences, so
operator identities used by the solvers hold at the matrix level:

  * the Cartesian gradient is assembled from the mode-raising operator
    A+ = d1 + i d2 and the mode-lowering operator A- = d1 - i d2, whose
    per-mode radial factors are D+_m = Dr - m/r and D-_m = Dr + m/r;
  * the momentum potential solve inverts M_m = D-_{m+1} D+_m, which is the
    exact per-mode factorization of divergence(symmetrized gradient); the
    divergence of the assembled tensor therefore reproduces the right-hand
    side to factorization accuracy, independent of truncation error.

Scalar Poisson problems use the tight mapped stencil
L_k = d2/dr2 + (1/r) d/dr - k^2/r^2 (second derivative from the 3-point
formula in s), which has the smaller truncation constant; it is mode-diagonal
and its own residual evaluator applies the identical matrices.

Boundary rows: the solvers replace the first and last collocation rows with
regularity/decay conditions, so residual norms are taken over the interior
rows where the PDE rows were imposed.
"""

from __future__ import annotations

import weakref

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SingularSystem
from .fields import Grid, ScalarField, TracelessSymTensorField

_workspaces: "weakref.WeakKeyDictionary[Grid, OperatorWorkspace]" = weakref.WeakKeyDictionary()


def workspace(grid: Grid) -> "OperatorWorkspace":
    ws = _workspaces.get(grid)
    if ws is None:
        ws = OperatorWorkspace(grid)
        _workspaces[grid] = ws
    return ws


def _first_derivative_s(n: int, h: float) -> sp.csr_matrix:
    """Centered d/ds with second-order one-sided end rows."""
    D = sp.lil_matrix((n, n))
    c = 1.0 / (2.0 * h)
    for i in range(1, n - 1):
        D[i, i - 1] = -c
        D[i, i + 1] = c
    D[0, 0], D[0, 1], D[0, 2] = -3.0 * c, 4.0 * c, -c
    D[n - 1, n - 1], D[n - 1, n - 2], D[n - 1, n - 3] = 3.0 * c, -4.0 * c, c
    return D.tocsr()


def _second_derivative_s(n: int, h: float) -> sp.csr_matrix:
    """3-point d2/ds2 with second-order one-sided end rows."""
    D = sp.lil_matrix((n, n))
    c = 1.0 / h**2
    for i in range(1, n - 1):
        D[i, i - 1] = c
        D[i, i] = -2.0 * c
        D[i, i + 1] = c
    D[0, 0], D[0, 1], D[0, 2], D[0, 3] = 2.0 * c, -5.0 * c, 4.0 * c, -c
    D[n - 1, n - 1], D[n - 1, n - 2] = 2.0 * c, -5.0 * c
    D[n - 1, n - 3], D[n - 1, n - 4] = 4.0 * c, -c
    return D.tocsr()


class OperatorWorkspace:
    """Per-grid matrices and cached factorizations."""

    def __init__(self, grid: Grid):
        self.grid = grid
        n, h, r = grid.N_r, grid.h, grid.r
        e1 = 1.0 / (1.0 + r)  # ds/dr

        Ds = _first_derivative_s(n, h)
        Dss = _second_derivative_s(n, h)
        E1 = sp.diags(e1)
        self.Dr = (E1 @ Ds).tocsr()
        # d2/dr2 = e^{-2s} (d2/ds2 - d/ds)
        self.Lr2 = (sp.diags(e1**2) @ (Dss - Ds)).tocsr()
        self.P = 1.0 / r
        self.P2 = self.P**2
        Pd = sp.diags(self.P)
        self.lap_base = (self.Lr2 + Pd @ self.Dr).tocsr()  # k = 0 Laplacian

        # wide (composed) pieces for the momentum factorization
        self.D2w = (self.Dr @ self.Dr).tocsr()
        self.PDw = (Pd @ self.Dr).tocsr()
        self.DPw = (self.Dr @ Pd).tocsr()

        # third-order one-sided d/dr rows used only in boundary-condition rows
        # (they do not change the interior scheme's order, only keep the
        # boundary truncation below the interior one)
        c6 = 1.0 / (6.0 * h)
        row = np.zeros(n)
        row[:4] = np.array([-11.0, 18.0, -9.0, 2.0]) * c6 * e1[0]
        self._bc_row_inner = row
        row = np.zeros(n)
        row[-4:] = np.array([-2.0, 9.0, -18.0, 11.0]) * c6 * e1[-1]
        self._bc_row_outer = row

        self._lap_solvers: dict[int, object] = {}
        self._mom_solvers: dict[int, object] = {}
        self._mode0_z: dict[str, tuple[np.ndarray, float]] = {}

    # -- raw applications -------------------------------------------------
    def apply_Dr(self, rows: np.ndarray) -> np.ndarray:
        """Dr applied along the radial axis of a (modes, N_r) array."""
        return (self.Dr @ rows.T).T

    def dr_row_inner(self) -> np.ndarray:
        return self._bc_row_inner

    def dr_row_outer(self) -> np.ndarray:
        return self._bc_row_outer

    # -- scalar Laplacian --------------------------------------------------
    def lap_matrix(self, k: int) -> sp.csr_matrix:
        if k == 0:
            return self.lap_base
        return (self.lap_base - sp.diags(k * k * self.P2)).tocsr()

    def lap_solver(self, k: int):
        """Factorized L_k with regularity row at r_1 and decay row at R_max."""
        s = self._lap_solvers.get(k)
        if s is None:
            n = self.grid.N_r
            A = self.lap_matrix(k).tolil()
            r1, R = self.grid.r[0], self.grid.R_max
            if k == 0:
                A[0] = self.dr_row_inner()                  # v'(r1) prescribed
                A[n - 1] = np.zeros(n)
                A[n - 1, n - 1] = 1.0                       # decay anchor
            else:
                row = self.dr_row_inner().copy()
                row[0] -= k / r1                            # v' = (k/r) v
                A[0] = row
                row = self.dr_row_outer().copy()
                row[n - 1] += k / R                         # v' + (k/r) v = 0
                A[n - 1] = row
            try:
                s = splu(A.tocsc())
            except RuntimeError as exc:  # pragma: no cover
                raise SingularSystem(f"mode {k} factorization failed: {exc}")
            self._lap_solvers[k] = s
        return s

    # -- mode-0 flux-matched solve ------------------------------------------
    def farflux(self, vec: np.ndarray):
        """Discrete r v'(R_max) (the one-sided boundary derivative row)."""
        return self.grid.R_max * (self._bc_row_outer @ vec)

    def _z_profile(self):
        """Cached anchored solve of  L0 z = Delta(chi ln r);  flux(z) ~ 1."""
        cached = self._mode0_z.get("lap")
        if cached is None:
            solver = self.lap_solver(0)
            rhs = np.array(self.grid.lap_chiln)
            rhs[0] = 0.0   # regularity row: the source vanishes at the inner edge
            rhs[-1] = 0.0  # anchor row
            z = solver.solve(rhs)
            ffz = float(self.farflux(z))
            if not 0.5 < ffz < 2.0:  # pragma: no cover
                raise SingularSystem(f"log-profile flux {ffz} far from 1")
            cached = (z, ffz)
            self._mode0_z["lap"] = cached
        return cached

    def solve_mode0_flux_matched(self, rhs0: np.ndarray):
        """Anchored mode-0 solve with the residual far flux moved to the log.

        Returns (v, beta): v has r v'(R_max) = 0 in the discrete sense and the
        caller adds beta to its log coefficient, so the full solution still
        satisfies the discrete equation row by row.
        """
        solver = self.lap_solver(0)
        r1 = self.grid.r[0]
        y = np.array(rhs0)
        y[0] = 0.5 * r1 * rhs0[0]        # regularity: v'(r1) = (r1/2) f(r1)
        y[-1] = 0.0
        v0 = solver.solve(y)
        z, ffz = self._z_profile()
        beta = self.farflux(v0) / ffz
        return v0 - beta * z, beta

    # -- momentum factorization --------------------------------------------
    def mom_matrix(self, m: int) -> sp.csr_matrix:
        """M_m = (Dr + (m+1)/r)(Dr - m/r), assembled from shared products."""
        return (self.D2w - m * self.DPw + (m + 1) * self.PDw
                - sp.diags(m * (m + 1) * self.P2)).tocsr()

    def mom_solver(self, m: int):
        s = self._mom_solvers.get(m)
        if s is None:
            n = self.grid.N_r
            A = self.mom_matrix(m).tolil()
            r1, R = self.grid.r[0], self.grid.R_max
            am = abs(m)
            if m == 0:
                A[0] = self.dr_row_inner()
                A[n - 1] = np.zeros(n)
                A[n - 1, n - 1] = 1.0
            else:
                row = self.dr_row_inner().copy()
                row[0] -= am / r1
                A[0] = row
                row = self.dr_row_outer().copy()
                row[n - 1] += am / R
                A[n - 1] = row
            try:
                s = splu(A.tocsc())
            except RuntimeError as exc:  # pragma: no cover
                raise SingularSystem(f"potential mode {m} factorization failed: {exc}")
            self._mom_solvers[m] = s
        return s


# ----------------------------------------------------------------------------
# complex angular modes: row K + m holds the e^{i m theta} coefficient
# ----------------------------------------------------------------------------

def real_to_cmodes(f: ScalarField) -> np.ndarray:
    K, n = f.grid.K, f.grid.N_r
    C = np.zeros((2 * K + 1, n), dtype=complex)
    C[K] = f.a[0]
    for m in range(1, K + 1):
        cm = 0.5 * (f.a[m] - 1j * f.b[m])
        C[K + m] = cm
        C[K - m] = np.conj(cm)
    return C


def cmodes_to_real(grid: Grid, C: np.ndarray) -> ScalarField:
    K = grid.K
    a = np.zeros((K + 1, grid.N_r))
    b = np.zeros((K + 1, grid.N_r))
    a[0] = C[K].real
    for m in range(1, K + 1):
        a[m] = (C[K + m] + C[K - m]).real
        b[m] = (C[K - m] - C[K + m]).imag
    return ScalarField(grid, a, b)


def pack_pair(f1: ScalarField, f2: ScalarField) -> np.ndarray:
    """Complex modes of F = f1 + i f2 (no conjugate symmetry in general)."""
    return real_to_cmodes(f1) + 1j * real_to_cmodes(f2)


def unpack_pair(grid: Grid, Z: np.ndarray) -> tuple[ScalarField, ScalarField]:
    Zben = np.conj(Z[::-1])  # m -> -m, conjugated
    f1 = cmodes_to_real(grid, 0.5 * (Z + Zben))
    f2 = cmodes_to_real(grid, -0.5j * (Z - Zben))
    return f1, f2


def mode_indices(grid: Grid) -> np.ndarray:
    return np.arange(-grid.K, grid.K + 1)


def raise_mode(w: OperatorWorkspace, C: np.ndarray) -> np.ndarray:
    """(A+ C)_m = (Dr - (m-1)/r) C_{m-1}; content above mode K is dropped."""
    DC = w.apply_Dr(C)
    PC = C * w.P[None, :]
    mu = mode_indices(w.grid)
    out = np.zeros_like(C)
    out[1:] = DC[:-1] - mu[:-1, None] * PC[:-1]
    return out


def lower_mode(w: OperatorWorkspace, C: np.ndarray) -> np.ndarray:
    """(A- C)_m = (Dr + (m+1)/r) C_{m+1}; content below mode -K is dropped."""
    DC = w.apply_Dr(C)
    PC = C * w.P[None, :]
    mu = mode_indices(w.grid)
    out = np.zeros_like(C)
    out[:-1] = DC[1:] + mu[1:, None] * PC[1:]
    return out


def tensor_to_zeta(H: TracelessSymTensorField) -> np.ndarray:
    """zeta = H11 + i H12 in complex modes."""
    return pack_pair(H.h11, H.h12)


def zeta_to_tensor(grid: Grid, Z: np.ndarray) -> TracelessSymTensorField:
    return TracelessSymTensorField(*unpack_pair(grid, Z))


def divergence(H: TracelessSymTensorField) -> tuple[ScalarField, ScalarField]:
    """(d_i H_i1, d_i H_i2) via A- on zeta = H11 + i H12."""
    w = workspace(H.grid)
    return unpack_pair(H.grid, lower_mode(w, tensor_to_zeta(H)))


def apply_laplacian(f: ScalarField) -> ScalarField:
    """Mode-diagonal discrete Laplacian (same matrices the scalar solves invert)."""
    w = workspace(f.grid)
    K = f.grid.K
    base_a = (w.lap_base @ f.a.T).T
    base_b = (w.lap_base @ f.b.T).T
    k2 = (np.arange(K + 1) ** 2)[:, None]
    a = base_a - k2 * (w.P2[None, :] * f.a)
    b = base_b - k2 * (w.P2[None, :] * f.b)
    b[0] = 0.0
    return ScalarField(f.grid, a, b)


def zero_boundary_rows(f: ScalarField) -> ScalarField:
    """Zero the first/last collocation nodes (where BC rows replace the PDE)."""
    a = f.a.copy()
    b = f.b.copy()
    a[:, 0] = a[:, -1] = 0.0
    b[:, 0] = b[:, -1] = 0.0
    return ScalarField(f.grid, a, b)
