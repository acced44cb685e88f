"""Projected coarse saddle-point system, its solve and velocity downscaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fine import SaddleSystem, hdiv_form_matrix, solve_saddle


@dataclass
class ProjectionOperator:
    """Velocity basis rows and the piecewise-constant pressure aggregation."""

    R_u: sp.csr_matrix  # n_coarse_velocity x n_fine_edges
    R_p: sp.csr_matrix  # n_coarse_cells x n_fine_cells


@dataclass
class CoarseSolution:
    U_H: np.ndarray
    P_H: np.ndarray
    U_ms: np.ndarray  # downscaled fine-grid flux DOFs
    residual_momentum: float
    residual_mass: float


def pressure_projection(partition, n_fine_cells):
    """0/1 aggregation matrix: coarse cells by fine cells."""
    rows = partition.cell_to_coarse
    cols = np.arange(n_fine_cells)
    return sp.coo_matrix(
        (np.ones(n_fine_cells), (rows, cols)),
        shape=(partition.n_coarse_cells, n_fine_cells),
    ).tocsr()


def make_projection(basis, partition, n_fine_cells):
    return ProjectionOperator(
        R_u=basis.R_u, R_p=pressure_projection(partition, n_fine_cells)
    )


def assemble_coarse(fine_system, projection):
    """Galerkin projection of the fine saddle system onto the multiscale
    spaces."""
    R_u, R_p = projection.R_u, projection.R_p
    if R_u.shape[1] != fine_system.n_velocity:
        raise ValueError("velocity projection does not match fine system")
    if R_p.shape[1] != fine_system.n_pressure:
        raise ValueError("pressure projection does not match fine system")
    A_H = (R_u @ fine_system.A @ R_u.T).tocsr()
    B_H = (R_p @ fine_system.B @ R_u.T).tocsr()
    G_H = R_u @ fine_system.G
    F_H = R_p @ fine_system.F
    return SaddleSystem(
        A=A_H, B=B_H, G=G_H, F=F_H,
        constrained=np.zeros(A_H.shape[0], dtype=bool),
    )


def solve_coarse(coarse_system, projection, tol=1e-10):
    """Solve the coarse system and reconstruct the fine-grid velocity."""
    sol = solve_saddle(coarse_system, tol=tol)
    U_ms = projection.R_u.T @ sol.u
    return CoarseSolution(
        U_H=sol.u,
        P_H=sol.p,
        U_ms=U_ms,
        residual_momentum=sol.residual_momentum,
        residual_mass=sol.residual_mass,
    )


def coarse_velocity_norm(mesh, kappa, projection):
    """Dense Gram matrix of the weighted H(div) norm on the coarse velocity
    basis."""
    S = hdiv_form_matrix(mesh, kappa)
    N = (projection.R_u @ S @ projection.R_u.T).toarray()
    return 0.5 * (N + N.T)


def estimate_infsup(coarse_system, velocity_norm, coarse_areas):
    """Discrete inf-sup constant: smallest generalized singular value of the
    coarse divergence block in the (H(div)-weighted, pressure L2) norm pair."""
    if len(coarse_areas) < 2:
        raise ValueError("inf-sup estimate needs at least two coarse cells")
    try:
        c, low = la.cho_factor(velocity_norm)
    except la.LinAlgError as exc:
        raise ValueError("velocity norm matrix is not positive definite") from exc
    B = coarse_system.B.toarray()
    X = B @ la.cho_solve((c, low), B.T)
    X = 0.5 * (X + X.T)
    eigs = la.eigh(X, np.diag(np.asarray(coarse_areas, dtype=float)),
                   eigvals_only=True)
    return float(np.sqrt(max(eigs[0], 0.0)))
