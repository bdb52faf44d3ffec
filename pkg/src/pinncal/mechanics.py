"""Linear-elastic constitutive models, kinematics, stress divergence and
work integrals.

Stress units are N/mm^2, lengths mm, energies N*mm. Stress operators are
implemented both on plain floats/arrays and on tape nodes (the latter via
ordinary arithmetic, so parameter gradients flow through the constitutive
law).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tape import mean, square

NU_INCOMPRESSIBLE_TOL = 1e-6

# The 1/2 factor of the work integrals is kept on both the internal and the
# external side; the work-balance loss is their difference, so the convention
# cancels there.
WORK_HALF = True


class MaterialDomainError(ValueError):
    pass


@dataclass
class IsotropicElasticEnu:
    E: float
    nu: float

    def __post_init__(self):
        if self.E <= 0:
            raise MaterialDomainError(f"E must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise MaterialDomainError(f"nu must be in (-1, 0.5), got {self.nu}")


@dataclass
class IsotropicElasticKG:
    K: float
    G: float

    def __post_init__(self):
        if self.K <= 0 or self.G <= 0:
            raise MaterialDomainError(f"K and G must be positive, got "
                                      f"K={self.K}, G={self.G}")


@dataclass
class MaterialParameterization:
    """Initial estimates and trainable dimensionless correction factors;
    the effective parameter is (1 + alpha) * estimate."""

    estimates: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        self.estimates = np.atleast_1d(np.asarray(self.estimates, dtype=np.float64))
        self.alphas = np.atleast_1d(np.asarray(self.alphas, dtype=np.float64))
        if np.any(self.estimates <= 0):
            raise MaterialDomainError("estimates must be positive")
        if self.estimates.shape != self.alphas.shape:
            raise MaterialDomainError("estimate/correction shape mismatch")


def effective_parameters(p: MaterialParameterization) -> np.ndarray:
    """kappa = (1 + alpha) * kappa_est, per parameter. May be non-positive
    for infeasible iterates; the optimizer treats those as +inf objective."""
    return (1.0 + p.alphas) * p.estimates


def convert_Enu_to_KG(E: float, nu: float) -> tuple[float, float]:
    if nu >= 0.5 - NU_INCOMPRESSIBLE_TOL:
        raise MaterialDomainError(f"nu={nu} at the incompressible limit")
    return E / (3.0 * (1.0 - 2.0 * nu)), E / (2.0 * (1.0 + nu))


def convert_KG_to_Enu(K, G):
    """Works on floats and on tape nodes."""
    E = 9.0 * K * G / (3.0 * K + G)
    nu = (3.0 * K - 2.0 * G) / (2.0 * (3.0 * K + G))
    return E, nu


def strain_from_gradient(grad_u: np.ndarray) -> np.ndarray:
    """Symmetric part of the 2x2 displacement gradient."""
    grad_u = np.asarray(grad_u, dtype=np.float64)
    return 0.5 * (grad_u + grad_u.T)


def stress_1d(E: float, strain: float) -> float:
    return E * strain


def plane_stress_coefficients(E, nu):
    """(c11, c12, c_shear) with sigma_xx = c11 exx + c12 eyy,
    sigma_yy = c12 exx + c11 eyy, sigma_xy = c_shear * exy.
    Works on floats and tape nodes."""
    c11 = E / (1.0 - nu * nu)
    c12 = nu * c11
    c_shear = E / (1.0 + nu)
    return c11, c12, c_shear


def plane_strain_coefficients(K, G):
    """Plane-strain coefficients from the bulk/shear form with the 3D
    deviatoric split (eps_zz = 0): sigma_xx = c11 exx + c12 eyy etc."""
    c11 = K + 4.0 * G / 3.0
    c12 = K - 2.0 * G / 3.0
    c_shear = 2.0 * G
    return c11, c12, c_shear


def stress_2d_plane_stress(mat: IsotropicElasticEnu, strain: np.ndarray) -> np.ndarray:
    c11, c12, c_shear = plane_stress_coefficients(mat.E, mat.nu)
    exx, eyy, exy = strain[0, 0], strain[1, 1], strain[0, 1]
    sxx = c11 * exx + c12 * eyy
    syy = c12 * exx + c11 * eyy
    sxy = c_shear * exy
    return np.array([[sxx, sxy], [sxy, syy]])


def stress_2d_KG(mat: IsotropicElasticKG, strain: np.ndarray,
                 ambient: str = "plane_stress") -> np.ndarray:
    E, nu = convert_KG_to_Enu(mat.K, mat.G)
    if nu >= 0.5 - NU_INCOMPRESSIBLE_TOL:
        raise MaterialDomainError(f"nu={nu} at the incompressible limit")
    if ambient == "plane_stress":
        return stress_2d_plane_stress(IsotropicElasticEnu(E, nu), strain)
    if ambient == "plane_strain":
        c11, c12, c_shear = plane_strain_coefficients(mat.K, mat.G)
        exx, eyy, exy = strain[0, 0], strain[1, 1], strain[0, 1]
        return np.array([
            [c11 * exx + c12 * eyy, c_shear * exy],
            [c_shear * exy, c12 * exx + c11 * eyy]])
    raise ValueError(f"unknown ambient condition {ambient!r}")


# -- pointwise fields for (N-point) batched evaluation --------------------

def divergence_of_stress_2d(first_x, second_x, first_y, second_y, c11, c12, c_shear):
    """Residual of div sigma = 0 at collocation points.

    `first_*`/`second_*` are the derivative channels of the two displacement
    networks (lists/dicts over input-index pairs, arrays or tape nodes of
    shape (N, 1)); material coefficients are scalars or scalar nodes.
    Returns (r_x, r_y). The shear contribution is
    d(sigma_xy)/dy = (c_shear / 2) * (u_x,yy + u_y,xy), analogous in x.
    """
    ux_xx, ux_xy, ux_yy = second_x[(0, 0)], second_x[(0, 1)], second_x[(1, 1)]
    uy_xx, uy_xy, uy_yy = second_y[(0, 0)], second_y[(0, 1)], second_y[(1, 1)]
    half_shear = 0.5 * c_shear
    r_x = c11 * ux_xx + c12 * uy_xy + half_shear * (ux_yy + uy_xy)
    r_y = half_shear * (ux_xy + uy_xx) + c12 * ux_xy + c11 * uy_yy
    return r_x, r_y


def internal_work_1d(E, first, volume, n_points):
    """(1/2) (V/N) sum E * strain^2 over collocation points; `first` is the
    (N, 1) du/dx channel."""
    if n_points < 1:
        raise ValueError("empty collocation set")
    half = 0.5 if WORK_HALF else 1.0
    return half * volume * (E * mean(square(first)))


def internal_work_2d(first_x, first_y, c11, c12, c_shear, volume, n_points):
    """Monte-Carlo strain energy (1/2)(V/N) sum sigma : eps over points."""
    if n_points < 1:
        raise ValueError("empty collocation set")
    exx, eyy = first_x[0], first_y[1]
    exy = 0.5 * (first_x[1] + first_y[0])
    sxx = c11 * exx + c12 * eyy
    syy = c12 * exx + c11 * eyy
    sxy = c_shear * exy
    density = sxx * exx + syy * eyy + 2.0 * sxy * exy
    half = 0.5 if WORK_HALF else 1.0
    return half * volume * mean(density)


def external_work(tractions: np.ndarray, u_components, boundary_measure: float):
    """(1/2) (V_boundary/N) sum t . u over loaded boundary points.

    `tractions` is a constant (N, n_comp) array of known tractions;
    `u_components` a list of n_comp displacement arrays or tape nodes of
    shape (N,) or (N, 1)."""
    tractions = np.atleast_2d(np.asarray(tractions, dtype=np.float64))
    n = tractions.shape[0]
    if n < 1:
        raise ValueError("no boundary work points")
    if np.any(np.isnan(tractions)):
        raise ValueError("traction missing at a boundary work point")
    half = 0.5 if WORK_HALF else 1.0
    acc = None
    for comp, u in enumerate(u_components):
        ndim = u.value.ndim if hasattr(u, "value") else np.ndim(u)
        t_col = tractions[:, comp]
        if ndim == 2:
            t_col = t_col.reshape(-1, 1)
        term = mean(u * t_col)
        acc = term if acc is None else acc + term
    return half * boundary_measure * acc
