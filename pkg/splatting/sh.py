"""Real spherical-harmonic basis through degree 3 (16 coefficients per channel).

Sign and ordering follow the usual 3DGS convention: index 0 is Y00, indices
1..3 are degree 1 ordered (y, z, x), 4..8 degree 2 and 9..15 degree 3.
"""

from __future__ import annotations

import numpy as np

from splatting.errors import NonUnitDirectionError

SH_DEGREE = 3
SH_COEFFS = (SH_DEGREE + 1) ** 2
UNIT_TOL = 1e-6

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)


def coeff_count(degree: int) -> int:
    return (degree + 1) ** 2


def sh_basis(dirs: np.ndarray, degree: int = SH_DEGREE) -> np.ndarray:
    """Basis values Y_k(dir) for dirs of shape (..., 3); returns (..., 16).

    Entries above the active degree are zero so callers can always contract
    against full 16-coefficient sets.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out = np.zeros(dirs.shape[:-1] + (SH_COEFFS,), dtype=np.float64)
    out[..., 0] = SH_C0
    if degree < 1:
        return out
    out[..., 1] = -SH_C1 * y
    out[..., 2] = SH_C1 * z
    out[..., 3] = -SH_C1 * x
    if degree < 2:
        return out
    xx, yy, zz = x * x, y * y, z * z
    out[..., 4] = SH_C2[0] * x * y
    out[..., 5] = SH_C2[1] * y * z
    out[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    out[..., 7] = SH_C2[3] * x * z
    out[..., 8] = SH_C2[4] * (xx - yy)
    if degree < 3:
        return out
    out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    out[..., 10] = SH_C3[1] * x * y * z
    out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    out[..., 14] = SH_C3[5] * z * (xx - yy)
    out[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_basis_jacobian(dirs: np.ndarray, degree: int = SH_DEGREE) -> np.ndarray:
    """d Y_k / d(x, y, z) of the basis polynomials; returns (..., 16, 3).

    The polynomials are differentiated as written, without projecting onto the
    sphere. Callers chain through their own normalization.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    jac = np.zeros(dirs.shape[:-1] + (SH_COEFFS, 3), dtype=np.float64)
    if degree < 1:
        return jac
    jac[..., 1, 1] = -SH_C1
    jac[..., 2, 2] = SH_C1
    jac[..., 3, 0] = -SH_C1
    if degree < 2:
        return jac
    xx, yy, zz = x * x, y * y, z * z
    jac[..., 4, 0] = SH_C2[0] * y
    jac[..., 4, 1] = SH_C2[0] * x
    jac[..., 5, 1] = SH_C2[1] * z
    jac[..., 5, 2] = SH_C2[1] * y
    jac[..., 6, 0] = -2.0 * SH_C2[2] * x
    jac[..., 6, 1] = -2.0 * SH_C2[2] * y
    jac[..., 6, 2] = 4.0 * SH_C2[2] * z
    jac[..., 7, 0] = SH_C2[3] * z
    jac[..., 7, 2] = SH_C2[3] * x
    jac[..., 8, 0] = 2.0 * SH_C2[4] * x
    jac[..., 8, 1] = -2.0 * SH_C2[4] * y
    if degree < 3:
        return jac
    jac[..., 9, 0] = SH_C3[0] * 6.0 * x * y
    jac[..., 9, 1] = SH_C3[0] * (3.0 * xx - 3.0 * yy)
    jac[..., 10, 0] = SH_C3[1] * y * z
    jac[..., 10, 1] = SH_C3[1] * x * z
    jac[..., 10, 2] = SH_C3[1] * x * y
    jac[..., 11, 0] = SH_C3[2] * (-2.0 * x * y)
    jac[..., 11, 1] = SH_C3[2] * (4.0 * zz - xx - 3.0 * yy)
    jac[..., 11, 2] = SH_C3[2] * 8.0 * y * z
    jac[..., 12, 0] = SH_C3[3] * (-6.0 * x * z)
    jac[..., 12, 1] = SH_C3[3] * (-6.0 * y * z)
    jac[..., 12, 2] = SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)
    jac[..., 13, 0] = SH_C3[4] * (4.0 * zz - 3.0 * xx - yy)
    jac[..., 13, 1] = SH_C3[4] * (-2.0 * x * y)
    jac[..., 13, 2] = SH_C3[4] * 8.0 * x * z
    jac[..., 14, 0] = SH_C3[5] * 2.0 * x * z
    jac[..., 14, 1] = SH_C3[5] * (-2.0 * y * z)
    jac[..., 14, 2] = SH_C3[5] * (xx - yy)
    jac[..., 15, 0] = SH_C3[6] * (3.0 * xx - 3.0 * yy)
    jac[..., 15, 1] = SH_C3[6] * (-6.0 * x * y)
    return jac


def eval_sh(coeffs: np.ndarray, direction: np.ndarray, degree: int = SH_DEGREE) -> np.ndarray:
    """Evaluate one 16x3 coefficient set at a unit direction; returns an unclamped RGB triple."""
    direction = np.asarray(direction, dtype=np.float64)
    norm = float(np.linalg.norm(direction))
    if abs(norm - 1.0) > UNIT_TOL:
        raise NonUnitDirectionError(f"SH direction must be unit length, got |dir|={norm!r}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return sh_basis(direction, degree) @ coeffs


def eval_sh_batch(coeffs: np.ndarray, dirs: np.ndarray, degree: int = SH_DEGREE) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (N, 16, 3) coefficient sets at (N, 3) unit directions.

    Returns (colors (N, 3), basis (N, 16)); the basis is kept for the backward pass.
    """
    basis = sh_basis(dirs, degree)
    return np.einsum("nk,nkc->nc", basis, coeffs), basis


def rgb_to_sh0(rgb: np.ndarray) -> np.ndarray:
    """Degree-0 coefficient that reproduces rgb after the +0.5 offset."""
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / SH_C0
