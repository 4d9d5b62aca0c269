"""Fisher information and Cramer-Rao bounds for 3D range-based localization.

The information matrix of independent Gaussian range measurements depends
only on the unit directions from the target to the anchors and on the fused
error scale sigma_M. Besides the direct matrix route this module carries an
independent geometric evaluation of the same bound (projected triangle areas
over tetrahedron volumes), the altitude scaling correction for flat anchor
clouds, and the falsified-information bounds used in the attack analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DomainError
from .threat import Bias, Jamming, Manipulation, attacked_sigma_m

# Relative determinant threshold below which a 3x3 information matrix is
# treated as singular; scale-relative so it survives unit changes.
_SINGULAR_REL_DET = 1e-12
_MAX_CONDITION = 1e12


def fim(target, anchors, sigma_m):
    """3x3 Fisher information matrix of range measurements with scale sigma_m.

    Entries are (1/sigma_m^2) * sum over anchors of the outer products of the
    normalized target-to-anchor directions; symmetric positive semidefinite
    by construction.
    """
    if sigma_m <= 0:
        raise DomainError(f"sigma_m must be positive, got {sigma_m}")
    target = np.asarray(target, dtype=float)
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    diffs = target[None, :] - anchors
    d = np.linalg.norm(diffs, axis=1)
    if np.any(d < 1e-9):
        raise DegenerateGeometryError("anchor coincides with target")
    u = diffs / d[:, None]
    return (u.T @ u) / (sigma_m * sigma_m)


def _adjugate3(m):
    a, b, c = m[0]
    d, e, f = m[1]
    g, h, i = m[2]
    return np.array([
        [e * i - f * h, c * h - b * i, b * f - c * e],
        [f * g - d * i, a * i - c * g, c * d - a * f],
        [d * h - e * g, b * g - a * h, a * e - b * d],
    ])


def crlb_trace(fim_matrix):
    """tr(I^-1) via the closed-form adjugate/determinant inverse of a 3x3 FIM.

    Raises DegenerateGeometryError (carrying det and condition number) when
    the matrix is singular at the scale-relative threshold or its condition
    number exceeds 1e12.
    """
    m = np.asarray(fim_matrix, dtype=float)
    adj = _adjugate3(m)
    det = float(m[0] @ adj[:, 0])
    scale = (np.trace(m) / 3.0) ** 3
    eig = np.linalg.eigvalsh(m)
    cond = np.inf if abs(eig[0]) < 1e-300 else abs(eig[-1]) / abs(eig[0])
    if abs(det) < _SINGULAR_REL_DET * abs(scale) or cond > _MAX_CONDITION:
        raise DegenerateGeometryError(
            f"singular information matrix (det={det:.3e}, cond={cond:.3e})",
            det=det, cond=cond,
        )
    return float(np.trace(adj) / det)


def closed_form_crlb(sigma_m, n_anchors):
    """Closed-form bound 6*sigma_m^2/N for symmetrically surrounding anchors."""
    if n_anchors < 1:
        raise DomainError(f"need at least one anchor, got {n_anchors}")
    return 6.0 * sigma_m * sigma_m / n_anchors


@dataclass(frozen=True)
class ScaleSpec:
    """Altitude scaling for anchor clouds flatter than they are wide.

    For half-ranges R_x = R_y >= R_z with d_max^2 = R_x^2 + R_y^2 + R_z^2 the
    scale factor is s = sqrt(2(d_max^2 - R_z^2))/(2 R_z) = R_x/R_z; it is 1
    exactly for the equal-range cloud and grows as the cloud flattens.
    """

    d_max: float
    r_z: float
    s: float
    matrix: np.ndarray


def scale_spec(d_max, r_z):
    """Scale factor and elementwise 3x3 scale matrix for a given flatness."""
    if r_z <= 0:
        raise DomainError(f"r_z must be positive, got {r_z}")
    if r_z > d_max:
        raise DomainError(f"r_z={r_z} exceeds d_max={d_max}")
    s = np.sqrt(2.0 * (d_max * d_max - r_z * r_z)) / (2.0 * r_z)
    mat = np.array([
        [1.0, 1.0, s],
        [1.0, 1.0, s],
        [s, s, s * s],
    ])
    return ScaleSpec(d_max=float(d_max), r_z=float(r_z), s=float(s), matrix=mat)


def scaled_fim(fim_matrix, spec: ScaleSpec):
    """Hadamard product of the information matrix with the scale matrix."""
    return np.asarray(fim_matrix, dtype=float) * spec.matrix


class GeometryOracle:
    """Geometric route to the localization bound, independent of inversion.

    f1 sums squared Cartesian-plane projections of the triangles formed by
    the target and every anchor pair, normalized by squared distances; f2
    sums squared volumes of the tetrahedra formed with every anchor triple.
    The bound is (sigma_M^2/3) * f1/f2, which agrees with tr(I^-1) exactly.
    """

    def __init__(self, target, anchors):
        self.target = np.asarray(target, dtype=float)
        self.anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        if self.anchors.shape[0] < 3:
            raise DomainError("geometric oracle needs at least 3 anchors")
        diffs = self.target[None, :] - self.anchors
        d = np.linalg.norm(diffs, axis=1)
        if np.any(d < 1e-9):
            raise DegenerateGeometryError("anchor coincides with target")
        # Scaling each difference by 1/d^2 folds the distance normalizations
        # of f1 and f2 into the cross/triple products.
        self._b = diffs / (d * d)[:, None]
        self._cross = np.cross(self._b[:, None, :], self._b[None, :, :])

    def f1(self):
        return 0.25 * float(np.sum(self._cross * self._cross))

    def f2(self):
        dets = np.einsum("ni,mli->nml", self._b, self._cross)
        return float(np.sum(dets * dets)) / 36.0

    def crlb(self, sigma_m):
        f1 = self.f1()
        f2 = self.f2()
        if f2 <= 1e-300 or f2 < 1e-14 * f1 ** 1.5:
            raise DegenerateGeometryError(
                f"anchors coplanar with target (f2={f2:.3e})", det=f2)
        return (sigma_m * sigma_m / 3.0) * f1 / f2


def oracle_crlb(geom: GeometryOracle, sigma_m):
    """Bound from the geometric decomposition; see :class:`GeometryOracle`."""
    return geom.crlb(sigma_m)


def attacked_fim(fim_clean, fim_malicious, p_a):
    """Information mixture (1-p_a)*I + p_a*I' under an injection rate p_a."""
    if not 0.0 <= p_a <= 1.0:
        raise DomainError(f"p_a must be in [0,1], got {p_a}")
    return (1.0 - p_a) * np.asarray(fim_clean, float) \
        + p_a * np.asarray(fim_malicious, float)


def crlb2(mode, p_a, target, anchors, sigma_m, *, sigma_m_attacked=None,
          path_loss=None, profile=None, coverage=None, rng=None,
          sigma_samples=100_000):
    """Localization bound when a fraction p_a of beacons is falsified.

    Jamming and manipulation keep the estimator unbiased but inflate the
    error scale of the falsified fraction to sigma_m_attacked (estimated by
    Monte Carlo through the beacon corruption model when not supplied);
    the bound is tr of the inverse information mixture. A position bias
    shifts the estimate instead, so the clean bound gains the squared bias
    (p_a*||B||)^2 in the MSE sense; on the RMS scale that growth is close to
    linear in p_a.
    """
    fim_clean = fim(target, anchors, sigma_m)
    crlb1 = crlb_trace(fim_clean)
    if p_a == 0:
        return crlb1
    if not 0.0 <= p_a <= 1.0:
        raise DomainError(f"p_a must be in [0,1], got {p_a}")
    if isinstance(mode, Bias):
        bias_norm = float(np.linalg.norm(mode.b))
        return crlb1 + (p_a * bias_norm) ** 2
    if not isinstance(mode, (Jamming, Manipulation)):
        raise DomainError(f"unknown attack mode {mode!r}")
    if sigma_m_attacked is None:
        if path_loss is None or profile is None or coverage is None or rng is None:
            raise DomainError(
                "need sigma_m_attacked or (path_loss, profile, coverage, rng) "
                "to evaluate the falsified error scale")
        sigma_m_attacked = attacked_sigma_m(
            mode, path_loss, profile, coverage, sigma_samples, rng)
    fim_mal = fim(target, anchors, sigma_m_attacked)
    return crlb_trace(attacked_fim(fim_clean, fim_mal, p_a))
