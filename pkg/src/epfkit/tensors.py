"""Algebra of symmetric 3x3 tensors.

Every function here accepts either a :class:`SymTensor3` or an array of
shape ``(..., 3, 3)`` and broadcasts over the leading dimensions, so a whole
profile of Reynolds stresses can be processed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "K_FLOOR",
    "REALIZABILITY_EPS",
    "DEGENERACY_TOL",
    "SymTensor3",
    "EigenDecomposition",
    "Anisotropy",
    "RealizabilityReport",
    "as_matrix",
    "validate_realizability",
    "is_realizable",
    "anisotropy_from_stress",
    "stress_from_anisotropy",
    "eig_sym3",
    "invariants",
    "frobenius_inner",
    "random_rotation",
    "random_realizable",
]

K_FLOOR = 1e-14
REALIZABILITY_EPS = 1e-10
DEGENERACY_TOL = 1e-12

_I3 = np.eye(3)


@dataclass(frozen=True)
class SymTensor3:
    """Symmetric 3x3 tensor stored by its six independent components."""

    xx: float
    yy: float
    zz: float
    xy: float = 0.0
    xz: float = 0.0
    yz: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.xx, self.yy, self.zz, self.xy, self.xz, self.yz])):
            raise ValueError("SymTensor3 components must be finite")

    @classmethod
    def from_matrix(cls, m) -> "SymTensor3":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        m = 0.5 * (m + m.T)
        return cls(m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[0, 2], m[1, 2])

    @classmethod
    def diag(cls, a: float, b: float, c: float) -> "SymTensor3":
        return cls(a, b, c)

    def to_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.xx, self.xy, self.xz],
                [self.xy, self.yy, self.yz],
                [self.xz, self.yz, self.zz],
            ]
        )

    def __array__(self, dtype=None, copy=None):
        m = self.to_matrix()
        return m if dtype is None else m.astype(dtype)

    def components(self) -> tuple[float, ...]:
        return (self.xx, self.yy, self.zz, self.xy, self.xz, self.yz)


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending and the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class Anisotropy(NamedTuple):
    k: np.ndarray
    a: np.ndarray
    degenerate: np.ndarray


@dataclass
class RealizabilityReport:
    is_realizable: bool
    violations: list[tuple[str, float]] = field(default_factory=list)


def as_matrix(t) -> np.ndarray:
    """Return ``t`` as a float array of shape ``(..., 3, 3)``."""
    m = np.asarray(t, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"expected trailing shape (3, 3), got {m.shape}")
    return m


def _principal_minors(m):
    d = np.stack([m[..., 0, 0], m[..., 1, 1], m[..., 2, 2]], axis=-1)
    m2 = np.stack(
        [
            m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0],
            m[..., 0, 0] * m[..., 2, 2] - m[..., 0, 2] * m[..., 2, 0],
            m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1],
        ],
        axis=-1,
    )
    # singular input is legitimate here; LAPACK would warn about it
    with np.errstate(divide="ignore", invalid="ignore"):
        det = np.linalg.det(m)
    return d, m2, det


def _realizability_scale(m):
    tr = np.abs(np.trace(m, axis1=-2, axis2=-1))
    return np.maximum(np.maximum(tr, np.max(np.abs(m), axis=(-2, -1))), 1e-300)


def is_realizable(tau, eps: float = REALIZABILITY_EPS) -> np.ndarray:
    """Vectorised Schumann check: all principal minors non-negative."""
    m = as_matrix(tau)
    s = _realizability_scale(m)
    d, m2, det = _principal_minors(m)
    ok = np.all(d >= -eps * s[..., None], axis=-1)
    ok &= np.all(m2 >= -eps * s[..., None] ** 2, axis=-1)
    ok &= det >= -eps * s**3
    ok &= np.all(np.isfinite(m), axis=(-2, -1))
    return ok


def validate_realizability(tau, eps: float = REALIZABILITY_EPS) -> RealizabilityReport:
    """Check the three Schumann constraints for a single stress tensor.

    Residuals are reported relative to the tensor scale ``max(|tr|, max|tau_ij|)``
    raised to the power of the constraint's degree, so a tensor and any positive
    multiple of it give the same report.
    """
    m = as_matrix(tau)
    if m.shape != (3, 3):
        raise ValueError("validate_realizability takes a single tensor")
    s = float(_realizability_scale(m))
    d, m2, det = _principal_minors(m)
    violations = []
    for name, value in zip(("diag_xx", "diag_yy", "diag_zz"), d):
        if value / s < -eps:
            violations.append((name, float(-value / s)))
    for name, value in zip(("minor_xy", "minor_xz", "minor_yz"), m2):
        if value / s**2 < -eps:
            violations.append((name, float(-value / s**2)))
    if det / s**3 < -eps:
        violations.append(("det", float(-det / s**3)))
    return RealizabilityReport(not violations, violations)


def anisotropy_from_stress(tau) -> Anisotropy:
    """Split a Reynolds stress into kinetic energy and anisotropy.

    ``k = tr(tau)/2`` and ``a = tau/k - 2/3 I``.  Where ``k <= K_FLOOR`` the
    anisotropy is undefined; it is returned as zero and flagged degenerate.
    """
    m = as_matrix(tau)
    k = 0.5 * np.trace(m, axis1=-2, axis2=-1)
    degenerate = k <= K_FLOOR
    safe_k = np.where(degenerate, 1.0, k)
    a = m / safe_k[..., None, None] - (2.0 / 3.0) * _I3
    # remove trace round-off so downstream maps see an exactly traceless tensor
    a = a - (np.trace(a, axis1=-2, axis2=-1) / 3.0)[..., None, None] * _I3
    a = np.where(degenerate[..., None, None], 0.0, a)
    return Anisotropy(k, a, degenerate)


def stress_from_anisotropy(k, a) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    a = as_matrix(a)
    if np.any(k < 0):
        raise ValueError("turbulent kinetic energy must be non-negative")
    tr = np.trace(a, axis1=-2, axis2=-1)
    if np.any(np.abs(tr) > 1e-10):
        raise ValueError("anisotropy tensor must be traceless")
    return k[..., None, None] * (a + (2.0 / 3.0) * _I3)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _fix_signs(v):
    # largest-magnitude entry of each column positive, then det = +1 via the third column
    idx = np.argmax(np.abs(v), axis=-2)
    lead = np.take_along_axis(v, idx[..., None, :], axis=-2)
    v = v * np.where(lead < 0, -1.0, 1.0)
    det = np.linalg.det(v)
    v[..., :, 2] *= np.where(det < 0, -1.0, 1.0)[..., None]
    return v


def eig_sym3(a) -> EigenDecomposition:
    """Eigendecomposition of symmetric 3x3 tensors.

    The trigonometric (Cardano) solution of the deviatoric characteristic
    polynomial locates the eigenvalues.  The eigenvector of the eigenvalue that
    is furthest from the other two is taken from the cross product of two rows
    of ``A - lambda I``; the remaining pair is obtained from an exact 2x2 Jacobi
    rotation in the orthogonal complement, which stays accurate however close
    the two remaining eigenvalues are.

    Conventions for reproducible output:

    * eigenvalues within ``1e-12 * max(1, |lambda|_max)`` of each other are
      degenerate; their eigenvectors come from Gram-Schmidt against the ones
      already found, seeded from the x, y, z axes in that order;
    * a fully degenerate tensor returns the identity;
    * each column's largest-magnitude entry is positive, and the third column
      is flipped if needed so that ``det(v) = +1``.
    """
    A = as_matrix(a)
    batch = A.shape[:-2]
    A = A.reshape(-1, 3, 3)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    n = A.shape[0]

    q = np.trace(A, axis1=-2, axis2=-1) / 3.0
    B = A - q[:, None, None] * _I3
    p = np.sqrt(np.sum(B * B, axis=(-2, -1)) / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    # an isotropic input has a zero deviator, whose LU factorisation warns
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.clip(np.linalg.det(B / safe_p[:, None, None]) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l1 = q + 2.0 * p * np.cos(phi)
    l3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l2 = 3.0 * q - l1 - l3

    scale = np.maximum(1.0, np.maximum(np.abs(l1), np.abs(l3)))
    tol = DEGENERACY_TOL * scale
    full = (l1 - l3) < tol

    top_isolated = (l1 - l2) >= (l2 - l3)
    lam_iso = np.where(top_isolated, l1, l3)

    M = A - lam_iso[:, None, None] * _I3
    c = np.stack(
        [
            np.cross(M[:, 0], M[:, 1]),
            np.cross(M[:, 0], M[:, 2]),
            np.cross(M[:, 1], M[:, 2]),
        ],
        axis=1,
    )
    norms = np.linalg.norm(c, axis=-1)
    best = np.argmax(norms, axis=1)
    u = c[np.arange(n), best]
    u_norm = norms[np.arange(n), best]
    u = np.where((u_norm > 0)[:, None], u / np.where(u_norm > 0, u_norm, 1.0)[:, None], _I3[0])

    # complement basis: first canonical axis with a usable residual, then u x w1
    resid = _I3[None, :, :] - np.einsum("ni,nj->nji", u, u)  # rows: e_j - (e_j.u)u
    rnorm = np.linalg.norm(resid, axis=-1)
    first = np.argmax(rnorm >= 0.5, axis=1)
    w1 = resid[np.arange(n), first] / rnorm[np.arange(n), first][:, None]
    w2 = np.cross(u, w1)

    Aw1 = np.einsum("nij,nj->ni", A, w1)
    Aw2 = np.einsum("nij,nj->ni", A, w2)
    m11 = np.einsum("ni,ni->n", w1, Aw1)
    m22 = np.einsum("ni,ni->n", w2, Aw2)
    m12 = np.einsum("ni,ni->n", w1, Aw2)
    theta = 0.5 * np.arctan2(2.0 * m12, m11 - m22)
    ct, st = np.cos(theta), np.sin(theta)
    la = m11 * ct**2 + 2.0 * m12 * ct * st + m22 * st**2
    lb = m11 * st**2 - 2.0 * m12 * ct * st + m22 * ct**2
    ea = ct[:, None] * w1 + st[:, None] * w2
    eb = -st[:, None] * w1 + ct[:, None] * w2
    pair_degenerate = np.abs(la - lb) < tol
    ea = np.where(pair_degenerate[:, None], w1, ea)
    eb = np.where(pair_degenerate[:, None], w2, eb)

    lam_iso = np.einsum("ni,ni->n", u, np.einsum("nij,nj->ni", A, u))

    lam = np.where(
        top_isolated[:, None],
        np.stack([lam_iso, la, lb], axis=1),
        np.stack([la, lb, lam_iso], axis=1),
    )
    vecs = np.where(
        top_isolated[:, None, None],
        np.stack([u, ea, eb], axis=2),
        np.stack([ea, eb, u], axis=2),
    )

    # guard ordering against round-off between nearly equal eigenvalues
    order = np.argsort(-lam, axis=1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=1)
    vecs = np.take_along_axis(vecs, order[:, None, :], axis=2)

    vecs = np.where(full[:, None, None], _I3, vecs)
    lam = np.where(full[:, None], np.sort(np.stack([l1, l2, l3], axis=1), axis=1)[:, ::-1], lam)
    vecs = _fix_signs(vecs)
    return EigenDecomposition(lam.reshape(batch + (3,)), vecs.reshape(batch + (3, 3)))


def invariants(a):
    """Return ``(I1, II, III)`` of an anisotropy tensor.

    ``II = -tr(a^2)/2`` and ``III = det(a)``; ``I1`` is the trace, which should
    vanish and is only reported for diagnostics.
    """
    m = as_matrix(a)
    i1 = np.trace(m, axis1=-2, axis2=-1)
    i2 = -0.5 * np.einsum("...ij,...ji->...", m, m)
    i3 = np.linalg.det(m)
    return i1, i2, i3


def frobenius_inner(x, y):
    return np.einsum("...ij,...ij->...", as_matrix(x), as_matrix(y))


def random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed proper rotations, shape ``(n, 3, 3)``."""
    g = rng.standard_normal((n, 3, 3))
    qm, rm = np.linalg.qr(g)
    qm = qm * np.sign(np.diagonal(rm, axis1=-2, axis2=-1))[:, None, :]
    det = np.linalg.det(qm)
    qm[:, :, 2] *= det[:, None]
    return qm


def random_realizable(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Random PSD stresses ``v diag(rho) v^T`` with ``rho >= 0``.

    A fifth of the samples have one principal stress set to zero and another
    fifth two, so that boundary states of the realizable set are exercised.
    """
    v = random_rotation(rng, n)
    rho = rng.uniform(0.0, scale, (n, 3))
    sel = rng.uniform(size=n)
    rho[sel < 0.2, 2] = 0.0
    rho[(sel >= 0.2) & (sel < 0.4), 1:] = 0.0
    return np.einsum("nij,nj,nkj->nik", v, rho, v)
