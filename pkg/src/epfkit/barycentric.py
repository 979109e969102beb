"""Maps from sorted anisotropy eigenvalues to the plane.

Three views are supported: the barycentric triangle, the Lumley invariant map
``(III, II)`` and the Choi-Lumley ``(xi, eta)`` map.  All functions take
eigenvalue triples of shape ``(..., 3)`` sorted in descending order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CORNER_EIGENVALUES",
    "CornerSet",
    "DEFAULT_CORNERS",
    "NonRealizableTargetError",
    "to_barycentric",
    "from_barycentric",
    "barycentric_weights",
    "aim_coords",
    "choi_coords",
    "componentiality",
    "point_to_segment_distance",
]

CORNER_EIGENVALUES = {
    "1C": np.array([4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0]),
    "2C": np.array([1.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0]),
    "3C": np.zeros(3),
}

_SORT_TOL = 1e-10
_TRACE_TOL = 1e-10
_INSIDE_TOL = 1e-10


class NonRealizableTargetError(ValueError):
    """A map point lies outside the realizable triangle."""


@dataclass(frozen=True)
class CornerSet:
    """Plane positions of the one-, two- and three-component limiting states."""

    x1c: tuple[float, float] = (1.0, 0.0)
    x2c: tuple[float, float] = (0.0, 0.0)
    x3c: tuple[float, float] = (0.5, np.sqrt(3.0) / 2.0)

    def corner(self, name: str) -> np.ndarray:
        try:
            return np.asarray({"1C": self.x1c, "2C": self.x2c, "3C": self.x3c}[name], dtype=float)
        except KeyError:
            raise ValueError(f"unknown corner {name!r}; expected 1C, 2C or 3C") from None

    @property
    def points(self) -> np.ndarray:
        """Corners as rows, in the order 1C, 2C, 3C."""
        return np.array([self.x1c, self.x2c, self.x3c], dtype=float)

    @property
    def Q(self) -> np.ndarray:
        """Linear part of ``x = Q lambda + x_3C``; shape (2, 3)."""
        x1, x2, x3 = self.points
        return np.stack([0.5 * x1, x2 - 0.5 * x1, 1.5 * x3 - x2], axis=1)

    @property
    def offset(self) -> np.ndarray:
        return self.points[2]


DEFAULT_CORNERS = CornerSet()


def _check_sorted_traceless(lam):
    lam = np.asarray(lam, dtype=float)
    if lam.shape[-1] != 3:
        raise ValueError(f"expected eigenvalue triples, got shape {lam.shape}")
    scale = np.maximum(1.0, np.max(np.abs(lam), axis=-1))
    if np.any(lam[..., 0] < lam[..., 1] - _SORT_TOL * scale) or np.any(
        lam[..., 1] < lam[..., 2] - _SORT_TOL * scale
    ):
        raise ValueError("eigenvalues must be sorted in descending order")
    if np.any(np.abs(lam.sum(axis=-1)) > _TRACE_TOL * scale):
        raise ValueError("eigenvalues of an anisotropy tensor must sum to zero")
    return lam


def _weights_from_eigenvalues(lam):
    return np.stack(
        [
            0.5 * (lam[..., 0] - lam[..., 1]),
            lam[..., 1] - lam[..., 2],
            1.5 * lam[..., 2] + 1.0,
        ],
        axis=-1,
    )


def to_barycentric(lam, corners: CornerSet = DEFAULT_CORNERS) -> np.ndarray:
    """Barycentric map position of sorted, traceless eigenvalues.

    >>> to_barycentric([4/3, -2/3, -2/3])
    array([1., 0.])
    """
    lam = _check_sorted_traceless(lam)
    w = _weights_from_eigenvalues(lam)
    return w @ corners.points


def barycentric_weights(p, corners: CornerSet = DEFAULT_CORNERS) -> np.ndarray:
    """Weights of ``p`` with respect to the corners (1C, 2C, 3C); they sum to one."""
    p = np.asarray(p, dtype=float)
    x1, x2, x3 = corners.points
    t = np.array([x1 - x3, x2 - x3]).T
    det = t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.array([[t[1, 1], -t[0, 1]], [-t[1, 0], t[0, 0]]]) / det
        w12 = (p - x3) @ inv.T
    return np.concatenate([w12, 1.0 - w12.sum(axis=-1, keepdims=True)], axis=-1)


def from_barycentric(p, corners: CornerSet = DEFAULT_CORNERS) -> np.ndarray:
    """Sorted eigenvalues that map to the plane point ``p``.

    Raises :class:`NonRealizableTargetError` for points outside the triangle.
    """
    w = barycentric_weights(p, corners)
    if not np.all(np.isfinite(w)):
        raise NonRealizableTargetError("corner set does not span a triangle")
    if np.any(w < -_INSIDE_TOL):
        raise NonRealizableTargetError("point lies outside the barycentric triangle")
    lam3 = (w[..., 2] - 1.0) * (2.0 / 3.0)
    lam2 = w[..., 1] + lam3
    lam1 = 2.0 * w[..., 0] + lam2
    return np.stack([lam1, lam2, lam3], axis=-1)


def aim_coords(lam):
    """Lumley-map coordinates ``(III, II)`` with ``II = -tr(a^2)/2 <= 0``.

    The realizable boundaries read ``-II = 3 (|III|/2)^(2/3)`` (axisymmetric)
    and ``-II = 4/9 + 3/2 III`` (two-component) in this sign convention.
    """
    lam = _check_sorted_traceless(lam)
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    return l1 * l2 * l3, l1 * l2 + l1 * l3 + l2 * l3


def choi_coords(lam):
    """Choi-Lumley ``(xi, eta)`` coordinates.

    Evaluated on ``b = a/2``: ``6 eta^2 = tr(b^2)`` and ``6 xi^3 = tr(b^3)``, so
    the one-component corner sits at ``xi = eta = 1/3``.
    """
    b = 0.5 * _check_sorted_traceless(lam)
    eta = np.sqrt(np.sum(b**2, axis=-1) / 6.0)
    xi = np.cbrt(np.sum(b**3, axis=-1) / 6.0)
    return xi, eta


def componentiality(lam, tol: float = 1e-10, k: float = 1.0) -> str:
    """Classify a state into the limiting-state categories of turbulence.

    Returns one of ``"1C"``, ``"2C-axisymmetric"``, ``"2C"``,
    ``"3C-isotropic"``, ``"axisymmetric"`` or ``"generic-3C"``.
    """
    lam = _check_sorted_traceless(lam)
    if lam.shape != (3,):
        raise ValueError("componentiality classifies a single state")
    rho = k * (lam + 2.0 / 3.0)
    zero = np.abs(rho) <= tol * max(k, 1e-300)
    n_zero = int(zero.sum())
    eq12 = abs(lam[0] - lam[1]) <= tol
    eq23 = abs(lam[1] - lam[2]) <= tol
    if n_zero >= 2:
        return "1C"
    if n_zero == 1:
        return "2C-axisymmetric" if eq12 else "2C"
    if eq12 and eq23:
        return "3C-isotropic"
    if eq12 or eq23:
        return "axisymmetric"
    return "generic-3C"


def point_to_segment_distance(p, a, b) -> np.ndarray:
    """Euclidean distance from points ``p`` to segments ``[a, b]`` in the plane."""
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.where(denom > 0, np.sum((p - a) * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)
