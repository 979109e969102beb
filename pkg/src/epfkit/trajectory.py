"""Blending trajectories and the algebraic facts behind them.

A blend ``Z = (1 - f) X + f Y`` of two stresses moves on a straight line in
the barycentric map only when ``X`` and ``Y`` commute.  The functions here
sample such blends, reproduce the moderated-perturbation paths of plane-strain
RANS states, and check the three supporting lemmas (eigenvalues of commuting
sums, closure of PSD tensors under convex blends, affine behaviour of the map)
on randomised instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barycentric import (
    DEFAULT_CORNERS,
    CornerSet,
    aim_coords,
    choi_coords,
    to_barycentric,
)
from .perturbation import PerturbationSpec, moderated_stress_legacy, perturb_consistent
from .tensors import (
    anisotropy_from_stress,
    as_matrix,
    eig_sym3,
    is_realizable,
    random_realizable,
    random_rotation,
)

__all__ = [
    "FixtureTensors",
    "fixture_tensors",
    "TrajectoryRecord",
    "blend_trajectory",
    "plane_strain_stress",
    "rans_point_trajectories",
    "chord_deviation",
    "SuiteResult",
    "AppendixReport",
    "verify_appendices",
]

TENSOR_A = np.array([[2.0, 0.5, -0.5], [0.5, 2.5, -0.5], [-0.5, -0.5, 1.5]])
TENSOR_C = np.array([[1.0, 0.5, 1.5], [0.5, 2.0, 0.0], [1.5, 0.0, 3.0]])
TENSOR_B_PRINTED = np.array([[2.19, 0.55, -1.11], [0.55, 3.02, -0.83], [-1.11, -0.83, 0.79]])


@dataclass(frozen=True)
class FixtureTensors:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def fixture_tensors() -> FixtureTensors:
    """Reference tensors A and C, and B built from A's frame and C's principal stresses."""
    va = eig_sym3(TENSOR_A).eigenvectors
    rho_c = eig_sym3(TENSOR_C).eigenvalues
    b = va @ np.diag(rho_c) @ va.T
    return FixtureTensors(TENSOR_A.copy(), 0.5 * (b + b.T), TENSOR_C.copy())


@dataclass(frozen=True)
class TrajectoryRecord:
    f: float
    bary: tuple[float, float]
    aim: tuple[float, float]
    choi: tuple[float, float]
    eigenvalues: tuple[float, float, float]
    ellipsoid_semiaxes: tuple[float, float, float]


def _records(fs, tensors, corners):
    k, a, _ = anisotropy_from_stress(tensors)
    lam = eig_sym3(a).eigenvalues
    bary = to_barycentric(lam, corners)
    iii, ii = aim_coords(lam)
    xi, eta = choi_coords(lam)
    rho = k[:, None] * (lam + 2.0 / 3.0)
    return [
        TrajectoryRecord(
            f=float(fs[i]),
            bary=(float(bary[i, 0]), float(bary[i, 1])),
            aim=(float(iii[i]), float(ii[i])),
            choi=(float(xi[i]), float(eta[i])),
            eigenvalues=tuple(float(v) for v in lam[i]),
            ellipsoid_semiaxes=tuple(float(v) for v in rho[i]),
        )
        for i in range(len(fs))
    ]


def blend_trajectory(x, y, n_steps: int = 101, corners: CornerSet = DEFAULT_CORNERS) -> list[TrajectoryRecord]:
    """Sample ``(1 - f) X + f Y`` at ``n_steps`` uniformly spaced ``f`` in [0, 1]."""
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    x, y = as_matrix(x), as_matrix(y)
    if not (is_realizable(x) and is_realizable(y)):
        raise ValueError("blend endpoints must be positive semi-definite")
    fs = np.linspace(0.0, 1.0, n_steps)
    z = np.stack([moderated_stress_legacy(x, y, f) for f in fs])
    # endpoints exactly as given, free of blend round-off
    z[0], z[-1] = x, y
    return _records(fs, z, corners)


def plane_strain_stress(s: float, k: float = 1.0, angle: float = 0.0) -> np.ndarray:
    """Stress with anisotropy eigenvalues ``(s, 0, -s)`` from simple shear.

    This is the state an eddy-viscosity model produces in a shear layer
    ``dU/dy > 0``: the principal axes lie at 45 degrees in the x-y plane.
    ``angle`` rotates the frame about z.
    """
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = -s
    c, sn = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]])
    return k * (rot @ a @ rot.T + (2.0 / 3.0) * np.eye(3))


def rans_point_trajectories(
    eigenvalues,
    eigenvectors,
    k,
    target: str = "1C",
    ev_mode: str = "production_max",
    n_steps: int = 101,
    corners: CornerSet = DEFAULT_CORNERS,
) -> list[list[TrajectoryRecord]]:
    """Moderation sweeps ``f = 0..1`` from RANS states toward a full perturbation.

    Each point ``(lambda, v, k)`` is turned into a stress, perturbed with
    ``delta_b = 1`` toward ``target`` using ``ev_mode``, and the blend
    ``tau + f (tau* - tau)`` is sampled.
    """
    lam = np.atleast_2d(np.asarray(eigenvalues, dtype=float))
    vecs = np.asarray(eigenvectors, dtype=float).reshape(-1, 3, 3)
    ks = np.broadcast_to(np.asarray(k, dtype=float), (lam.shape[0],))
    spec = PerturbationSpec(target, 1.0, ev_mode)
    out = []
    for lam_i, v_i, k_i in zip(lam, vecs, ks):
        tau = k_i * (v_i @ np.diag(lam_i) @ v_i.T + (2.0 / 3.0) * np.eye(3))
        tau_star = perturb_consistent(tau, spec, corners=corners).tau_star
        out.append(blend_trajectory(tau, tau_star, n_steps, corners))
    return out


def chord_deviation(records: list[TrajectoryRecord]) -> float:
    """Largest perpendicular distance of the map points from the end-to-end chord."""
    pts = np.array([r.bary for r in records])
    a, b = pts[0], pts[-1]
    d = b - a
    length = np.hypot(*d)
    if length == 0.0:
        return float(np.max(np.linalg.norm(pts - a, axis=1)))
    cross = d[0] * (pts[:, 1] - a[1]) - d[1] * (pts[:, 0] - a[0])
    return float(np.max(np.abs(cross)) / length)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    n: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        msg = f"{status}  {self.name:<34} worst={self.worst:.3e}  tol={self.tolerance:.1e}  n={self.n}"
        return msg + (f"  ({self.detail})" if self.detail else "")


@dataclass
class AppendixReport:
    suites: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)


def _commuting_pairs(rng, n, co_sorted=False):
    v = random_rotation(rng, n)
    phi = rng.uniform(0.0, 1.0, (n, 3))
    psi = rng.uniform(0.0, 1.0, (n, 3))
    if co_sorted:
        phi = -np.sort(-phi, axis=1)
        psi = -np.sort(-psi, axis=1)
    x = np.einsum("nij,nj,nkj->nik", v, phi, v)
    y = np.einsum("nij,nj,nkj->nik", v, psi, v)
    return v, phi, psi, x, y


def _suite_commuting_sum(rng, n, fixtures):
    v, phi, psi, x, y = _commuting_pairs(rng, n)
    dec = eig_sym3(x + y)
    # pair eigenvalues through eigenvectors: (X + Y) w_i = (phi_i + psi_i) w_i
    worst = 0.0
    for i in range(3):
        wi = v[:, :, i]
        r = np.einsum("nij,nj->ni", x + y, wi) - (phi[:, i] + psi[:, i])[:, None] * wi
        worst = max(worst, float(np.max(np.abs(r))))
    expected = np.sort(phi + psi, axis=1)[:, ::-1]
    worst = max(worst, float(np.max(np.abs(dec.eigenvalues - expected))))
    fa, fb = fixtures.A, fixtures.B
    va = eig_sym3(fa).eigenvectors
    rho_a = np.einsum("ij,ik,kj->j", va, fa, va)
    rho_b = np.einsum("ij,ik,kj->j", va, fb, va)
    worst = max(worst, float(np.max(np.abs(eig_sym3(fa + fb).eigenvalues - np.sort(rho_a + rho_b)[::-1]))))
    return SuiteResult("commuting-sum eigenvalues", worst < 1e-10, worst, 1e-10, n)


def _suite_psd_closure(rng, n, fixtures):
    x = random_realizable(rng, n)
    y = random_realizable(rng, n)
    f = rng.uniform(0.0, 1.0, n)
    z = (1.0 - f)[:, None, None] * x + f[:, None, None] * y
    bad = int(np.count_nonzero(~is_realizable(z)))
    grid = np.linspace(0.0, 1.0, 11)
    for f_ in grid:
        bad += int(not is_realizable(moderated_stress_legacy(fixtures.A, fixtures.C, f_)))
    return SuiteResult("PSD closure of blends", bad == 0, float(bad), 0.0, n + grid.size, "violations")


def _suite_barycentric_linearity(rng, n, fixtures, corners):
    # the map is affine along the blend only if both eigenvalue orderings share one frame
    _, _, _, x, y = _commuting_pairs(rng, n, co_sorted=True)
    # equal traces so that k is constant along the blend
    x = x / np.trace(x, axis1=1, axis2=2)[:, None, None]
    y = y / np.trace(y, axis1=1, axis2=2)[:, None, None]
    f = rng.uniform(0.0, 1.0, n)
    z = (1.0 - f)[:, None, None] * x + f[:, None, None] * y

    def bary(t):
        return to_barycentric(eig_sym3(anisotropy_from_stress(t).a).eigenvalues, corners)

    expected = (1.0 - f)[:, None] * bary(x) + f[:, None] * bary(y)
    worst = float(np.max(np.linalg.norm(bary(z) - expected, axis=1)))
    recs = blend_trajectory(fixtures.A, fixtures.B, 6, corners)
    worst = max(worst, chord_deviation(recs))
    return SuiteResult("barycentric linearity", worst < 1e-10, worst, 1e-10, n)


def verify_appendices(
    n: int = 10_000,
    seed: int = 0,
    corners: CornerSet = DEFAULT_CORNERS,
) -> AppendixReport:
    """Run the commuting-sum, PSD-closure and map-linearity suites."""
    rng = np.random.default_rng(seed)
    fixtures = fixture_tensors()
    report = AppendixReport()
    for run in (
        lambda: _suite_commuting_sum(rng, n, fixtures),
        lambda: _suite_psd_closure(rng, n, fixtures),
        lambda: _suite_barycentric_linearity(rng, n, fixtures, corners),
    ):
        report.suites.append(run())
    return report
