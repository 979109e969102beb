"""Eigenspace perturbation of Reynolds stresses.

Two pipelines are provided.  :func:`perturb_consistent` moves the eigenvalues
along the straight barycentric segment toward a limiting state and optionally
permutes the eigenvectors; this is the form in which the strength of the
perturbation is set by ``delta_b`` alone.  :func:`perturb_legacy` additionally
blends the perturbed stress back toward the unperturbed one with a moderation
factor ``f``, which is the common solver practice whose side effects the
trajectory laboratory examines.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .barycentric import (
    DEFAULT_CORNERS,
    CornerSet,
    NonRealizableTargetError,
    from_barycentric,
    to_barycentric,
)
from .tensors import (
    anisotropy_from_stress,
    as_matrix,
    eig_sym3,
    frobenius_inner,
    is_realizable,
    stress_from_anisotropy,
)

__all__ = [
    "TARGETS",
    "EV_MODES",
    "PerturbationSpec",
    "PerturbedState",
    "perturb_barycentric",
    "permute_eigenvectors",
    "production",
    "production_bounds",
    "production_bounds_bruteforce",
    "moderated_stress_legacy",
    "perturb_consistent",
    "perturb_legacy",
    "perturb",
    "campaign_specs",
]

TARGETS = ("1C", "2C", "3C")
EV_MODES = ("production_max", "production_min")


@dataclass(frozen=True)
class PerturbationSpec:
    target: str
    delta_b: float
    ev_mode: str = "production_max"
    legacy_f: float | None = None

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.ev_mode not in EV_MODES:
            raise ValueError(f"ev_mode must be one of {EV_MODES}, got {self.ev_mode!r}")
        if not 0.0 <= self.delta_b <= 1.0:
            raise ValueError(f"delta_b must lie in [0, 1], got {self.delta_b}")
        if self.legacy_f is not None and not 0.0 <= self.legacy_f <= 1.0:
            raise ValueError(f"legacy_f must lie in [0, 1], got {self.legacy_f}")

    @property
    def redundant(self) -> bool:
        """True for the isotropic target at full strength with permuted eigenvectors.

        The perturbed stress is then a sphere, so the permutation has no effect
        and the case duplicates its production-maximising twin.
        """
        return self.target == "3C" and self.delta_b == 1.0 and self.ev_mode == "production_min"

    @property
    def label(self) -> str:
        tag = "pkmin" if self.ev_mode == "production_min" else "pkmax"
        s = f"{self.target}_{tag}_db{self.delta_b:g}"
        if self.legacy_f is not None:
            s += f"_f{self.legacy_f:g}"
        return s


@dataclass
class PerturbedState:
    tau_star: np.ndarray
    lambda_star: np.ndarray
    v_star: np.ndarray
    bary_before: np.ndarray
    bary_after: np.ndarray
    k: np.ndarray
    degenerate: np.ndarray
    redundant: bool = False
    production_before: np.ndarray | None = None
    production_after: np.ndarray | None = None


def perturb_barycentric(x, target: str, delta_b: float, corners: CornerSet = DEFAULT_CORNERS):
    """Move ``x`` the fraction ``delta_b`` of the way toward the target corner."""
    if not 0.0 <= delta_b <= 1.0:
        raise ValueError(f"delta_b must lie in [0, 1], got {delta_b}")
    x = np.asarray(x, dtype=float)
    xt = corners.corner(target)
    return x + delta_b * (xt - x)


def permute_eigenvectors(v, mode: str) -> np.ndarray:
    """Eigenvector matrix for the requested production extreme.

    ``production_max`` keeps the columns.  ``production_min`` exchanges the
    first and third column and flips the sign of the (new) third column to keep
    the frame right-handed.
    """
    v = as_matrix(v)
    if mode not in EV_MODES:
        raise ValueError(f"ev_mode must be one of {EV_MODES}, got {mode!r}")
    gram = np.einsum("...ji,...jk->...ik", v, v)
    if np.any(np.abs(gram - np.eye(3)) > 1e-10):
        raise ValueError("eigenvector matrix is not orthonormal")
    if mode == "production_max":
        return v.copy()
    out = v[..., :, ::-1].copy()
    out[..., :, 2] *= -1.0
    return out


def production(tau, strain):
    """Production of turbulent kinetic energy, ``-tau_ij S_ij``."""
    return -frobenius_inner(tau, strain)


def _check_descending(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(np.diff(x, axis=-1) > 1e-12 * np.maximum(1.0, np.max(np.abs(x)))):
        raise ValueError(f"{name} must be sorted in descending order")
    return x


def production_bounds(rho, sigma):
    """Range of ``-tr(tau S)`` over all relative orientations.

    ``rho`` are stress eigenvalues and ``sigma`` strain-rate eigenvalues, both
    descending.  Aligned pairing maximises ``tr(tau S)`` and therefore gives the
    production minimum; reversed pairing gives the maximum.
    """
    rho = _check_descending(rho, "rho")
    sigma = _check_descending(sigma, "sigma")
    aligned = np.sum(rho * sigma, axis=-1)
    reversed_ = np.sum(rho * sigma[..., ::-1], axis=-1)
    return -aligned, -reversed_


def production_bounds_bruteforce(rho, sigma):
    """Same bounds by enumerating all six eigenvalue pairings."""
    rho = np.asarray(rho, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    values = [-(rho[0] * sigma[p[0]] + rho[1] * sigma[p[1]] + rho[2] * sigma[p[2]]) for p in permutations(range(3))]
    return min(values), max(values)


def moderated_stress_legacy(tau, tau_star, f: float) -> np.ndarray:
    """Blend ``tau + f (tau* - tau)`` used by moderated solver implementations."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"moderation factor must lie in [0, 1], got {f}")
    tau = as_matrix(tau)
    tau_star = as_matrix(tau_star)
    return tau + f * (tau_star - tau)


def _strain_production(tau, strain):
    return None if strain is None else production(tau, strain)


def perturb_consistent(
    tau,
    spec: PerturbationSpec,
    strain=None,
    corners: CornerSet = DEFAULT_CORNERS,
    check: bool = True,
) -> PerturbedState:
    """Perturb one or many Reynolds stresses without moderation.

    The stress is split into ``k`` and anisotropy, the anisotropy eigenvalues
    are moved along the barycentric segment toward ``spec.target`` by
    ``spec.delta_b``, the eigenvectors are permuted for ``production_min``, and
    the stress is rebuilt with ``k`` unchanged.  The map position of the result
    depends on the eigenvalues only, so it lands on the intended point for
    either eigenvector mode.

    Parameters
    ----------
    tau : array_like, shape (..., 3, 3)
        Realizable Reynolds stresses.
    spec : PerturbationSpec
        Must not carry a moderation factor.
    strain : array_like, optional
        Strain-rate tensors; when given, production before and after is reported.
    check : bool
        Reject non-realizable input.  The channel solver switches this off
        after sanitising its own stresses.
    """
    if spec.legacy_f is not None:
        raise ValueError("the consistent formulation takes no moderation factor; use perturb_legacy")
    tau = as_matrix(tau)
    if check and not np.all(is_realizable(tau)):
        raise NonRealizableTargetError("input Reynolds stress is not realizable")
    k, a, degenerate = anisotropy_from_stress(tau)
    dec = eig_sym3(a)
    x = to_barycentric(dec.eigenvalues, corners)
    x_star = perturb_barycentric(x, spec.target, spec.delta_b, corners)
    lam_star = from_barycentric(x_star, corners)
    v_star = permute_eigenvectors(dec.eigenvectors, spec.ev_mode)
    a_star = np.einsum("...ij,...j,...kj->...ik", v_star, lam_star, v_star)
    a_star = a_star - (np.trace(a_star, axis1=-2, axis2=-1) / 3.0)[..., None, None] * np.eye(3)
    tau_star = stress_from_anisotropy(k, a_star)
    tau_star = 0.5 * (tau_star + np.swapaxes(tau_star, -1, -2))
    tau_star = np.where(degenerate[..., None, None], tau, tau_star)
    x_star = np.where(degenerate[..., None], x, x_star)
    return PerturbedState(
        tau_star=tau_star,
        lambda_star=lam_star,
        v_star=v_star,
        bary_before=x,
        bary_after=x_star,
        k=k,
        degenerate=degenerate,
        redundant=spec.redundant,
        production_before=_strain_production(tau, strain),
        production_after=_strain_production(tau_star, strain),
    )


def perturb_legacy(
    tau,
    spec: PerturbationSpec,
    strain=None,
    corners: CornerSet = DEFAULT_CORNERS,
    check: bool = True,
) -> PerturbedState:
    """Perturb with ``spec.delta_b`` and then moderate with ``spec.legacy_f``.

    ``bary_after`` is the map position of the blended stress, recomputed from
    its own sorted eigenvalues.  With eigenvector permutation this position is
    in general off the straight segment toward the target.
    """
    if spec.legacy_f is None:
        raise ValueError("perturb_legacy needs a moderation factor (legacy_f)")
    inner = PerturbationSpec(spec.target, spec.delta_b, spec.ev_mode)
    state = perturb_consistent(tau, inner, corners=corners, check=check)
    tau = as_matrix(tau)
    blended = moderated_stress_legacy(tau, state.tau_star, spec.legacy_f)
    _, a_f, degenerate = anisotropy_from_stress(blended)
    dec = eig_sym3(a_f)
    return PerturbedState(
        tau_star=blended,
        lambda_star=dec.eigenvalues,
        v_star=dec.eigenvectors,
        bary_before=state.bary_before,
        bary_after=to_barycentric(dec.eigenvalues, corners),
        k=state.k,
        degenerate=state.degenerate | degenerate,
        redundant=spec.redundant,
        production_before=_strain_production(tau, strain),
        production_after=_strain_production(blended, strain),
    )


def perturb(tau, spec: PerturbationSpec, **kwargs) -> PerturbedState:
    """Dispatch on whether ``spec`` carries a moderation factor."""
    if spec.legacy_f is None:
        return perturb_consistent(tau, spec, **kwargs)
    return perturb_legacy(tau, spec, **kwargs)


def campaign_specs(delta_b: float, legacy_f: float | None = None) -> list[PerturbationSpec]:
    """The standard set of perturbed cases for one formulation.

    Every corner is combined with both eigenvector modes, except that the
    isotropic corner at full strength is run once, since permuting the
    eigenvectors of a sphere changes nothing.
    """
    specs = []
    for target in TARGETS:
        for mode in EV_MODES:
            spec = PerturbationSpec(target, delta_b, mode, legacy_f)
            if spec.redundant:
                continue
            specs.append(spec)
    return specs
