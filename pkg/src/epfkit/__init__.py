"""Eigenspace perturbation of Reynolds stresses with a consistent moderation.

Modules cover symmetric-tensor algebra (:mod:`epfkit.tensors`), the
barycentric and invariant maps (:mod:`epfkit.barycentric`), the perturbation
pipelines (:mod:`epfkit.perturbation`), blending trajectories
(:mod:`epfkit.trajectory`), a 1D channel solver (:mod:`epfkit.channel`)
and the command-line front end (:mod:`epfkit.cli`, :mod:`epfkit.plotting`).
"""

__version__ = "0.1.0"

from .barycentric import DEFAULT_CORNERS, CornerSet, from_barycentric, to_barycentric
from .perturbation import PerturbationSpec, campaign_specs, perturb, perturb_consistent, perturb_legacy
from .tensors import SymTensor3, anisotropy_from_stress, eig_sym3, stress_from_anisotropy

__all__ = [
    "__version__",
    "DEFAULT_CORNERS",
    "CornerSet",
    "from_barycentric",
    "to_barycentric",
    "PerturbationSpec",
    "campaign_specs",
    "perturb",
    "perturb_consistent",
    "perturb_legacy",
    "SymTensor3",
    "anisotropy_from_stress",
    "eig_sym3",
    "stress_from_anisotropy",
]
