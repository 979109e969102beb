"""Randomised property suites behind ``epfkit verify``."""

from __future__ import annotations

import numpy as np

from .barycentric import DEFAULT_CORNERS, CornerSet, from_barycentric, to_barycentric
from .perturbation import (
    PerturbationSpec,
    campaign_specs,
    perturb_barycentric,
    perturb_consistent,
    perturb_legacy,
    production,
    production_bounds,
    production_bounds_bruteforce,
)
from .tensors import anisotropy_from_stress, eig_sym3, random_realizable, random_rotation
from .trajectory import AppendixReport, SuiteResult, verify_appendices

__all__ = ["run_verification"]


def _suite_eig(rng, n, corners):
    tau = random_realizable(rng, n)
    a = anisotropy_from_stress(tau).a
    dec = eig_sym3(a)
    v, lam = dec.eigenvectors, dec.eigenvalues
    rec = np.einsum("nij,nj,nkj->nik", v, lam, v)
    orth = np.einsum("nji,njk->nik", v, v) - np.eye(3)
    worst = max(float(np.max(np.abs(rec - a))), float(np.max(np.abs(orth))))
    return SuiteResult("eigendecomposition reconstruction", worst < 1e-10, worst, 1e-10, n)


def _suite_roundtrip(rng, n, corners):
    w = rng.dirichlet(np.ones(3), n)
    lam = np.stack(
        [
            (2 * w[:, 0] + w[:, 1] + (w[:, 2] - 1.0) * (2.0 / 3.0)),
            w[:, 1] + (w[:, 2] - 1.0) * (2.0 / 3.0),
            (w[:, 2] - 1.0) * (2.0 / 3.0),
        ],
        axis=1,
    )
    back = from_barycentric(to_barycentric(lam, corners), corners)
    worst = float(np.max(np.abs(back - lam)))
    return SuiteResult("barycentric round trip", worst < 1e-10, worst, 1e-10, n)


def _suite_moderation(rng, n, corners):
    tau = random_realizable(rng, n)
    worst = 0.0
    for f in np.round(np.arange(0.1, 1.0, 0.1), 1):
        for target in ("1C", "2C", "3C"):
            leg = perturb_legacy(tau, PerturbationSpec(target, 1.0, "production_max", f), corners=corners)
            con = perturb_consistent(tau, PerturbationSpec(target, f), corners=corners)
            worst = max(worst, float(np.max(np.abs(leg.tau_star - con.tau_star))))
    return SuiteResult("moderation equivalence", worst < 1e-10, worst, 1e-10, n)


def _suite_self_consistency(rng, n, corners):
    tau = random_realizable(rng, n)
    worst = 0.0
    for delta_b in (0.25, 0.5, 1.0):
        for spec in campaign_specs(delta_b):
            st = perturb_consistent(tau, spec, corners=corners)
            lam = eig_sym3(anisotropy_from_stress(st.tau_star).a).eigenvalues
            got = to_barycentric(lam, corners)
            want = perturb_barycentric(st.bary_before, spec.target, delta_b, corners)
            ok = ~st.degenerate
            worst = max(worst, float(np.max(np.abs(got - want)[ok], initial=0.0)))
    return SuiteResult("perturbation self-consistency", worst < 1e-10, worst, 1e-10, n)


def _suite_production(rng, n, corners):
    rho = -np.sort(-rng.uniform(0.0, 1.0, (n, 3)), axis=1)
    sigma = rng.normal(size=(n, 3))
    sigma -= sigma.mean(axis=1, keepdims=True)
    sigma = -np.sort(-sigma, axis=1)
    v = random_rotation(rng, n)
    strain = np.einsum("nij,nj,nkj->nik", v, sigma, v)
    lo, hi = production_bounds(rho, sigma)
    worst = 0.0
    for i in range(min(n, 500)):
        blo, bhi = production_bounds_bruteforce(rho[i], sigma[i])
        worst = max(worst, abs(blo - lo[i]), abs(bhi - hi[i]))
    # shared frames: aligned pairing and reversed pairing reach the two ends
    tau_lo = np.einsum("nij,nj,nkj->nik", v, rho, v)
    tau_hi = np.einsum("nij,nj,nkj->nik", v, rho[:, ::-1], v)
    worst = max(worst, float(np.max(np.abs(production(tau_lo, strain) - lo))))
    worst = max(worst, float(np.max(np.abs(production(tau_hi, strain) - hi))))
    return SuiteResult("production bounds", worst < 1e-10, worst, 1e-10, n)


_MODULE_SUITES = {
    "eigendecomposition reconstruction": _suite_eig,
    "barycentric round trip": _suite_roundtrip,
    "moderation equivalence": _suite_moderation,
    "perturbation self-consistency": _suite_self_consistency,
    "production bounds": _suite_production,
}


def run_verification(n: int = 10_000, seed: int = 0, corners: CornerSet = DEFAULT_CORNERS) -> AppendixReport:
    """All appendix and module property suites; a suite that raises counts as failed."""
    report = AppendixReport()
    try:
        report.suites.extend(verify_appendices(n, seed, corners).suites)
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        report.suites.append(SuiteResult("appendix suites", False, float("nan"), 0.0, n, f"error: {exc}"))
    rng = np.random.default_rng(seed + 1)
    for name, suite in _MODULE_SUITES.items():
        try:
            report.suites.append(suite(rng, n, corners))
        except Exception as exc:  # noqa: BLE001
            report.suites.append(SuiteResult(name, False, float("nan"), 0.0, n, f"error: {exc}"))
    return report
