import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import map_points, realizable_stresses, rotations
from epfkit.barycentric import DEFAULT_CORNERS, NonRealizableTargetError, point_to_segment_distance, to_barycentric
from epfkit.perturbation import (
    EV_MODES,
    TARGETS,
    PerturbationSpec,
    campaign_specs,
    moderated_stress_legacy,
    permute_eigenvectors,
    perturb,
    perturb_barycentric,
    perturb_consistent,
    perturb_legacy,
    production,
    production_bounds,
    production_bounds_bruteforce,
)
from epfkit.tensors import anisotropy_from_stress, eig_sym3, validate_realizability
from epfkit.trajectory import fixture_tensors, plane_strain_stress

ALL_SPECS = [(t, m) for t in TARGETS for m in EV_MODES]


def bary_of(tau):
    return to_barycentric(eig_sym3(anisotropy_from_stress(tau).a).eigenvalues)


def shear_strain(gamma=1.0):
    """Strain rate of simple shear dU/dy = gamma, matching plane_strain_stress's frame."""
    s = np.zeros((3, 3))
    s[0, 1] = s[1, 0] = 0.5 * gamma
    return s


@st.composite
def boussinesq_states(draw):
    """Eddy-viscosity stress sharing its frame with a random traceless strain."""
    sigma = np.array([draw(st.floats(-1.0, 1.0)) for _ in range(3)])
    sigma -= sigma.mean()
    # distinct principal strains, so that the frame is unique
    gaps = np.abs(np.diff(np.sort(sigma)))
    if np.min(gaps) < 0.05 * max(np.max(np.abs(sigma)), 1e-300):
        sigma = np.array([1.0, 0.1, -1.1])
    v = draw(rotations())
    strain = v @ np.diag(sigma) @ v.T
    nu_t = draw(st.floats(0.05, 1.0)) / (3.0 * np.max(np.abs(sigma)))
    tau = (2.0 / 3.0) * np.eye(3) - 2.0 * nu_t * strain
    return tau, strain


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PerturbationSpec("4C", 0.5)
        with pytest.raises(ValueError):
            PerturbationSpec("1C", 1.5)
        with pytest.raises(ValueError):
            PerturbationSpec("1C", 0.5, "sideways")
        with pytest.raises(ValueError):
            PerturbationSpec("1C", 0.5, legacy_f=-0.1)

    def test_labels(self):
        assert PerturbationSpec("1C", 0.5, "production_min").label == "1C_pkmin_db0.5"
        assert PerturbationSpec("2C", 1.0, "production_max", 0.5).label == "2C_pkmax_db1_f0.5"

    def test_redundant_flag(self):
        assert PerturbationSpec("3C", 1.0, "production_min").redundant
        assert not PerturbationSpec("3C", 0.5, "production_min").redundant
        assert not PerturbationSpec("3C", 1.0, "production_max").redundant

    def test_campaign_sizes(self):
        assert len(campaign_specs(0.5)) == 6
        legacy = campaign_specs(1.0, 0.5)
        assert len(legacy) == 5
        assert all(s.legacy_f == 0.5 for s in legacy)
        assert not any(s.redundant for s in legacy)

    def test_redundant_case_still_runs(self):
        tau = plane_strain_stress(0.2)
        a = perturb(tau, PerturbationSpec("3C", 1.0, "production_min"))
        b = perturb(tau, PerturbationSpec("3C", 1.0, "production_max"))
        assert a.redundant
        assert np.allclose(a.tau_star, b.tau_star, atol=1e-15)


class TestPerturbBarycentric:
    def test_endpoints(self):
        centroid = DEFAULT_CORNERS.points.mean(axis=0)
        assert np.allclose(perturb_barycentric(centroid, "1C", 1.0), (1.0, 0.0))
        assert np.array_equal(perturb_barycentric(centroid, "2C", 0.0), centroid)

    def test_plane_strain_midpoint(self):
        x = to_barycentric([0.2, 0.0, -0.2])
        assert np.allclose(perturb_barycentric(x, "2C", 0.5), 0.5 * x)

    def test_rejects_strength(self):
        with pytest.raises(ValueError):
            perturb_barycentric([0.5, 0.5], "1C", 1.1)

    @given(map_points(), st.sampled_from(TARGETS), st.floats(0.0, 1.0))
    def test_stays_on_segment(self, w, target, db):
        x = w @ DEFAULT_CORNERS.points
        xt = DEFAULT_CORNERS.corner(target)
        y = perturb_barycentric(x, target, db)
        assert point_to_segment_distance(y, x, xt) < 1e-14
        assert np.linalg.norm(y - x) == pytest.approx(db * np.linalg.norm(xt - x), abs=1e-14)


class TestPermutation:
    def test_identity_cases(self):
        assert np.array_equal(permute_eigenvectors(np.eye(3), "production_max"), np.eye(3))
        v = permute_eigenvectors(np.eye(3), "production_min")
        assert np.array_equal(np.abs(v), np.eye(3)[:, ::-1])
        assert np.linalg.det(v) == pytest.approx(1.0)

    @given(rotations())
    def test_involution_up_to_sign(self, r):
        twice = permute_eigenvectors(permute_eigenvectors(r, "production_min"), "production_min")
        for j in range(3):
            assert np.allclose(np.outer(twice[:, j], twice[:, j]), np.outer(r[:, j], r[:, j]), atol=1e-12)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            permute_eigenvectors(2 * np.eye(3), "production_min")
        with pytest.raises(ValueError):
            permute_eigenvectors(np.eye(3), "production_mid")


class TestProduction:
    def test_examples(self):
        s = np.diag([1.0, -0.5, -0.5])
        assert production((2.0 / 3.0) * np.eye(3), s) == pytest.approx(0.0)
        assert production(np.diag([2.0, 0.0, 0.0]), np.diag([-1.0, 1.0, 0.0])) == 2.0

    def test_bounds_example(self):
        lo, hi = production_bounds([3.0, 2.0, 1.0], [3.0, 2.0, 1.0])
        assert (lo, hi) == (-14.0, -10.0)
        assert production_bounds([1.0, 1.0, 1.0], [2.0, 0.0, -2.0]) == (0.0, 0.0)

    def test_bounds_fixture_pair(self):
        fx = fixture_tensors()
        rho = eig_sym3(fx.A).eigenvalues
        c_dev = fx.C - np.trace(fx.C) / 3.0 * np.eye(3)
        sigma = eig_sym3(c_dev).eigenvalues
        assert np.allclose(production_bounds(rho, sigma), production_bounds_bruteforce(rho, sigma), atol=1e-13)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            production_bounds([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])

    @given(
        st.lists(st.floats(0.0, 5.0), min_size=3, max_size=3),
        st.lists(st.floats(-5.0, 5.0), min_size=3, max_size=3),
    )
    def test_bounds_match_bruteforce(self, rho, sigma):
        rho, sigma = sorted(rho, reverse=True), sorted(sigma, reverse=True)
        lo, hi = production_bounds(rho, sigma)
        blo, bhi = production_bounds_bruteforce(rho, sigma)
        assert lo <= hi
        assert lo == pytest.approx(blo, abs=1e-12)
        assert hi == pytest.approx(bhi, abs=1e-12)

    @given(boussinesq_states())
    def test_shared_frame_shared_pairing(self, state):
        tau, strain = state
        rho = eig_sym3(tau).eigenvalues
        sigma = eig_sym3(strain).eigenvalues
        # an eddy-viscosity stress pairs its largest stress with the most compressive strain
        assert production(tau, strain) == pytest.approx(production_bounds(rho, sigma)[1], abs=1e-12)


class TestLegacyBlend:
    def test_endpoints_and_mean(self):
        fx = fixture_tensors()
        assert np.array_equal(moderated_stress_legacy(fx.A, fx.C, 0.0), fx.A)
        assert np.array_equal(moderated_stress_legacy(fx.A, fx.C, 1.0), fx.C)
        assert np.allclose(moderated_stress_legacy(fx.A, fx.C, 0.5), 0.5 * (fx.A + fx.C))

    def test_rejects_factor(self):
        with pytest.raises(ValueError):
            moderated_stress_legacy(np.eye(3), np.eye(3), 1.5)


class TestConsistent:
    @given(realizable_stresses(), st.sampled_from(ALL_SPECS), st.sampled_from([0.0, 0.25, 0.5, 1.0]))
    def test_lands_on_target(self, tau, combo, db):
        spec = PerturbationSpec(combo[0], db, combo[1])
        out = perturb_consistent(tau, spec)
        want = perturb_barycentric(bary_of(tau), spec.target, db)
        assert np.allclose(bary_of(out.tau_star), want, atol=1e-10)
        assert np.allclose(out.bary_after, want, atol=1e-14)

    @given(realizable_stresses(), st.sampled_from(ALL_SPECS), st.sampled_from([0.0, 0.25, 0.5, 1.0]))
    def test_realizable_and_trace_preserving(self, tau, combo, db):
        out = perturb_consistent(tau, PerturbationSpec(combo[0], db, combo[1]))
        assert validate_realizability(out.tau_star).is_realizable
        assert abs(np.trace(out.tau_star) - np.trace(tau)) <= 1e-10 * np.trace(tau)
        assert np.allclose(out.tau_star, out.tau_star.T)

    def test_isotropic_target(self):
        tau = fixture_tensors().A
        out = perturb_consistent(tau, PerturbationSpec("3C", 1.0))
        k = 0.5 * np.trace(tau)
        assert np.allclose(out.tau_star, (2.0 / 3.0) * k * np.eye(3), atol=1e-14)

    def test_one_component_keeps_frame(self):
        tau = plane_strain_stress(0.25)
        out = perturb_consistent(tau, PerturbationSpec("1C", 1.0))
        dec = eig_sym3(anisotropy_from_stress(out.tau_star).a)
        assert np.allclose(dec.eigenvalues, [4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0], atol=1e-14)
        v0 = eig_sym3(anisotropy_from_stress(tau).a).eigenvectors[:, 0]
        assert abs(dec.eigenvectors[:, 0] @ v0) == pytest.approx(1.0)

    def test_hand_worked_plane_strain_min(self):
        # plane strain (s, 0, -s) at s = 0.3: map point (0.15, sqrt(3)/2 (1 - 0.45)),
        # halfway to 1C, then eigenvalues from the inverse map
        s = 0.3
        tau, strain = plane_strain_stress(s), shear_strain()
        out = perturb_consistent(tau, PerturbationSpec("1C", 0.5, "production_min"), strain=strain)
        x0 = np.array([s / 2 + 0.5 * (1 - 1.5 * s), np.sqrt(3) / 2 * (1 - 1.5 * s)])
        x1 = 0.5 * (x0 + np.array([1.0, 0.0]))
        assert np.allclose(out.bary_after, x1, atol=1e-15)
        assert np.allclose(bary_of(out.tau_star), x1, atol=1e-14)
        assert out.production_after < out.production_before

    @given(boussinesq_states(), st.sampled_from(TARGETS), st.floats(0.0, 1.0))
    def test_production_extremes(self, state, target, db):
        tau, strain = state
        sigma = eig_sym3(strain).eigenvalues
        for mode, side in (("production_max", 1), ("production_min", 0)):
            out = perturb_consistent(tau, PerturbationSpec(target, db, mode), strain=strain)
            rho = eig_sym3(out.tau_star).eigenvalues
            assert out.production_after == pytest.approx(production_bounds(rho, sigma)[side], abs=1e-12)

    def test_degenerate_energy_passes_through(self):
        out = perturb_consistent(np.zeros((3, 3)), PerturbationSpec("1C", 1.0))
        assert out.degenerate
        assert np.array_equal(out.tau_star, np.zeros((3, 3)))

    def test_rejects_unrealizable_and_moderation(self):
        with pytest.raises(NonRealizableTargetError):
            perturb_consistent(np.diag([1.0, 1.0, -1.0]), PerturbationSpec("1C", 1.0))
        with pytest.raises(ValueError):
            perturb_consistent(np.eye(3), PerturbationSpec("1C", 1.0, legacy_f=0.5))

    def test_batched(self):
        taus = np.stack([plane_strain_stress(s) for s in np.linspace(0.0, 0.3, 7)])
        out = perturb_consistent(taus, PerturbationSpec("2C", 0.5, "production_min"))
        assert out.tau_star.shape == (7, 3, 3)
        assert out.bary_after.shape == (7, 2)


class TestLegacy:
    @given(realizable_stresses(), st.sampled_from(TARGETS), st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]))
    def test_max_mode_equals_reduced_strength(self, tau, target, f):
        leg = perturb_legacy(tau, PerturbationSpec(target, 1.0, "production_max", f))
        con = perturb_consistent(tau, PerturbationSpec(target, f))
        assert np.allclose(leg.tau_star, con.tau_star, atol=1e-10)

    @given(realizable_stresses(), st.sampled_from(ALL_SPECS), st.floats(0.0, 1.0))
    def test_full_factor_is_consistent(self, tau, combo, db):
        leg = perturb_legacy(tau, PerturbationSpec(combo[0], db, combo[1], 1.0))
        con = perturb_consistent(tau, PerturbationSpec(combo[0], db, combo[1]))
        assert np.allclose(leg.tau_star, con.tau_star, atol=1e-14)

    def test_min_mode_leaves_segment(self):
        tau = plane_strain_stress(0.3)
        out = perturb_legacy(tau, PerturbationSpec("1C", 1.0, "production_min", 0.5))
        d = point_to_segment_distance(out.bary_after, out.bary_before, DEFAULT_CORNERS.corner("1C"))
        assert d > 0.01

    def test_requires_factor(self):
        with pytest.raises(ValueError):
            perturb_legacy(np.eye(3), PerturbationSpec("1C", 1.0))

    @given(boussinesq_states(), st.sampled_from(["1C", "2C"]), st.floats(0.05, 0.95))
    def test_min_mode_never_reaches_lower_bound(self, state, target, f):
        tau, strain = state
        out = perturb_legacy(tau, PerturbationSpec(target, 1.0, "production_min", f), strain=strain)
        rho = eig_sym3(out.tau_star).eigenvalues
        lo, hi = production_bounds(rho, eig_sym3(strain).eigenvalues)
        assert out.production_after > lo + 1e-12
        assert out.production_after <= hi + 1e-12

    @given(boussinesq_states(), st.sampled_from(["1C", "2C"]), st.floats(0.05, 0.95))
    def test_min_mode_upper_bound_iff_order_kept(self, state, target, f):
        # blend and strain share a frame; the production sits on the upper bound
        # exactly when the blend keeps the unperturbed eigenvalue order
        tau, strain = state
        v = eig_sym3(tau).eigenvectors
        out = perturb_legacy(tau, PerturbationSpec(target, 1.0, "production_min", f), strain=strain)
        diag = np.einsum("ji,jk,ki->i", v, out.tau_star, v)
        gaps = np.diff(diag)
        scale = np.trace(tau)
        if np.all(gaps < -1e-9 * scale) or np.any(gaps > 1e-9 * scale):
            kept = bool(np.all(gaps < 0))
            rho = eig_sym3(out.tau_star).eigenvalues
            hi = production_bounds(rho, eig_sym3(strain).eigenvalues)[1]
            assert (abs(out.production_after - hi) < 1e-10) == kept


@pytest.mark.parametrize("target,mode", list(itertools.product(TARGETS, EV_MODES)))
def test_dispatch(target, mode):
    tau = plane_strain_stress(0.2)
    a = perturb(tau, PerturbationSpec(target, 0.5, mode))
    b = perturb_consistent(tau, PerturbationSpec(target, 0.5, mode))
    assert np.array_equal(a.tau_star, b.tau_star)
