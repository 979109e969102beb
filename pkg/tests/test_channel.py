import numpy as np
import pytest

from epfkit.barycentric import from_barycentric
from epfkit.channel import (
    ChannelConfig,
    SSTConstants,
    baseline_stress,
    extract_bary_profile,
    laminar_u_plus,
    log_law_fit,
    make_grid,
    run_uq_campaign,
    solve_channel,
)
from epfkit.perturbation import PerturbationSpec, campaign_specs, perturb, perturb_barycentric


class TestGrid:
    def test_faces(self):
        yf = make_grid(100, 1.05)
        assert yf[0] == 0.0 and yf[-1] == 1.0
        widths = np.diff(yf)
        assert np.allclose(widths[1:] / widths[:-1], 1.05)

    def test_uniform(self):
        assert np.allclose(np.diff(make_grid(50, 1.0)), 0.02)


class TestConfig:
    def test_defaults(self):
        cfg = ChannelConfig()
        assert cfg.nu == pytest.approx(1e-3)
        assert cfg.u_tau == 1.0
        assert cfg.model == SSTConstants()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_cells=10),
            dict(stretching=0.9),
            dict(re_tau=-1.0),
            dict(relax_u=0.0),
            dict(mode="weird"),
            dict(mode="consistent"),
            dict(perturbation=PerturbationSpec("1C", 0.5)),
            dict(mode="legacy", perturbation=PerturbationSpec("1C", 0.5)),
            dict(mode="consistent", perturbation=PerturbationSpec("1C", 1.0, legacy_f=0.5)),
            dict(stretching=1.0, re_tau=20000.0),
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ChannelConfig(**kwargs)

    def test_with_perturbation(self):
        cfg = ChannelConfig()
        assert cfg.with_perturbation(PerturbationSpec("1C", 0.5)).mode == "consistent"
        assert cfg.with_perturbation(PerturbationSpec("1C", 1.0, legacy_f=0.5)).mode == "legacy"
        assert cfg.with_perturbation(PerturbationSpec("1C", 0.5)).with_perturbation(None).mode == "baseline"


class TestBaseline:
    def test_converged(self, baseline):
        assert baseline.status == "converged"
        assert baseline.residual_history[-1] < 1e-8
        assert not baseline.laminarized
        assert baseline.u_plus.shape == (100,)

    def test_momentum_balance(self, baseline):
        # the pressure-gradient force on the half channel is 1 in these units
        assert baseline.wall_shear == pytest.approx(1.0, rel=5e-3)

    def test_total_stress_is_linear(self, baseline):
        cfg = baseline.config
        tau = baseline_stress(baseline)
        dudy = np.gradient(baseline.u_plus, baseline.y)
        total = cfg.nu * dudy - tau[:, 0, 1]
        assert np.allclose(total, 1.0 - baseline.y, atol=2e-2)

    def test_profiles_physical(self, baseline):
        assert np.all(np.diff(baseline.u_plus) > 0)
        assert np.all(baseline.k > 0) and np.all(baseline.omega > 0)
        assert np.all(baseline.nu_t >= 0)
        assert 18.0 < baseline.centerline_u_plus < 26.0
        # k-omega models sit well below the near-wall DNS peak of about 4.8
        assert 2.0 < baseline.k_plus.max() < 6.0

    def test_viscous_sublayer(self, baseline):
        sel = baseline.y_plus < 5
        assert np.all(np.abs(baseline.u_plus[sel] / baseline.y_plus[sel] - 1.0) < 0.05)

    def test_plane_strain_locus(self, baseline):
        y_plus, bary = extract_bary_profile(baseline)
        lam = from_barycentric(bary)
        assert np.allclose(lam[:, 1], 0.0, atol=1e-12)
        assert np.array_equal(y_plus, baseline.y_plus)

    def test_shear_stress_limiter(self, baseline):
        # the SST limiter keeps |uv| <= a1 k wherever F2 = 1
        tau = baseline_stress(baseline)
        ratio = np.abs(tau[:, 0, 1]) / baseline.k
        assert ratio.max() <= baseline.config.model.a1 * (1 + 1e-4)

    def test_deterministic(self, baseline):
        again = solve_channel(ChannelConfig())
        assert np.array_equal(again.u_plus, baseline.u_plus)
        assert np.array_equal(again.k, baseline.k)
        assert again.iterations == baseline.iterations

    def test_state_restart_is_fixed_point(self, baseline):
        again = solve_channel(ChannelConfig(), baseline.state())
        assert again.converged and again.iterations <= 2
        assert np.max(np.abs(again.u_plus - baseline.u_plus)) < 1e-6

    def test_unconverged_flag(self):
        sol = solve_channel(ChannelConfig(max_iters=5))
        assert not sol.converged and sol.status == "unconverged"
        assert sol.iterations == 5 and len(sol.residual_history) == 5


def test_log_law_fit_recovers_coefficients():
    yp = np.geomspace(1.0, 1000.0, 80)
    up = np.log(yp) / 0.41 + 5.2
    kappa, b = log_law_fit(yp, up)
    assert kappa == pytest.approx(0.41)
    assert b == pytest.approx(5.2)
    with pytest.raises(ValueError):
        log_law_fit(yp[:5], up[:5])


def test_laminar_profile():
    assert laminar_u_plus(1000.0, 1000.0) == pytest.approx(500.0)
    assert laminar_u_plus(0.0, 1000.0) == 0.0
    y = np.linspace(0.0, 1000.0, 11)
    assert np.all(np.diff(laminar_u_plus(y, 1000.0)) > 0)


class TestCampaign:
    def test_members(self, consistent_campaign, legacy_campaign):
        assert [m.label for m in consistent_campaign.members] == [s.label for s in campaign_specs(0.5)]
        assert len(legacy_campaign.members) == 5
        assert consistent_campaign.formulation == "consistent"
        assert legacy_campaign.formulation == "legacy"

    @pytest.mark.parametrize("which", ["consistent_campaign", "legacy_campaign"])
    def test_members_converge_and_stay_realizable(self, which, request):
        env = request.getfixturevalue(which)
        assert env.ok
        for m in env.members:
            sol = m.solution
            assert sol.converged, m.label
            assert sol.realizability_violations == 0
            assert np.all(np.diff(sol.u_plus) > 0), m.label
            assert sol.wall_shear == pytest.approx(1.0, rel=5e-3)

    @pytest.mark.parametrize("which", ["consistent_campaign", "legacy_campaign"])
    def test_min_members_are_laminar_poiseuille(self, which, request):
        env = request.getfixturevalue(which)
        for m in env.members:
            if m.spec.ev_mode != "production_min":
                continue
            sol = m.solution
            assert sol.laminarized
            lam = laminar_u_plus(sol.y_plus, sol.config.re_tau)
            assert np.max(np.abs(sol.u_plus - lam)) < 1e-3 * lam.max()

    def test_max_members_match_across_formulations(self, consistent_campaign, legacy_campaign):
        legacy = {m.spec.target: m.solution for m in legacy_campaign.members if m.spec.ev_mode == "production_max"}
        for m in consistent_campaign.members:
            if m.spec.ev_mode == "production_max":
                diff = np.max(np.abs(m.solution.u_plus - legacy[m.spec.target].u_plus))
                assert diff < 10 * m.solution.config.conv_tol, m.label

    def test_max_members_not_laminar(self, consistent_campaign):
        for m in consistent_campaign.members:
            if m.spec.ev_mode == "production_max":
                assert not m.solution.laminarized

    def test_envelope_brackets_members(self, consistent_campaign, baseline):
        env = consistent_campaign
        assert np.array_equal(env.baseline, baseline.u_plus)
        assert np.all(env.u_min <= env.baseline) and np.all(env.baseline <= env.u_max)
        for m in env.members:
            assert np.all(env.u_min <= m.solution.u_plus) and np.all(m.solution.u_plus <= env.u_max)
        assert set(env.min_member) | set(env.max_member) <= {"baseline"} | {m.label for m in env.members}

    def test_perturbed_stress_stays_on_segment_per_cell(self, consistent_campaign):
        # converged members: every cell's propagated stress sits at the segment image
        # of that member's own Boussinesq state
        for m in consistent_campaign.members:
            sol = m.solution
            if sol.laminarized:
                continue
            base = baseline_stress(sol)
            before = perturb(base, PerturbationSpec(m.spec.target, 0.0)).bary_before
            want = perturb_barycentric(before, m.spec.target, m.spec.delta_b)
            assert np.max(np.abs(sol.bary_points - want)) < 1e-6, m.label

    def test_parallel_matches_serial(self, baseline, consistent_campaign):
        specs = [PerturbationSpec("3C", 0.5), PerturbationSpec("2C", 0.5, "production_min")]
        par = run_uq_campaign(ChannelConfig(), specs, baseline=baseline, workers=2)
        serial = {m.label: m.solution for m in consistent_campaign.members}
        for m in par.members:
            assert np.array_equal(m.solution.u_plus, serial[m.label].u_plus)

    def test_refuses_unconverged_baseline(self):
        bad = solve_channel(ChannelConfig(max_iters=3))
        with pytest.raises(RuntimeError):
            run_uq_campaign(ChannelConfig(), campaign_specs(0.5), baseline=bad)

    def test_unconverged_members_excluded(self, baseline):
        cfg = ChannelConfig(max_iters=3)
        env = run_uq_campaign(cfg, [PerturbationSpec("1C", 0.5)], baseline=baseline)
        assert env.excluded == ["1C_pkmax_db0.5"]
        assert not env.ok
        assert np.array_equal(env.u_min, baseline.u_plus)
