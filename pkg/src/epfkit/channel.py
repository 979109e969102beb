"""Fully developed turbulent channel flow with the Menter SST k-omega model.

The half channel ``0 <= y <= 1`` (wall to centreline) is discretised with
cell-centred finite volumes on a geometrically stretched grid.  Lengths are
scaled by the half height, velocities by the friction velocity implied by the
fixed pressure-gradient source, so that ``nu = sqrt(dp/dx) / Re_tau``.

Each outer iteration

1. evaluates the SST eddy viscosity and the Boussinesq Reynolds stress,
2. perturbs that stress (perturbed modes only) at every cell centre and face,
3. solves the momentum equation with the perturbed shear stress entering the
   diffusive flux as a deferred correction to the eddy-viscosity flux,
4. solves the k and omega equations, with the production of k evaluated
   explicitly from the perturbed stress.

Each equation is solved implicitly and the result blended with the previous
iterate by its under-relaxation factor.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .barycentric import DEFAULT_CORNERS, to_barycentric
from .perturbation import PerturbationSpec, perturb
from .tensors import anisotropy_from_stress, eig_sym3, is_realizable

__all__ = [
    "SSTConstants",
    "ChannelConfig",
    "ChannelSolution",
    "CampaignMember",
    "Envelope",
    "make_grid",
    "solve_channel",
    "run_uq_campaign",
    "extract_bary_profile",
    "log_law_fit",
    "laminar_u_plus",
]

log = logging.getLogger(__name__)

MODES = ("baseline", "legacy", "consistent")
LAMINAR_NUT_RATIO = 1e-3
_TINY = 1e-300
_K_MIN = 1e-30
_NU_EFF_CAP = 1e8
_S_LIMIT = 1e-6
_THETA = 0.5


@dataclass(frozen=True)
class SSTConstants:
    """Menter SST (2003) coefficients."""

    sigma_k1: float = 0.85
    sigma_w1: float = 0.5
    beta1: float = 0.075
    sigma_k2: float = 1.0
    sigma_w2: float = 0.856
    beta2: float = 0.0828
    beta_star: float = 0.09
    kappa: float = 0.41
    a1: float = 0.31
    gamma1: float = 5.0 / 9.0
    gamma2: float = 0.44


@dataclass(frozen=True)
class ChannelConfig:
    re_tau: float = 1000.0
    n_cells: int = 100
    stretching: float = 1.05
    pressure_gradient: float = 1.0
    model: SSTConstants = field(default_factory=SSTConstants)
    perturbation: PerturbationSpec | None = None
    mode: str = "baseline"
    max_iters: int = 200_000
    conv_tol: float = 1e-8
    relax_u: float = 0.5
    relax_turb: float = 0.5
    n_div: int = 2000
    check_every: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_cells < 50:
            raise ValueError("n_cells must be at least 50")
        if self.stretching < 1.0:
            raise ValueError("stretching ratio must be >= 1")
        if self.re_tau <= 0 or self.pressure_gradient <= 0:
            raise ValueError("re_tau and pressure_gradient must be positive")
        if not (0 < self.relax_u <= 1 and 0 < self.relax_turb <= 1):
            raise ValueError("under-relaxation factors must lie in (0, 1]")
        if self.mode == "baseline" and self.perturbation is not None:
            raise ValueError("baseline mode takes no perturbation")
        if self.mode != "baseline" and self.perturbation is None:
            raise ValueError(f"{self.mode} mode needs a perturbation")
        if self.mode == "legacy" and self.perturbation.legacy_f is None:
            raise ValueError("legacy mode needs a moderation factor")
        if self.mode == "consistent" and self.perturbation.legacy_f is not None:
            raise ValueError("consistent mode takes no moderation factor")
        yf = make_grid(self.n_cells, self.stretching)
        if 0.5 * yf[1] * self.re_tau > 1.0:
            raise ValueError(
                f"first cell centre at y+ = {0.5 * yf[1] * self.re_tau:.3g}; increase stretching or n_cells"
            )

    @property
    def nu(self) -> float:
        return math.sqrt(self.pressure_gradient) / self.re_tau

    @property
    def u_tau(self) -> float:
        return math.sqrt(self.pressure_gradient)

    def with_perturbation(self, spec: PerturbationSpec | None) -> "ChannelConfig":
        if spec is None:
            return replace(self, perturbation=None, mode="baseline")
        mode = "consistent" if spec.legacy_f is None else "legacy"
        return replace(self, perturbation=spec, mode=mode)


@dataclass
class ChannelSolution:
    config: ChannelConfig
    y: np.ndarray
    y_plus: np.ndarray
    u_plus: np.ndarray
    k: np.ndarray
    omega: np.ndarray
    nu_t: np.ndarray
    tau_profiles: np.ndarray
    bary_points: np.ndarray
    residual_history: np.ndarray
    converged: bool
    laminarized: bool
    diverged: bool
    iterations: int
    wall_shear: float
    realizability_violations: int = 0

    @property
    def k_plus(self) -> np.ndarray:
        return self.k / self.config.u_tau**2

    @property
    def omega_plus(self) -> np.ndarray:
        return self.omega * self.config.nu / self.config.u_tau**2

    @property
    def nu_t_ratio(self) -> np.ndarray:
        return self.nu_t / self.config.nu

    @property
    def centerline_u_plus(self) -> float:
        return float(self.u_plus[-1])

    @property
    def status(self) -> str:
        if self.diverged:
            return "diverged"
        if not self.converged:
            return "unconverged"
        return "laminarized" if self.laminarized else "converged"

    def state(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        u = self.u_plus * self.config.u_tau
        return u.copy(), self.k.copy(), self.omega.copy()


def make_grid(n_cells: int, stretching: float) -> np.ndarray:
    """Face positions from the wall (0) to the centreline (1)."""
    if stretching == 1.0:
        widths = np.ones(n_cells)
    else:
        widths = stretching ** np.arange(n_cells)
    faces = np.concatenate([[0.0], np.cumsum(widths)])
    return faces / faces[-1]


class _Grid:
    def __init__(self, n_cells, stretching):
        self.yf = make_grid(n_cells, stretching)
        self.n = n_cells
        self.yc = 0.5 * (self.yf[1:] + self.yf[:-1])
        self.vol = np.diff(self.yf)
        self.dc = np.diff(self.yc)
        self.dw = self.yc[0]
        # interpolation weight of the right cell at interior faces
        self.wr = (self.yf[1:-1] - self.yc[:-1]) / self.dc

    def to_faces(self, phi, wall):
        """Values on all n+1 faces; zero-gradient at the centreline."""
        inner = (1.0 - self.wr) * phi[:-1] + self.wr * phi[1:]
        return np.concatenate([[wall], inner, [phi[-1]]])

    def face_gradient(self, phi, wall):
        inner = np.diff(phi) / self.dc
        return np.concatenate([[(phi[0] - wall) / self.dw], inner, [0.0]])

    def center_gradient(self, phi, wall):
        g = self.face_gradient(phi, wall)
        return 0.5 * (g[:-1] + g[1:])


def _solve_transport(grid, gamma_f, su, sp, phi_old, alpha, wall_value):
    """Tridiagonal solve of a 1D diffusion equation, under-relaxed by blending.

    ``gamma_f`` are diffusivities on all faces, ``su`` and ``sp`` the explicit
    and (non-positive) implicit source densities at the cell centres.
    """
    n = grid.n
    aw = np.empty(n)
    ae = np.empty(n)
    aw[0] = gamma_f[0] / grid.dw
    aw[1:] = gamma_f[1:-1] / grid.dc
    ae[:-1] = gamma_f[1:-1] / grid.dc
    ae[-1] = 0.0
    ap = aw + ae - sp * grid.vol
    b = su * grid.vol
    b[0] += aw[0] * wall_value
    ab = np.zeros((3, n))
    ab[0, 1:] = -ae[:-1]
    ab[1] = ap
    ab[2, :-1] = -aw[1:]
    phi = solve_banded((1, 1), ab, b, check_finite=False)
    return phi_old + alpha * (phi - phi_old)


def _effective_viscosity(tau_xy, tau0_xy, grad, nu, theta=None):
    """Implicit diffusivity for the perturbed momentum flux, and plug faces.

    ``tau0_xy`` is the perturbed shear stress in the limit of vanishing strain
    with the sign of ``grad``; unlike the Boussinesq stress it need not vanish.
    The diffusivity blends the secant slope from that limit (fast, Newton-like)
    with the secant from the origin (robust, Picard-like) by ``theta``.  Where
    the stress cannot vanish with the gradient the Picard ratio grows without
    bound and the face settles as a plug at the capped diffusivity.
    """
    theta = _THETA if theta is None else theta
    cap = _NU_EFF_CAP * nu
    nz = grad != 0.0
    picard = np.divide(-tau_xy, grad, out=np.full_like(grad, cap), where=nz)
    newton = np.divide(-(tau_xy - tau0_xy), grad, out=np.zeros_like(grad), where=nz)
    blend = newton + theta * (picard - newton)
    plug = picard >= cap
    nu_eff = np.where(plug, cap, np.clip(blend, 0.0, cap))
    return nu_eff, plug


def _boussinesq(k, nu_t, g):
    tau = np.zeros(k.shape + (3, 3))
    diag = (2.0 / 3.0) * k
    tau[..., 0, 0] = tau[..., 1, 1] = tau[..., 2, 2] = diag
    # plane-strain states stay realizable while |a_xy| <= 2/3
    txy = -nu_t * g
    lim = (2.0 / 3.0) * k
    txy = np.clip(txy, -lim, lim)
    tau[..., 0, 1] = tau[..., 1, 0] = txy
    return tau


def _initial_state(grid, cfg):
    m = cfg.model
    nu, ut = cfg.nu, cfg.u_tau
    yp = grid.yc * ut / nu
    kap = m.kappa
    u = ut * (
        np.log1p(kap * yp) / kap
        + 7.8 * (1.0 - np.exp(-yp / 11.0) - (yp / 11.0) * np.exp(-yp / 3.0))
    )
    k = ut**2 / math.sqrt(m.beta_star) * (1.0 - grid.yc) * (1.0 - np.exp(-yp / 10.0)) ** 2 + _K_MIN
    w_vis = 6.0 * nu / (m.beta1 * grid.yc**2)
    w_log = ut / (math.sqrt(m.beta_star) * kap * grid.yc)
    w = np.hypot(w_vis, w_log)
    return u, k, w


class _SSTIteration:
    """Coefficients and one under-relaxed sweep of the coupled equations."""

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.grid = _Grid(cfg.n_cells, cfg.stretching)
        m = cfg.model
        # Menter's wall value with the first-centre distance as wall spacing
        self.omega_wall = 60.0 * cfg.nu / (m.beta1 * self.grid.dw**2)

    def turbulence(self, u, k, w):
        g, m, nu = self.grid, self.cfg.model, self.cfg.nu
        y = g.yc
        dudy = g.center_gradient(u, 0.0)
        dkdy = g.center_gradient(k, 0.0)
        dwdy = g.center_gradient(w, self.omega_wall)
        sk = np.sqrt(np.maximum(k, 0.0))
        cd = np.maximum(2.0 * m.sigma_w2 / w * dkdy * dwdy, 1e-10)
        arg1 = np.minimum(
            np.maximum(sk / (m.beta_star * w * y), 500.0 * nu / (y**2 * w)),
            4.0 * m.sigma_w2 * k / (cd * y**2),
        )
        f1 = np.tanh(arg1**4)
        arg2 = np.maximum(2.0 * sk / (m.beta_star * w * y), 500.0 * nu / (y**2 * w))
        f2 = np.tanh(arg2**2)
        nu_t = m.a1 * k / np.maximum(m.a1 * w, np.abs(dudy) * f2)
        return dict(dudy=dudy, dkdy=dkdy, dwdy=dwdy, f1=f1, nu_t=nu_t)

    def stresses(self, u, k, nu_t, limit=False):
        """Boussinesq stress at centres and faces, and its perturbed image.

        The perturbation acts on the anisotropy only, so it is applied to the
        stress per unit k and rescaled afterwards.  This keeps a nearly
        laminar state (k close to zero) away from the degenerate-k branch.

        With ``limit`` the perturbed face stress for a vanishing strain of
        the same sign is returned as well (``None`` in baseline mode).
        """
        g = self.grid
        gf = g.face_gradient(u, 0.0)
        gc = g.center_gradient(u, 0.0)
        kf = g.to_faces(k, 0.0)
        nutf = g.to_faces(nu_t, 0.0)
        rc = nu_t / np.maximum(k, _TINY)
        rf = np.divide(nutf, kf, out=np.zeros_like(kf), where=kf > 0)
        unit_c = _boussinesq(np.ones_like(k), rc, gc)
        unit_f = _boussinesq(np.ones_like(kf), rf, gf)
        tau_c = k[:, None, None] * unit_c
        tau_f = kf[:, None, None] * unit_f
        spec = self.cfg.perturbation
        if spec is None:
            out = (tau_c, tau_f, tau_c, tau_f, gf, nutf)
            return out + (None,) if limit else out
        batch = [unit_c, unit_f]
        if limit:
            s = rf * np.abs(gf)
            s0 = np.minimum(s, _S_LIMIT)
            batch.append(_boussinesq(np.ones_like(kf), np.divide(s0, np.abs(gf), out=np.zeros_like(s0), where=gf != 0), gf))
        star = perturb(np.concatenate(batch), spec, check=False).tau_star
        n, nf = g.n, g.n + 1
        star_c = k[:, None, None] * star[:n]
        star_f = kf[:, None, None] * star[n : n + nf]
        out = (tau_c, tau_f, star_c, star_f, gf, nutf)
        if limit:
            out = out + (kf[:, None, None] * star[n + nf :],)
        return out

    def sweep(self, u, k, w):
        cfg, g, m, nu = self.cfg, self.grid, self.cfg.model, self.cfg.nu
        t = self.turbulence(u, k, w)
        nu_t, f1 = t["nu_t"], t["f1"]
        _, _, star_c, star_f, gf, nutf, star0_f = self.stresses(u, k, nu_t, limit=True)

        # momentum: the perturbed shear stress is split into its zero-strain
        # limit (explicit) and a remainder carried by an implicit diffusivity
        su = np.full(g.n, cfg.pressure_gradient)
        if cfg.perturbation is None:
            nu_eff = nutf
        else:
            nu_eff, plug = _effective_viscosity(star_f[:, 0, 1], star0_f[:, 0, 1], gf, nu)
            corr = -star_f[:, 0, 1] - nu_eff * gf
            corr[plug] = 0.0
            corr[0] = corr[-1] = 0.0
            su = su + np.diff(corr) / g.vol
        gamma_u = nu + nu_eff
        gamma_u[0] = nu
        u_new = _solve_transport(g, gamma_u, su, np.zeros(g.n), u, cfg.relax_u, 0.0)

        # production of k from the propagated stress
        gc = t["dudy"]
        pk = -star_c[:, 0, 1] * gc
        pk = np.minimum(pk, 10.0 * m.beta_star * k * w)

        sigma_k = f1 * m.sigma_k1 + (1.0 - f1) * m.sigma_k2
        sigma_w = f1 * m.sigma_w1 + (1.0 - f1) * m.sigma_w2
        beta = f1 * m.beta1 + (1.0 - f1) * m.beta2
        gamma = f1 * m.gamma1 + (1.0 - f1) * m.gamma2

        gk = g.to_faces(nu + sigma_k * nu_t, nu)
        su_k = np.maximum(pk, 0.0)
        sp_k = -m.beta_star * w + np.minimum(pk, 0.0) / np.maximum(k, _K_MIN)
        k_new = _solve_transport(g, gk, su_k, sp_k, k, cfg.relax_turb, 0.0)
        k_new = np.maximum(k_new, _K_MIN)

        cross = (1.0 - f1) * 2.0 * m.sigma_w2 * t["dkdy"] * t["dwdy"] / w
        gw = g.to_faces(nu + sigma_w * nu_t, nu)
        su_w = gamma * np.maximum(pk, 0.0) / np.maximum(nu_t, _TINY) + np.maximum(cross, 0.0)
        sp_w = -beta * w + np.minimum(cross, 0.0) / w
        w_new = _solve_transport(g, gw, su_w, sp_w, w, cfg.relax_turb, self.omega_wall)
        w_new = np.maximum(w_new, _TINY)
        return u_new, k_new, w_new

    def residual(self, old, new):
        u0, k0, w0 = old
        u1, k1, w1 = new
        ut = self.cfg.u_tau
        return max(
            float(np.max(np.abs(u1 - u0))) / ut,
            float(np.max(np.abs(k1 - k0))) / ut**2,
            float(np.max(np.abs(w1 - w0) / w1)),
        )


def solve_channel(
    config: ChannelConfig,
    initial: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> ChannelSolution:
    """Iterate the channel equations to a steady state.

    ``initial`` is an optional ``(U, k, omega)`` start, typically the
    converged baseline when running perturbed cases.  The normalised residual is
    the largest per-iteration change of ``U/u_tau``, ``k/u_tau^2`` and the
    relative change of ``omega``.

    Divergence (non-finite values, or a residual stuck more than three decades
    above its best value for ``n_div`` iterations) stops the iteration and
    returns the partial solution flagged as diverged.
    """
    it = _SSTIteration(config)
    g = it.grid
    if initial is None:
        u, k, w = _initial_state(g, config)
    else:
        u, k, w = (np.array(a, dtype=float) for a in initial)
    history = []
    best, best_iter = np.inf, 0
    converged = diverged = False
    violations = 0
    n_done = 0
    for n_done in range(1, config.max_iters + 1):
        new = it.sweep(u, k, w)
        if not all(np.all(np.isfinite(a)) for a in new):
            diverged = True
            log.warning("non-finite state after %d iterations", n_done)
            break
        res = it.residual((u, k, w), new)
        u, k, w = new
        history.append(res)
        if res < best:
            best, best_iter = res, n_done
        if config.perturbation is not None and n_done % config.check_every == 0:
            violations += _count_violations(it, u, k, w)
        if res < config.conv_tol:
            converged = True
            break
        if res > 1e3 * best and n_done - best_iter > config.n_div:
            diverged = True
            log.warning("residual growth, stopping after %d iterations", n_done)
            break
    return _finish(it, u, k, w, np.array(history), converged, diverged, n_done, violations)


def _count_violations(it, u, k, w):
    nu_t = it.turbulence(u, k, w)["nu_t"]
    _, _, star_c, star_f, _, _ = it.stresses(u, k, nu_t)
    return int(np.count_nonzero(~is_realizable(star_c)) + np.count_nonzero(~is_realizable(star_f)))


def _finish(it, u, k, w, history, converged, diverged, n_done, violations):
    cfg, g = it.cfg, it.grid
    nu_t = it.turbulence(u, k, w)["nu_t"]
    _, _, star_c, _, _, _ = it.stresses(u, k, nu_t)
    violations += int(np.count_nonzero(~is_realizable(star_c)))
    lam = eig_sym3(anisotropy_from_stress(star_c).a).eigenvalues
    bary = to_barycentric(lam, DEFAULT_CORNERS)
    ut, nu = cfg.u_tau, cfg.nu
    wall_shear = nu * u[0] / g.dw
    bulk_ratio = float(np.sum(nu_t * g.vol) / (nu * np.sum(g.vol)))
    return ChannelSolution(
        config=cfg,
        y=g.yc.copy(),
        y_plus=g.yc * ut / nu,
        u_plus=u / ut,
        k=k,
        omega=w,
        nu_t=nu_t,
        tau_profiles=star_c,
        bary_points=bary,
        residual_history=history,
        converged=converged,
        laminarized=bulk_ratio < LAMINAR_NUT_RATIO,
        diverged=diverged,
        iterations=n_done,
        wall_shear=float(wall_shear),
        realizability_violations=violations,
    )


def baseline_stress(solution: ChannelSolution) -> np.ndarray:
    """Boussinesq stress of a solution at the cell centres."""
    it = _SSTIteration(replace(solution.config, perturbation=None, mode="baseline"))
    u, k, w = solution.state()
    nu_t = it.turbulence(u, k, w)["nu_t"]
    tau_c, *_ = it.stresses(u, k, nu_t)
    return tau_c


def extract_bary_profile(solution: ChannelSolution):
    """Wall distance ``y+`` and barycentric position of the propagated stress per cell."""
    return solution.y_plus.copy(), solution.bary_points.copy()


def log_law_fit(y_plus, u_plus, lo: float = 30.0, hi: float = 300.0):
    """Least-squares fit ``u+ = ln(y+)/kappa + B`` over ``lo < y+ < hi``.

    Returns ``(kappa, B)``.
    """
    y_plus = np.asarray(y_plus)
    sel = (y_plus > lo) & (y_plus < hi)
    if np.count_nonzero(sel) < 3:
        raise ValueError("fewer than three points inside the fit window")
    slope, intercept = np.polyfit(np.log(y_plus[sel]), np.asarray(u_plus)[sel], 1)
    return 1.0 / slope, intercept


def laminar_u_plus(y_plus, re_tau: float):
    """Poiseuille profile driven by the same pressure gradient, in wall units."""
    y_plus = np.asarray(y_plus, dtype=float)
    return y_plus - y_plus**2 / (2.0 * re_tau)


@dataclass
class CampaignMember:
    spec: PerturbationSpec
    solution: ChannelSolution

    @property
    def label(self) -> str:
        return self.spec.label


@dataclass
class Envelope:
    formulation: str
    y_plus: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    baseline: np.ndarray
    members: list[CampaignMember]
    excluded: list[str]
    min_member: list[str]
    max_member: list[str]

    @property
    def ok(self) -> bool:
        return not self.excluded


def _run_member(args):
    cfg, initial = args
    return solve_channel(cfg, initial)


def run_uq_campaign(
    base: ChannelConfig,
    specs: list[PerturbationSpec],
    baseline: ChannelSolution | None = None,
    workers: int = 1,
) -> Envelope:
    """Run perturbed members from the converged baseline and form the envelope.

    All members share the baseline's pressure gradient.  The envelope is the
    pointwise minimum and maximum of ``u+`` over the baseline and every
    converged member; members that diverged or did not converge are excluded
    and listed in ``excluded``.
    """
    if baseline is None:
        baseline = solve_channel(base.with_perturbation(None))
    if not baseline.converged:
        raise RuntimeError("baseline did not converge; campaign aborted")
    jobs = [(base.with_perturbation(s), baseline.state()) for s in specs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            solutions = list(pool.map(_run_member, jobs))
    else:
        solutions = [_run_member(j) for j in jobs]
    members = [CampaignMember(s, sol) for s, sol in zip(specs, solutions)]
    excluded = []
    profiles = [baseline.u_plus]
    labels = ["baseline"]
    for mem in members:
        if mem.solution.converged:
            profiles.append(mem.solution.u_plus)
            labels.append(mem.label)
        else:
            excluded.append(mem.label)
            log.error("campaign member %s %s and is excluded", mem.label, mem.solution.status)
    stack = np.vstack(profiles)
    imin = np.argmin(stack, axis=0)
    imax = np.argmax(stack, axis=0)
    formulation = "legacy" if any(s.legacy_f is not None for s in specs) else "consistent"
    return Envelope(
        formulation=formulation,
        y_plus=baseline.y_plus.copy(),
        u_min=stack.min(axis=0),
        u_max=stack.max(axis=0),
        baseline=baseline.u_plus.copy(),
        members=members,
        excluded=excluded,
        min_member=[labels[i] for i in imin],
        max_member=[labels[i] for i in imax],
    )
