import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochwave import (
    BoundaryCondition,
    BudgetConstants,
    BudgetError,
    CutoffParams,
    CutoffShape,
    ExponentTriple,
    ExponentialCritical,
    Polynomial,
    SolverConfig,
    build_basis,
    build_noise_basis,
    contraction_budget,
    cutoff_theta,
    cutoff_theta_hat,
    default_grid,
    detect_stopping,
    duhamel_deterministic,
    h_a_norm,
    linear_flow,
    nesting_consistency,
    pair_system_crosscheck,
    picard_step,
    solve_truncated,
)
from stochwave.solver import realized_diffusion
from stochwave.solver import (
    StopTrigger,
    _cutoff_factors,
    _make_record,
    trajectory_y_distance,
)
from stochwave.spectral import SpectralField

PI = math.pi


def base_config(cutoff=8.0, bc=BoundaryCondition.DIRICHLET, pq=(4, 4), **kw):
    basis = build_basis(PI, PI, bc, cutoff)
    grid = default_grid(basis)
    defaults = dict(
        basis=basis, grid=grid, triple=ExponentTriple.from_pq(*pq),
        cutoffs=CutoffParams(level=1, m=0.5, m_prime=0.3),
        horizon=0.05, dt=1e-3, tol_fp=1e-8, gamma=0.25,
    )
    defaults.update(kw)
    return SolverConfig(**defaults)


def bounded_data(basis, rng, energy):
    c = rng.standard_normal(basis.size) * (1.0 + basis.lam_sq) ** -1.0
    return energy * c / h_a_norm(SpectralField(basis, c))


class TestCutoffs:
    def setup_method(self):
        self.params = CutoffParams(level=1, m=0.5, m_prime=0.3)

    def test_plateau_and_support(self):
        assert cutoff_theta(1.5, 2, self.params) == 1.0      # 1.5/2 <= 1
        assert cutoff_theta(3.0, 1, self.params) == 0.0      # 3 >= 2
        assert cutoff_theta(1.5, 1, self.params) == 0.5      # linear ramp midpoint

    def test_hat_plateau_and_support(self):
        assert cutoff_theta_hat(0.3, self.params) == 1.0
        assert cutoff_theta_hat(0.5, self.params) == 0.0
        assert cutoff_theta_hat(0.4, self.params) == pytest.approx(0.5)

    def test_monotone(self):
        xs = np.linspace(0, 3, 301)
        for shape in CutoffShape:
            p = CutoffParams(level=1, m=0.5, m_prime=0.3, shape=shape)
            vals = cutoff_theta(xs, 2, p)
            assert np.all(np.diff(vals) <= 1e-15)
            hats = cutoff_theta_hat(xs, p)
            assert np.all(np.diff(hats) <= 1e-15)

    def test_product_bound_nondecreasing_h(self):
        # theta_n(x) h(x) <= h(2n) for any non-decreasing h
        xs = np.linspace(0, 10, 500)
        for n in (1, 2, 5):
            vals = cutoff_theta(xs, n, self.params) * np.exp(xs)
            assert np.all(vals <= math.exp(2 * n) * (1 + 1e-12))

    @pytest.mark.parametrize("shape,lip", [
        (CutoffShape.LINEAR_RAMP, 1.0),
        (CutoffShape.CUBIC_SMOOTH, 1.5),
    ])
    def test_lipschitz_with_recorded_constant(self, shape, lip, rng):
        p = CutoffParams(level=1, m=0.5, m_prime=0.3, shape=shape)
        assert p.lip_theta == lip
        for n in (1, 3):
            xs = rng.uniform(0, 4 * n, size=500)
            ys = rng.uniform(0, 4 * n, size=500)
            lhs = np.abs(cutoff_theta(xs, n, p) - cutoff_theta(ys, n, p))
            assert np.all(lhs <= (lip / n) * np.abs(xs - ys) + 1e-12)

    def test_cubic_ramp_slope_attains_three_halves(self):
        p = CutoffParams(level=1, m=0.5, m_prime=0.3, shape=CutoffShape.CUBIC_SMOOTH)
        xs = np.linspace(1.0, 2.0, 20001)
        vals = cutoff_theta(xs, 1, p)
        slopes = np.abs(np.diff(vals) / np.diff(xs))
        assert np.max(slopes) == pytest.approx(1.5, abs=1e-4)

    def test_negative_argument_rejected(self):
        with pytest.raises(ValueError):
            cutoff_theta(-0.1, 1, self.params)

    @settings(max_examples=80, deadline=None)
    @given(x=st.floats(0, 20), y=st.floats(0, 20),
           n=st.integers(1, 8),
           shape=st.sampled_from(list(CutoffShape)))
    def test_lipschitz_property(self, x, y, n, shape):
        p = CutoffParams(level=1, m=0.5, m_prime=0.3, shape=shape)
        lhs = abs(cutoff_theta(x, n, p) - cutoff_theta(y, n, p))
        assert lhs <= (p.lip_theta / n) * abs(x - y) + 1e-12

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            CutoffParams(level=1, m=0.3, m_prime=0.5)
        with pytest.raises(ValueError):
            CutoffParams(level=0, m=0.5, m_prime=0.3)


class TestDuhamel:
    def test_zero_nonlinearity(self, rng):
        cfg = base_config()
        v = linear_flow(cfg)
        out = duhamel_deterministic(v, cfg.horizon, cfg)
        assert np.all(out.coeffs == 0.0)

    def test_cutoff_support_kills_integral(self):
        cfg = base_config(kind=ExponentialCritical(), horizon=0.01)
        big = np.full((cfg.steps + 1, cfg.basis.size), 0.05)
        traj = _make_record(cfg, big, np.zeros_like(big))
        # Z-norm of this record is far above M: theta_hat == 0 everywhere
        assert np.all(_cutoff_factors(traj, cfg.cutoffs) == 0.0)
        out = duhamel_deterministic(traj, cfg.horizon, cfg)
        assert np.all(out.coeffs == 0.0)

    def test_constant_forcing_closed_form(self):
        # F(v) = v with v frozen: integral = f (1 - cos(lam t)) / lam^2
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 2.0)
        cfg = SolverConfig(
            basis=basis, grid=default_grid(basis),
            triple=ExponentTriple.from_pq(2, 2),
            cutoffs=CutoffParams(level=1, m=0.5, m_prime=0.3),
            kind=Polynomial(coefficients=(1.0,)),
            horizon=1.0, dt=1e-3, gamma=0.25,
        )
        amp = 1e-3
        const = np.full((cfg.steps + 1, 1), amp)
        traj = _make_record(cfg, const, np.zeros_like(const))
        lam = math.sqrt(2.0)
        out = duhamel_deterministic(traj, 1.0, cfg)
        expect = amp * (1.0 - math.cos(lam)) / 2.0
        assert abs(out.coeffs[0] - expect) < 1e-6 * amp

    def test_requires_grid_time(self):
        cfg = base_config()
        v = linear_flow(cfg)
        with pytest.raises(ValueError):
            duhamel_deterministic(v, cfg.dt / 3.0, cfg)


class TestPicard:
    def test_linear_is_fixed_point(self, rng):
        cfg = base_config(u0=bounded_data(base_config().basis, rng, 0.2))
        flow = linear_flow(cfg)
        step = picard_step(flow, cfg)
        assert trajectory_y_distance(step, flow, cfg) == 0.0

    def test_zero_data_zero_fixed_point(self):
        cfg = base_config(kind=ExponentialCritical())
        zero = _make_record(cfg, np.zeros((cfg.steps + 1, cfg.basis.size)),
                            np.zeros((cfg.steps + 1, cfg.basis.size)))
        out = picard_step(zero, cfg)
        assert np.all(out.u == 0.0) and np.all(out.ut == 0.0)

    def test_contraction_on_random_pairs(self, rng):
        budget = BudgetConstants()
        cut = CutoffParams(level=1, m=0.5, m_prime=0.3)
        triple = ExponentTriple.from_pq(4, 4)
        horizon = contraction_budget(1, cut, triple, budget, 0.25, 1.0, 1e-3)
        cfg = base_config(kind=ExponentialCritical(), horizon=horizon,
                          cutoffs=cut)
        nodes = cfg.steps + 1
        worst = 0.0
        for _ in range(20):
            def smooth_path():
                a = bounded_data(cfg.basis, rng, rng.uniform(0.05, 0.4))
                b = bounded_data(cfg.basis, rng, rng.uniform(0.05, 0.4))
                mod = np.cos(np.linspace(0, 1, nodes))[:, None]
                u = mod * a + (1 - mod) * b
                return _make_record(cfg, u, np.zeros_like(u))
            v1, v2 = smooth_path(), smooth_path()
            num = trajectory_y_distance(picard_step(v1, cfg), picard_step(v2, cfg), cfg)
            den = trajectory_y_distance(v1, v2, cfg)
            if den > 0:
                worst = max(worst, num / den)
        assert worst < 1.0

    def test_noise_requires_increments(self):
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 8.0)
        cfg = base_config(noise=build_noise_basis(basis, 4))
        with pytest.raises(ValueError):
            picard_step(linear_flow(cfg), cfg, None)


class TestSolve:
    def test_linear_converges_immediately(self, rng):
        cfg = base_config(horizon=0.1)
        cfg = base_config(horizon=0.1, u0=bounded_data(cfg.basis, rng, 0.2),
                          u1=bounded_data(cfg.basis, rng, 0.1))
        traj, diag = solve_truncated(cfg)
        assert diag.iterations == 1
        assert diag.residual < 1e-12
        assert traj.u.shape == (cfg.steps + 1, cfg.basis.size)

    def test_initial_data_carried(self, rng):
        cfg = base_config()
        u0 = bounded_data(cfg.basis, rng, 0.2)
        u1 = bounded_data(cfg.basis, rng, 0.1)
        cfg = base_config(u0=u0, u1=u1)
        traj, _ = solve_truncated(cfg)
        assert np.array_equal(traj.u[0], u0)
        assert np.array_equal(traj.ut[0], u1)

    def test_energy_hypothesis_enforced(self, rng):
        cfg0 = base_config()
        u0 = bounded_data(cfg0.basis, rng, 1.2)
        cfg = base_config(kind=ExponentialCritical(), u0=u0)
        with pytest.raises(ValueError):
            solve_truncated(cfg)

    def test_exponential_matches_strang_reference(self, rng):
        # independent oracle: Strang splitting of the pair system at dt/10
        cfg = base_config(kind=ExponentialCritical(), horizon=0.05, dt=1e-3)
        u0 = bounded_data(cfg.basis, rng, 1e-3)
        cfg = base_config(kind=ExponentialCritical(), horizon=0.05, dt=1e-3, u0=u0)
        traj, diag = solve_truncated(cfg)
        assert diag.converged

        ref_dt = cfg.dt / 10.0
        lam = cfg.basis.lam
        cos = np.cos(lam * ref_dt)
        sin = np.sin(lam * ref_dt)
        sinc = ref_dt * np.sinc(lam * ref_dt / PI)
        grid = cfg.grid
        kind = cfg.kind

        def f_coeffs(u):
            return grid.project(kind.apply(grid.synth(u)))

        u = cfg.u0.copy()
        v = cfg.u1.copy()
        energy = np.sqrt(1.0 + cfg.basis.lam_sq)
        worst = 0.0
        for k in range(10 * cfg.steps):
            v = v + 0.5 * ref_dt * f_coeffs(u)
            u, v = cos * u + sinc * v, -lam * sin * u + cos * v
            v = v + 0.5 * ref_dt * f_coeffs(u)
            if (k + 1) % 10 == 0:
                diff = np.linalg.norm((u - traj.u[(k + 1) // 10]) * energy)
                worst = max(worst, diff)
        assert worst < 1e-5

    def test_moderate_data_against_strang(self, rng):
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02, dt=1e-3)
        u0 = bounded_data(cfg.basis, rng, 0.25)
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02, dt=1e-3, u0=u0)
        traj, diag = solve_truncated(cfg)
        assert diag.converged and max(diag.ratios, default=0.0) < 0.5

        ref_dt = cfg.dt / 10.0
        lam = cfg.basis.lam
        cos, sin = np.cos(lam * ref_dt), np.sin(lam * ref_dt)
        sinc = ref_dt * np.sinc(lam * ref_dt / PI)
        grid, kind = cfg.grid, cfg.kind
        u, v = cfg.u0.copy(), cfg.u1.copy()
        energy = np.sqrt(1.0 + cfg.basis.lam_sq)
        worst = 0.0
        for k in range(10 * cfg.steps):
            v = v + 0.5 * ref_dt * grid.project(kind.apply(grid.synth(u)))
            u, v = cos * u + sinc * v, -lam * sin * u + cos * v
            v = v + 0.5 * ref_dt * grid.project(kind.apply(grid.synth(u)))
            if (k + 1) % 10 == 0:
                worst = max(worst, np.linalg.norm((u - traj.u[(k + 1) // 10]) * energy))
        assert worst < 1e-5

    def test_full_stochastic_run(self, rng):
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 8.0)
        noise = build_noise_basis(basis, 4)
        budget = BudgetConstants()
        cut = CutoffParams(level=1, m=0.5, m_prime=0.3)
        triple = ExponentTriple.from_pq(4, 4)
        horizon = contraction_budget(1, cut, triple, budget, 0.25, 1.0, 1e-3)
        cfg = base_config(kind=ExponentialCritical(), noise=noise,
                          cutoffs=cut, horizon=horizon,
                          u0=bounded_data(basis, rng, 0.25))
        ens = cfg.make_ensemble(seed=5, paths=3)
        for path in range(3):
            traj, diag = solve_truncated(cfg, ens, path)
            assert diag.converged
            assert diag.residual < 10.0 * cfg.tol_fp
            assert all(r < 0.5 for r in diag.ratios)

    def test_pathwise_uniqueness(self, rng):
        # different initial Picard guesses land on the same fixed point
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02)
        u0 = bounded_data(cfg.basis, rng, 0.2)
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02, u0=u0)
        traj, _ = solve_truncated(cfg)
        guess = _make_record(cfg, np.zeros((cfg.steps + 1, cfg.basis.size)),
                             np.zeros((cfg.steps + 1, cfg.basis.size)))
        for _ in range(40):
            nxt = picard_step(guess, cfg)
            if trajectory_y_distance(nxt, guess, cfg) < cfg.tol_fp:
                guess = nxt
                break
            guess = nxt
        assert trajectory_y_distance(guess, traj, cfg) < 10.0 * cfg.tol_fp

    def test_cutoff_inactivity_gives_untruncated_solution(self, rng):
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02)
        u0 = bounded_data(cfg.basis, rng, 0.2)
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02, u0=u0)
        traj, diag = solve_truncated(cfg)
        factors = _cutoff_factors(traj, cfg.cutoffs)
        assert np.all(factors == 1.0)
        # with all factors 1 the truncated map equals the untruncated one,
        # so the residual bound is a residual for the plain mild equation
        assert diag.residual < 10.0 * cfg.tol_fp

    def test_horizon_must_be_grid_multiple(self):
        with pytest.raises(ValueError):
            base_config(horizon=0.0505)

    def test_gamma_validated(self):
        with pytest.raises(ValueError):
            base_config(gamma=3.0)     # 2*gamma >= p = 4


class TestBudget:
    def setup_method(self):
        self.cut = CutoffParams(level=1, m=0.5, m_prime=0.3)
        self.triple = ExponentTriple.from_pq(4, 4)

    def budget_oracle(self, t, level, constants, gamma):
        # independent reimplementation of the two contributions
        n, m, p = float(level), self.cut.m, self.triple.p
        l2 = n * constants.c_f * (constants.c_t + constants.k_t) * (
            t + t ** (1 - gamma / p) * (2 * n) ** gamma / m ** gamma)
        l3 = n * constants.c_g * (constants.k_stoch + constants.c_tilde) * math.sqrt(
            t + t ** (1 - 2 * gamma / p) * (2 * n) ** (2 * gamma) / m ** (2 * gamma))
        return l2 + l3

    def test_monotone_and_vanishing(self):
        constants = BudgetConstants()
        ts = np.logspace(-12, 0, 60)
        vals = [self.budget_oracle(t, 1, constants, 0.25) for t in ts]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[0] < 1e-3          # -> 0 as T -> 0 (slowly, like T^0.44)

    def test_bisection_consistency(self):
        constants = BudgetConstants(c_f=2.0, c_g=1.5, c_t=1.2, k_t=0.7)
        dt = 1e-3
        t_star = contraction_budget(1, self.cut, self.triple, constants,
                                    0.25, 1.0, dt)
        assert self.budget_oracle(t_star, 1, constants, 0.25) <= 0.5
        assert self.budget_oracle(t_star + dt, 1, constants, 0.25) > 0.5

    def test_level_monotone(self):
        constants = BudgetConstants()
        t1 = contraction_budget(1, self.cut, self.triple, constants, 0.25, 1.0, 1e-4)
        t2 = contraction_budget(2, self.cut, self.triple, constants, 0.25, 1.0, 1e-4)
        assert t2 <= t1

    def test_constant_monotone(self):
        lo = BudgetConstants(c_f=0.5, c_g=0.5)
        hi = BudgetConstants(c_f=5.0, c_g=5.0)
        t_lo = contraction_budget(1, self.cut, self.triple, lo, 0.25, 1.0, 1e-4)
        t_hi = contraction_budget(1, self.cut, self.triple, hi, 0.25, 1.0, 1e-4)
        assert t_hi <= t_lo

    def test_zero_constants_return_horizon(self):
        constants = BudgetConstants(c_f=0.0, c_g=0.0)
        assert contraction_budget(1, self.cut, self.triple, constants,
                                  0.25, 0.7, 1e-3) == 0.7

    def test_unreachable_budget(self):
        constants = BudgetConstants(c_f=1e9, c_g=1e9)
        with pytest.raises(BudgetError):
            contraction_budget(1, self.cut, self.triple, constants, 0.25, 1.0, 1e-3)


class TestStopping:
    def test_zero_solution_reaches_horizon(self):
        cfg = base_config()
        traj, _ = solve_truncated(cfg)
        stop = detect_stopping(traj, 1, 0.3)
        assert stop.trigger is StopTrigger.HORIZON_END
        assert stop.tau_index is None

    def test_growth_triggers_z_threshold(self):
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 2.0)
        u0 = np.array([0.28 / math.sqrt(3.0)])      # ||u0||_HA just below M'
        u1 = np.array([1.0])                        # rotation grows the H_A norm
        cfg = base_config(cutoff=2.0, horizon=1.0, dt=1e-2, u0=u0, u1=u1)
        traj, _ = solve_truncated(cfg)
        stop = detect_stopping(traj, 5, 0.3)
        assert stop.trigger is StopTrigger.Z_NORM_REACHED_M_PRIME
        assert stop.tau_index is not None and stop.tau_index > 0
        assert traj.z[stop.tau_index] >= 0.3
        assert np.all(traj.z[:stop.tau_index] < 0.3)

    def test_monotone_in_level(self, rng):
        cfg = base_config(horizon=0.5, dt=1e-2,
                          u1=rng.standard_normal(base_config().basis.size))
        traj, _ = solve_truncated(cfg)
        taus = []
        for level in (1, 2, 5):
            stop = detect_stopping(traj, level, 10.0)   # Y trigger only
            taus.append(stop.tau_index if stop.tau_index is not None
                        else len(traj.times))
        assert taus[0] <= taus[1] <= taus[2]


class TestNesting:
    def test_equal_levels_identical(self, rng):
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02,
                          u0=bounded_data(base_config().basis, rng, 0.2))
        assert nesting_consistency(cfg, 1, 1) == 0.0

    def test_linear_problem_exact(self, rng):
        cfg = base_config(horizon=0.05,
                          u0=bounded_data(base_config().basis, rng, 0.2))
        assert nesting_consistency(cfg, 1, 2) < 1e-14

    def test_exponential_small_data(self, rng):
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02,
                          u0=bounded_data(base_config().basis, rng, 0.25))
        assert nesting_consistency(cfg, 1, 2) < 10.0 * cfg.tol_fp

    def test_level_order_enforced(self, rng):
        cfg = base_config()
        with pytest.raises(ValueError):
            nesting_consistency(cfg, 2, 1)


class TestRealizedDiffusion:
    def test_matches_picard_noise_term(self, rng):
        # the kicks the solver integrated equal the materialised process
        # contracted against the same increments
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 6.0)
        cfg = base_config(cutoff=6.0, kind=ExponentialCritical(),
                          noise=build_noise_basis(basis, 3),
                          horizon=0.01, u0=bounded_data(basis, rng, 0.2))
        ens = cfg.make_ensemble(seed=77, paths=1)
        traj, _ = solve_truncated(cfg, ens, 0)
        xi = realized_diffusion(traj, cfg)
        assert xi.provenance == "nemytskii"
        assert xi.xi.shape == (cfg.steps + 1, 3, basis.size)
        assert np.all(np.isfinite(xi.hs_norm_sq()))
        from stochwave.solver import _noise_kicks
        dw = ens.path_increments(0)
        kicks = _noise_kicks(traj, cfg, dw)
        manual = np.einsum("kjm,kj->km", xi.xi[:-1],
                           dw * np.sqrt(xi.mu))
        assert np.max(np.abs(kicks - manual)) < 1e-14

    def test_requires_noise(self, rng):
        cfg = base_config()
        traj, _ = solve_truncated(cfg)
        with pytest.raises(ValueError):
            realized_diffusion(traj, cfg)


class TestPairSystem:
    def test_linear_single_mode(self):
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 2.0)
        cfg = base_config(cutoff=2.0, horizon=1.0, dt=1e-3,
                          u0=np.array([0.5]), u1=np.array([0.1]))
        assert pair_system_crosscheck(cfg) < 1e-10

    def test_exponential_forcing(self, rng):
        cfg = base_config(kind=ExponentialCritical(), horizon=0.02,
                          u0=bounded_data(base_config().basis, rng, 0.25))
        assert pair_system_crosscheck(cfg) < 1e-6

    def test_with_noise(self, rng):
        basis = build_basis(PI, PI, BoundaryCondition.DIRICHLET, 8.0)
        cfg = base_config(kind=ExponentialCritical(),
                          noise=build_noise_basis(basis, 4),
                          horizon=0.02,
                          u0=bounded_data(basis, rng, 0.2))
        ens = cfg.make_ensemble(seed=21, paths=2)
        assert pair_system_crosscheck(cfg, ens, 1) < 1e-6
