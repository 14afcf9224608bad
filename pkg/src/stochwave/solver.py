"""Cutoff-truncated fixed-point construction of local mild solutions.

The mild map sends a candidate trajectory v to

    Psi(v)(t) = cos(t sqrt(A)) u0 + sin(t sqrt(A))/sqrt(A) u1
                + int_0^t theta_n(||v||_{Y_s}) theta_hat(||v||_{Z_s})
                          sin((t-s) sqrt(A))/sqrt(A) F(v(s)) ds
                + int_0^t theta_n(||v||_{Y_s}) theta_hat(||v||_{Z_s})
                          sin((t-s) sqrt(A))/sqrt(A) G(v(s)) dW(s),

with the Wiener increments frozen per path across iterations, so the
Picard iteration is a pathwise realisation of the contraction argument.
The linear flow is exact per mode; the deterministic time integral uses
the composite trapezoid rule with the exact trigonometric kernel
(factorised through the sine addition identity, so the whole trajectory
costs O(steps) kernel work); the stochastic term uses the left-point Ito
rule on the same grid.

Also here: the horizon budget that picks the largest T whose combined
Lipschitz bound stays below 1/2, stopping-time detection on the running
path norms, the nesting consistency check between truncation levels, and
the first-order pair-system cross-check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .nonlin import ExponentialCritical, ZeroNonlinearity
from .noise import NoiseBasis, WienerEnsemble
from .norms import ExponentTriple, trajectory_norm_series
from .spectral import Grid, SpectralBasis, SpectralField, sinc_multiplier

__all__ = [
    "CutoffShape",
    "CutoffParams",
    "SolverConfig",
    "TrajectoryRecord",
    "StoppingReport",
    "PicardDiagnostics",
    "BudgetConstants",
    "BudgetError",
    "ContractionError",
    "cutoff_theta",
    "cutoff_theta_hat",
    "linear_flow",
    "duhamel_deterministic",
    "realized_diffusion",
    "picard_step",
    "solve_truncated",
    "contraction_budget",
    "detect_stopping",
    "nesting_consistency",
    "pair_system_crosscheck",
    "trajectory_y_distance",
    "duhamel_integrals",
]


class BudgetError(RuntimeError):
    """No horizon above the grid step satisfies the contraction budget."""


class ContractionError(RuntimeError):
    """Picard iteration failed to contract; shorten the horizon via the budget."""


class CutoffShape(enum.Enum):
    LINEAR_RAMP = "linear"
    CUBIC_SMOOTH = "cubic"


def _ramp(s: np.ndarray, shape: CutoffShape) -> np.ndarray:
    """Descent from 1 at s=0 to 0 at s=1 on the transition interval."""
    s = np.clip(s, 0.0, 1.0)
    if shape is CutoffShape.LINEAR_RAMP:
        return 1.0 - s
    return 1.0 - s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class CutoffParams:
    """Truncation level and thresholds for the two cutoff switches.

    theta is 1 on [0, 1] and 0 from 2 on; theta_n(x) = theta(x/n).
    theta_hat is 1 on [0, M'] and 0 from M on.  The recorded Lipschitz
    constant of the chosen ramp is 1 for the linear shape and 3/2 for the
    cubic one (the smooth ramp cannot do better than 3/2 on a unit
    transition interval).
    """

    level: int
    m: float
    m_prime: float
    shape: CutoffShape = CutoffShape.LINEAR_RAMP

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("truncation level must be a positive integer")
        if not (0.0 < self.m_prime < self.m < 1.0):
            raise ValueError(f"need 0 < M' < M < 1, got M'={self.m_prime}, M={self.m}")

    @property
    def lip_theta(self) -> float:
        return 1.0 if self.shape is CutoffShape.LINEAR_RAMP else 1.5


def cutoff_theta(x, level: int, params: CutoffParams):
    """theta_n(x): 1 for x <= n, 0 for x >= 2n, monotone ramp between."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("cutoff arguments are norms; they must be >= 0")
    out = _ramp((x - level) / level, params.shape)
    return out if out.ndim else float(out)


def cutoff_theta_hat(x, params: CutoffParams):
    """theta_hat(x): 1 for x <= M', 0 for x >= M, monotone ramp between."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("cutoff arguments are norms; they must be >= 0")
    out = _ramp((x - params.m_prime) / (params.m - params.m_prime), params.shape)
    return out if out.ndim else float(out)


@dataclass
class TrajectoryRecord:
    """Grid trajectory of the pair (u, u_t) with running path norms."""

    basis: SpectralBasis
    triple: ExponentTriple
    times: np.ndarray               # (nodes,)
    u: np.ndarray                   # (nodes, M)
    ut: np.ndarray                  # (nodes, M)
    z: np.ndarray                   # running sup of the energy norm
    x: np.ndarray                   # running L^p-in-time target norm
    y: np.ndarray                   # (z^p + x^p)^(1/p)
    stopping: "StoppingReport | None" = None

    def field_at(self, index: int) -> SpectralField:
        return SpectralField(self.basis, self.u[index].copy())


class StopTrigger(enum.Enum):
    Z_NORM_REACHED_M_PRIME = "ZNormReachedMprime"
    Y_NORM_REACHED_N = "YNormReachedN"
    HORIZON_END = "HorizonEnd"


@dataclass
class StoppingReport:
    tau_index: int | None
    trigger: StopTrigger
    time: float
    z_value: float
    y_value: float


@dataclass
class PicardDiagnostics:
    iterations: int
    differences: list
    ratios: list
    residual: float
    converged: bool
    horizon: float


@dataclass
class SolverConfig:
    """Everything one truncated solve needs.

    The initial data are coefficient vectors on the basis.  ``gamma`` is
    the growth exponent of the local-Lipschitz assumption and must
    satisfy 2*gamma < p.
    """

    basis: SpectralBasis
    grid: Grid
    triple: ExponentTriple
    cutoffs: CutoffParams
    kind: object = field(default_factory=ZeroNonlinearity)
    noise: NoiseBasis | None = None
    diffusion_kind: object = field(default_factory=ExponentialCritical)
    u0: np.ndarray | None = None
    u1: np.ndarray | None = None
    horizon: float = 1.0
    dt: float = 1e-3
    tol_fp: float = 1e-8
    max_iter: int = 60
    gamma: float = 0.5

    def __post_init__(self):
        if self.horizon <= 0 or self.dt <= 0:
            raise ValueError("horizon and dt must be positive")
        if self.tol_fp <= 0:
            raise ValueError("tol_fp must be positive")
        if not 2.0 * self.gamma < self.triple.p:
            raise ValueError(
                f"the growth exponent must satisfy 2*gamma < p: "
                f"gamma={self.gamma}, p={self.triple.p}"
            )
        m = self.basis.size
        self.u0 = np.zeros(m) if self.u0 is None else np.asarray(self.u0, dtype=float)
        self.u1 = np.zeros(m) if self.u1 is None else np.asarray(self.u1, dtype=float)
        if self.u0.shape != (m,) or self.u1.shape != (m,):
            raise ValueError("initial data must be coefficient vectors on the basis")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("horizon must be a whole number of time steps")

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def has_nonlinearity(self) -> bool:
        return not isinstance(self.kind, ZeroNonlinearity)

    @property
    def has_noise(self) -> bool:
        return self.noise is not None

    def with_horizon(self, horizon: float) -> "SolverConfig":
        return replace(self, horizon=horizon)

    def with_level(self, level: int) -> "SolverConfig":
        return replace(self, cutoffs=replace(self.cutoffs, level=level))

    def make_ensemble(self, seed: int, paths: int) -> WienerEnsemble:
        if self.noise is None:
            raise ValueError("config has no noise basis")
        return WienerEnsemble(seed=seed, paths=paths, steps=self.steps,
                              dt=self.dt, channels=self.noise.channels)


def _make_record(config: SolverConfig, u: np.ndarray, ut: np.ndarray) -> TrajectoryRecord:
    z, x, y = trajectory_norm_series(
        config.times, u, config.basis, config.triple,
        grid=None if config.triple.q == 2 else config.grid,
    )
    return TrajectoryRecord(
        basis=config.basis, triple=config.triple, times=config.times,
        u=u, ut=ut, z=z, x=x, y=y,
    )


def linear_flow(config: SolverConfig) -> TrajectoryRecord:
    """The exact F = G = 0 evolution of the initial pair."""
    lam = config.basis.lam
    t = config.times
    cos = np.cos(np.outer(t, lam))
    sinc = t[:, None] * np.sinc(np.outer(t, lam) / math.pi)
    sin = np.sin(np.outer(t, lam))
    u = cos * config.u0 + sinc * config.u1
    ut = -(lam * sin) * config.u0 + cos * config.u1
    return _make_record(config, u, ut)


def _cutoff_factors(record: TrajectoryRecord, cutoffs: CutoffParams) -> np.ndarray:
    return (cutoff_theta(record.y, cutoffs.level, cutoffs)
            * cutoff_theta_hat(record.z, cutoffs))


def _trapezoid_prefix(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Composite-trapezoid running integral along axis 0."""
    inc = 0.5 * (values[1:] + values[:-1]) * np.diff(times)[:, None]
    out = np.zeros_like(values)
    out[1:] = np.cumsum(inc, axis=0)
    return out


def duhamel_integrals(times: np.ndarray, lam: np.ndarray, forcing: np.ndarray):
    """Trapezoid integrals of both wave kernels against nodal forcing.

    Returns (I, J) with I(t_n) = int_0^{t_n} sin(lam (t_n - s))/lam f(s) ds
    and J(t_n) = int_0^{t_n} cos(lam (t_n - s)) f(s) ds, assembled through
    the addition identities so the whole trajectory is O(nodes) work.
    """
    cos_t = np.cos(np.outer(times, lam))
    sin_t = np.sin(np.outer(times, lam))
    sinc_t = times[:, None] * np.sinc(np.outer(times, lam) / math.pi)
    a = _trapezoid_prefix(times, cos_t * forcing)           # int cos(lam s) f
    b = _trapezoid_prefix(times, sinc_t * forcing)          # int sin(lam s)/lam f
    c = _trapezoid_prefix(times, sin_t * forcing)           # int sin(lam s) f
    i_series = sinc_t * a - cos_t * b
    j_series = cos_t * a + sin_t * c
    return i_series, j_series


def _forcing_nodes(record: TrajectoryRecord, config: SolverConfig) -> np.ndarray:
    """Cutoff-modulated nodal forcing coefficients of F along a trajectory."""
    if not config.has_nonlinearity:
        return np.zeros_like(record.u)
    factors = _cutoff_factors(record, config.cutoffs)
    fields = config.grid.synth(record.u)
    f_vals = config.kind.apply(fields)
    return factors[:, None] * config.grid.project(f_vals)


def _noise_kicks(record: TrajectoryRecord, config: SolverConfig,
                 dw: np.ndarray) -> np.ndarray:
    """Left-point kicks sum_j sqrt(mu_j) theta theta_hat G(v(t_k)) f_j dW_kj."""
    noise = config.noise
    factors = _cutoff_factors(record, config.cutoffs)[:-1]
    fields = config.grid.synth(record.u[:-1])
    g_vals = config.diffusion_kind.apply(fields)
    chan = noise.channel_values(config.grid)                # (J, nx, ny)
    weighted_dw = dw * np.sqrt(noise.mu)                    # (steps, J)
    # combined kick field per step: sum_j w_kj g(v_k) f_j
    kick_fields = np.einsum("kxy,jxy,kj->kxy", g_vals, chan, weighted_dw,
                            optimize=True)
    kicks = config.grid.project(kick_fields)
    return factors[:, None] * kicks


def _noise_pair(times: np.ndarray, lam: np.ndarray, kicks: np.ndarray):
    """Group-factorised left-point Ito sums for (u, u_t)."""
    nodes = len(times)
    tk = times[:-1]
    cos_k = np.cos(np.outer(tk, lam))
    sin_k = np.sin(np.outer(tk, lam))
    sinc_k = tk[:, None] * np.sinc(np.outer(tk, lam) / math.pi)
    p = np.cumsum(cos_k * kicks, axis=0)
    q = np.cumsum(sinc_k * kicks, axis=0)
    s = np.cumsum(sin_k * kicks, axis=0)
    u = np.zeros((nodes, lam.shape[0]))
    ut = np.zeros((nodes, lam.shape[0]))
    tn = times[1:]
    cos_n = np.cos(np.outer(tn, lam))
    sin_n = np.sin(np.outer(tn, lam))
    sinc_n = tn[:, None] * np.sinc(np.outer(tn, lam) / math.pi)
    u[1:] = sinc_n * p - cos_n * q
    ut[1:] = cos_n * p + sin_n * s
    return u, ut


def realized_diffusion(record: TrajectoryRecord, config: SolverConfig):
    """The cutoff-modulated Nemytskii process along a solved trajectory.

    Materialises xi(t_k) f_j = theta theta_hat (g o u(t_k)) f_j as a
    DiffusionProcess (channel weights included via the noise basis), so
    the moment estimators can be pointed at a realised solution.
    """
    from .convolution import DiffusionProcess

    noise = config.noise
    if noise is None:
        raise ValueError("config has no noise basis")
    factors = _cutoff_factors(record, config.cutoffs)
    fields = config.grid.synth(record.u)
    g_vals = config.diffusion_kind.apply(fields)
    chan = noise.channel_values(config.grid)                # (J, nx, ny)
    images = g_vals[:, None, :, :] * chan[None, :, :, :]
    xi = factors[:, None, None] * config.grid.project(images)
    return DiffusionProcess(basis=config.basis, times=config.times.copy(),
                            xi=xi, mu=noise.mu.copy(), provenance="nemytskii")


def duhamel_deterministic(
    v: TrajectoryRecord,
    t_n: float,
    config: SolverConfig,
) -> SpectralField:
    """The cutoff-modulated deterministic Duhamel integral at a grid time."""
    idx = int(round(t_n / config.dt))
    if not 0 <= idx <= config.steps or abs(idx * config.dt - t_n) > 1e-9:
        raise ValueError(f"t={t_n} is not a node of the solver grid")
    forcing = _forcing_nodes(v, config)
    i_series, _ = duhamel_integrals(config.times, config.basis.lam, forcing)
    return SpectralField(config.basis, i_series[idx].copy())


def picard_step(
    v: TrajectoryRecord,
    config: SolverConfig,
    dw: np.ndarray | None = None,
) -> TrajectoryRecord:
    """One application of the truncated mild map to a candidate trajectory.

    ``dw`` holds the frozen Wiener increments of the path ((steps, J) or
    None when the config carries no noise).
    """
    base = linear_flow(config)
    u = base.u.copy()
    ut = base.ut.copy()
    if config.has_nonlinearity:
        forcing = _forcing_nodes(v, config)
        i_series, j_series = duhamel_integrals(config.times, config.basis.lam, forcing)
        u += i_series
        ut += j_series
    if config.has_noise:
        if dw is None:
            raise ValueError("a noise config needs the path increments")
        kicks = _noise_kicks(v, config, dw)
        nu, nut = _noise_pair(config.times, config.basis.lam, kicks)
        u += nu
        ut += nut
    return _make_record(config, u, ut)


def trajectory_y_distance(a: TrajectoryRecord, b: TrajectoryRecord,
                          config: SolverConfig) -> float:
    """Y-norm of the difference trajectory over the full horizon."""
    _, _, y = trajectory_norm_series(
        config.times, a.u - b.u, config.basis, config.triple,
        grid=None if config.triple.q == 2 else config.grid,
    )
    return float(y[-1])


def solve_truncated(
    config: SolverConfig,
    ensemble: WienerEnsemble | None = None,
    path: int = 0,
) -> tuple[TrajectoryRecord, PicardDiagnostics]:
    """Picard iteration of the truncated mild map to its fixed point.

    Starts from the linear flow, freezes the Wiener increments of the
    chosen path across iterations, and stops when the Y-norm of the
    successive difference drops below tol_fp.  Three consecutive
    non-contracting steps abort with a hint at contraction_budget.
    """
    if (config.has_nonlinearity or config.has_noise):
        u0_energy = float(np.linalg.norm(np.sqrt(1.0 + config.basis.lam_sq) * config.u0))
        if u0_energy >= 1.0:
            raise ValueError(
                f"the local theory needs ||u0||_HA < 1, got {u0_energy:.4g}"
            )
    dw = None
    if config.has_noise:
        if ensemble is None:
            raise ValueError("a noise config needs a WienerEnsemble")
        if ensemble.steps != config.steps or ensemble.dt != config.dt:
            raise ValueError("ensemble grid does not match the solver grid")
        dw = ensemble.path_increments(path)
    current = linear_flow(config)
    diffs: list[float] = []
    ratios: list[float] = []
    converged = False
    bad_streak = 0
    for _ in range(config.max_iter):
        nxt = picard_step(current, config, dw)
        d = trajectory_y_distance(nxt, current, config)
        if diffs:
            ratio = d / diffs[-1] if diffs[-1] > 0 else 0.0
            ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                raise ContractionError(
                    "Picard ratios stayed >= 1 for three consecutive "
                    "iterations; the horizon is too long for this data - "
                    "pick T with contraction_budget"
                )
        diffs.append(d)
        current = nxt
        if d < config.tol_fp:
            converged = True
            break
    residual = trajectory_y_distance(picard_step(current, config, dw), current, config)
    diag = PicardDiagnostics(
        iterations=len(diffs), differences=diffs, ratios=ratios,
        residual=residual, converged=converged, horizon=config.horizon,
    )
    current.stopping = detect_stopping(current, config.cutoffs.level,
                                       config.cutoffs.m_prime)
    return current, diag


@dataclass(frozen=True)
class BudgetConstants:
    """Constants entering the horizon budget (empirical or configured)."""

    c_f: float = 1.0
    c_g: float = 1.0
    c_t: float = 1.0
    k_t: float = 1.0
    k_stoch: float = 1.0
    c_tilde: float = 1.0


def contraction_budget(
    level: int,
    cutoffs: CutoffParams,
    triple: ExponentTriple,
    constants: BudgetConstants,
    gamma: float,
    horizon: float,
    dt: float,
) -> float:
    """Largest grid-representable T whose Lipschitz budget stays <= 1/2.

    The two contributions are

        L2(T) = n C_F (C_T + K_T) (T + T^(1-g/p) (2n)^g / M^g)
        L3(T) = n C_G (K + C~)    (T + T^(1-2g/p) (2n)^(2g) / M^(2g))^(1/2)

    both strictly increasing in T and vanishing at T -> 0, so bisection
    over grid multiples of dt finds the answer.  Raises BudgetError when
    even T = dt overshoots.
    """
    p = triple.p
    if not gamma < p or not 2.0 * gamma < p:
        raise ValueError("budget needs gamma < p and 2*gamma < p")
    if constants.c_f == 0.0 and constants.c_g == 0.0:
        return horizon
    m = cutoffs.m
    n = float(level)
    gp = 0.0 if p == math.inf else gamma / p
    g2p = 0.0 if p == math.inf else 2.0 * gamma / p

    def total(t: float) -> float:
        l2 = n * constants.c_f * (constants.c_t + constants.k_t) * (
            t + t ** (1.0 - gp) * (2.0 * n) ** gamma / m ** gamma
        )
        l3 = n * constants.c_g * (constants.k_stoch + constants.c_tilde) * math.sqrt(
            t + t ** (1.0 - g2p) * (2.0 * n) ** (2.0 * gamma) / m ** (2.0 * gamma)
        )
        return l2 + l3

    max_steps = int(math.floor(horizon / dt + 1e-9))
    if max_steps < 1:
        raise BudgetError("horizon shorter than one grid step")
    if total(dt) > 0.5:
        raise BudgetError(
            "even one grid step violates the contraction budget; "
            "reduce the constants, the truncation level or dt"
        )
    if total(max_steps * dt) <= 0.5:
        return max_steps * dt
    lo, hi = 1, max_steps                 # total(lo*dt) <= 1/2 < total(hi*dt)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if total(mid * dt) <= 0.5:
            lo = mid
        else:
            hi = mid
    return lo * dt


def detect_stopping(traj: TrajectoryRecord, level: int, m_prime: float) -> StoppingReport:
    """First grid index where Z reaches M' or Y reaches the level n.

    The running norms are cached on the record; the Z trigger is checked
    first at each node.  With ||u0||_HA < M' the returned index is
    strictly positive.
    """
    for k in range(len(traj.times)):
        if traj.z[k] >= m_prime:
            return StoppingReport(
                tau_index=k, trigger=StopTrigger.Z_NORM_REACHED_M_PRIME,
                time=float(traj.times[k]), z_value=float(traj.z[k]),
                y_value=float(traj.y[k]),
            )
        if traj.y[k] >= level:
            return StoppingReport(
                tau_index=k, trigger=StopTrigger.Y_NORM_REACHED_N,
                time=float(traj.times[k]), z_value=float(traj.z[k]),
                y_value=float(traj.y[k]),
            )
    return StoppingReport(
        tau_index=None, trigger=StopTrigger.HORIZON_END,
        time=float(traj.times[-1]), z_value=float(traj.z[-1]),
        y_value=float(traj.y[-1]),
    )


def nesting_consistency(
    config: SolverConfig,
    level_low: int,
    level_high: int,
    ensemble: WienerEnsemble | None = None,
    path: int = 0,
) -> float:
    """Solve at two truncation levels on identical increments.

    Returns the max over grid times up to the low level's stopping index
    of the energy-norm discrepancy between the two solutions.
    """
    if level_low > level_high:
        raise ValueError("levels must satisfy n <= k")
    low, _ = solve_truncated(config.with_level(level_low), ensemble, path)
    high, _ = solve_truncated(config.with_level(level_high), ensemble, path)
    stop = detect_stopping(low, level_low, config.cutoffs.m_prime)
    last = stop.tau_index if stop.tau_index is not None else len(low.times) - 1
    energy = np.sqrt(1.0 + config.basis.lam_sq)
    diff = np.linalg.norm((low.u[: last + 1] - high.u[: last + 1]) * energy, axis=1)
    return float(np.max(diff))


def pair_system_crosscheck(
    config: SolverConfig,
    ensemble: WienerEnsemble | None = None,
    path: int = 0,
) -> float:
    """First-order pair evolution versus the scalar mild formula.

    Solves the scalar fixed point, then re-evolves the pair (u, u_t)
    step by step with the per-mode rotation S(dt), feeding it the same
    realised forcing nodes and noise kicks, and returns the max
    energy-norm discrepancy of the first components.
    """
    traj, _ = solve_truncated(config, ensemble, path)
    forcing = _forcing_nodes(traj, config)
    if config.has_noise:
        dw = ensemble.path_increments(path)
        kicks = _noise_kicks(traj, config, dw)
    else:
        kicks = np.zeros((config.steps, config.basis.size))
    lam = config.basis.lam
    dt = config.dt
    cos_dt = np.cos(lam * dt)
    sin_dt = np.sin(lam * dt)
    sinc_dt = sinc_multiplier(lam, dt)
    u = config.u0.copy()
    v = config.u1.copy()
    energy = np.sqrt(1.0 + config.basis.lam_sq)
    worst = 0.0
    for k in range(config.steps):
        # S(dt)[(u, v) + (0, kick + dt/2 f_k)] + (0, dt/2 f_{k+1})
        v_in = v + kicks[k] + 0.5 * dt * forcing[k]
        u_new = cos_dt * u + sinc_dt * v_in
        v_new = -lam * sin_dt * u + cos_dt * v_in
        v_new += 0.5 * dt * forcing[k + 1]
        u, v = u_new, v_new
        worst = max(worst, float(np.linalg.norm((u - traj.u[k + 1]) * energy)))
    return worst
