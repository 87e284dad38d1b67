"""Coordinated-turn target simulation with a bearing/range sensor field and
per-dimension outlier or missing-data corruption."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import NonlinearSSM, chol_lower

# state layout: [a, a_dot, b, b_dot, omega]
TRACKING_X0 = np.array([-10000.0, 10.0, 5000.0, -5.0, -0.0524])

OMEGA_CV_LIMIT = 1e-9


@dataclass(frozen=True)
class TurnModelConfig:
    dt: float = 1.0
    eta1: float = 0.1
    eta2: float = 1.75e-4

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.eta1 < 0.0 or self.eta2 < 0.0:
            raise ValueError("noise scales must be >= 0")


def turn_transition(state, cfg: TurnModelConfig):
    """Apply the constant-turn-rate transition; batch shapes (..., 5) allowed.

    Below |omega| = 1e-9 the constant-velocity limit is used:
    sin(w dt)/w -> dt and (1 - cos(w dt))/w -> 0.
    """
    x = np.asarray(state, dtype=float)
    a, a_dot, b, b_dot, omega = (x[..., i] for i in range(5))
    wdt = omega * cfg.dt
    sin_w, cos_w = np.sin(wdt), np.cos(wdt)
    near_zero = np.abs(omega) < OMEGA_CV_LIMIT
    safe = np.where(near_zero, 1.0, omega)
    coef_a = np.where(near_zero, cfg.dt, sin_w / safe)
    coef_d = np.where(near_zero, 0.0, (1.0 - cos_w) / safe)
    out = np.empty_like(x)
    out[..., 0] = a + coef_a * a_dot - coef_d * b_dot
    out[..., 1] = cos_w * a_dot - sin_w * b_dot
    out[..., 2] = coef_d * a_dot + b + coef_a * b_dot
    out[..., 3] = sin_w * a_dot + cos_w * b_dot
    out[..., 4] = omega
    return out


def process_noise_cov(cfg: TurnModelConfig) -> np.ndarray:
    """Block-diagonal Q: eta1*M per position-velocity pair, eta2 for omega,
    with M = [[dt^3/3, dt^2/2], [dt^2/2, dt]]."""
    dt = cfg.dt
    m_block = np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]])
    q = np.zeros((5, 5))
    q[0:2, 0:2] = cfg.eta1 * m_block
    q[2:4, 2:4] = cfg.eta1 * m_block
    q[4, 4] = cfg.eta2
    return q


@dataclass(frozen=True)
class SensorField:
    """m/2 bearing sensors and m/2 range sensors at fixed 2D positions."""

    bearing_pos: np.ndarray
    range_pos: np.ndarray

    def __post_init__(self) -> None:
        bearing = np.atleast_2d(np.asarray(self.bearing_pos, dtype=float))
        rng_pos = np.atleast_2d(np.asarray(self.range_pos, dtype=float))
        if bearing.shape != rng_pos.shape or bearing.shape[1] != 2:
            raise ValueError("bearing and range positions must both be (p, 2)")
        object.__setattr__(self, "bearing_pos", bearing)
        object.__setattr__(self, "range_pos", rng_pos)

    @property
    def num_pairs(self) -> int:
        return self.bearing_pos.shape[0]

    @property
    def meas_dim(self) -> int:
        return 2 * self.num_pairs

    @classmethod
    def lattice(cls, num_pairs: int) -> "SensorField":
        """Default layout: bearing j at (350(j-1), 350(j mod 2)) and range j
        at (350(j-1), 350((j-1) mod 2)), for j = 1..num_pairs."""
        j = np.arange(1, num_pairs + 1)
        bearing = np.column_stack([350.0 * (j - 1), 350.0 * (j % 2)])
        rng_pos = np.column_stack([350.0 * (j - 1), 350.0 * ((j - 1) % 2)])
        return cls(bearing_pos=bearing, range_pos=rng_pos)


def clean_measurement(state, field: SensorField):
    """Noise-free readings: bearings (radians) first, ranges (meters) last.

    Bearing j is atan2(b - b_j, a - a_j); a target exactly on a bearing
    sensor makes atan2(0, 0) meaningless and is a hard error.
    """
    x = np.asarray(state, dtype=float)
    a = x[..., 0:1]
    b = x[..., 2:3]
    da_bear = a - field.bearing_pos[:, 0]
    db_bear = b - field.bearing_pos[:, 1]
    if np.any((da_bear == 0.0) & (db_bear == 0.0)):
        raise ValueError("target position coincides with a bearing sensor")
    bearings = np.arctan2(db_bear, da_bear)
    ranges = np.hypot(a - field.range_pos[:, 0], b - field.range_pos[:, 1])
    return np.concatenate([bearings, ranges], axis=-1)


@dataclass(frozen=True)
class CorruptionConfig:
    """Per-dimension corruption: heavy-tailed mixture noise or dropped readings.

    mode "outliers": with probability lam the additive noise variance is
    inflated by gamma; otherwise nominal.  mode "missing": with probability
    lam the reading is replaced by the 0.0 sentinel, no noise added.
    gamma_law is either a fixed value >= 1 or a (low, high) uniform interval.
    """

    mode: str = "outliers"
    lam: float = 0.0
    gamma_law: float | tuple[float, float] = 1.0
    sigma_theta: float = 3.5e-3
    sigma_rho: float = 10.0

    def __post_init__(self) -> None:
        if self.mode not in ("outliers", "missing"):
            raise ValueError("mode must be 'outliers' or 'missing'")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.sigma_theta <= 0.0 or self.sigma_rho <= 0.0:
            raise ValueError("nominal noise sigmas must be > 0")
        law = self.gamma_law
        if isinstance(law, (tuple, list)):
            low, high = float(law[0]), float(law[1])
            if low < 1.0 or high < low:
                raise ValueError("gamma interval must satisfy 1 <= low <= high")
            object.__setattr__(self, "gamma_law", (low, high))
        elif float(law) < 1.0:
            raise ValueError("fixed gamma must be >= 1")


def nominal_sigmas(cfg: CorruptionConfig, meas_dim: int) -> np.ndarray:
    """Per-dimension nominal noise stds: sigma_theta then sigma_rho halves."""
    if meas_dim % 2 != 0:
        raise ValueError("meas_dim must be even (bearing/range pairs)")
    half = meas_dim // 2
    return np.concatenate(
        [np.full(half, cfg.sigma_theta), np.full(half, cfg.sigma_rho)]
    )


def sample_gamma(cfg: CorruptionConfig, rng: np.random.Generator) -> float:
    """Draw the variance-inflation factor; fixed laws return their value."""
    if isinstance(cfg.gamma_law, tuple):
        return float(rng.uniform(*cfg.gamma_law))
    return float(cfg.gamma_law)


def corrupt(
    clean, cfg: CorruptionConfig, rng: np.random.Generator, gamma: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Corrupt one clean measurement vector.

    Returns (values, flags) where flags marks the dimensions hit this step.
    gamma should be passed in by trajectory-level callers, which draw it once
    per run; left as None it is sampled per call.
    """
    clean = np.atleast_1d(np.asarray(clean, dtype=float))
    m = clean.size
    sigmas = nominal_sigmas(cfg, m)
    if gamma is None:
        gamma = sample_gamma(cfg, rng)
    flags = rng.random(m) < cfg.lam
    if cfg.mode == "outliers":
        stds = np.where(flags, np.sqrt(gamma) * sigmas, sigmas)
        values = clean + stds * rng.standard_normal(m)
    else:
        values = np.where(flags, 0.0, clean + sigmas * rng.standard_normal(m))
    return values, flags


@dataclass(frozen=True)
class TrajectoryData:
    states: np.ndarray  # (K, 5)
    clean: np.ndarray  # (K, m)
    measurements: np.ndarray  # (K, m)
    flags: np.ndarray  # (K, m) bool
    gamma: float

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, [0, 2]]


def simulate_trajectory(
    turn_cfg: TurnModelConfig,
    field: SensorField,
    corruption: CorruptionConfig,
    num_steps: int,
    rng: np.random.Generator,
    x0=TRACKING_X0,
) -> TrajectoryData:
    """Propagate the true state with process noise and emit corrupted readings."""
    m = field.meas_dim
    q_root = chol_lower(process_noise_cov(turn_cfg), "process cov")
    gamma = sample_gamma(corruption, rng)
    states = np.empty((num_steps, 5))
    clean = np.empty((num_steps, m))
    values = np.empty((num_steps, m))
    flags = np.empty((num_steps, m), dtype=bool)
    x = np.asarray(x0, dtype=float)
    for k in range(num_steps):
        x = turn_transition(x, turn_cfg) + q_root @ rng.standard_normal(5)
        states[k] = x
        clean[k] = clean_measurement(x, field)
        values[k], flags[k] = corrupt(clean[k], corruption, rng, gamma)
    return TrajectoryData(
        states=states, clean=clean, measurements=values, flags=flags, gamma=gamma
    )


def make_tracking_model(
    field: SensorField,
    turn_cfg: TurnModelConfig | None = None,
    sigma_theta: float = 3.5e-3,
    sigma_rho: float = 10.0,
) -> NonlinearSSM:
    """Filter-side model for the tracking world: coordinated-turn dynamics,
    bearing/range measurements, bearings flagged as angular."""
    turn_cfg = turn_cfg or TurnModelConfig()
    half = field.num_pairs
    meas_var = np.concatenate(
        [np.full(half, sigma_theta**2), np.full(half, sigma_rho**2)]
    )
    mask = np.concatenate([np.ones(half, dtype=bool), np.zeros(half, dtype=bool)])
    return NonlinearSSM(
        state_dim=5,
        meas_dim=field.meas_dim,
        process_fn=lambda x: turn_transition(x, turn_cfg),
        meas_fn=lambda x: clean_measurement(x, field),
        process_cov=process_noise_cov(turn_cfg),
        meas_var_diag=meas_var,
        angular_mask=mask,
        vectorized=True,
    )


def dump_trajectory_csv(path, traj: TrajectoryData) -> None:
    """Write one row per step: k, the 5 true state entries, y, corruption flags."""
    m = traj.measurements.shape[1]
    header = (
        ["k", "a", "a_dot", "b", "b_dot", "omega"]
        + [f"y{i + 1}" for i in range(m)]
        + [f"flag{i + 1}" for i in range(m)]
    )
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for k in range(traj.states.shape[0]):
            row = (
                [k + 1]
                + [repr(float(v)) for v in traj.states[k]]
                + [repr(float(v)) for v in traj.measurements[k]]
                + [int(v) for v in traj.flags[k]]
            )
            writer.writerow(row)
