"""Ensemble dynamical order parameters and per-trajectory time-integrated counters.

Ensemble quantities are exact expectation values over the outcome
distribution of the average channel: single-time tables p(k) = Tr[K_k rho
K_k^dag], two-time tables with the channel propagating between the two
measurements, and the site-resolved activity / space-time covariance built
from them. Trajectory quantities are plain counting statistics on recorded
outcome arrays.
"""

from dataclasses import dataclass

import numpy as np

from . import model
from .channel import KrausFamily, apply_channel, apply_dual_channel
from .errors import NumericalConsistencyError


def outcome_marginals(kf: KrausFamily, rho_prev: np.ndarray) -> np.ndarray:
    """p(k) = Tr[K_k rho K_k^dag] for every outcome string k."""
    p = np.einsum("kij,kij->k", kf.ops @ rho_prev, kf.ops.conj()).real
    if p.min() < -1e-10:
        raise NumericalConsistencyError(f"negative outcome probability {p.min()}")
    return p


def two_time_probabilities(kf: KrausFamily, rho_base: np.ndarray, dt_steps: int) -> np.ndarray:
    """Joint table p[k_later, k_earlier] for outcomes separated by dt_steps.

    rho_base is the state one step before the earlier measurement; the
    channel bridges the dt_steps - 1 unobserved steps in between.
    """
    if dt_steps < 1:
        raise ValueError("dt_steps must be >= 1")
    n = kf.n_outcomes
    joint = np.empty((n, n))
    for k_early in range(n):
        sandwich = kf.ops[k_early] @ rho_base @ kf.ops[k_early].conj().T
        for _ in range(dt_steps - 1):
            sandwich = apply_channel(kf, sandwich)
        joint[:, k_early] = np.einsum(
            "kij,kij->k", kf.ops @ sandwich, kf.ops.conj()
        ).real
    if joint.min() < -1e-10:
        raise NumericalConsistencyError(f"negative joint probability {joint.min()}")
    return joint


def ensemble_activity(kf: KrausFamily, rho_prev: np.ndarray) -> float:
    """Mean fraction of '1' outcomes per site in the step following rho_prev.

    Equal to sum_k p(k) popcount(k) / L; evaluated through the cached count
    operator sum_k popcount(k) K_k^dag K_k for speed along time series.
    """
    return float(np.einsum("ij,ji->", kf.activity_op(), rho_prev).real) / kf.params.L


@dataclass(frozen=True)
class SpaceTimeOffset:
    di: int
    dt_steps: int

    def __post_init__(self):
        if self.dt_steps < 0:
            raise ValueError("dt_steps must be >= 0")
        if self.dt_steps == 0 and self.di == 0:
            raise ValueError("offset (0,0) is the activity counter, not a correlation")


def _pair_ops(kf: KrausFamily, di: int, dt_steps: int) -> np.ndarray:
    """X_i = sum_{k'} k'_i K_{k'}^dag (E*)^{dt-1}[M_{i+di}] K_{k'}, stacked over i.

    Tr[X_i rho] = E[k_i(earlier) * k_{i+di}(later)] with rho one step before
    the earlier measurement. Cached on the family per (di, dt_steps).
    """
    key = ("pair_ops", di, dt_steps)
    if key not in kf._cache:
        L = kf.params.L
        counts = kf.site_count_ops()
        evolved = counts
        for _ in range(dt_steps - 1):
            evolved = np.stack([apply_dual_channel(kf, N) for N in evolved])
        bits = model.site_bits(L).astype(float)
        X = np.empty_like(counts)
        from .channel import kraus_sandwich

        for i in range(L):
            j = (i + di) % L
            X[i] = kraus_sandwich(kf.ops, evolved[j], weights=bits[:, i])
        kf._cache[key] = X
    return kf._cache[key]


def ensemble_correlation(kf: KrausFamily, rho_base: np.ndarray, offset) -> float:
    """Site-averaged covariance of outcomes at space-time offset (di, dt_steps).

    For dt_steps >= 1, rho_base is the state one step before the earlier
    measurement; for dt_steps = 0 both bits come from the same outcome string.
    """
    if not isinstance(offset, SpaceTimeOffset):
        offset = SpaceTimeOffset(*offset)
    L = kf.params.L
    bits = model.site_bits(L).astype(float)

    if offset.dt_steps == 0:
        p = outcome_marginals(kf, rho_base)
        singles = p @ bits
        acc = 0.0
        for i in range(L):
            j = (i + offset.di) % L
            acc += p @ (bits[:, i] * bits[:, j]) - singles[i] * singles[j]
        return float(acc) / L

    X = _pair_ops(kf, offset.di, offset.dt_steps)
    counts = kf.site_count_ops()
    rho_late = rho_base
    for _ in range(offset.dt_steps):
        rho_late = apply_channel(kf, rho_late)
    early = np.einsum("iab,ba->i", counts, rho_base).real
    late = np.einsum("iab,ba->i", counts, rho_late).real
    cross = np.einsum("iab,ba->i", X, rho_base).real
    acc = sum(cross[i] - early[i] * late[(i + offset.di) % L] for i in range(L))
    return float(acc) / L


def evolve_series(kf: KrausFamily, rho0: np.ndarray, T: int) -> list:
    """[rho(0), rho(1), ..., rho(T)] under the average channel."""
    out = [rho0]
    rho = rho0
    for _ in range(T):
        rho = apply_channel(kf, rho)
        out.append(rho)
    return out


def activity_series(kf: KrausFamily, rho0: np.ndarray, T: int) -> np.ndarray:
    """a(t) for t = 1..T from rho(0) = rho0."""
    out = np.empty(T)
    rho = rho0
    for t in range(T):
        out[t] = ensemble_activity(kf, rho)
        rho = apply_channel(kf, rho)
    return out


def correlation_series(kf: KrausFamily, rho0: np.ndarray, T: int, offsets) -> dict:
    """c_delta(t) for t = 1+dt..T, keyed by offset tuple."""
    offsets = [o if isinstance(o, SpaceTimeOffset) else SpaceTimeOffset(*o) for o in offsets]
    rhos = evolve_series(kf, rho0, T)
    out = {}
    for off in offsets:
        ts, vals = [], []
        for t in range(1 + off.dt_steps, T + 1):
            ts.append(t)
            vals.append(ensemble_correlation(kf, rhos[t - off.dt_steps - 1], off))
        out[(off.di, off.dt_steps)] = (np.array(ts), np.array(vals))
    return out


def stationary_order_parameters(kf: KrausFamily, rho_ss: np.ndarray, offsets) -> dict:
    """Activity and correlations evaluated on a stationary state."""
    values = {"activity": ensemble_activity(kf, rho_ss)}
    for off in offsets:
        off = off if isinstance(off, SpaceTimeOffset) else SpaceTimeOffset(*off)
        values[f"c_{off.di}_{off.dt_steps}"] = ensemble_correlation(kf, rho_ss, off)
    return values


def pxp_sector_prediction(kf: KrausFamily, offsets=((0, 1),)) -> dict:
    """Order parameters on the fully mixed state projected into the blockade-free sector."""
    P = model.build_pxp_projector(kf.params.L, kf.params.pbc)
    rho = P / np.trace(P).real
    out = stationary_order_parameters(kf, rho, offsets)
    return {f"{k}_pxp": v for k, v in out.items()}


# --- per-trajectory counters -------------------------------------------------


def trajectory_time_integrals(outcomes: np.ndarray, offsets) -> dict:
    """Time-integrated pair counters O_delta and their normalized estimators.

    outcomes is the (T, L) bit array of one record. For each offset
    (di, dt) returns the raw counter sum_{t>dt} sum_i k_i(t-dt) k_{i+di}(t);
    the activity estimator is O_(0,0)/(L T) and correlation estimators are
    O_delta/(L T') - [O_(0,0)/(L T)]^2 with T' = T - dt.
    """
    k = np.asarray(outcomes, dtype=np.int64)
    T, L = k.shape
    counters, estimators = {}, {}
    o_act = int(k.sum())
    a_hat = o_act / (L * T)
    counters[(0, 0)] = o_act
    estimators[(0, 0)] = a_hat
    for off in offsets:
        di, dts = (off.di, off.dt_steps) if isinstance(off, SpaceTimeOffset) else tuple(off)
        if (di, dts) == (0, 0):
            continue
        if dts >= T:
            raise ValueError(f"time offset {dts} >= record length {T}")
        shifted = np.roll(k, -di, axis=1)  # column i -> k_{i+di}
        o = int((k[: T - dts] * shifted[dts:]).sum())
        counters[(di, dts)] = o
        estimators[(di, dts)] = o / (L * (T - dts)) - a_hat ** 2
    return {"counters": counters, "estimators": estimators}


def running_estimators(outcomes: np.ndarray, offsets) -> dict:
    """Estimator time series over record prefixes (what a live experiment would plot).

    Returns {(di, dt): (t_values, series)}; the activity series is keyed (0, 0).
    """
    k = np.asarray(outcomes, dtype=np.int64)
    T, L = k.shape
    t = np.arange(1, T + 1)
    cum_act = np.cumsum(k.sum(axis=1))
    a_run = cum_act / (L * t)
    out = {(0, 0): (t, a_run)}
    for off in offsets:
        di, dts = (off.di, off.dt_steps) if isinstance(off, SpaceTimeOffset) else tuple(off)
        if (di, dts) == (0, 0):
            continue
        shifted = np.roll(k, -di, axis=1)
        pair = (k[: T - dts] * shifted[dts:]).sum(axis=1) if dts < T else np.zeros(0)
        cum_pair = np.concatenate([np.zeros(dts), np.cumsum(pair)])
        with np.errstate(divide="ignore", invalid="ignore"):
            series = np.where(t > dts, cum_pair / (L * np.maximum(t - dts, 1)) - a_run ** 2, np.nan)
        out[(di, dts)] = (t, series)
    return out


def batch_means_stderr(series: np.ndarray, n_batches: int = 20) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    series = np.asarray(series, dtype=float)
    usable = (len(series) // n_batches) * n_batches
    if usable < n_batches:
        raise ValueError("series too short for the requested batch count")
    batches = series[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))
