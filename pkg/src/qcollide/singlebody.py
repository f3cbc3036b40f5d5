"""Closed-form single-qubit results used as exact oracles, plus detuning scans.

The one-site collision step depends only on the two dimensionless groups
a = omega*dt and b = sqrt(gamma*dt); c = 4a^2 + b^2 is derived. The closed
forms below give the stationary outcome frequency and the one-step temporal
correlation of the monitored dynamics and are cross-checked against the full
numeric pipeline in the tests.
"""

from dataclasses import dataclass

import numpy as np

from .model import ModelParams

_C_FLOOR = 1e-8  # below this, evaluate series limits instead of the raw formulas


@dataclass(frozen=True)
class SingleBodyParams:
    a: float  # omega * dt
    b: float  # sqrt(gamma * dt), >= 0
    delta_dt: float = 0.0  # detuning * dt

    def __post_init__(self):
        if self.b < 0:
            raise ValueError(f"b must be >= 0, got {self.b!r}")

    @property
    def c(self) -> float:
        return 4.0 * self.a * self.a + self.b * self.b

    def to_model(self, dt: float = 1.0) -> ModelParams:
        """Equivalent one-site ModelParams at an arbitrary collision time."""
        return ModelParams(
            L=1,
            dt=dt,
            v=0.0,
            gamma=self.b * self.b / dt,
            omega=self.a / dt,
            delta=self.delta_dt / dt,
        )


def analytic_activity(p: SingleBodyParams) -> float:
    """Stationary probability of a '1' outcome per step (closed form, delta = 0)."""
    if p.delta_dt != 0.0:
        raise ValueError("closed form is only available at zero detuning")
    a2, b2, c = p.a * p.a, p.b * p.b, p.c
    if c < _C_FLOOR:
        # cos b (b^2 cos sqrt(c) + 4a^2) = c(1 - b^2) + O(c^2) => limit b^2/2
        return b2 / 2.0
    return 0.5 - (1.0 / (2.0 * c)) * np.cos(p.b) * (b2 * np.cos(np.sqrt(c)) + 4.0 * a2)


def analytic_correlation(p: SingleBodyParams) -> float:
    """Stationary temporal correlation of consecutive outcomes (closed form, delta = 0)."""
    if p.delta_dt != 0.0:
        raise ValueError("closed form is only available at zero detuning")
    a2, b2, c = p.a * p.a, p.b * p.b, p.c
    if c == 0.0:
        return 0.0
    if c < _C_FLOOR:
        # sin^2(sqrt(c)/2) -> c/4, sin^2 b -> b^2, cos sqrt(c) -> 1
        return (p.b ** 4) * (8.0 * a2 + 2.0 * b2) / (8.0 * c)
    return (1.0 / (2.0 * c * c)) * (
        b2
        * np.sin(p.b) ** 2
        * np.sin(np.sqrt(c) / 2.0) ** 2
        * ((8.0 * a2 + b2) * np.cos(np.sqrt(c)) + b2)
    )


def order_parameter_map(a_values, b_values):
    """Closed-form stationary activity and correlation over an (a, b) grid.

    Returns a list of rows (a, b, activity, correlation); the CLI writes them
    as the (dt, gamma)-plane table with a = dt and b = sqrt(gamma*dt).
    """
    rows = []
    for a in a_values:
        for b in b_values:
            p = SingleBodyParams(a=float(a), b=float(b))
            rows.append((float(a), float(b), analytic_activity(p), analytic_correlation(p)))
    return rows


def detuning_phase_scan(delta_values, s_values, dt: float = 1.25, gamma: float = 3.0,
                        omega: float = 1.0, tol: float = 1e-12, max_iter: int = 10 ** 5):
    """Tilted-pipeline (delta, s) scan at L=1 with H_S = omega*sigma^x + delta*n.

    Returns rows (delta, s, activity, c_(0,1), lambda, iterations, converged);
    for s=0 and delta=0 the values reduce to the closed forms above.
    """
    from . import tilted
    from .channel import build_kraus_fast

    rows = []
    for delta in delta_values:
        params = ModelParams(L=1, dt=dt, v=0.0, gamma=gamma, omega=omega, delta=float(delta))
        kf = build_kraus_fast(params)
        warm = None
        for s in s_values:
            row = tilted.s_ensemble_order_parameters(
                kf, float(s), offsets=[(0, 1)], tol=tol, max_iter=max_iter, x0=warm
            )
            warm = row.l_s
            rows.append(
                (
                    float(delta),
                    float(s),
                    row.activity,
                    row.correlations[(0, 1)],
                    row.lambda_s,
                    row.iterations,
                    row.converged,
                )
            )
    return rows
