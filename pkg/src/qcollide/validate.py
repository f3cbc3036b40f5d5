"""Cross-module invariant suite behind the ``validate`` CLI subcommand.

Each check returns (name, passed, detail); the suite covers the channel
axioms, the fast-vs-dense construction, the single-body closed forms, the
tilted-map reductions, the reset-free equivalence and the continuous-time
limit, at desk-scale sizes so the whole run stays responsive.
"""

import numpy as np

from . import singlebody, tilted
from .channel import apply_channel, build_kraus_dense, build_kraus_fast
from .model import ModelParams
from .observables import ensemble_activity, ensemble_correlation
from .trajectory import enumerate_paths, enumerate_paths_reset_free, zero_state

FIG1 = dict(dt=1.25, v=5.875, gamma=3.0)


def run_all(L: int = 3) -> list:
    checks = [
        _channel_axioms(L),
        _fast_vs_dense(min(L, 3)),
        _fully_mixed_stationary(L),
        _single_body_oracles(),
        _tilted_reductions(),
        _partition_function_exhaustive(),
        _reset_free_equivalence(),
        _lindblad_checks(),
    ]
    return [item for group in checks for item in group]


def _channel_axioms(L):
    kf = build_kraus_fast(ModelParams(L=L, **FIG1))
    c, u = kf.completeness_defect(), kf.unitality_defect()
    return [
        (f"channel.completeness.L{L}", c <= 1e-10, f"defect={c:.2e}"),
        (f"channel.unitality.L{L}", u <= 1e-10, f"defect={u:.2e}"),
    ]


def _fast_vs_dense(L):
    params = ModelParams(L=L, **FIG1)
    diff = float(np.abs(build_kraus_dense(params).ops - build_kraus_fast(params).ops).max())
    return [(f"channel.fast_vs_dense.L{L}", diff <= 1e-10, f"maxdiff={diff:.2e}")]


def _fully_mixed_stationary(L):
    kf = build_kraus_fast(ModelParams(L=L, **FIG1))
    rho = np.eye(2 ** L) / 2 ** L
    drift = float(np.abs(apply_channel(kf, rho) - rho).max())
    return [(f"channel.mixed_stationary.L{L}", drift <= 1e-10, f"drift={drift:.2e}")]


def _single_body_oracles():
    p = singlebody.SingleBodyParams(a=1.25, b=float(np.sqrt(3.75)))
    kf = build_kraus_fast(p.to_model(dt=1.0))
    rho = np.eye(2) / 2
    act_err = abs(ensemble_activity(kf, rho) - singlebody.analytic_activity(p))
    cor_err = abs(ensemble_correlation(kf, rho, (0, 1)) - singlebody.analytic_correlation(p))
    return [
        ("singlebody.activity", act_err <= 1e-10, f"err={act_err:.2e}"),
        ("singlebody.correlation", cor_err <= 1e-10, f"err={cor_err:.2e}"),
    ]


def _tilted_reductions():
    kf = build_kraus_fast(ModelParams(L=2, **FIG1))
    lam, l_s, _, _ = tilted.dominant_eigenpair(kf, 0.0)
    lam_err = abs(lam - 1.0)
    l_err = float(np.abs(l_s - np.eye(4)).max())
    biased = tilted.build_biased_kraus(kf, 0.0, lam, l_s)
    k_err = float(np.abs(biased.ops - kf.ops).max())
    return [
        ("tilted.lambda0", lam_err <= 1e-12, f"err={lam_err:.2e}"),
        ("tilted.l0_identity", l_err <= 1e-12, f"err={l_err:.2e}"),
        ("tilted.doob_reduction", k_err <= 1e-12, f"err={k_err:.2e}"),
    ]


def _partition_function_exhaustive():
    kf = build_kraus_fast(ModelParams(L=2, **FIG1))
    psi0 = zero_state(2)
    rho0 = np.outer(psi0, psi0.conj())
    z_iter = tilted.partition_function(kf, 0.1, rho0, T=3)
    z_sum = tilted.brute_force_partition_function(kf, psi0, 0.1, T=3)
    err = abs(z_iter - z_sum)
    return [("tilted.partition_exhaustive", err <= 1e-12, f"err={err:.2e}")]


def _reset_free_equivalence():
    out = []
    for L in (1, 2):
        params = ModelParams(L=L, **FIG1)
        kf = build_kraus_fast(params)
        reset_law = enumerate_paths(kf, zero_state(L), T=2)
        raw = enumerate_paths_reset_free(params, zero_state(L), T=2)
        processed = {}
        for (k1, k2), p in raw.items():
            key = (k1, k2 ^ k1)
            processed[key] = processed.get(key, 0.0) + p
        tv = 0.5 * sum(
            abs(reset_law.get(k, 0.0) - processed.get(k, 0.0))
            for k in set(reset_law) | set(processed)
        )
        out.append((f"trajectory.reset_free.L{L}", tv <= 1e-10, f"tv={tv:.2e}"))
    return out


def _lindblad_checks():
    from .lindblad import (
        build_lindblad_model,
        collision_limit_check,
        stationary_activity_rate,
        tilted_lindblad_scgf,
    )

    m = build_lindblad_model(ModelParams(L=2, v=6.0, gamma=3.0))
    theta0 = abs(tilted_lindblad_scgf(m, 0.0).theta)
    rate = stationary_activity_rate(m)
    limit = collision_limit_check(ModelParams(L=1, v=0.0, gamma=3.0), [0.1, 0.05, 0.025])
    return [
        ("lindblad.theta0", theta0 <= 1e-10, f"|theta(0)|={theta0:.2e}"),
        ("lindblad.activity_rate", abs(rate - 1.5) <= 1e-12, f"a_ss={rate}"),
        ("lindblad.collision_limit", limit["passed"],
         f"d/dt ratios={np.round(limit['ratios'], 2).tolist()}"),
    ]
