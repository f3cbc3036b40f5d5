"""Continuous-time limit: Lindblad generator, jump unraveling, tilted SCGF.

The collision dynamics contracts to a master equation with Hermitian jump
operators J_i = sqrt(gamma) P_i as dt -> 0. This module provides the
generator and its dense superoperator (small L), a quantum-jump Monte Carlo
unraveling with bisection-located jump times, a superoperator-level check
that the collision channel approaches exp(L dt), and the tilted generator
whose dominant eigenvalue is the activity SCGF theta(s).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import model
from .channel import build_kraus_fast
from .errors import ConvergenceError, NumericalConsistencyError, ResourceLimitError
from .model import ModelParams

SUPEROP_MAX_SITES = 3


@dataclass
class LindbladModel:
    params: ModelParams
    h_s: np.ndarray
    jump_diags: np.ndarray  # (L, d) real diagonals of J_i = sqrt(gamma) P_i
    h_eff: np.ndarray  # H_S - (i/2) sum_i J_i^2
    jump_mask: np.ndarray  # C[a,b] = sum_i J_i[a] J_i[b]; J rho J summed = C * rho
    decay_mask: np.ndarray  # D[a,b] = (sum_i J_i[a]^2 + J_i[b]^2)/2; anticommutator half

    @property
    def dim(self) -> int:
        return self.h_s.shape[0]


def build_lindblad_model(params: ModelParams) -> LindbladModel:
    params.check_cap()
    h_s = model.build_system_hamiltonian(params)
    bits = model.site_bits(params.L)
    jump_diags = np.sqrt(params.gamma) * (1 - bits).T.astype(float)  # (L, d)
    jj = (jump_diags ** 2).sum(axis=0)
    h_eff = h_s - 0.5j * np.diag(jj)
    jump_mask = jump_diags.T @ jump_diags
    decay_mask = 0.5 * (jj[:, None] + jj[None, :])
    return LindbladModel(
        params=params, h_s=h_s, jump_diags=jump_diags, h_eff=h_eff,
        jump_mask=jump_mask, decay_mask=decay_mask,
    )


def generator_apply(m: LindbladModel, rho: np.ndarray, s: float = 0.0) -> np.ndarray:
    """L_s[rho]; s = 0 gives the plain generator. The jumps are all diagonal,
    so the full dissipator is one precomputed elementwise mask."""
    return -1j * (m.h_s @ rho - rho @ m.h_s) + (np.exp(-s) * m.jump_mask - m.decay_mask) * rho


def generator_dual_apply(m: LindbladModel, X: np.ndarray, s: float = 0.0) -> np.ndarray:
    """Heisenberg-picture L_s*[X]; Hermitian diagonal jumps make the
    dissipator self-dual, only the commutator flips sign."""
    return 1j * (m.h_s @ X - X @ m.h_s) + (np.exp(-s) * m.jump_mask - m.decay_mask) * X


def generator_superoperator(m: LindbladModel, s: float = 0.0) -> np.ndarray:
    """Dense matrix of L_s on row-major vectorized rho; L <= 3 only."""
    if m.params.L > SUPEROP_MAX_SITES:
        raise ResourceLimitError(
            f"dense superoperator limited to L <= {SUPEROP_MAX_SITES}, got L={m.params.L}"
        )
    d = m.dim
    eye = np.eye(d)
    S = -1j * (np.kron(m.h_s, eye) - np.kron(eye, m.h_s.T))
    bias = np.exp(-s)
    for diag in m.jump_diags:
        J = np.diag(diag).astype(complex)
        jj = np.diag(diag * diag).astype(complex)
        S += bias * np.kron(J, J.conj())
        S -= 0.5 * (np.kron(jj, eye) + np.kron(eye, jj.T))
    return S


def channel_superoperator(kf) -> np.ndarray:
    """Dense matrix of the collision channel on row-major vectorized rho."""
    d = kf.dim
    S = np.zeros((d * d, d * d), dtype=complex)
    for k in range(kf.n_outcomes):
        K = kf.ops[k]
        S += np.kron(K, K.conj())
    return S


def collision_limit_check(params: ModelParams, dt_list) -> dict:
    """Superoperator distance between the collision channel and exp(L dt).

    Returns dt, distance and distance/dt arrays plus a ratio-test flag:
    halving dt must shrink distance/dt by at least 1.3x (so d(dt)/dt -> 0).
    """
    if params.L > SUPEROP_MAX_SITES:
        raise ResourceLimitError(
            f"collision_limit_check limited to L <= {SUPEROP_MAX_SITES}, got L={params.L}"
        )
    from dataclasses import replace

    m = build_lindblad_model(params)
    S_L = generator_superoperator(m)
    dts = np.asarray(sorted(dt_list, reverse=True), dtype=float)
    dist = np.empty_like(dts)
    for i, dt in enumerate(dts):
        kf = build_kraus_fast(replace(params, dt=float(dt)))
        dist[i] = np.abs(channel_superoperator(kf) - scipy.linalg.expm(S_L * dt)).max()
    rate = dist / dts
    ratios = rate[:-1] / rate[1:]
    passed = bool(np.all(ratios >= 1.3)) if len(dts) > 1 else True
    return {"dt": dts, "distance": dist, "distance_per_dt": rate,
            "ratios": ratios, "passed": passed}


# --- quantum-jump Monte Carlo --------------------------------------------------


@dataclass
class JumpTrajectory:
    seed: int
    traj_index: int
    params: ModelParams
    t_max: float
    events: list  # [(time, site), ...] in chronological order
    sample_times: np.ndarray
    occupations: np.ndarray  # (len(sample_times), L)


class _EffectivePropagator:
    """exp(-i H_eff tau) at arbitrary tau via one non-Hermitian eigendecomposition."""

    def __init__(self, h_eff: np.ndarray):
        self.evals, self.right = scipy.linalg.eig(h_eff)
        self.left = np.linalg.inv(self.right)

    def apply(self, psi: np.ndarray, tau: float) -> np.ndarray:
        return self.right @ (np.exp(-1j * self.evals * tau) * (self.left @ psi))


def quantum_jump_trajectory(
    m: LindbladModel,
    psi0: np.ndarray,
    t_max: float,
    seed: int,
    traj_index: int = 0,
    micro_dt: float = 0.005,
    record_dt: float = 0.25,
    bisect_tol: float = 1e-8,
) -> JumpTrajectory:
    """Standard jump unraveling with norm-threshold bisection for event times.

    Between jumps the unnormalized state evolves under exp(-i H_eff t); a
    jump fires when the squared norm crosses a uniform threshold, the site is
    drawn proportional to ||J_i psi||^2, and the threshold is redrawn.
    Draw order per event: threshold first (and at t=0), then the site draw.
    """
    rng = np.random.Generator(
        np.random.Philox(key=np.array([seed, traj_index], dtype=np.uint64))
    )
    prop = _EffectivePropagator(m.h_eff)
    bits = model.site_bits(m.params.L).astype(float)

    sample_times = np.arange(0.0, t_max + 1e-12, record_dt)
    occupations = np.zeros((len(sample_times), m.params.L))
    events = []

    psi = np.asarray(psi0, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    t = 0.0
    threshold = rng.random()
    next_sample = 0
    norm2 = 1.0

    def record_until(time_limit, psi_at, t_from):
        nonlocal next_sample
        while next_sample < len(sample_times) and sample_times[next_sample] <= time_limit + 1e-12:
            tau = sample_times[next_sample] - t_from
            phi = prop.apply(psi_at, tau)
            phi = phi / np.linalg.norm(phi)
            occupations[next_sample] = (np.abs(phi) ** 2) @ bits
            next_sample += 1

    while t < t_max - 1e-12:
        step = min(micro_dt, t_max - t)
        phi = prop.apply(psi, step)
        new_norm2 = float(np.vdot(phi, phi).real)
        if new_norm2 > norm2 + 1e-10:
            raise NumericalConsistencyError(
                f"norm increased by {new_norm2 - norm2:.3e} in one micro step; reduce micro_dt"
            )
        if new_norm2 > threshold:
            record_until(t + step, psi, t)
            psi, norm2, t = phi, new_norm2, t + step
            continue
        # jump inside (t, t+step]: bisect the crossing time
        lo, hi = 0.0, step
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            phi_mid = prop.apply(psi, mid)
            if float(np.vdot(phi_mid, phi_mid).real) > threshold:
                lo = mid
            else:
                hi = mid
        tau_star = 0.5 * (lo + hi)
        record_until(t + tau_star, psi, t)
        phi = prop.apply(psi, tau_star)
        jump_weights = np.array([np.sum(np.abs(diag * phi) ** 2) for diag in m.jump_diags])
        site = int(np.searchsorted(np.cumsum(jump_weights / jump_weights.sum()),
                                   rng.random(), side="right"))
        site = min(site, m.params.L - 1)
        psi = m.jump_diags[site] * phi
        psi = psi / np.linalg.norm(psi)
        t = t + tau_star
        events.append((t, site))
        threshold = rng.random()
        norm2 = 1.0
    record_until(t_max, psi, t)
    return JumpTrajectory(
        seed=seed, traj_index=traj_index, params=m.params, t_max=t_max,
        events=events, sample_times=sample_times, occupations=occupations,
    )


def stationary_activity_rate(m: LindbladModel) -> float:
    """a_ss = sum_i Tr[J_i^2 rho_ss]/L on the fully mixed stationary state.

    Hermitian jumps make 1/2^L stationary; the generator residual on it is
    checked before the analytic evaluation is trusted.
    """
    rho_ss = np.eye(m.dim, dtype=complex) / m.dim
    residual = np.abs(generator_apply(m, rho_ss)).max()
    if residual > 1e-12:
        raise NumericalConsistencyError(
            f"fully mixed state is not stationary (|L[rho]|max = {residual:.3e})"
        )
    return float(sum((diag ** 2).sum() / m.dim for diag in m.jump_diags) / m.params.L)


def master_equation_occupations(m: LindbladModel, rho0: np.ndarray, times) -> np.ndarray:
    """<n_i(t)> from dense master-equation integration (superoperator expm, L <= 3)."""
    S = generator_superoperator(m)
    bits = model.site_bits(m.params.L).astype(float)
    out = np.zeros((len(times), m.params.L))
    for j, t in enumerate(times):
        rho_t = (scipy.linalg.expm(S * t) @ rho0.reshape(-1)).reshape(m.dim, m.dim)
        out[j] = np.einsum("ii,il->l", rho_t, bits).real
    return out


# --- tilted generator / SCGF ----------------------------------------------------


def _fix_phase(op: np.ndarray) -> np.ndarray:
    """Rotate a raw eigenvector's global phase so its trace is real positive,
    then Hermitize; the dominant eigen-operator is Hermitian up to that phase."""
    tr = np.trace(op)
    if abs(tr) < 1e-300:
        raise NumericalConsistencyError("traceless dominant eigen-operator")
    op = op * (tr.conj() / abs(tr))
    return 0.5 * (op + op.conj().T)


_PROP_CACHE = {}


def _hamiltonian_eig(m: LindbladModel):
    key = (id(m), "heig")
    if key not in _PROP_CACHE:
        _PROP_CACHE[key] = np.linalg.eigh(m.h_s)
    return _PROP_CACHE[key]


def _split_expl(m: LindbladModel, X: np.ndarray, s: float, tau: float, n_split: int, dual: bool):
    """exp(L_s tau)[X] by Strang splitting: exact Hamiltonian conjugation
    (one cached eigendecomposition of H) interleaved with the exact
    elementwise exponential of the dissipator mask."""
    key = (id(m), s, tau, n_split, dual)
    if key not in _PROP_CACHE:
        w, V = _hamiltonian_eig(m)
        h = tau / n_split
        U = (V * np.exp(-1j * w * h)) @ V.conj().T
        if dual:
            U = U.conj().T
        half_mask = np.exp(0.5 * h * (np.exp(-s) * m.jump_mask - m.decay_mask))
        _PROP_CACHE[key] = (U, half_mask)
    U, half_mask = _PROP_CACHE[key]
    Ud = U.conj().T
    for _ in range(n_split):
        X = half_mask * X
        X = U @ X @ Ud
        X = half_mask * X
    return X


def _make_expl_action(m: LindbladModel, s: float, tau: float, dual: bool,
                      probe: np.ndarray, target: float = 1e-9):
    """Richardson-extrapolated Strang action for exp(L_s tau), calibrated once.

    Doubles the substep count until the extrapolation-error estimate
    |Y_2n - Y_n|/3 on the probe drops below target relative to the probe,
    then returns a fixed 4th-order action (cost 3n substeps per call).
    """
    scale = float(np.abs(probe).max())
    n = 4
    while True:
        y1 = _split_expl(m, probe, s, tau, n, dual)
        y2 = _split_expl(m, probe, s, tau, 2 * n, dual)
        if float(np.abs(y2 - y1).max()) / 3.0 <= target * scale or n >= 2048:
            break
        n *= 2

    def action(X):
        a = _split_expl(m, X, s, tau, n, dual)
        b = _split_expl(m, X, s, tau, 2 * n, dual)
        return (4.0 * b - a) / 3.0

    return action


def _exponential_action_eigenpair(m, s, tau, tol, max_iter, warm):
    """Dominant right/left eigen-operators of L_s via Arnoldi on exp(L_s tau).

    The exponential maps the largest-real-part eigenvalue to the largest
    magnitude, which Krylov iteration resolves quickly even though the bare
    generator's spectrum is dominated by the oscillatory Hamiltonian part.
    The propagation uses RK4 substeps; its truncation bias cancels in the
    Rayleigh quotient taken with the exact generator afterwards, and the
    eigenvectors are polished with extra exponential applications until their
    exact-generator residuals settle (the activity formula is first-order
    sensitive to them).
    """
    import scipy.sparse.linalg as sla

    if np.abs(m.h_s.imag).max() != 0.0:
        raise NumericalConsistencyError(
            "matrix-free SCGF relies on a real-symmetric H_S (dual = transposed primal)"
        )
    d = m.dim
    counter = {"n": 0}
    probe = warm[0] if warm is not None else np.eye(d, dtype=complex)
    action = _make_expl_action(m, s, tau, False, probe)

    def matvec(v):
        counter["n"] += 1
        return action(v.reshape(d, d)).reshape(-1)

    op = sla.LinearOperator((d * d, d * d), matvec=matvec, dtype=complex)
    try:
        w, vecs = sla.eigs(op, k=1, which="LM", v0=probe.reshape(-1),
                           tol=max(tol, 1e-10), ncv=min(d * d - 1, 30), maxiter=max_iter)
        vec = vecs[:, int(np.argmax(np.abs(w)))].reshape(d, d)
    except sla.ArpackNoConvergence as err:
        raise ConvergenceError(
            f"Arnoldi on the exponential action failed at s={s}", iterations=counter["n"]
        ) from err
    r = _fix_phase(vec)
    r = r / np.trace(r).real
    # polish until the exact-generator residual settles (the activity formula
    # is first-order sensitive to eigenvector error); bail out on stagnation
    # rather than spinning against a closing spectral gap
    res_prev = np.inf
    for _ in range(100):
        gen_r = generator_apply(m, r, s)
        theta = float(np.trace(r.conj() @ gen_r).real / np.trace(r.conj() @ r).real)
        scale = max(1.0, abs(theta))
        res = np.abs(gen_r - theta * r).max() / np.abs(r).max()
        if res <= 1e-8 * scale or res > 0.9 * res_prev:
            break
        res_prev = res
        r = action(r)
        r = 0.5 * (r + r.conj().T)
        r = r / np.trace(r).real
        counter["n"] += 1
    # H_S real symmetric makes the dual the transposed primal, so the left
    # eigen-operator is the conjugate of the right one
    l = r.conj() * (d / np.trace(r.conj()).real)
    return r, l, counter["n"]


@dataclass
class ScgfPoint:
    s: float
    theta: float
    minus_theta_prime: float  # total emission rate in the tilted ensemble
    iterations: int
    converged: bool
    r_s: np.ndarray
    l_s: np.ndarray


def tilted_lindblad_scgf(
    m: LindbladModel,
    s: float,
    tau: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 10 ** 4,
    warm: tuple | None = None,
) -> ScgfPoint:
    """theta(s) and -theta'(s) of the tilted generator.

    For L <= 3 the dense superoperator is eigendecomposed directly. Otherwise
    both eigen-operators are power-iterated through the exp(L_s tau) action
    (RK4 substeps, tau defaulting to 0.1/gamma) and theta is taken from the
    Rayleigh quotient with the exact generator, which is insensitive to the
    integrator bias. -theta'(s) comes from the two-sided eigenpair:
    e^{-s} sum_i Tr[l J_i r J_i] / Tr[l r].
    """
    if m.params.L <= SUPEROP_MAX_SITES:
        S = generator_superoperator(m, s)
        evals, vr = np.linalg.eig(S)
        idx = int(np.argmax(evals.real))
        theta = float(evals.real[idx])
        r = _fix_phase(vr[:, idx].reshape(m.dim, m.dim))
        r = r / np.trace(r).real
        evals_l, vl = np.linalg.eig(S.conj().T)
        idx_l = int(np.argmin(np.abs(evals_l.conj() - evals[idx])))
        l = _fix_phase(vl[:, idx_l].reshape(m.dim, m.dim))
        l = l * (m.dim / np.trace(l).real)
        iterations, converged = 0, True
    else:
        tau = (0.1 / m.params.gamma) if tau is None else tau
        r, l, iterations = _exponential_action_eigenpair(m, s, tau, tol, max_iter, warm)
        converged = True
        theta = float(
            np.trace(l @ generator_apply(m, r, s)).real / np.trace(l @ r).real
        )
    overlap = np.trace(l @ r).real
    rate = 0.0
    for diag in m.jump_diags:
        rate += np.trace((diag[:, None] * l * diag[None, :]) @ r).real
    minus_theta_prime = float(np.exp(-s) * rate / overlap)
    return ScgfPoint(
        s=s, theta=theta, minus_theta_prime=minus_theta_prime,
        iterations=iterations, converged=converged, r_s=r, l_s=l,
    )


def scgf_scan(m: LindbladModel, s_values, **kwargs) -> list:
    """theta(s) and activity per site along an s scan, warm-starting eigenvectors."""
    rows = []
    warm = None
    for s in s_values:
        point = tilted_lindblad_scgf(m, float(s), warm=warm, **kwargs)
        if m.params.L > SUPEROP_MAX_SITES:
            warm = (point.r_s, point.l_s)
        rows.append(
            dict(s=float(s), theta=point.theta,
                 activity=point.minus_theta_prime / m.params.L,
                 iterations=point.iterations, converged=point.converged)
        )
    return rows
