"""s-ensemble machinery: tilted Kraus maps, Doob-biased dynamics, phase diagrams.

The counting field s reweights trajectories by exp(-s * #'1'-outcomes). The
(non-trace-preserving) tilted map E_s[rho] = sum_k e^{-s n_k} K_k rho K_k^dag
has a dominant eigenvalue Lambda_s whose logarithm is the scaled cumulant
generating function; the dual's dominant eigen-operator l_s turns the tilted
map into a proper channel (biased Kraus operators) whose stationary
statistics realize the s-ensemble at late times.
"""

from dataclasses import dataclass

import numpy as np

from . import model
from .channel import Construction, KrausFamily, apply_channel, stationary_state
from .errors import ConvergenceError, NumericalConsistencyError
from .observables import ensemble_activity, ensemble_correlation, stationary_order_parameters

_EIG_FLOOR_RATIO = 1e-14


def _tilt_weights(kf: KrausFamily, s: float) -> np.ndarray:
    return np.exp(-s * model.popcounts(kf.params.L).astype(float))


def apply_tilted(kf: KrausFamily, s: float, rho: np.ndarray) -> np.ndarray:
    """E_s[rho] = sum_k e^{-s popcount(k)} K_k rho K_k^dag (symmetrized)."""
    from .channel import kraus_sandwich

    out = kraus_sandwich(kf.ops_dag(), rho, weights=_tilt_weights(kf, s))
    return 0.5 * (out + out.conj().T)


def apply_tilted_dual(kf: KrausFamily, s: float, X: np.ndarray) -> np.ndarray:
    """E_s*[X] = sum_k e^{-s popcount(k)} K_k^dag X K_k (symmetrized)."""
    from .channel import kraus_sandwich

    out = kraus_sandwich(kf.ops, X, weights=_tilt_weights(kf, s))
    return 0.5 * (out + out.conj().T)


def tilted_dual_superoperator(kf: KrausFamily, s: float) -> np.ndarray:
    """Dense matrix of E_s* acting on row-major vectorized operators (oracle, small L)."""
    w = _tilt_weights(kf, s)
    d = kf.dim
    S = np.zeros((d * d, d * d), dtype=complex)
    for k in range(kf.n_outcomes):
        K = kf.ops[k]
        S += w[k] * np.kron(K.conj().T, K.T)
    return S


def _residual(kf, s, lam, X) -> float:
    return float(np.abs(apply_tilted_dual(kf, s, X) - lam * X).max() / max(abs(lam), 1e-300))


def _two_vector_refine(kf, s, X_prev, X_cur):
    """Rayleigh-Ritz on span{X_prev, X_cur} against the dual tilted map.

    Returns (lam, X) or None when the projected problem is degenerate or the
    refined operator is not safely positive definite.
    """
    basis = []
    for B in (X_prev, X_cur):
        for seen in basis:
            B = B - np.trace(seen.conj().T @ B) * seen
        nrm = np.linalg.norm(B)
        if nrm > 1e-13:
            basis.append(B / nrm)
    if len(basis) < 2:
        return None
    images = [apply_tilted_dual(kf, s, B) for B in basis]
    A = np.array([[np.trace(bi.conj().T @ img) for img in images] for bi in basis])
    evals, evecs = np.linalg.eig(A)
    idx = int(np.argmax(evals.real))
    lam = float(evals[idx].real)
    X = sum(c * B for c, B in zip(evecs[:, idx], basis))
    X = 0.5 * (X + X.conj().T)
    tr = np.trace(X).real
    if abs(tr) < 1e-12:
        return None
    X = X * (X.shape[0] / tr)
    vals = np.linalg.eigvalsh(X)
    if vals.min() <= _EIG_FLOOR_RATIO * vals.max():
        return None
    return lam, X


def _power_iterate(apply_map, X, d, tol, max_iter, refine_map=None):
    """Trace-normalized power iteration; returns (lam, X, iters, residual, converged).

    Stops when the relative eigenvalue change and the max-norm eigen-residual
    both drop below tol. refine_map, when given, is tried on stagnation
    (two-vector Rayleigh-Ritz) and adopted if it lowers the residual.
    """
    X = X * (d / np.trace(X).real)
    lam_prev = None
    X_prev = None
    lam = residual = np.nan
    for iteration in range(1, max_iter + 1):
        Y = apply_map(X)
        lam = np.trace(Y).real / d
        residual = float(np.abs(Y - lam * X).max() / max(abs(lam), 1e-300))
        eig_settled = lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam)
        if eig_settled and residual <= tol:
            return lam, X, iteration, residual, True
        X_next = Y * (d / np.trace(Y).real)
        if refine_map is not None and X_prev is not None and (eig_settled or iteration % 25 == 0):
            refined = refine_map(X_prev, X_next)
            if refined is not None:
                lam_r, X_r = refined
                Y_r = apply_map(X_r)
                res_r = float(np.abs(Y_r - lam_r * X_r).max() / max(abs(lam_r), 1e-300))
                if res_r <= tol and eig_settled:
                    return lam_r, X_r, iteration, res_r, True
                if res_r < residual:
                    X_next = X_r
        # stagnation at the roundoff floor with the eigenvalue settled: accept
        if eig_settled and X_prev is not None and np.abs(X_next - X).max() <= 1e-15 * np.abs(X).max():
            return lam, X, iteration, residual, True
        X_prev, X = X, X_next
        lam_prev = lam
    return lam, X, max_iter, residual, False


def _arnoldi_stage(kf, s, x0, tol, max_iter):
    """Matrix-free restarted Arnoldi for the dual tilted map's dominant pair.

    The dual tilted map is positive, so its spectral radius is the wanted
    eigenvalue ('LM' target) with a Hermitian positive eigenvector. Clustered
    metastable modes near s = 0 stall plain power iteration; the Krylov basis
    resolves them in a few restarts without materializing the superoperator.
    Returns (lam, X) or None if ARPACK fails or positivity is lost.
    """
    import scipy.sparse.linalg as sla

    d = kf.dim

    def matvec(v):
        return apply_tilted_dual(kf, s, v.reshape(d, d)).reshape(-1)

    op = sla.LinearOperator((d * d, d * d), matvec=matvec, dtype=complex)
    v0 = (np.eye(d, dtype=complex) if x0 is None else x0).reshape(-1)
    try:
        w, vecs = sla.eigs(op, k=1, which="LM", v0=v0, tol=max(tol, 1e-14),
                           ncv=min(d * d - 1, 30), maxiter=max_iter)
    except (sla.ArpackNoConvergence, sla.ArpackError):
        return None
    X = vecs[:, 0].reshape(d, d)
    trace = np.trace(X)
    if abs(trace) < 1e-300:
        return None
    X = X * (trace.conj() / abs(trace))
    X = 0.5 * (X + X.conj().T)
    X = X * (d / np.trace(X).real)
    if np.linalg.eigvalsh(X).min() <= 0:
        return None
    return float(w[0].real), X


def dominant_eigenpair(
    kf: KrausFamily,
    s: float,
    tol: float = 1e-12,
    max_iter: int = 10 ** 5,
    x0: np.ndarray | None = None,
    refine: bool = True,
    defect_tol: float = 1e-11,
    gauge_rounds: int = 6,
):
    """Dominant eigenpair of the dual tilted map: E_s*[l_s] = Lambda_s l_s.

    At s = 0 trace preservation makes (1, identity) the exact pair and it is
    returned outright. Otherwise stage one solves the eigenpair matrix-free
    (restarted Arnoldi on the map's action, falling back to trace-normalized
    power iteration with two-vector refinement). The completeness defect of
    the biased family built from the pair is the eigen-residual amplified by
    the conditioning of l_s^{+/-1/2}, so stage two re-solves in the biased
    gauge (operators l^{1/2} K_k l^{-1/2}, whose dual's eigenvector is near
    the identity) and folds the correction back, repeating until the defect
    Sum_k K~_k^dag K~_k - 1 is at defect_tol. Near dynamical phase
    coexistence the spectral gap closes; unconverged points raise
    ConvergenceError carrying the last residual.

    Returns (lambda_s, l_s, iterations, residual) with residual the relative
    max-norm eigen-residual of the returned pair.
    """
    d = kf.dim
    if s == 0.0:
        l_s = np.eye(d, dtype=complex)
        return 1.0, l_s, 1, _residual(kf, s, 1.0, l_s)
    # a tiny budget means literal iterations: stay on the power path so the
    # caller's cap is honored rather than hidden inside ARPACK restarts
    stage1 = _arnoldi_stage(kf, s, x0, tol, max_iter) if max_iter >= 50 else None
    if stage1 is not None:
        lam, l_s = stage1
        used = 1
    else:
        X = np.eye(d, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
        refine_map = (lambda A, B: _two_vector_refine(kf, s, A, B)) if refine else None
        lam, l_s, used, residual, ok = _power_iterate(
            lambda Z: apply_tilted_dual(kf, s, Z), X, d, tol, max_iter, refine_map
        )
        if not ok:
            raise ConvergenceError(
                f"tilted eigenpair not converged after {max_iter} iterations at s={s}",
                residual=residual, iterations=max_iter,
            )
    total_iters = used
    best = (np.inf, lam, l_s)
    for round_idx in range(gauge_rounds):
        try:
            sq, inv_sq = _sqrt_and_inverse_sqrt(l_s)
        except NumericalConsistencyError:
            break
        gauge_ops = (sq @ kf.ops) @ inv_sq
        w = _tilt_weights(kf, s) / lam

        def gauge_dual(Z):
            from .channel import kraus_sandwich

            out = kraus_sandwich(gauge_ops, Z, weights=w)
            return 0.5 * (out + out.conj().T)

        defect = float(np.abs(gauge_dual(np.eye(d, dtype=complex)) - np.eye(d)).max())
        if defect < best[0]:
            best = (defect, lam, l_s)
        if defect <= defect_tol or (round_idx > 0 and defect > 0.5 * best[0]):
            break
        mu, M, inner, _, ok = _power_iterate(
            gauge_dual, np.eye(d, dtype=complex), d, tol, max(1000, max_iter - total_iters)
        )
        total_iters += inner
        if not ok:
            break
        lam = lam * mu
        l_s = sq @ M @ sq
        l_s = 0.5 * (l_s + l_s.conj().T)
        l_s *= d / np.trace(l_s).real
    _, lam, l_s = best if best[0] < np.inf else (None, lam, l_s)
    residual = _residual(kf, s, lam, l_s)
    return lam, l_s, total_iters, residual


def _sqrt_and_inverse_sqrt(l_s: np.ndarray):
    vals, vecs = np.linalg.eigh(l_s)
    floor = _EIG_FLOOR_RATIO * vals.max()
    if vals.min() <= floor:
        raise NumericalConsistencyError(
            f"dominant eigen-operator not positive definite within tolerance "
            f"(min/max eigenvalue ratio {vals.min() / vals.max():.3e})"
        )
    sq = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inv_sq = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return sq, inv_sq


def build_biased_kraus(kf: KrausFamily, s: float, lam: float, l_s: np.ndarray) -> KrausFamily:
    """Doob-transformed family K~_k = e^{-s n_k/2} Lambda^{-1/2} l^{1/2} K_k l^{-1/2}.

    Trace preserving by the eigenvalue equation, so its completeness defect
    measures the quality of (lam, l_s).
    """
    sq, inv_sq = _sqrt_and_inverse_sqrt(l_s)
    half_w = np.exp(-0.5 * s * model.popcounts(kf.params.L).astype(float)) / np.sqrt(lam)
    ops = ((sq @ kf.ops) @ inv_sq) * half_w[:, None, None]
    return KrausFamily(params=kf.params, ops=ops, construction=Construction.BIASED)


@dataclass
class TiltedSolution:
    s: float
    lambda_s: float
    l_s: np.ndarray
    biased: KrausFamily
    biased_stationary: np.ndarray
    iterations: int
    residual: float
    converged: bool


def solve(
    kf: KrausFamily,
    s: float,
    tol: float = 1e-12,
    max_iter: int = 10 ** 5,
    x0: np.ndarray | None = None,
    stationary_tol: float = 1e-10,
) -> TiltedSolution:
    """Eigenpair + biased family + biased stationary state in one call."""
    lam, l_s, iterations, residual = dominant_eigenpair(kf, s, tol, max_iter, x0=x0)
    biased = build_biased_kraus(kf, s, lam, l_s)
    rho_ss = stationary_state(biased, tol=stationary_tol)
    return TiltedSolution(
        s=s, lambda_s=lam, l_s=l_s, biased=biased, biased_stationary=rho_ss,
        iterations=iterations, residual=residual, converged=True,
    )


@dataclass
class OrderParameterPoint:
    s: float
    lambda_s: float
    activity: float
    correlations: dict
    iterations: int
    converged: bool
    l_s: np.ndarray


def s_ensemble_order_parameters(
    kf: KrausFamily,
    s: float,
    offsets=((0, 1),),
    tol: float = 1e-12,
    max_iter: int = 10 ** 5,
    x0: np.ndarray | None = None,
) -> OrderParameterPoint:
    """Stationary activity and correlations of the biased (Doob) dynamics at s."""
    try:
        sol = solve(kf, s, tol=tol, max_iter=max_iter, x0=x0)
    except ConvergenceError as err:
        return OrderParameterPoint(
            s=s, lambda_s=np.nan, activity=np.nan,
            correlations={tuple(o): np.nan for o in offsets},
            iterations=err.iterations or 0, converged=False,
            l_s=np.eye(kf.dim, dtype=complex),
        )
    corr = {
        tuple(o): ensemble_correlation(sol.biased, sol.biased_stationary, tuple(o))
        for o in offsets
    }
    return OrderParameterPoint(
        s=s, lambda_s=sol.lambda_s,
        activity=ensemble_activity(sol.biased, sol.biased_stationary),
        correlations=corr, iterations=sol.iterations, converged=True, l_s=sol.l_s,
    )


def _sweep_column(args):
    params, v, s_values, offsets, tol, max_iter = args
    from .channel import build_kraus_fast

    kf = build_kraus_fast(params)
    rows = []
    warm = None
    for s in s_values:
        point = s_ensemble_order_parameters(
            kf, float(s), offsets=offsets, tol=tol, max_iter=max_iter, x0=warm
        )
        if point.converged:
            warm = point.l_s
        rows.append(
            dict(
                V=v, s=float(s), activity=point.activity,
                lam=point.lambda_s, iterations=point.iterations,
                converged=point.converged,
                **{f"c_{di}_{dt}": point.correlations[(di, dt)] for (di, dt) in point.correlations},
            )
        )
    return rows


def phase_diagram_sweep(
    v_values,
    s_values,
    base_params,
    offsets=((0, 1),),
    tol: float = 1e-12,
    max_iter: int = 10 ** 5,
    workers: int = 1,
) -> list:
    """(V, s) grid of s-ensemble order parameters; rows sorted by (V, s).

    One Kraus family per V is shared across that column's s values (with the
    previous s point warm-starting the eigen-iteration); columns are
    independent tasks so the worker count never changes the output.
    """
    from dataclasses import replace

    tasks = []
    for v in v_values:
        params = replace(base_params, v=float(v))
        tasks.append((params, float(v), list(s_values), tuple(offsets), tol, max_iter))

    if workers <= 1 or len(tasks) == 1:
        columns = [_sweep_column(t) for t in tasks]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_sweep_column, tasks))
    rows = [row for column in columns for row in column]
    rows.sort(key=lambda r: (r["V"], r["s"]))
    return rows


def log_partition_function(kf: KrausFamily, s: float, rho0: np.ndarray, T: int) -> float:
    """log Z_T(s) = log Tr E_s^T[rho0], rescaling each step to avoid under/overflow."""
    rho = np.asarray(rho0, dtype=complex)
    log_z = 0.0
    for _ in range(T):
        rho = apply_tilted(kf, s, rho)
        factor = np.trace(rho).real
        if factor <= 0:
            raise NumericalConsistencyError("tilted-map trace collapsed to zero")
        log_z += np.log(factor)
        rho = rho / factor
    return log_z


def partition_function(kf: KrausFamily, s: float, rho0: np.ndarray, T: int) -> float:
    """Z_T(s); prefer log_partition_function for long horizons."""
    return float(np.exp(log_partition_function(kf, s, rho0, T)))


def brute_force_partition_function(kf: KrausFamily, psi0: np.ndarray, s: float, T: int) -> float:
    """sum_eta e^{-s O_0(eta)} pi(eta) over every outcome path (oracle, small L and T)."""
    from .trajectory import enumerate_paths

    pops = model.popcounts(kf.params.L)
    total = 0.0
    for path, prob in enumerate_paths(kf, psi0, T).items():
        if prob == 0.0:
            continue
        total += np.exp(-s * float(sum(pops[k] for k in path))) * prob
    return total
