"""Kraus family construction and the average quantum channel.

Two constructions of the conditional evolution operators K_k:

* ``build_kraus_dense`` exponentiates the full collision Hamiltonian on the
  4^L joint system+ancilla space and slices out K_k = <k_A| U |0_A>. Exact
  but memory-bound; kept as the oracle for L <= 4.
* ``build_kraus_fast`` exploits that the ancilla operators tau^x_i commute:
  U block-diagonalizes over the per-ancilla tau^x eigenbasis into 2^L system
  blocks E_m = exp(-i H_m dt), and K_k = 2^-L sum_m (prod_i m_i^{k_i}) E_m
  is a Walsh-Hadamard transform of the block stack. Costs 2^L Hermitian
  eigendecompositions of dimension 2^L instead of one of dimension 4^L.

Index layout: outcome strings k and sign strings m are packed as integers
with site 0 as the most significant bit (see model module).
"""

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import ConvergenceError, NumericalConsistencyError, ResourceLimitError
from .model import ModelParams
from .walsh import fwht

DENSE_MAX_SITES = 4


class Construction(enum.Enum):
    DENSE_4L = "Dense4L"
    BLOCK_WHT = "BlockWHT"
    BIASED = "Biased"


@dataclass
class KrausFamily:
    """The 2^L conditional evolution operators of one collision step.

    ``ops[k]`` is K_k for outcome string k. The object is treated as
    immutable after construction; lazily computed derived operators are
    cached (idempotent, so benign under concurrent access).
    """

    params: ModelParams
    ops: np.ndarray  # (2^L, 2^L, 2^L) complex
    construction: Construction
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.ops.shape[0]

    def blocks(self) -> np.ndarray:
        """Collision blocks E_m recovered from the Kraus stack (inverse WHT)."""
        if "blocks" not in self._cache:
            self._cache["blocks"] = fwht(self.ops)
        return self._cache["blocks"]

    def completeness_defect(self) -> float:
        acc = np.einsum("kji,kjl->il", self.ops.conj(), self.ops)
        return float(np.abs(acc - np.eye(self.dim)).max())

    def unitality_defect(self) -> float:
        acc = np.einsum("kij,klj->il", self.ops, self.ops.conj())
        return float(np.abs(acc - np.eye(self.dim)).max())

    def site_count_ops(self) -> np.ndarray:
        """M_i = sum_k k_i K_k^dag K_k, stacked (L, d, d); Tr[M_i rho] = E[k_i]."""
        if "site_count_ops" not in self._cache:
            bits = model.site_bits(self.params.L).astype(float)
            gram = self.ops.conj().transpose(0, 2, 1) @ self.ops  # K_k^dag K_k, batched
            self._cache["site_count_ops"] = np.einsum("ki,kab->iab", bits, gram)
        return self._cache["site_count_ops"]

    def ops_dag(self) -> np.ndarray:
        """Adjoint stack K_k^dag, cached (lets E share the dual's sandwich kernel)."""
        if "ops_dag" not in self._cache:
            self._cache["ops_dag"] = np.ascontiguousarray(self.ops.conj().transpose(0, 2, 1))
        return self._cache["ops_dag"]

    def activity_op(self) -> np.ndarray:
        """sum_k popcount(k) K_k^dag K_k; Tr[. rho]/L is the one-step activity."""
        if "activity_op" not in self._cache:
            self._cache["activity_op"] = self.site_count_ops().sum(axis=0)
        return self._cache["activity_op"]


def _block_hamiltonians(params: ModelParams) -> np.ndarray:
    """All 2^L collision blocks H_m, stacked over the packed m index."""
    H_S = model.build_system_hamiltonian(params)
    diags = model.collision_block_diagonals(params)
    stack = np.broadcast_to(H_S, (params.dim, params.dim, params.dim)).copy()
    idx = np.arange(params.dim)
    stack[:, idx, idx] += diags
    return stack


def _expm_hermitian_stack(H_stack: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) for a stack of Hermitian matrices via batched eigh."""
    w, V = np.linalg.eigh(H_stack)
    phases = np.exp(-1j * w * dt)
    return np.einsum("mik,mk,mjk->mij", V, phases, V.conj())


def build_kraus_dense(params: ModelParams) -> KrausFamily:
    """Exact joint-space construction: U = exp(-i H_CM dt) on 4^L dimensions."""
    params.check_cap(DENSE_MAX_SITES)
    L, dim = params.L, params.dim
    joint = dim * dim

    H = np.kron(model.build_system_hamiltonian(params), np.eye(dim))
    if params.gamma != 0.0:
        g = np.sqrt(params.gamma / params.dt)
        for i in range(L):
            P_i = model.single_site_op(model.PROJ_0, i, L)
            tau_x = model.single_site_op(model.SIGMA_X, i, L)
            H += g * np.kron(P_i, tau_x)
    w, V = np.linalg.eigh(H)
    U = (V * np.exp(-1j * w * params.dt)) @ V.conj().T
    # K_k[i, j] = U[(i, anc=k), (j, anc=0)]
    ops = U.reshape(dim, dim, dim, dim)[:, :, :, 0].transpose(1, 0, 2).copy()
    assert ops.shape == (dim, dim, dim) and U.shape == (joint, joint)
    return KrausFamily(params=params, ops=ops, construction=Construction.DENSE_4L)


def build_kraus_fast(params: ModelParams) -> KrausFamily:
    """Block + Walsh-Hadamard construction; equals the dense result where both exist."""
    params.check_cap()
    E = _expm_hermitian_stack(_block_hamiltonians(params), params.dt)
    ops = fwht(E) / params.dim
    return KrausFamily(params=params, ops=ops, construction=Construction.BLOCK_WHT)


def conditional_kraus_dense(params: ModelParams) -> np.ndarray:
    """All K_{k|k'} = <k_A| U |k'_A> from the joint-space U, shape (2^L, 2^L, d, d).

    First index is the observed outcome k, second the pre-collision ancilla
    content k'; column k'=0 reproduces build_kraus_dense. Used by the
    reset-free protocol and its equivalence tests.
    """
    params.check_cap(DENSE_MAX_SITES)
    dim = params.dim
    H = np.kron(model.build_system_hamiltonian(params), np.eye(dim))
    if params.gamma != 0.0:
        g = np.sqrt(params.gamma / params.dt)
        for i in range(params.L):
            H += g * np.kron(
                model.single_site_op(model.PROJ_0, i, params.L),
                model.single_site_op(model.SIGMA_X, i, params.L),
            )
    w, V = np.linalg.eigh(H)
    U = (V * np.exp(-1j * w * params.dt)) @ V.conj().T
    return U.reshape(dim, dim, dim, dim).transpose(1, 3, 0, 2).copy()


def check_density_matrix(rho: np.ndarray, atol_herm=1e-12, atol_trace=1e-12, atol_pos=1e-10):
    """Raise NumericalConsistencyError if rho is not a density matrix to tolerance."""
    if np.abs(rho - rho.conj().T).max() > atol_herm:
        raise NumericalConsistencyError("density matrix not Hermitian to tolerance")
    if abs(np.trace(rho).real - 1.0) > atol_trace:
        raise NumericalConsistencyError(f"trace {np.trace(rho)!r} != 1 to tolerance")
    if np.linalg.eigvalsh(rho).min() < -atol_pos:
        raise NumericalConsistencyError("density matrix has negative eigenvalues")


def kraus_sandwich(ops: np.ndarray, X: np.ndarray, weights=None) -> np.ndarray:
    """sum_k w_k K_k^dag X K_k collapsed to one (d, n*d) x (n*d, d) GEMM."""
    A = X @ ops  # broadcasts to (n, d, d), C-contiguous
    if weights is not None:
        A *= weights[:, None, None]
    n, d, _ = ops.shape
    return ops.reshape(n * d, d).conj().T @ A.reshape(n * d, d)


def apply_channel(kf: KrausFamily, rho: np.ndarray) -> np.ndarray:
    """E[rho] = sum_k K_k rho K_k^dag, symmetrized to suppress roundoff drift."""
    if rho.shape != (kf.dim, kf.dim):
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs channel dim {kf.dim}")
    out = kraus_sandwich(kf.ops_dag(), rho)
    return 0.5 * (out + out.conj().T)


def apply_dual_channel(kf: KrausFamily, X: np.ndarray) -> np.ndarray:
    """E*[X] = sum_k K_k^dag X K_k (Heisenberg picture), symmetrized."""
    out = kraus_sandwich(kf.ops, X)
    return 0.5 * (out + out.conj().T)


def stationary_state(kf: KrausFamily, tol: float = 1e-10, max_iter: int = 10 ** 6) -> np.ndarray:
    """Fixed point of the channel by iteration from the fully mixed state.

    For the unital collision channel the fully mixed state is already the
    fixed point and the loop exits after one application; for biased (Doob)
    channels this is a genuine power iteration on density matrices.
    Convergence is measured in trace norm.
    """
    rho = np.eye(kf.dim, dtype=complex) / kf.dim
    for _ in range(max_iter):
        nxt = apply_channel(kf, rho)
        nxt /= np.trace(nxt).real
        increment = np.abs(np.linalg.eigvalsh(nxt - rho)).sum() * 0.5
        rho = nxt
        if increment < tol:
            check_density_matrix(rho)
            return rho
    raise ConvergenceError(
        f"channel fixed point not converged after {max_iter} iterations",
        residual=increment,
        iterations=max_iter,
    )


# --- optional on-disk cache -------------------------------------------------

_CACHE_VERSION = 1


def cache_key(params: ModelParams, construction: Construction) -> str:
    payload = f"v{_CACHE_VERSION};{params.key()};{construction.value}"
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def save_family(kf: KrausFamily, directory) -> str:
    """Write the family to ``directory`` keyed by a hash of its parameters.

    npz storage of the raw complex128 stack round-trips bit-exactly.
    Returns the file path.
    """
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"kraus_{cache_key(kf.params, kf.construction)}.npz"
    np.savez(
        path,
        ops=kf.ops,
        key=np.array(kf.params.key()),
        construction=np.array(kf.construction.value),
        version=np.array(_CACHE_VERSION),
    )
    return str(path)


def load_family(params: ModelParams, directory, construction=Construction.BLOCK_WHT):
    """Load a cached family if present and parameter-compatible, else None."""
    from pathlib import Path

    path = Path(directory) / f"kraus_{cache_key(params, construction)}.npz"
    if not path.exists():
        return None
    data = np.load(path, allow_pickle=False)
    if str(data["key"]) != params.key() or int(data["version"]) != _CACHE_VERSION:
        return None
    return KrausFamily(params=params, ops=data["ops"], construction=construction)


def get_family(params: ModelParams, cache_dir=None) -> KrausFamily:
    """Fast construction with optional disk cache."""
    if cache_dir is not None:
        cached = load_family(params, cache_dir)
        if cached is not None:
            return cached
    kf = build_kraus_fast(params)
    if cache_dir is not None:
        save_family(kf, cache_dir)
    return kf
