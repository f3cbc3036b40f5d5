"""Model parameters and dense operator construction for the qubit chain.

Basis convention (fixed, relied on everywhere): computational basis states
are indexed by integers whose bit for site i is ``(index >> (L-1-i)) & 1``,
i.e. site 0 is the most significant bit. Outcome bitstrings of the ancilla
register are packed the same way.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError

# Dense construction beyond this size is refused (2^L = 256 ~ the dense-eigh sweet spot).
MAX_SITES = 8

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PROJ_0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)  # P = |0><0|
NUM_OP = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)  # n = |1><1| = 1 - P


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters, all in units of the Rabi frequency.

    omega is kept as a field (default 1.0) so single-body limits with a
    switched-off drive remain expressible; times are in units of 1/omega.
    """

    L: int
    dt: float = 1.25
    v: float = 5.875
    gamma: float = 3.0
    omega: float = 1.0
    delta: float = 0.0
    pbc: bool = True
    max_sites: int = field(default=MAX_SITES, compare=False)

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be an integer >= 1, got {self.L!r}")
        if not (self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        for name in ("dt", "v", "gamma", "omega", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")

    @property
    def dim(self) -> int:
        return 2 ** self.L

    def check_cap(self, cap=None):
        cap = self.max_sites if cap is None else cap
        if self.L > cap:
            raise ResourceLimitError(
                f"L={self.L} exceeds the dense-construction cap of {cap} sites "
                f"(dimension {2 ** self.L})"
            )

    def key(self) -> str:
        """Canonical string identifying the physical model (used for cache hashing)."""
        return (
            f"L={self.L};dt={self.dt!r};v={self.v!r};gamma={self.gamma!r};"
            f"omega={self.omega!r};delta={self.delta!r};pbc={self.pbc}"
        )


def bit_of(index: int, site: int, L: int) -> int:
    """Bit of computational-basis ``index`` at ``site`` (site 0 = MSB)."""
    return (index >> (L - 1 - site)) & 1


def site_bits(L: int) -> np.ndarray:
    """(2^L, L) array of bits per basis state, column i = site i."""
    idx = np.arange(2 ** L, dtype=np.uint32)
    return np.stack([(idx >> (L - 1 - i)) & 1 for i in range(L)], axis=1).astype(np.int64)


def popcounts(L: int) -> np.ndarray:
    """popcount(k) for every outcome string k, as int64."""
    return np.bitwise_count(np.arange(2 ** L, dtype=np.uint64)).astype(np.int64)


def single_site_op(op: np.ndarray, site: int, L: int) -> np.ndarray:
    """Embed a 2x2 operator at ``site`` of an L-site chain."""
    out = np.array([[1.0 + 0.0j]])
    for i in range(L):
        out = np.kron(out, op if i == site else np.eye(2, dtype=complex))
    return out


def build_system_hamiltonian(params: ModelParams) -> np.ndarray:
    """H_S = omega * sum_i sigma^x_i + v * sum_i n_i n_{i+1} + delta * sum_i n_i.

    The interaction sum is implemented literally: under PBC the index wraps,
    so at L=2 the single bond appears twice; at L=1 there is no neighbor pair
    and the term is absent.
    """
    params.check_cap()
    L, dim = params.L, params.dim
    bits = site_bits(L)

    H = np.zeros((dim, dim), dtype=complex)
    # off-diagonal drive: flip one site at a time
    for i in range(L):
        flip = np.arange(dim) ^ (1 << (L - 1 - i))
        H[flip, np.arange(dim)] += params.omega

    diag = np.zeros(dim)
    if L >= 2:
        n_pairs = L if params.pbc else L - 1
        for i in range(n_pairs):
            diag += params.v * bits[:, i] * bits[:, (i + 1) % L]
    if params.delta != 0.0:
        diag += params.delta * bits.sum(axis=1)
    H[np.arange(dim), np.arange(dim)] += diag
    return H


def build_collision_block(params: ModelParams, m: np.ndarray) -> np.ndarray:
    """H_m = H_S + sqrt(gamma/dt) * sum_i m_i P_i for a sign string m in {+1,-1}^L.

    These are the blocks of the collision Hamiltonian in the per-ancilla
    tau^x eigenbasis; the channel module sums exp(-i H_m dt) over all m.
    """
    m = np.asarray(m)
    if m.shape != (params.L,) or not np.all(np.abs(m) == 1):
        raise ValueError(f"m must be a length-{params.L} string of +/-1, got {m!r}")
    H = build_system_hamiltonian(params)
    if params.gamma == 0.0:
        return H
    g = np.sqrt(params.gamma / params.dt)
    bits = site_bits(params.L)
    # P_i is diagonal with entry 1 where the site bit is 0
    diag = g * ((1 - bits) * m[np.newaxis, :]).sum(axis=1)
    H[np.arange(params.dim), np.arange(params.dim)] += diag
    return H


def collision_block_diagonals(params: ModelParams) -> np.ndarray:
    """Diagonal coupling terms of all 2^L blocks, row m (bit 0 of m <-> +1, 1 <-> -1).

    Returns a (2^L, 2^L) real array D with H_m = H_S + diag(D[m]); the m index
    packs site 0 as MSB like everything else.
    """
    L, dim = params.L, params.dim
    if params.gamma == 0.0:
        return np.zeros((dim, dim))
    g = np.sqrt(params.gamma / params.dt)
    bits = site_bits(L)          # basis-state bits
    m_signs = 1 - 2 * site_bits(L)  # m-string signs, shape (2^L, L)
    # D[m, b] = g * sum_i m_signs[m, i] * (1 - bits[b, i])
    return g * (m_signs @ (1 - bits).T).astype(float)


def _no_adjacent_ones(bits_row: np.ndarray, pbc: bool) -> bool:
    L = bits_row.shape[0]
    pairs = range(L) if pbc else range(L - 1)
    return all(not (bits_row[i] and bits_row[(i + 1) % L]) for i in pairs)


def build_pxp_projector(L: int, pbc: bool = True) -> np.ndarray:
    """Diagonal projector onto basis states with no two adjacent 1s."""
    if L < 2:
        raise ValueError("PXP sector needs L >= 2")
    if L > MAX_SITES:
        raise ResourceLimitError(f"L={L} exceeds the cap of {MAX_SITES} sites")
    bits = site_bits(L)
    keep = np.array([_no_adjacent_ones(bits[b], pbc) for b in range(2 ** L)])
    return np.diag(keep.astype(complex))


def build_pxp_hamiltonian(L: int, pbc: bool = True) -> np.ndarray:
    """sum_i P_{i-1} sigma^x_i P_{i+1}; open chains drop the missing outer projector."""
    if L < 2:
        raise ValueError("PXP Hamiltonian needs L >= 2")
    if L > MAX_SITES:
        raise ResourceLimitError(f"L={L} exceeds the cap of {MAX_SITES} sites")
    dim = 2 ** L
    bits = site_bits(L)
    H = np.zeros((dim, dim), dtype=complex)
    for i in range(L):
        left, right = (i - 1) % L, (i + 1) % L
        for b in range(dim):
            ok = True
            if pbc or i > 0:
                ok &= bits[b, left] == 0
            if pbc or i < L - 1:
                ok &= bits[b, right] == 0
            if ok:
                H[b ^ (1 << (L - 1 - i)), b] += 1.0
    return H


def hermiticity_defect(op: np.ndarray) -> float:
    return float(np.abs(op - op.conj().T).max())
