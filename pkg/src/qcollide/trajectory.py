"""Stochastic realizations (quantum trajectories) of the collision model.

The default sampler never touches the 4^L joint space: one step forms the
post-collision joint state through the commuting-ancilla block structure
(2^L block matvecs + an entrywise Walsh-Hadamard transform), then measures
ancilla bits sequentially by the partial-norm chain rule. An enumerated
sampler (all 2^L outcome probabilities per step) is kept as the validation
path, and a reset-free protocol reuses the same machinery with the ancilla
register carried between steps.

Randomness: Philox counter-based streams keyed by (master seed, trajectory
index). The sequential sampler consumes exactly L uniforms per step, ancilla
site 0 first, choosing outcome bit 1 when u < P(bit=1); the enumerated
sampler consumes one uniform per step via inverse CDF (searchsorted on the
cumulative table, right side).
"""

import csv
import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model
from .channel import KrausFamily, conditional_kraus_dense
from .errors import NumericalConsistencyError, SchemaError
from .model import ModelParams
from .walsh import fwht

TRAJECTORY_SCHEMA = "qcollide.trajectory.v1"
_BINARY_MAGIC = b"QCTR"
_BINARY_VERSION = 1


class Mode(enum.Enum):
    RESET = "Reset"
    RESET_FREE = "ResetFree"
    RESET_FREE_POSTPROCESSED = "ResetFreePostprocessed"


@dataclass
class TrajectoryRecord:
    seed: int
    traj_index: int
    params: ModelParams
    outcomes: np.ndarray  # (T, L) uint8
    occupations: np.ndarray | None  # (T, L) float64 or None
    mode: Mode

    @property
    def T(self) -> int:
        return self.outcomes.shape[0]


def trajectory_rng(master_seed: int, traj_index: int = 0) -> np.random.Generator:
    """Independent stream for one trajectory; splittable across workers."""
    return np.random.Generator(
        np.random.Philox(key=np.array([master_seed, traj_index], dtype=np.uint64))
    )


def zero_state(L: int) -> np.ndarray:
    psi = np.zeros(2 ** L, dtype=complex)
    psi[0] = 1.0
    return psi


def _joint_state(blocks: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """J[k, :] = <k_A| U (psi x |0_A>) as a (2^L, 2^L) matrix over (ancilla, system)."""
    phi = np.einsum("mij,j->mi", blocks, psi)
    return fwht(phi) / blocks.shape[0]


def _measure_bits(weights: np.ndarray, uniforms: np.ndarray, L: int) -> int:
    """Sequential ancilla measurement on the outcome-weight vector.

    weights[k] is the squared norm of the k branch; bits are resolved from
    site 0 (most significant) down, drawing one uniform per bit and taking
    bit = 1 when u < P(bit=1 | resolved prefix).
    """
    base, size = 0, weights.shape[0]
    for j in range(L):
        half = size // 2
        block = weights[base : base + size]
        total = block.sum()
        p1 = block[half:].sum() / total
        if uniforms[j] < p1:
            base += half
        size = half
    return base


def _occupations(psi: np.ndarray, bits: np.ndarray) -> np.ndarray:
    return (np.abs(psi) ** 2) @ bits


def sample_trajectory(
    kf: KrausFamily,
    psi0: np.ndarray,
    T: int,
    seed: int,
    traj_index: int = 0,
    record_occupations: bool = False,
) -> TrajectoryRecord:
    """Sample one monitored realization of T collision steps (reset protocol)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    L = kf.params.L
    psi = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    blocks = kf.blocks()
    bits = model.site_bits(L).astype(float)
    rng = trajectory_rng(seed, traj_index)

    outcomes = np.zeros((T, L), dtype=np.uint8)
    occupations = np.zeros((T, L)) if record_occupations else None
    for t in range(T):
        J = _joint_state(blocks, psi)
        weights = np.einsum("ki,ki->k", J, J.conj()).real
        total = weights.sum()
        if abs(total - 1.0) > 1e-8:
            raise NumericalConsistencyError(
                f"outcome probabilities sum to {total} at step {t + 1}"
            )
        k = _measure_bits(weights, rng.random(L), L)
        psi = J[k]
        psi = psi / np.linalg.norm(psi)
        outcomes[t] = (k >> (L - 1 - np.arange(L))) & 1
        if record_occupations:
            occupations[t] = _occupations(psi, bits)
    return TrajectoryRecord(
        seed=seed, traj_index=traj_index, params=kf.params,
        outcomes=outcomes, occupations=occupations, mode=Mode.RESET,
    )


def step_distribution_blocks(kf: KrausFamily, psi: np.ndarray) -> np.ndarray:
    """One-step outcome distribution from the joint-state (block) path."""
    J = _joint_state(kf.blocks(), np.asarray(psi, dtype=complex))
    return np.einsum("ki,ki->k", J, J.conj()).real


def step_distribution_enumerated(kf: KrausFamily, psi: np.ndarray) -> np.ndarray:
    """One-step outcome distribution p(k) = ||K_k psi||^2 by direct enumeration."""
    amps = np.einsum("kij,j->ki", kf.ops, np.asarray(psi, dtype=complex))
    return np.einsum("ki,ki->k", amps, amps.conj()).real


def sample_trajectory_enumerated(
    kf: KrausFamily, psi0: np.ndarray, T: int, seed: int, traj_index: int = 0,
    record_occupations: bool = False,
) -> TrajectoryRecord:
    """Validation sampler enumerating all 2^L outcome probabilities per step."""
    if T < 1:
        raise ValueError("T must be >= 1")
    L = kf.params.L
    psi = np.asarray(psi0, dtype=complex)
    bits = model.site_bits(L).astype(float)
    rng = trajectory_rng(seed, traj_index)
    outcomes = np.zeros((T, L), dtype=np.uint8)
    occupations = np.zeros((T, L)) if record_occupations else None
    for t in range(T):
        amps = np.einsum("kij,j->ki", kf.ops, psi)
        p = np.einsum("ki,ki->k", amps, amps.conj()).real
        total = p.sum()
        if abs(total - 1.0) > 1e-8:
            raise NumericalConsistencyError(
                f"outcome probabilities sum to {total} at step {t + 1}"
            )
        k = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
        k = min(k, p.shape[0] - 1)
        psi = amps[k] / np.linalg.norm(amps[k])
        outcomes[t] = (k >> (L - 1 - np.arange(L))) & 1
        if record_occupations:
            occupations[t] = _occupations(psi, bits)
    return TrajectoryRecord(
        seed=seed, traj_index=traj_index, params=kf.params,
        outcomes=outcomes, occupations=occupations, mode=Mode.RESET,
    )


def sample_trajectory_reset_free(
    kf: KrausFamily, psi0: np.ndarray, T: int, seed: int, traj_index: int = 0,
    record_occupations: bool = False,
) -> TrajectoryRecord:
    """Protocol without ancilla resets: the measured register feeds the next collision.

    The block structure gives <k_A|U|k'_A> = K_{k xor k'}, so the joint state
    with ancilla input k' is the reset joint state permuted by xor; the
    sequential measurement runs on the permuted weights.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    L = kf.params.L
    dim = kf.dim
    psi = np.asarray(psi0, dtype=complex)
    blocks = kf.blocks()
    bits = model.site_bits(L).astype(float)
    rng = trajectory_rng(seed, traj_index)
    perm_base = np.arange(dim)

    outcomes = np.zeros((T, L), dtype=np.uint8)
    occupations = np.zeros((T, L)) if record_occupations else None
    k_prev = 0
    for t in range(T):
        J = _joint_state(blocks, psi)[perm_base ^ k_prev]
        weights = np.einsum("ki,ki->k", J, J.conj()).real
        total = weights.sum()
        if abs(total - 1.0) > 1e-8:
            raise NumericalConsistencyError(
                f"outcome probabilities sum to {total} at step {t + 1}"
            )
        k = _measure_bits(weights, rng.random(L), L)
        psi = J[k]
        psi = psi / np.linalg.norm(psi)
        outcomes[t] = (k >> (L - 1 - np.arange(L))) & 1
        if record_occupations:
            occupations[t] = _occupations(psi, bits)
        k_prev = k
    return TrajectoryRecord(
        seed=seed, traj_index=traj_index, params=kf.params,
        outcomes=outcomes, occupations=occupations, mode=Mode.RESET_FREE,
    )


def postprocess_reset_free(rec: TrajectoryRecord) -> TrajectoryRecord:
    """Map a reset-free record to reset-model statistics: flag outcome changes.

    k~_i(t) = |k_i(t) - k_i(t-1)| with k_i(0) = 0 (ancillas start in |0_A>).
    """
    if rec.mode is not Mode.RESET_FREE:
        raise ValueError(f"expected a ResetFree record, got mode {rec.mode}")
    prev = np.vstack([np.zeros((1, rec.outcomes.shape[1]), dtype=np.uint8), rec.outcomes[:-1]])
    return TrajectoryRecord(
        seed=rec.seed, traj_index=rec.traj_index, params=rec.params,
        outcomes=np.abs(rec.outcomes.astype(np.int8) - prev.astype(np.int8)).astype(np.uint8),
        occupations=None if rec.occupations is None else rec.occupations.copy(),
        mode=Mode.RESET_FREE_POSTPROCESSED,
    )


def enumerate_paths(kf: KrausFamily, psi0: np.ndarray, T: int) -> dict:
    """Exact probability of every outcome path over T steps (L and T small).

    Returns {(k_1, ..., k_T): probability}; probabilities sum to 1.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    paths = {(): psi0}
    for _ in range(T):
        nxt = {}
        for path, vec in paths.items():
            amps = np.einsum("kij,j->ki", kf.ops, vec)
            for k in range(kf.n_outcomes):
                nxt[path + (k,)] = amps[k]
        paths = nxt
    return {path: float(np.vdot(v, v).real) for path, v in paths.items()}


def enumerate_paths_reset_free(params: ModelParams, psi0: np.ndarray, T: int) -> dict:
    """Exact reset-free path probabilities from the conditional operators <k|U|k'>.

    Built independently from the dense joint-space U (no xor identity), so it
    can serve as the oracle for the post-processing equivalence.
    """
    cond = conditional_kraus_dense(params)  # [k, k_prev, :, :]
    psi0 = np.asarray(psi0, dtype=complex)
    n = cond.shape[0]
    paths = {(): (psi0, 0)}
    for _ in range(T):
        nxt = {}
        for path, (vec, k_prev) in paths.items():
            for k in range(n):
                nxt[path + (k,)] = (cond[k, k_prev] @ vec, k)
        paths = nxt
    return {path: float(np.vdot(v, v).real) for path, (v, _) in paths.items()}


# --- batching ----------------------------------------------------------------


def _sample_range(args):
    params, master_seed, indices, psi0, T, record_occ, mode = args
    from .channel import build_kraus_fast

    kf = build_kraus_fast(params)
    sampler = sample_trajectory if mode is Mode.RESET else sample_trajectory_reset_free
    return [
        sampler(kf, psi0, T, master_seed, traj_index=i, record_occupations=record_occ)
        for i in indices
    ]


def sample_many(
    kf: KrausFamily, psi0: np.ndarray, T: int, n_traj: int, master_seed: int,
    record_occupations: bool = False, workers: int = 1, mode: Mode = Mode.RESET,
) -> list:
    """n_traj independent trajectories; worker count never changes the records."""
    if workers <= 1 or n_traj == 1:
        sampler = sample_trajectory if mode is Mode.RESET else sample_trajectory_reset_free
        return [
            sampler(kf, psi0, T, master_seed, traj_index=i, record_occupations=record_occupations)
            for i in range(n_traj)
        ]
    from concurrent.futures import ProcessPoolExecutor

    chunks = [list(range(w, n_traj, workers)) for w in range(workers)]
    chunks = [c for c in chunks if c]
    args = [
        (kf.params, master_seed, chunk, psi0, T, record_occupations, mode) for chunk in chunks
    ]
    records = {}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for result in pool.map(_sample_range, args):
            for rec in result:
                records[rec.traj_index] = rec
    return [records[i] for i in range(n_traj)]


# --- persistence ---------------------------------------------------------------


def write_csv(rec: TrajectoryRecord, path):
    """Canonical CSV: one row per (t, site); t is 1-based."""
    with_occ = rec.occupations is not None
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {TRAJECTORY_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "site", "outcome", "occupation"] if with_occ else ["t", "site", "outcome"])
        for t in range(rec.T):
            for i in range(rec.outcomes.shape[1]):
                row = [t + 1, i, int(rec.outcomes[t, i])]
                if with_occ:
                    row.append(repr(float(rec.occupations[t, i])))
                writer.writerow(row)


def read_csv(path) -> tuple:
    """Read back (outcomes, occupations-or-None) from the canonical CSV."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != f"# schema: {TRAJECTORY_SCHEMA}":
            raise SchemaError(f"unexpected schema line {header!r} in {path}")
        reader = csv.reader(fh)
        columns = next(reader)
        with_occ = columns == ["t", "site", "outcome", "occupation"]
        if not with_occ and columns != ["t", "site", "outcome"]:
            raise SchemaError(f"unexpected columns {columns!r} in {path}")
        rows = list(reader)
    T = max(int(r[0]) for r in rows)
    L = max(int(r[1]) for r in rows) + 1
    outcomes = np.zeros((T, L), dtype=np.uint8)
    occupations = np.zeros((T, L)) if with_occ else None
    for r in rows:
        t, i = int(r[0]) - 1, int(r[1])
        outcomes[t, i] = int(r[2])
        if with_occ:
            occupations[t, i] = float(r[3])
    return outcomes, occupations


def write_binary(rec: TrajectoryRecord, path):
    """Compact layout: magic, version, L, T, flags, packed outcome bits, occupations."""
    with_occ = rec.occupations is not None
    T, L = rec.outcomes.shape
    packed = np.packbits(rec.outcomes.reshape(-1))
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<BHIB", _BINARY_VERSION, L, T, 1 if with_occ else 0))
        fh.write(struct.pack("<I", packed.size))
        fh.write(packed.tobytes())
        if with_occ:
            fh.write(rec.occupations.astype("<f8").tobytes())


def read_binary(path) -> tuple:
    with open(path, "rb") as fh:
        if fh.read(4) != _BINARY_MAGIC:
            raise SchemaError(f"{path} is not a trajectory binary")
        version, L, T, flags = struct.unpack("<BHIB", fh.read(8))
        if version != _BINARY_VERSION:
            raise SchemaError(f"unsupported trajectory binary version {version}")
        (n_packed,) = struct.unpack("<I", fh.read(4))
        packed = np.frombuffer(fh.read(n_packed), dtype=np.uint8)
        outcomes = np.unpackbits(packed)[: T * L].reshape(T, L)
        occupations = None
        if flags & 1:
            occupations = np.frombuffer(fh.read(T * L * 8), dtype="<f8").reshape(T, L).copy()
    return outcomes.astype(np.uint8), occupations
