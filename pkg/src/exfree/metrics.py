"""Figures of merit: fidelities, process matrices, negativity, Wigner maps,
parity conditioning, and two-qubit Pauli expectation tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm, sqrtm
from scipy.optimize import minimize_scalar

from .errors import DimensionError, InvalidOperatorError, InvalidParameterError
from .fock import DensityMatrix, ModeDims, StateVector, annihilation_op

QubitChannel = Callable[[np.ndarray], np.ndarray]


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, StateVector):
        v = state.amplitudes
        return np.outer(v, v.conj())
    if isinstance(state, DensityMatrix):
        return state.elements
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def state_fidelity(a, b) -> float:
    """Fidelity between two states (pure or mixed), in [0, 1].

    Pure-pure reduces to |<a|b>|^2; the general case is the squared Uhlmann
    fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        if a.dims.dims != b.dims.dims:
            raise DimensionError("state dims do not match")
        return float(abs(a.overlap(b)) ** 2)
    ra, rb = _as_matrix(a), _as_matrix(b)
    if ra.shape != rb.shape:
        raise DimensionError("state dims do not match")
    # shortcut when one side is (numerically) pure
    for x, y in ((ra, rb), (rb, ra)):
        if abs(np.trace(x @ x).real - 1.0) < 1e-10:
            w, v = np.linalg.eigh(x)
            psi = v[:, -1]
            return float(np.real(psi.conj() @ y @ psi))
    root = sqrtm(ra)
    inner = sqrtm(root @ rb @ root)
    return float(np.real(np.trace(inner)) ** 2)


def number_phase_matrix(n_levels: int, phi: float) -> np.ndarray:
    """Single-mode phase-space rotation exp(i*phi*n) as a diagonal matrix."""
    return np.diag(np.exp(1j * phi * np.arange(n_levels)))


def optimize_mode_phase(
    state, target, mode: Optional[int] = None, n_grid: int = 720
) -> tuple[float, float]:
    """Maximize fidelity over a deterministic phase rotation exp(i*phi*n).

    `mode` selects which mode of `state` the rotation acts on (None for a
    single-mode state).  Returns (best_fidelity, best_phi).  The transferred
    state picks up a detuning-dependent phase per photon; comparisons to
    fixed-frame targets are made after this one-parameter optimization.
    """
    rho = _as_matrix(state)
    dims = state.dims if hasattr(state, "dims") else ModeDims((rho.shape[0],))
    if mode is None:
        if dims.n_modes != 1:
            raise InvalidParameterError("specify the mode for a multi-mode state")
        mode = 0
    tgt = _as_matrix(target)

    # F(phi) = sum_ij e^{i phi (n_i - n_j)} rho_ij tgt_ji is a short Fourier
    # series in phi; collect its coefficients once and maximize cheaply.
    occ = np.indices(tuple(dims))[mode].ravel()
    g = rho * tgt.T
    diffs = occ[:, None] - occ[None, :]
    coeffs = {}
    for delta in range(-(dims[mode] - 1), dims[mode]):
        s = complex(g[diffs == delta].sum())
        if s != 0:
            coeffs[delta] = s

    def neg_fid(phi):
        return -float(np.real(sum(c * np.exp(1j * phi * d) for d, c in coeffs.items())))

    grid = np.linspace(0.0, 2.0 * np.pi, n_grid, endpoint=False)
    coarse = float(grid[np.argmin([neg_fid(p) for p in grid])])
    span = 2.0 * np.pi / n_grid
    res = minimize_scalar(neg_fid, bounds=(coarse - span, coarse + span), method="bounded")
    phi = float(res.x)
    return -float(res.fun), phi


@dataclass(frozen=True)
class ProcessMatrix:
    """Normalized Choi matrix of the S1->S3 qubit-subspace channel.

    Basis: input |i><j| on span{|0>,|1>} of the source mode tensored with the
    channel output on span{|0>,|1>} of the target mode; trace normalized to 1.
    """

    choi: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.choi, dtype=complex)
        if m.shape != (4, 4):
            raise DimensionError("Choi matrix must be 4x4")
        if np.linalg.norm(m - m.conj().T) > 1e-8:
            raise InvalidOperatorError("Choi matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-8:
            raise InvalidOperatorError("Choi matrix must be trace-normalized")
        if np.linalg.eigvalsh(m)[0] < -1e-8:
            raise InvalidOperatorError("Choi matrix must be completely positive")
        object.__setattr__(self, "choi", m)


IDEAL_CHOI = 0.5 * np.array(
    [[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], dtype=complex
)


def choi_from_channel(channel: QubitChannel, require_tp: bool = True) -> ProcessMatrix:
    """Build the (normalized) Choi matrix by propagating the 4 matrix units.

    With require_tp the map must preserve trace to 1e-6; post-selected
    channels set require_tp=False and the Choi is renormalized.
    """
    blocks = {}
    for i in range(2):
        for j in range(2):
            unit = np.zeros((2, 2), dtype=complex)
            unit[i, j] = 1.0
            blocks[(i, j)] = np.asarray(channel(unit), dtype=complex)
    if require_tp:
        tp_defect = max(
            abs(np.trace(blocks[(0, 0)]).real - 1.0), abs(np.trace(blocks[(1, 1)]).real - 1.0)
        )
        if tp_defect > 1e-6:
            raise InvalidOperatorError(
                f"channel is not trace preserving (defect {tp_defect:.2e}); "
                "declare post-selection explicitly"
            )
    choi = np.zeros((4, 4), dtype=complex)
    for (i, j), out in blocks.items():
        choi[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = out
    choi = 0.5 * (choi + choi.conj().T)
    tr = np.trace(choi).real
    if tr <= 1e-12:
        raise InvalidOperatorError("channel output has vanishing weight")
    return ProcessMatrix(choi / tr)


def process_fidelity(actual: ProcessMatrix, ideal: Optional[np.ndarray] = None) -> float:
    """Tr(choi_ideal choi_actual) with normalized Choi matrices.

    With this convention a fully depolarizing qubit channel scores exactly
    1/4 and the product error model F = 1/4 + 3*prod(P_i)/4 holds.
    """
    ideal_m = IDEAL_CHOI if ideal is None else np.asarray(ideal, dtype=complex)
    return float(np.real(np.trace(ideal_m @ actual.choi)))


def process_fidelity_qubit_subspace(
    channel: QubitChannel,
    optimize_phase: bool = True,
    require_tp: bool = True,
) -> tuple[float, float]:
    """Process fidelity of a qubit-subspace channel to the identity.

    Optionally optimizes a single deterministic output phase diag(1, e^{i phi});
    F(phi) is exactly sinusoidal so three evaluations fix the maximum.
    Returns (fidelity, optimal_phase).  The channel is propagated once; the
    rotation acts on the stored Choi matrix.
    """
    pm = choi_from_channel(channel, require_tp=require_tp)

    def fid_at(phi):
        v = np.kron(np.eye(2), np.diag([1.0, np.exp(1j * phi)]))
        return float(np.real(np.trace(IDEAL_CHOI @ v @ pm.choi @ v.conj().T)))

    if not optimize_phase:
        return fid_at(0.0), 0.0
    f0, f1, f2 = fid_at(0.0), fid_at(np.pi / 2.0), fid_at(np.pi)
    a = 0.5 * (f0 + f2)
    b, c = f0 - a, f1 - a
    phi = float(np.arctan2(c, b))
    return a + float(np.hypot(b, c)), phi


def depolarizing_budget(infidelities: Sequence[float]) -> float:
    """Combine independent error contributions: F = 1/4 + 3*prod(1-eps_i)/4."""
    prod = 1.0
    for eps in infidelities:
        if not 0.0 <= eps <= 1.0:
            raise InvalidParameterError(f"infidelity {eps} outside [0, 1]")
        prod *= 1.0 - eps
    return 0.25 + 0.75 * prod


def partial_transpose(rho: np.ndarray, dims2: tuple[int, int]) -> np.ndarray:
    """Transpose the second factor of a bipartite density matrix."""
    da, db = dims2
    r = np.asarray(rho, dtype=complex).reshape(da, db, da, db)
    return r.transpose(0, 3, 2, 1).reshape(da * db, da * db)


def negativity(rho, dims2: tuple[int, int]) -> float:
    """Entanglement negativity: sum of |negative eigenvalues| of the partial
    transpose; zero for every separable state."""
    m = _as_matrix(rho)
    da, db = dims2
    if m.shape[0] != da * db:
        raise DimensionError("bipartition does not match matrix size")
    eigs = np.linalg.eigvalsh(partial_transpose(m, dims2))
    return float(-eigs[eigs < 0].sum())


def displacement_matrix(alpha: complex, n_levels: int, guard: int = 4) -> np.ndarray:
    """Displacement operator on n_levels, exponentiated with a guard band of
    extra levels to bound truncation bias, then projected back."""
    big = n_levels + guard
    a = annihilation_op(big).elements
    d_big = expm(alpha * a.conj().T - np.conj(alpha) * a)
    return d_big[:n_levels, :n_levels]


def parity_matrix(n_levels: int) -> np.ndarray:
    return np.diag((-1.0 + 0j) ** np.arange(n_levels))


def wigner(rho_single_mode, alphas, guard: int = 4) -> np.ndarray:
    """Displaced-parity Wigner function W(alpha) = (2/pi) Tr[D rho D^dag P].

    `alphas` is any array of complex phase-space points; returns real values
    of the same shape.  The guard band grows with |alpha| so that the
    displaced state still fits the working truncation; `guard` is the
    minimum number of extra levels.
    """
    rho = _as_matrix(rho_single_mode)
    n = rho.shape[0]
    alphas = np.asarray(alphas, dtype=complex)
    flat = alphas.ravel()
    out = np.empty(flat.shape, dtype=float)
    cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k, al in enumerate(flat):
        r = abs(al)
        big = n + guard + int(np.ceil(r * r + 4.0 * r))
        if big not in cache:
            par = parity_matrix(big)
            padded = np.zeros((big, big), dtype=complex)
            padded[:n, :n] = rho
            cache[big] = (par, padded)
        par, padded = cache[big]
        d = displacement_matrix(al, big, guard=0)
        out[k] = (2.0 / np.pi) * np.real(np.trace(d @ padded @ d.conj().T @ par))
    return out.reshape(alphas.shape)


def parity_split(rho, mode: int = 0):
    """Split a state by photon-number parity of one mode.

    Returns (p_even, rho_even, rho_odd); the conditioned states are
    renormalized valid density matrices (None when the branch weight
    vanishes).
    """
    m = _as_matrix(rho)
    dims = rho.dims if hasattr(rho, "dims") else ModeDims((m.shape[0],))
    even_diag = [
        1.0 if (idx % 2 == 0) else 0.0 for idx in range(dims[mode])
    ]
    factors = [
        np.diag(even_diag).astype(complex) if k == mode else np.eye(n, dtype=complex)
        for k, n in enumerate(dims)
    ]
    p_even_op = factors[0]
    for f in factors[1:]:
        p_even_op = np.kron(p_even_op, f)
    p_odd_op = np.eye(dims.total, dtype=complex) - p_even_op

    def branch(proj):
        sub = proj @ m @ proj
        w = float(np.trace(sub).real)
        if w <= 1e-12:
            return w, None
        sub = sub / w
        return w, DensityMatrix(0.5 * (sub + sub.conj().T), dims)

    p_even, rho_even = branch(p_even_op)
    p_odd, rho_odd = branch(p_odd_op)
    return p_even, rho_even, rho_odd


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

PAULI_PAIRS = tuple(
    f"{p}{q}" for p in "IXYZ" for q in "IXYZ" if (p, q) != ("I", "I")
)


@dataclass(frozen=True)
class PauliTable:
    """The 15 non-identity two-qubit Pauli expectations in the {|0>,|2>}
    subspaces, plus the in-subspace weight of the projected state.

    Convention: |0> is the +Z eigenstate and |2> the -Z eigenstate of each
    encoded qubit.
    """

    values: dict[str, float]
    weight: float

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def pauli_table_02(rho_two_mode, dims2: Optional[tuple[int, int]] = None) -> PauliTable:
    """Project a two-mode state onto span{|0>,|2>} x span{|0>,|2>} and report
    all two-qubit Pauli expectations of the renormalized qubit pair."""
    m = _as_matrix(rho_two_mode)
    if dims2 is None:
        if not hasattr(rho_two_mode, "dims") or rho_two_mode.dims.n_modes != 2:
            raise DimensionError("provide dims2 for a bare matrix")
        dims2 = tuple(rho_two_mode.dims)
    da, db = dims2
    if min(da, db) < 3:
        raise DimensionError("the {|0>,|2>} encoding needs at least 3 levels per mode")

    def embed_rows(n):
        q = np.zeros((2, n), dtype=complex)
        q[0, 0] = 1.0
        q[1, 2] = 1.0
        return q

    k = np.kron(embed_rows(da), embed_rows(db))
    qubit = k @ m @ k.conj().T
    weight = float(np.trace(qubit).real)
    if weight < 1e-6:
        raise InvalidOperatorError("state has negligible weight in the {0,2} subspaces")
    qubit = qubit / weight
    values = {
        pair: float(np.real(np.trace(qubit @ np.kron(_PAULI[pair[0]], _PAULI[pair[1]]))))
        for pair in PAULI_PAIRS
    }
    return PauliTable(values=values, weight=weight)
