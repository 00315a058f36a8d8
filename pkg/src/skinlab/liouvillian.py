"""Dense superoperator of the collective-jump master equation.

The generator acting on a density matrix is

    d rho / dt = -i [H, rho] - (1/2) (P^2 rho + rho P^2 - 2 P rho P)

and is represented as an N^2 x N^2 matrix acting on column-stacked vec(rho).
With that stacking (column index slowest), vec(A X B) = (B^T kron A) vec(X),
so

    L = -i (I kron H - H^T kron I) - 1/2 (I kron P^2 + (P^2)^T kron I)
        + P^T kron P.

Mixing vectorization conventions silently transposes the jump term; the one
above is frozen package-wide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, ParameterError
from .lattice_ops import LatticeOperators

SPECTRUM_CAP = 4096             # largest N^2 the dense solver will accept
ZERO_TOL_SCALE = 1e-8           # relative zero-eigenvalue threshold
KERNEL_GAP_WARN = 10.0          # flag kernels whose first decaying mode sits this close


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector (first column first)."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, n_sites: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape((n_sites, n_sites), order="F")


@dataclass(frozen=True)
class LiouvillianMatrix:
    """N^2 x N^2 matrix representation of the master-equation generator."""

    n_sites: int
    L: np.ndarray

    def zero_tolerance(self) -> float:
        """Threshold below which |eigenvalue| counts as zero."""
        scale = float(np.abs(self.L).max()) if self.L.size else 0.0
        return ZERO_TOL_SCALE * max(1.0, scale / self.n_sites)


@dataclass(frozen=True)
class StationaryReport:
    """Kernel (non-decaying subspace) of the generator.

    ``kernel_basis`` holds Hermitian representatives, normalized to unit
    trace whenever their trace is nonzero (Frobenius-normalized otherwise).
    ``kernel_vectors`` is an orthonormal basis of the kernel as column
    vectors, for projector overlap queries.  ``gap_ratio`` compares the first
    decaying singular value against the largest kernel one;
    ``ill_conditioned`` flags a first decaying mode within a factor
    ``KERNEL_GAP_WARN`` of the zero threshold.
    """

    zero_eigenvalue_multiplicity: int
    kernel_basis: list[np.ndarray]
    kernel_vectors: np.ndarray
    gap_ratio: float
    ill_conditioned: bool


def master_rhs(ops: LatticeOperators, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation in matrix form."""
    H, P, P2 = ops.H, ops.P, ops.P2
    return -1j * (H @ rho - rho @ H) - 0.5 * (P2 @ rho + rho @ P2) + P @ rho @ P


def build_liouvillian(ops: LatticeOperators) -> LiouvillianMatrix:
    """Assemble the dense superoperator matrix for the given lattice operators."""
    N = ops.n_sites
    eye = np.eye(N)
    L = (
        -1j * (np.kron(eye, ops.H) - np.kron(ops.H.T, eye))
        - 0.5 * (np.kron(eye, ops.P2) + np.kron(ops.P2.T, eye))
        + np.kron(ops.P.T, ops.P)
    )
    return LiouvillianMatrix(N, L)


def liouvillian_spectrum(
    Lm: LiouvillianMatrix,
    eigenvectors: bool = False,
    cap: int = SPECTRUM_CAP,
):
    """Full dense spectrum, sorted by real then imaginary part.

    With ``eigenvectors=True`` also returns the right eigenvectors (columns,
    same order) and verifies every eigenpair residual against
    1e-8 * ||L||_F.

    Raises
    ------
    ParameterError
        If N^2 exceeds the configured cap.
    NumericalFailure
        On eigensolver non-convergence or residuals above the bound.
    """
    dim = Lm.n_sites**2
    if dim > cap:
        raise ParameterError(f"superoperator dimension {dim} exceeds the cap {cap}")
    try:
        if eigenvectors:
            w, V = np.linalg.eig(Lm.L)
        else:
            w = np.linalg.eigvals(Lm.L)
            V = None
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if V is None:
        return w
    V = V[:, order]
    scale = float(np.linalg.norm(Lm.L))
    residual = float(np.abs(Lm.L @ V - V * w).max())
    if residual > 1e-8 * scale:
        raise NumericalFailure(
            f"eigenpair residual {residual:.3e} exceeds 1e-8 * ||L||", residual=residual
        )
    return w, V


def stationary_states(Lm: LiouvillianMatrix, ops: LatticeOperators) -> StationaryReport:
    """Count and construct the non-decaying states of the generator."""
    tol = Lm.zero_tolerance()
    w, V = liouvillian_spectrum(Lm, eigenvectors=True)
    kernel_mask = np.abs(w) <= tol
    multiplicity = int(kernel_mask.sum())
    if multiplicity == 0:  # pragma: no cover - trace preservation forbids this
        raise NumericalFailure("no zero eigenvalue found; generator is not trace-preserving")

    # orthonormal kernel basis (as vectors)
    Q, _ = np.linalg.qr(V[:, kernel_mask])

    # singular-value picture of the kernel separation
    svals = np.linalg.svd(Lm.L, compute_uv=False)[::-1]  # ascending
    first_decaying = float(svals[multiplicity]) if multiplicity < svals.size else np.inf
    kernel_floor = max(
        float(svals[:multiplicity].max()), np.finfo(float).eps * float(svals[-1])
    )
    gap_ratio = first_decaying / kernel_floor
    ill_conditioned = first_decaying < KERNEL_GAP_WARN * tol

    basis = _hermitian_representatives(Q, Lm.n_sites)
    return StationaryReport(multiplicity, basis, Q, gap_ratio, ill_conditioned)


def kernel_overlap(report: StationaryReport, rho: np.ndarray) -> float:
    """Fraction of the Frobenius norm of rho lying inside the kernel subspace."""
    v = vec(rho)
    return float(np.linalg.norm(report.kernel_vectors.conj().T @ v) ** 2 / np.linalg.norm(v) ** 2)


def _hermitian_representatives(Q: np.ndarray, n_sites: int) -> list[np.ndarray]:
    """Hermitian (unit-trace where possible) basis of the kernel span.

    The kernel of a Hermiticity-preserving generator is closed under the
    adjoint, so Hermitian and anti-Hermitian parts of its vectors stay inside
    it; an SVD over their real span extracts an independent Hermitian set.
    """
    d = Q.shape[1]
    candidates = []
    for i in range(d):
        m = unvec(Q[:, i], n_sites)
        candidates.append(0.5 * (m + m.conj().T))
        candidates.append((m - m.conj().T) / 2j)
    X = np.stack([vec(c) for c in candidates], axis=1)
    real_rep = np.vstack([X.real, X.imag])
    U, s, _ = np.linalg.svd(real_rep, full_matrices=False)
    rank = min(d, int((s > 1e-10 * max(s[0], 1.0)).sum()))
    basis = []
    half = U.shape[0] // 2
    for i in range(rank):
        m = unvec(U[:half, i] + 1j * U[half:, i], n_sites)
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr) > 1e-8:
            m = m / tr
        else:
            m = m / np.linalg.norm(m)
        basis.append(m)
    return basis


def open_chain_modes(n_sites: int) -> np.ndarray:
    """Sine eigenmodes of the open chain: column alpha is sqrt(2/(N+1)) sin(pi n alpha/(N+1))."""
    n = np.arange(1, n_sites + 1)[:, None]
    alpha = np.arange(1, n_sites + 1)[None, :]
    return np.sqrt(2.0 / (n_sites + 1)) * np.sin(np.pi * n * alpha / (n_sites + 1))


def analytic_commuting_spectrum(J: float, R: float, n_sites: int):
    """Closed-form generator spectrum of the commuting nearest-neighbour model.

    Valid for the cosine model with T = 0, phi = 0 under TRUNCATE_P, where H
    and P are commuting Jacobi matrices sharing the open-chain sine modes.
    Each mode pair (alpha, beta) contributes the eigenvalue

        lambda = i (E_beta - E_alpha) - 1/2 (p_alpha - p_beta)^2

    with E_alpha = 2 J cos(pi alpha/(N+1)) and
    p_alpha = R [1 + cos(pi alpha/(N+1))].

    Returns
    -------
    alpha, beta : int ndarrays of shape (N^2,)
    lam : complex ndarray of shape (N^2,)
    """
    idx = np.arange(1, n_sites + 1)
    E = 2.0 * J * np.cos(np.pi * idx / (n_sites + 1))
    p = R * (1.0 + np.cos(np.pi * idx / (n_sites + 1)))
    alpha, beta = np.meshgrid(idx, idx, indexing="ij")
    lam = 1j * (E[beta - 1] - E[alpha - 1]) - 0.5 * (p[alpha - 1] - p[beta - 1]) ** 2
    return alpha.ravel(), beta.ravel(), lam.ravel()


def bidiagonal_stationary_state(n_sites: int) -> np.ndarray:
    """Diagonal-plus-antidiagonal stationary state of transpose-symmetric chains.

    Equals (I + X)/(N+1) with X the exchange matrix.  For even N that matrix
    has trace N/(N+1), so it is rescaled by (N+1)/N to unit trace; for odd N
    it is unit-trace as constructed, with purity 2/(N+1).
    """
    rho = (np.eye(n_sites) + np.eye(n_sites)[::-1]) / (n_sites + 1)
    return rho / np.trace(rho).real
