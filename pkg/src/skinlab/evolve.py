"""Time propagation of density matrices and no-jump wavefunctions.

Propagation is exact-exponential: the generator is diagonalized once and
exp(L t) applied spectrally for every requested time, with a
scaling-and-squaring fallback when the eigenbasis is too ill-conditioned.
A fixed-step RK4 integrator of the master equation is provided as an
independent cross-check and as the route for lattices too large for the
dense superoperator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalFailure, ParameterError
from .lattice_ops import LatticeOperators
from .liouvillian import LiouvillianMatrix, master_rhs, unvec, vec

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8       # beyond this the propagation aborts, never clips
DRIFT_ABORT = 1e-6          # hermiticity/trace drift that counts as failure
EIG_COND_LIMIT_MASTER = 1e8
EIG_COND_LIMIT_SEMI = 1e10


@dataclass(frozen=True)
class DensityMatrix:
    """N x N Hermitian, unit-trace, positive-semidefinite state."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ParameterError(f"density matrix must be square, got shape {rho.shape}")
        herm = float(np.abs(rho - rho.conj().T).max())
        if herm > HERM_TOL:
            raise ParameterError(f"density matrix not Hermitian: max deviation {herm:.3e}")
        tr = complex(np.trace(rho))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ParameterError(f"density matrix trace {tr} differs from 1")
        w_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if w_min < -POSITIVITY_TOL:
            raise ParameterError(f"density matrix has eigenvalue {w_min:.3e} < 0")

    @property
    def n_sites(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def site(cls, n_sites: int, site: int) -> "DensityMatrix":
        """Projector on a single site (1-based index)."""
        if not 1 <= site <= n_sites:
            raise ParameterError(f"site {site} outside 1..{n_sites}")
        psi = np.zeros(n_sites)
        psi[site - 1] = 1.0
        return cls.pure(psi)

    @classmethod
    def maximally_mixed(cls, n_sites: int) -> "DensityMatrix":
        return cls(np.eye(n_sites) / n_sites)


@dataclass(frozen=True)
class SemiclassicalState:
    """Unnormalized no-jump wavefunction; its norm decays under H_eff."""

    psi: np.ndarray
    method: str = "spectral"


class MasterPropagator:
    """Spectral propagator exp(L t) with the eigendecomposition computed once.

    Falls back to scaling-and-squaring (scipy expm) when the eigenbasis
    condition number exceeds 1e8.
    """

    def __init__(self, Lm: LiouvillianMatrix):
        self.Lm = Lm
        self.n_sites = Lm.n_sites
        w, V = np.linalg.eig(Lm.L)
        cond = np.linalg.cond(V)
        self.use_expm = not np.isfinite(cond) or cond > EIG_COND_LIMIT_MASTER
        if not self.use_expm:
            self.eigenvalues = w
            self.V = V
            self.V_inv = np.linalg.inv(V)
        else:  # pragma: no cover - needs a near-defective generator
            self.eigenvalues = w
            self.V = self.V_inv = None

    def evolve(self, rho0: np.ndarray, t: float) -> np.ndarray:
        """Raw matrix-form solution at time t without state validation."""
        if t < 0:
            raise ParameterError(f"propagation time must be >= 0, got {t}")
        v = vec(rho0)
        if self.use_expm:
            out = scipy.linalg.expm(self.Lm.L * t) @ v
        else:
            out = self.V @ (np.exp(self.eigenvalues * t) * (self.V_inv @ v))
        return unvec(out, self.n_sites)

    def propagate(self, rho0: DensityMatrix | np.ndarray, t: float) -> DensityMatrix:
        """Propagated state with invariant checks; aborts on drift beyond tolerance."""
        rho0 = rho0.rho if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
        rho = self.evolve(rho0, t)
        herm_drift = float(np.abs(rho - rho.conj().T).max())
        trace_drift = abs(complex(np.trace(rho)) - 1.0)
        if herm_drift > DRIFT_ABORT or trace_drift > DRIFT_ABORT:
            raise NumericalFailure(
                f"propagation drift beyond tolerance: hermiticity {herm_drift:.3e}, "
                f"trace {trace_drift:.3e}",
                residual=max(herm_drift, trace_drift),
            )
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        w_min = float(np.linalg.eigvalsh(rho).min())
        if w_min < -POSITIVITY_TOL:
            raise NumericalFailure(
                f"propagation lost positivity: min eigenvalue {w_min:.3e}", residual=-w_min
            )
        return DensityMatrix(rho)

    def stationary_projection(self, rho0: DensityMatrix | np.ndarray) -> np.ndarray:
        """Infinite-time limit: projection of rho0 onto the kernel eigenmodes."""
        rho0 = rho0.rho if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
        if self.use_expm:  # pragma: no cover
            raise NumericalFailure("kernel projection unavailable in expm fallback mode")
        tol = self.Lm.zero_tolerance()
        keep = np.abs(self.eigenvalues) <= tol
        out = self.V[:, keep] @ (self.V_inv[keep] @ vec(rho0))
        rho = unvec(out, self.n_sites)
        return 0.5 * (rho + rho.conj().T)


def propagate_master(
    Lm: LiouvillianMatrix, rho0: DensityMatrix | np.ndarray, t: float
) -> DensityMatrix:
    """One-shot master-equation propagation; see :class:`MasterPropagator`."""
    return MasterPropagator(Lm).propagate(rho0, t)


def propagate_master_rk4(
    ops: LatticeOperators,
    rho0: DensityMatrix | np.ndarray,
    t_final: float,
    dt: float = 1e-3,
) -> DensityMatrix:
    """Fixed-step RK4 integration of the master equation in matrix form.

    Independent of the superoperator route (needs only H, P); the number of
    steps is rounded so the final time is hit exactly.
    """
    if t_final < 0:
        raise ParameterError(f"propagation time must be >= 0, got {t_final}")
    if dt <= 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    rho = np.array(rho0.rho if isinstance(rho0, DensityMatrix) else rho0, dtype=complex)
    n_steps = max(1, round(t_final / dt)) if t_final > 0 else 0
    h = t_final / n_steps if n_steps else 0.0
    for _ in range(n_steps):
        k1 = master_rhs(ops, rho)
        k2 = master_rhs(ops, rho + 0.5 * h * k1)
        k3 = master_rhs(ops, rho + 0.5 * h * k2)
        k4 = master_rhs(ops, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho)


class SemiclassicalPropagator:
    """exp(-i H_eff t) applied spectrally, with expm fallback for defective H_eff."""

    def __init__(self, ops: LatticeOperators):
        self.H_eff = ops.H_eff
        w, V = scipy.linalg.eig(ops.H_eff)
        cond = np.linalg.cond(V)
        self.use_expm = not np.isfinite(cond) or cond > EIG_COND_LIMIT_SEMI
        if not self.use_expm:
            self.eigenvalues = w
            self.V = V
            self.V_inv = np.linalg.inv(V)

    @property
    def method(self) -> str:
        return "expm" if self.use_expm else "spectral"

    def at(self, psi0: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise ParameterError(f"propagation time must be >= 0, got {t}")
        psi0 = np.asarray(psi0, dtype=complex)
        if self.use_expm:
            return scipy.linalg.expm(-1j * self.H_eff * t) @ psi0
        return self.V @ (np.exp(-1j * self.eigenvalues * t) * (self.V_inv @ psi0))


def propagate_semiclassical(
    ops: LatticeOperators, psi0: np.ndarray, t: float
) -> SemiclassicalState:
    """No-jump evolution psi(t) = exp(-i H_eff t) psi0; norm never grows."""
    prop = SemiclassicalPropagator(ops)
    return SemiclassicalState(prop.at(psi0, t), method=prop.method)


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    """-sum_i lambda_i ln lambda_i over the state's eigenvalues (nats).

    Eigenvalues are clamped to [0, 1] and 0 ln 0 counts as 0.
    """
    rho = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    w = np.clip(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)), 0.0, 1.0)
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


@dataclass(frozen=True)
class EntropyTrace:
    """Entropy along a time grid plus the infinite-time (kernel-projected) value."""

    times: np.ndarray
    entropies: np.ndarray
    s_infinity: float
    rho_infinity: np.ndarray


def entropy_trace(
    Lm: LiouvillianMatrix,
    ops: LatticeOperators,
    rho0: DensityMatrix | np.ndarray,
    times,
) -> EntropyTrace:
    """Von Neumann entropy at each time, with the stationary limit appended.

    The infinite-time state is the spectral projection of rho0 onto the
    kernel of the generator (not the last sampled time).
    """
    times = np.asarray(times, dtype=float)
    if times.size and np.any(np.diff(times) < 0):
        raise ParameterError("times must be sorted ascending")
    if ops.n_sites != Lm.n_sites:
        raise ParameterError("lattice operators and superoperator sizes differ")
    prop = MasterPropagator(Lm)
    entropies = np.array([von_neumann_entropy(prop.propagate(rho0, t)) for t in times])
    rho_inf = prop.stationary_projection(rho0)
    return EntropyTrace(times, entropies, von_neumann_entropy(rho_inf), rho_inf)


@dataclass(frozen=True)
class Observables:
    """Site populations, anti-diagonal coherences, first moment and purity."""

    populations: np.ndarray
    coherence_antidiag: np.ndarray
    first_moment: float
    purity: float


def observables(rho: DensityMatrix | np.ndarray) -> Observables:
    """Standard diagnostics of a state in the site basis (1-based site index)."""
    rho = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    populations = np.real(np.diag(rho))
    coherence = np.abs(rho[np.arange(n), n - 1 - np.arange(n)])
    first_moment = float(np.arange(1, n + 1) @ populations)
    purity = float(np.trace(rho @ rho).real)
    return Observables(populations, coherence, first_moment, purity)


def relaxation_time(Lm: LiouvillianMatrix, factor: float = 10.0) -> float:
    """Model-independent horizon for asymptotic checks: factor / |Re lambda_slow|.

    lambda_slow is the decaying eigenvalue whose real part is closest to
    zero (excluding the kernel itself).
    """
    w = np.linalg.eigvals(Lm.L)
    tol = Lm.zero_tolerance()
    decaying = w[w.real < -tol]
    if decaying.size == 0:
        raise ParameterError("generator has no decaying modes")
    slow = float(np.max(decaying.real))
    return factor / abs(slow)
