"""Phase-coupled Kuramoto oscillators with random undirected coupling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CausalGraph, DomainError, Rng, SeriesKind, TrajectorySeries

STEP = 0.01


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class KuramotoSystem:
    omega: np.ndarray
    k: np.ndarray
    phi0: np.ndarray

    @property
    def p(self) -> int:
        return len(self.omega)

    def ground_truth(self) -> CausalGraph:
        """Unsigned coupling graph: +1 wherever ``k_ij != 0``."""
        g = (self.k != 0).astype(int)
        np.fill_diagonal(g, 0)
        return CausalGraph(g)


def sample_system(p: int, rng: Rng, edge_prob: float = 0.5) -> KuramotoSystem:
    """Frequencies ~ U[1, 10), phases ~ U[0, 2pi), each pair coupled (k=1) with probability 0.5."""
    if p < 2:
        raise DomainError("need at least two oscillators")
    omega = rng.uniform(1.0, 10.0, p)
    phi0 = rng.uniform(0.0, 2 * np.pi, p)
    upper = np.triu(rng.uniform(size=(p, p)) < edge_prob, k=1)
    k = (upper | upper.T).astype(float)
    return KuramotoSystem(omega=omega, k=k, phi0=phi0)


def derivative(system: KuramotoSystem, phi: np.ndarray) -> np.ndarray:
    """``dphi_i/dt = omega_i + sum_j k_ij sin(phi_i - phi_j)``."""
    diff = phi[:, None] - phi[None, :]
    return system.omega + (system.k * np.sin(diff)).sum(axis=1)


def rk4_step(system: KuramotoSystem, phi: np.ndarray, h: float) -> np.ndarray:
    k1 = derivative(system, phi)
    k2 = derivative(system, phi + 0.5 * h * k1)
    k3 = derivative(system, phi + 0.5 * h * k2)
    k4 = derivative(system, phi + h * k3)
    return phi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate(system: KuramotoSystem, T: int, h: float = STEP) -> TrajectorySeries:
    """Integrate ``T`` frames with classic RK4.

    Each frame stores the (unwrapped) phase and the derivative evaluated at
    that phase; intrinsic frequencies ride along as ``static``.
    """
    if T < 2:
        raise DomainError("T must be >= 2")
    out = np.empty((T, system.p, 2))
    phi = np.array(system.phi0, dtype=float)
    for t in range(T):
        if not np.all(np.isfinite(phi)):
            raise IntegrationError(f"non-finite phase at step {t}")
        out[t, :, 0] = phi
        out[t, :, 1] = derivative(system, phi)
        phi = rk4_step(system, phi, h)
    return TrajectorySeries(out, h, SeriesKind.PHASE, static=system.omega)
