"""Exponential memory kernel, its right-rectangle quadrature, and the
constant-cost recursion that replaces the full history sum.

The model damps past velocity through the kernel beta(t) = gamma*exp(-delta*t).
The discrete memory term at step n is the kernel-weighted running sum
U_beta^n = k * sum_{j<=n} beta(t_n - t_j) U^j, which obeys
U_beta^n = k*gamma*U^n + exp(-delta*k) * U_beta^{n-1}, so only the previous
accumulator value is stored.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Model coefficients: viscosity mu, kernel amplitude gamma, decay delta.

    gamma = 0 is accepted and turns the model into plain Navier-Stokes.
    """

    mu: float
    gamma: float
    delta: float

    def __post_init__(self):
        if self.mu <= 0 or self.delta <= 0 or self.gamma < 0:
            raise ValueError(
                "need mu > 0, delta > 0, gamma >= 0; got "
                f"mu={self.mu}, gamma={self.gamma}, delta={self.delta}"
            )

    @property
    def nu(self) -> float:
        """Effective total viscosity mu + gamma/delta."""
        return self.mu + self.gamma / self.delta


def kernel(params: ModelParams, t) -> np.ndarray:
    """Kernel value gamma * exp(-delta * t) for elapsed time t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("kernel is defined for nonnegative elapsed time only")
    return params.gamma * np.exp(-params.delta * t)


@dataclass(frozen=True)
class MemoryAccumulator:
    """Kernel-weighted running sum of velocity coefficients.

    value holds U_beta^n in the velocity dof layout; the memory footprint is
    one coefficient vector regardless of how many steps were taken.
    """

    value: np.ndarray
    k: float
    gamma: float
    delta: float

    @classmethod
    def zeros(cls, ndof: int, k: float, params: ModelParams) -> "MemoryAccumulator":
        return cls(np.zeros(ndof), k, params.gamma, params.delta)


def accumulator_update(acc: MemoryAccumulator, U_n: np.ndarray) -> MemoryAccumulator:
    """Advance the accumulator by one step with the new velocity U^n."""
    U_n = np.asarray(U_n, dtype=float)
    if U_n.shape != acc.value.shape:
        raise ValueError(
            f"layout mismatch: accumulator has shape {acc.value.shape}, "
            f"velocity has shape {U_n.shape}"
        )
    value = acc.k * acc.gamma * U_n + math.exp(-acc.delta * acc.k) * acc.value
    return MemoryAccumulator(value, acc.k, acc.gamma, acc.delta)


def direct_quadrature(history, k: float, gamma: float, delta: float) -> np.ndarray:
    """Right-rectangle sum k * sum_j gamma*exp(-delta*(t_n - t_j)) * phi^j.

    history lists phi^1 .. phi^n in step order.  This is the reference
    implementation of the memory quadrature; the solver itself uses the
    accumulator recursion, which this function cross-checks in tests.
    """
    history = [np.asarray(v, dtype=float) for v in history]
    if not history:
        raise ValueError("history must contain at least one entry")
    n = len(history)
    out = np.zeros_like(history[0])
    for j, phi in enumerate(history, start=1):
        out += math.exp(-delta * k * (n - j)) * phi
    return k * gamma * out


_PROFILES = ("exp", "cos")


def convolution_profile(profile: str, gamma: float, delta: float, t: float) -> float:
    """Closed form of int_0^t gamma*exp(-delta*(t-s)) g(s) ds.

    g is the time profile of a separable exact solution: g(s) = exp(s) or
    g(s) = cos(s).  Used to synthesize manufactured forcing terms.
    """
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}; expected one of {_PROFILES}")
    if np.any(np.asarray(t) < 0):
        raise ValueError("convolution profile requires t >= 0")
    if profile == "exp":
        return gamma * (np.exp(t) - np.exp(-delta * t)) / (1.0 + delta)
    return gamma * (
        delta * np.cos(t) + np.sin(t) - delta * np.exp(-delta * t)
    ) / (1.0 + delta**2)
