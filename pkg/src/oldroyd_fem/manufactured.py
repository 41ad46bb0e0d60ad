"""Exact solutions with synthesized forcing for the two benchmark flows.

Both cases are separable, u(x, y, t) = g(t) * U(x, y), with a divergence-free
spatial factor that vanishes on the boundary of the unit square:

  case 1 (smooth, g = exp(t)):      polynomial spatial factor, H^2 initial data;
  case 2 (nonsmooth, g = cos(t)):   half-integer powers, initial data in H^1_0
                                    only (the Laplacian is unbounded near the
                                    x = 0 and y = 0 edges).

The forcing is synthesized so that (u, p) solves the flow model exactly; the
memory integral of the separable solution reduces to the closed-form
convolution of g against the exponential kernel.
"""

import numpy as np

from .memory_term import ModelParams, convolution_profile


class ManufacturedCase:
    """Separable exact solution: velocity g(t)*U(x,y) and pressure g(t)*q(x,y).

    Subclasses provide the spatial factors; all derivatives are hand-coded
    closed forms validated against finite differences in the test suite.
    Gradient layout: grad[..., i, j] = d u_i / d x_j.
    """

    id: str
    profile: str  # time profile key: "exp" or "cos"

    def g(self, t):
        return np.exp(t) if self.profile == "exp" else np.cos(t)

    def g_prime(self, t):
        return np.exp(t) if self.profile == "exp" else -np.sin(t)

    # spatial factors, implemented by subclasses ---------------------------
    def spatial_velocity(self, x, y):
        raise NotImplementedError

    def spatial_gradient(self, x, y):
        raise NotImplementedError

    def spatial_laplacian(self, x, y):
        raise NotImplementedError

    # time-dependent fields -------------------------------------------------
    def velocity(self, x, y, t):
        return self.g(t) * self.spatial_velocity(x, y)

    def velocity_gradient(self, x, y, t):
        return self.g(t) * self.spatial_gradient(x, y)

    def velocity_laplacian(self, x, y, t):
        return self.g(t) * self.spatial_laplacian(x, y)

    def pressure(self, x, y, t):
        return 2.0 * self.g(t) * (np.asarray(x) - np.asarray(y))

    def pressure_gradient(self, x, y, t):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (2,))
        out[..., 0] = 2.0 * self.g(t)
        out[..., 1] = -2.0 * self.g(t)
        return out

    def initial_velocity(self, x, y, t=0.0):
        return self.velocity(x, y, 0.0)


class _SmoothCase(ManufacturedCase):
    """Polynomial solution: u1 = 2 e^t x^2(x-1)^2 y(y-1)(2y-1) and its
    antisymmetric partner, p = 2 e^t (x - y)."""

    id = "example1"
    profile = "exp"

    @staticmethod
    def _factors(x, y):
        a = x * x * (x - 1.0) ** 2
        da = 4 * x**3 - 6 * x**2 + 2 * x
        dda = 12 * x**2 - 12 * x + 2
        b = y * (y - 1.0) * (2 * y - 1.0)
        db = 6 * y**2 - 6 * y + 1
        ddb = 12 * y - 6
        c = x * (x - 1.0) * (2 * x - 1.0)
        dc = 6 * x**2 - 6 * x + 1
        ddc = 12 * x - 6
        d = y * y * (y - 1.0) ** 2
        dd = 4 * y**3 - 6 * y**2 + 2 * y
        ddd = 12 * y**2 - 12 * y + 2
        return a, da, dda, b, db, ddb, c, dc, ddc, d, dd, ddd

    def spatial_velocity(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        a, _, _, b, _, _, c, _, _, d, _, _ = self._factors(x, y)
        out = np.empty(np.broadcast(x, y).shape + (2,))
        out[..., 0] = 2.0 * a * b
        out[..., 1] = -2.0 * c * d
        return out

    def spatial_gradient(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        a, da, _, b, db, _, c, dc, _, d, dd, _ = self._factors(x, y)
        out = np.empty(np.broadcast(x, y).shape + (2, 2))
        out[..., 0, 0] = 2.0 * da * b
        out[..., 0, 1] = 2.0 * a * db
        out[..., 1, 0] = -2.0 * dc * d
        out[..., 1, 1] = -2.0 * c * dd
        return out

    def spatial_laplacian(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        a, _, dda, b, _, ddb, c, _, ddc, d, _, ddd = self._factors(x, y)
        out = np.empty(np.broadcast(x, y).shape + (2,))
        out[..., 0] = 2.0 * (dda * b + a * ddb)
        out[..., 1] = -2.0 * (ddc * d + c * ddd)
        return out


class _NonsmoothCase(ManufacturedCase):
    """Half-integer-power solution: u1 = 5 cos(t) x^{5/2}(x-1)^2 y^{3/2}(y-1)(9y-5)
    and its antisymmetric partner, p = 2 cos(t) (x - y).

    Second spatial derivatives scale like x^{-1/2} (resp. y^{-1/2}) toward the
    x = 0 and y = 0 edges, so the initial data lies in H^1_0 but not H^2.
    """

    id = "example2"
    profile = "cos"

    @staticmethod
    def _even(s):
        # s^{5/2} (s-1)^2 = s^{9/2} - 2 s^{7/2} + s^{5/2}, with derivatives
        s = np.asarray(s, dtype=float)
        s12 = np.sqrt(s)
        s32 = s12 * s
        s52 = s32 * s
        s72 = s52 * s
        s92 = s72 * s
        f = s92 - 2 * s72 + s52
        df = 4.5 * s72 - 7 * s52 + 2.5 * s32
        ddf = 15.75 * s52 - 17.5 * s32 + 3.75 * s12
        return f, df, ddf

    @staticmethod
    def _odd(s):
        # s^{3/2} (s-1)(9s-5) = 9 s^{7/2} - 14 s^{5/2} + 5 s^{3/2}
        s = np.asarray(s, dtype=float)
        s12 = np.sqrt(s)
        s32 = s12 * s
        s52 = s32 * s
        s72 = s52 * s
        f = 9 * s72 - 14 * s52 + 5 * s32
        df = 31.5 * s52 - 35 * s32 + 7.5 * s12
        with np.errstate(divide="ignore"):
            ddf = 78.75 * s32 - 52.5 * s12 + 3.75 / s12
        return f, df, ddf

    def spatial_velocity(self, x, y):
        A, _, _ = self._even(x)
        B, _, _ = self._odd(y)
        C, _, _ = self._odd(x)
        D, _, _ = self._even(y)
        out = np.empty(np.broadcast(np.asarray(x), np.asarray(y)).shape + (2,))
        out[..., 0] = 5.0 * A * B
        out[..., 1] = -5.0 * C * D
        return out

    def spatial_gradient(self, x, y):
        A, dA, _ = self._even(x)
        B, dB, _ = self._odd(y)
        C, dC, _ = self._odd(x)
        D, dD, _ = self._even(y)
        out = np.empty(np.broadcast(np.asarray(x), np.asarray(y)).shape + (2, 2))
        out[..., 0, 0] = 5.0 * dA * B
        out[..., 0, 1] = 5.0 * A * dB
        out[..., 1, 0] = -5.0 * dC * D
        out[..., 1, 1] = -5.0 * C * dD
        return out

    def spatial_laplacian(self, x, y):
        A, _, ddA = self._even(x)
        B, _, ddB = self._odd(y)
        C, _, ddC = self._odd(x)
        D, _, ddD = self._even(y)
        out = np.empty(np.broadcast(np.asarray(x), np.asarray(y)).shape + (2,))
        out[..., 0] = 5.0 * (ddA * B + A * ddB)
        out[..., 1] = -5.0 * (ddC * D + C * ddD)
        return out


_CASES = {1: _SmoothCase(), 2: _NonsmoothCase(),
          "example1": _SmoothCase(), "example2": _NonsmoothCase()}


def manufactured_case(which) -> ManufacturedCase:
    """Look up a benchmark case by number (1, 2) or id string."""
    try:
        return _CASES[which]
    except KeyError:
        raise ValueError(f"unknown manufactured case {which!r}") from None


def eval_exact(case: ManufacturedCase, x, y, t):
    """All exact fields at (x, y, t): (u, grad_u, lap_u, p, grad_p)."""
    return (
        case.velocity(x, y, t),
        case.velocity_gradient(x, y, t),
        case.velocity_laplacian(x, y, t),
        case.pressure(x, y, t),
        case.pressure_gradient(x, y, t),
    )


def forcing(case: ManufacturedCase, params: ModelParams, x, y, t):
    """Forcing field that makes (u, p) an exact solution of the flow model.

    For the separable solution u = g(t) U(x), the memory integral equals
    G(t) * Lap(U) with G the closed-form kernel/profile convolution, so

        f = g'(t) U + g(t)^2 (U . grad U) - (mu g(t) + G(t)) Lap(U) + grad p.
    """
    U = case.spatial_velocity(x, y)
    gradU = case.spatial_gradient(x, y)
    lapU = case.spatial_laplacian(x, y)
    gt = case.g(t)
    conv = convolution_profile(case.profile, params.gamma, params.delta, t)
    advect = np.einsum("...ij,...j->...i", gradU, U)
    return (
        case.g_prime(t) * U
        + gt * gt * advect
        - (params.mu * gt + conv) * lapU
        + case.pressure_gradient(x, y, t)
    )
