"""Closed-form limits of the response function and the resolvent route.

Two analytic regimes bracket the full solver:

* strong, short-ranged-in-energy driving: gamma(t, t') = 2 J1(r t)/(r t)
  with the scale r(t')^2 = 4 vtilde(0) D0 [Sigma_0 phi1 + Sigma_2 phi2];
  trusted when the margin r/Sigma_0 exceeds VALID_MARGIN.
* fast driving (first-order average): a three-exponential expression in the
  rates r_hat = pi vtilde(0) phi1 D0 and r_n = (Sigma_0/pi)(1 + n s),
  s = sqrt(1 - 2 pi r_hat / Sigma_0); for weak amplitudes it collapses to
  exp(-r_hat t).

The resolvent route solves the self-consistent equation

    G(z, t') = 1 / ( z - int dE D0 G(z - E, t') [phi1 + E^2 phi2] vtilde(E) )

on a uniform energy grid just below the real axis (z = E - i eta) by damped
fixed-point iteration, and reconstructs gamma(t) = (1/pi) int dE e^{iEt}
Im G(E - i eta) with an e^{eta t} factor compensating the regularization.
Im G and Im z keep opposite signs throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from . import profiles, protocols
from .errors import ResolventConvergenceError

VALID_MARGIN = 3.0  # operational reading of "r much larger than Sigma_0"

# ---------------------------------------------------------------------------
# Bessel J1
# ---------------------------------------------------------------------------

_J1_SERIES_CUT = 12.0
_J1_SERIES_TERMS = 30
_J1_ASYMPTOTIC_TERMS = 11

# Hankel coefficients a_k for nu = 1: a_0 = 1, a_k = a_{k-1} (4 - (2k-1)^2)/(8k)
_J1_HANKEL = [1.0]
for _k in range(1, 2 * _J1_ASYMPTOTIC_TERMS + 2):
    _J1_HANKEL.append(_J1_HANKEL[-1] * (4.0 - (2.0 * _k - 1.0) ** 2) / (8.0 * _k))


def bessel_j1(x):
    """Bessel function of the first kind of order 1, |error| < 1e-10.

    Alternating power series up to the cut |x| <= 12, Hankel asymptotic
    expansion beyond; both branches are plain double-precision sums.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    ax = np.abs(x_arr)
    small = ax <= _J1_SERIES_CUT

    if np.any(small):
        xs = ax[small]
        q = 0.25 * xs * xs
        term = 0.5 * xs  # k = 0 term of (x/2) sum (-q)^k / (k! (k+1)!)
        acc = term.copy()
        for k in range(1, _J1_SERIES_TERMS + 1):
            term = term * (-q) / (k * (k + 1))
            acc += term
        out[small] = acc

    if np.any(~small):
        xl = ax[~small]
        inv2 = 1.0 / (xl * xl)
        p = np.zeros_like(xl)
        q = np.zeros_like(xl)
        # P = sum (-1)^m a_{2m} x^{-2m},  Q = sum (-1)^m a_{2m+1} x^{-2m-1}
        pw = np.ones_like(xl)
        for m in range(_J1_ASYMPTOTIC_TERMS):
            sign = -1.0 if m % 2 else 1.0
            p += sign * _J1_HANKEL[2 * m] * pw
            q += sign * _J1_HANKEL[2 * m + 1] * pw / xl
            pw = pw * inv2
        chi = xl - 0.75 * np.pi
        out[~small] = np.sqrt(2.0 / (np.pi * xl)) * (p * np.cos(chi) - q * np.sin(chi))

    out = out * np.sign(x_arr)  # J1 is odd
    return float(out[0]) if np.isscalar(x) or np.asarray(x).ndim == 0 else out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# strong / short-ranged driving
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrongDrivingScale:
    """Decay scale r of the strong-driving form and its validity margin r/Sigma_0."""

    r: float
    sigma0: float
    margin: float

    @property
    def valid(self) -> bool:
        return self.margin > VALID_MARGIN


def r_scale_array(
    profile: profiles.PerturbationProfile,
    protocol: protocols.DrivingProtocol,
    t,
) -> np.ndarray:
    """r(t) = sqrt(4 vtilde(0) d0 [Sigma_0 phi1(t) + Sigma_2 phi2(t)]) on an array."""
    phi1, phi2 = protocols.phi_arrays(protocol, t)
    s0 = profiles.moment(profile, 0)
    s2 = profiles.moment(profile, 2)
    return np.sqrt(4.0 * profile.v0 * profile.d0 * (s0 * phi1 + s2 * phi2))


def r_scale(
    profile: profiles.PerturbationProfile,
    protocol: protocols.DrivingProtocol,
    t: float,
) -> StrongDrivingScale:
    """Strong-driving scale and margin at a single time t >= 0."""
    r = float(r_scale_array(profile, protocol, np.asarray([float(t)]))[0])
    s0 = profiles.moment(profile, 0)
    return StrongDrivingScale(r=r, sigma0=s0, margin=r / s0)


def strong_driving_gamma(r: float, t):
    """gamma = 2 J1(r t) / (r t), with the series limit 1 at r t = 0."""
    if r < 0:
        raise ValueError("scale r must be >= 0")
    x = np.atleast_1d(np.asarray(t, dtype=float)) * r
    if np.any(x < 0):
        raise ValueError("time must be >= 0")
    out = np.empty_like(x)
    tiny = x < 1e-3
    out[tiny] = 1.0 - x[tiny] ** 2 / 8.0 + x[tiny] ** 4 / 192.0
    out[~tiny] = 2.0 * bessel_j1(x[~tiny]) / x[~tiny]
    return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out.reshape(np.shape(t))


# ---------------------------------------------------------------------------
# fast driving
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FastDrivingRates:
    """Rates of the first-order (high-frequency) form; complex when 2 pi r_hat > Sigma_0."""

    r_hat: float
    r_minus1: complex
    r_0: float
    r_plus1: complex


# below this |1 - 2 pi r_hat/Sigma_0| the three-exponential form is evaluated
# as a series in the degeneracy parameter (keeps roundoff well under the
# 1e-10 reality check; the closed form loses ~|disc|^-1 digits there)
_DEGENERATE_CUT = 1e-5


def fast_rates(
    profile: profiles.PerturbationProfile,
    protocol: protocols.DrivingProtocol,
    t_prime: float,
) -> FastDrivingRates:
    """r_hat(t') and r_n(t'); r_0 is independent of t'."""
    ints = protocols.integrals(protocol, t_prime)
    s0 = profiles.moment(profile, 0)
    r_hat = np.pi * profile.v0 * ints.phi1 * profile.d0
    r0 = s0 / np.pi
    s = np.sqrt(complex(1.0 - 2.0 * np.pi * r_hat / s0))
    return FastDrivingRates(
        r_hat=float(r_hat),
        r_minus1=complex(r0 * (1.0 - s)),
        r_0=float(r0),
        r_plus1=complex(r0 * (1.0 + s)),
    )


def fast_driving_gamma(
    profile: profiles.PerturbationProfile,
    protocol: protocols.DrivingProtocol,
    t,
    t_prime: float,
):
    """First-order (high-frequency) gamma(t, t'); equals 1 at t = 0 identically."""
    rates = fast_rates(profile, protocol, t_prime)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("time must be >= 0")
    r0, rh = rates.r_0, rates.r_hat
    disc = 1.0 - 2.0 * rh / r0  # = 1 - 2 pi r_hat / Sigma_0 = s^2

    if abs(disc) < _DEGENERATE_CUT:
        x = r0 * t_arr
        out = np.exp(-x) * (
            (1.0 + x + 0.25 * x * x) + disc * (0.25 * x * x + x**3 / 6.0 + x**4 / 48.0)
        )
    else:
        num = (
            (rates.r_plus1 - rh) * np.exp(-rates.r_minus1 * t_arr)
            - 2.0 * rh * np.exp(-r0 * t_arr)
            + (rates.r_minus1 - rh) * np.exp(-rates.r_plus1 * t_arr)
        )
        val = num / (2.0 * (r0 - 2.0 * rh))
        max_imag = float(np.max(np.abs(val.imag)))
        if max_imag >= 1e-10:
            raise AssertionError(f"high-frequency gamma grew an imaginary part ({max_imag:.3e})")
        out = val.real
    return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out.reshape(np.shape(t))


def weak_fast_gamma(
    profile: profiles.PerturbationProfile,
    protocol: protocols.DrivingProtocol,
    t,
    t_prime: float,
):
    """Weak-amplitude fast-driving form exp(-r_hat(t') |t|)."""
    ints = protocols.integrals(protocol, t_prime)
    r_hat = np.pi * profile.v0 * ints.phi1 * profile.d0
    t_arr = np.asarray(t, dtype=float)
    out = np.exp(-r_hat * np.abs(t_arr))
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# resolvent route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolventGrid:
    """G(E - i eta, t') sampled on a uniform energy grid."""

    e_grid: np.ndarray
    eta: float
    g: np.ndarray
    t_prime: Optional[float] = None

    def spectral_function(self) -> np.ndarray:
        """u(E) = (1/pi) Im G(E - i eta); integrates to ~1 on an adequate grid."""
        return self.g.imag / np.pi


def default_eta(e_grid: np.ndarray) -> float:
    """eta = 4 grid spacings: resolves the discretized spectral function while
    keeping the exp(eta t) compensation below exp(0.5) for t <= 1/(2 eta)."""
    return 4.0 * float(e_grid[1] - e_grid[0])


def resolvent_solve(
    profile: profiles.PerturbationProfile,
    phi1: float,
    phi2: float,
    e_grid: np.ndarray,
    eta: float,
    t_prime: Optional[float] = None,
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> ResolventGrid:
    """Damped fixed-point solve of the self-consistent resolvent equation.

    The energy integral is a discrete convolution of G with the weight
    d0 [phi1 + E^2 phi2] vtilde(E) on the shared grid spacing; G is padded
    with the free resolvent 1/z beyond the grid.  Iteration stops when the
    sup-change drops below tol (plain iteration diverges for large phi1
    without damping).
    """
    e_grid = np.asarray(e_grid, dtype=float)
    if e_grid.ndim != 1 or e_grid.size < 8:
        raise ValueError("e_grid must be a 1-d grid with at least 8 points")
    de = np.diff(e_grid)
    if not np.allclose(de, de[0], rtol=1e-9, atol=0.0):
        raise ValueError("e_grid must be uniform")
    de = float(de[0])
    if not (eta > 0):
        raise ValueError("eta must be positive")
    if phi1 < 0 or phi2 < 0:
        raise ValueError("phi1 and phi2 are squares and must be >= 0")

    s0 = profiles.moment(profile, 0)
    s2 = profiles.moment(profile, 2)
    r = np.sqrt(4.0 * profile.v0 * profile.d0 * (s0 * phi1 + s2 * phi2))
    need = 5.0 * max(r, s0)
    if e_grid[0] > -need or e_grid[-1] < need:
        raise ValueError(
            f"e_grid must span at least [-{need:.3g}, {need:.3g}] "
            f"(got [{e_grid[0]:.3g}, {e_grid[-1]:.3g}])"
        )

    # convolution weights on the offset grid, truncated where negligible
    if profile.variant == "tabulated":
        e_support = float(profile.energies[-1])
    else:
        e_support = 45.0 * profile.delta_v
    m = max(1, int(np.ceil(e_support / de)))
    e_off = de * np.arange(-m, m + 1)
    w = profile.d0 * (phi1 + phi2 * e_off**2) * profile.vtilde(e_off) * de
    keep = w > 1e-14 * w.max()
    m = int(np.max(np.abs(np.nonzero(keep)[0] - m))) if np.any(keep) else 0
    e_off = de * np.arange(-m, m + 1)
    w = profile.d0 * (phi1 + phi2 * e_off**2) * profile.vtilde(e_off) * de

    z = e_grid - 1j * eta
    pad_left = (e_grid[0] - de * np.arange(m, 0, -1)) - 1j * eta
    pad_right = (e_grid[-1] + de * np.arange(1, m + 1)) - 1j * eta
    g = 1.0 / z
    free_left = 1.0 / pad_left
    free_right = 1.0 / pad_right

    for _ in range(max_iter):
        g_pad = np.concatenate((free_left, g, free_right))
        sigma = fftconvolve(g_pad, w, mode="valid")
        g_new = (1.0 - damping) * g + damping / (z - sigma)
        change = float(np.max(np.abs(g_new - g)))
        g = g_new
        if change < tol:
            break
    else:
        raise ResolventConvergenceError(
            f"no convergence after {max_iter} iterations (last change {change:.3e})"
        )
    if not np.all(g.imag > 0):
        raise ResolventConvergenceError("Im G lost its sign (must oppose Im z)")
    return ResolventGrid(e_grid=e_grid, eta=float(eta), g=g, t_prime=t_prime)


def gamma_from_resolvent(rg: ResolventGrid, t):
    """gamma(t) from the spectral function by trapezoidal Fourier quadrature.

    Multiplies by exp(eta t) to compensate the Lorentzian broadening of the
    finite regularization (exact for the broadening itself; grid truncation
    limits the accuracy to the 1e-2/2e-2 level).  Warns for t > 1/(2 eta).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr > 0.5 / rg.eta):
        warnings.warn(
            f"t exceeds the resolution limit 1/(2 eta) = {0.5 / rg.eta:.3g}; "
            "the reconstruction degrades there",
            RuntimeWarning,
            stacklevel=2,
        )
    u = rg.spectral_function()
    phases = np.exp(1j * np.outer(t_arr, rg.e_grid))
    vals = np.trapezoid(phases * u, rg.e_grid, axis=1).real * np.exp(rg.eta * t_arr)
    return float(vals[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else vals.reshape(np.shape(t))


def resolvent_closed_form(r: float, z):
    """Strong-driving resolvent G(z) = (2/r^2)[z - i sgn(Im z) sqrt(r^2 - z^2)].

    Principal square root; Im G and Im z have opposite signs, and G -> 1/z
    for |z| -> infinity.
    """
    z_arr = np.asarray(z, dtype=complex)
    sgn = np.where(z_arr.imag >= 0, 1.0, -1.0)
    g = (2.0 / r**2) * (z_arr - 1j * sgn * np.sqrt(r * r - z_arr * z_arr))
    return complex(g) if np.isscalar(z) or z_arr.ndim == 0 else g


def crossover_amplitude(profile: profiles.PerturbationProfile, epsilon: float) -> float:
    """Amplitude separating weak from strong response, sqrt(2 eps delta_v / (pi^2 vtilde(0))).

    Specific to the exponential profile; epsilon is the mean level spacing.
    """
    if profile.variant != "exponential":
        raise ValueError("crossover formula applies to the exponential profile only")
    if epsilon < 0:
        raise ValueError("level spacing must be >= 0")
    return float(np.sqrt(2.0 * epsilon * profile.delta_v / (np.pi**2 * profile.v0)))
