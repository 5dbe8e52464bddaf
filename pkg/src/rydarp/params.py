"""Physical parameters, unit conventions and pulse shapes.

Internal unit system: rad/us for every frequency-like quantity, us for time.
All public parameter containers hold the numbers in the units they are usually
quoted in (MHz, kHz, ns, us) and are lowered to internal units through a
:class:`UnitConvention`.

The convention toggle exists because quoted "MHz" values can be read either as
angular frequencies (factor 1.0) or as cyclic frequencies (factor 2*pi).  The
package default is the 2*pi reading: it is the one that reproduces the quoted
transfer efficiencies and gate fidelities (see README).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class UnitConvention:
    """Conversion between quoted frequency units and internal rad/us."""

    angular_factor: float  # exactly 1.0 or 2*pi

    def __post_init__(self):
        if self.angular_factor not in (1.0, TWO_PI):
            raise ConfigError(
                f"angular_factor must be 1.0 or 2*pi, got {self.angular_factor!r}"
            )

    @classmethod
    def plain(cls) -> "UnitConvention":
        return cls(1.0)

    @classmethod
    def two_pi(cls) -> "UnitConvention":
        return cls(TWO_PI)

    @classmethod
    def from_name(cls, name: str) -> "UnitConvention":
        try:
            return {"plain": cls.plain(), "two_pi": cls.two_pi()}[name]
        except KeyError:
            raise ConfigError(f"unknown angular_convention {name!r}") from None

    @property
    def name(self) -> str:
        return "plain" if self.angular_factor == 1.0 else "two_pi"

    # frequency-like quantities -> rad/us
    def from_mhz(self, x):
        return x * self.angular_factor

    def to_mhz(self, x):
        return x / self.angular_factor

    def from_khz(self, x):
        return x * 1e-3 * self.angular_factor

    def from_ghz(self, x):
        return x * 1e3 * self.angular_factor

    def from_mhz_per_us(self, x):
        """Chirp rate MHz/us -> rad/us^2."""
        return x * self.angular_factor


DEFAULT_CONVENTION = UnitConvention.two_pi()


def gaussian_rabi(t, peak, t_c, tau):
    """Gaussian Rabi envelope peak*exp(-(t-t_c)^2 / (2 tau^2)).

    Unit-agnostic: any consistent time unit for ``t``, ``t_c``, ``tau``.
    """
    if tau <= 0:
        raise DomainError(f"pulse width must be positive, got tau={tau}")
    s = np.asarray(t, dtype=float) - t_c
    out = peak * np.exp(-(s * s) / (2.0 * tau * tau))
    return float(out) if np.isscalar(t) else out


def linear_detuning(t, delta0, alpha, t_c):
    """Linearly chirped detuning delta0 + alpha*(t - t_c)."""
    return delta0 + alpha * (t - t_c)


def two_photon_rabi(omega_p, omega_s, delta_p):
    """Effective two-photon Rabi frequency Omega_p*Omega_s/Delta_p (signed)."""
    if delta_p == 0:
        raise DomainError("two-photon Rabi frequency undefined at zero one-photon detuning")
    return omega_p * omega_s / delta_p


@dataclass(frozen=True)
class PulseSet:
    """Pump/Stokes pulse pair: Gaussian envelopes, shared linear chirp.

    Frequencies in MHz, widths in ns, envelope/chirp center in us,
    chirp rate in MHz/us.
    """

    omega0_p_mhz: float
    omega0_s_mhz: float
    tau_p_ns: float
    tau_s_ns: float
    t_c_us: float
    alpha_mhz_per_us: float
    delta0_p_mhz: float
    delta0_s_mhz: float

    def __post_init__(self):
        if self.tau_p_ns <= 0 or self.tau_s_ns <= 0:
            raise ConfigError("pulse widths tau_p, tau_s must be positive")
        if self.omega0_p_mhz < 0 or self.omega0_s_mhz < 0:
            raise ConfigError("peak Rabi frequencies must be non-negative")

    def internal(self, convention: UnitConvention = DEFAULT_CONVENTION) -> "DrivePulses":
        return DrivePulses(
            omega0_p=convention.from_mhz(self.omega0_p_mhz),
            omega0_s=convention.from_mhz(self.omega0_s_mhz),
            tau_p=self.tau_p_ns * 1e-3,
            tau_s=self.tau_s_ns * 1e-3,
            t_c=self.t_c_us,
            alpha=convention.from_mhz_per_us(self.alpha_mhz_per_us),
            delta0_p=convention.from_mhz(self.delta0_p_mhz),
            delta0_s=convention.from_mhz(self.delta0_s_mhz),
        )


@dataclass(frozen=True)
class DrivePulses:
    """PulseSet lowered to internal units (rad/us, us).  Pure evaluation laws."""

    omega0_p: float
    omega0_s: float
    tau_p: float
    tau_s: float
    t_c: float
    alpha: float
    delta0_p: float
    delta0_s: float

    def omega_p(self, t):
        return gaussian_rabi(t, self.omega0_p, self.t_c, self.tau_p)

    def omega_s(self, t):
        return gaussian_rabi(t, self.omega0_s, self.t_c, self.tau_s)

    def delta_p(self, t):
        return linear_detuning(t, self.delta0_p, self.alpha, self.t_c)

    def delta_s(self, t):
        return linear_detuning(t, self.delta0_s, self.alpha, self.t_c)

    def delta(self, t):
        """Two-photon detuning delta = Delta_p + Delta_s (chirps at 2*alpha)."""
        return self.delta_p(t) + self.delta_s(t)

    def two_photon_rabi(self, t):
        return two_photon_rabi(self.omega_p(t), self.omega_s(t), self.delta_p(t))

    def peak_two_photon_rabi(self):
        """Two-photon Rabi at the envelope center, using the static Delta_0p."""
        return two_photon_rabi(self.omega0_p, self.omega0_s, self.delta0_p)

    def window(self, pad: float = 5.0):
        """Default simulation window [t_c - pad*tau, t_c + pad*tau].

        At the default pad=5 the envelope is below 4e-6 of its peak value at
        the window edges, so truncation is negligible.
        """
        tau = max(self.tau_p, self.tau_s)
        return (self.t_c - pad * tau, self.t_c + pad * tau)

    def mirrored(self, boundary: float, flip_detunings: bool) -> "DrivePulses":
        """Time-reflect the pulse laws about ``boundary``.

        The reflected pulses have their center at 2*boundary - t_c and the same
        chirp slope.  With ``flip_detunings`` the one-photon detunings change
        sign as well, which makes the two-photon detuning antisymmetric about
        the boundary: delta(boundary+t) = -delta(boundary-t).
        Without the flip the chirp slope reverses and delta is symmetric.
        """
        t_ref = 2.0 * boundary - self.t_c
        if flip_detunings:
            return replace(self, t_c=t_ref, delta0_p=-self.delta0_p,
                           delta0_s=-self.delta0_s)
        return replace(self, t_c=t_ref, alpha=-self.alpha)


class Levels:
    THREE = "three"
    FOUR = "four"

    _ALL = (THREE, FOUR)


@dataclass(frozen=True)
class AtomSystem:
    """Level scheme, decay rates and Rydberg-Rydberg interaction strength.

    gamma_i in MHz (intermediate state), gamma_r in kHz (Rydberg state),
    v_int in MHz.  The qubit splitting is informational only: the |0> state
    sits at zero rotating-frame energy and never enters the dynamics.
    """

    levels: str = Levels.THREE
    gamma_i_mhz: float = 6.0
    gamma_r_khz: float = 0.485
    v_int_mhz: float = 0.0
    qubit_splitting_ghz: float = 6.835

    def __post_init__(self):
        if self.levels not in Levels._ALL:
            raise ConfigError(f"levels must be one of {Levels._ALL}, got {self.levels!r}")
        if self.gamma_i_mhz < 0 or self.gamma_r_khz < 0:
            raise ConfigError("decay rates must be non-negative")

    def internal(self, convention: UnitConvention = DEFAULT_CONVENTION) -> "AtomRates":
        return AtomRates(
            levels=self.levels,
            gamma_i=convention.from_mhz(self.gamma_i_mhz),
            gamma_r=convention.from_khz(self.gamma_r_khz),
            v_int=convention.from_mhz(self.v_int_mhz),
        )


@dataclass(frozen=True)
class AtomRates:
    """AtomSystem lowered to internal units (rad/us)."""

    levels: str
    gamma_i: float
    gamma_r: float
    v_int: float


@dataclass(frozen=True)
class SimGrid:
    """Integration window and tolerances.

    ``t_start_us``/``t_end_us`` may be None, in which case propagation
    routines fall back to the pulse window [t_c - 5 tau, t_c + 5 tau].
    """

    t_start_us: float | None = None
    t_end_us: float | None = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step_us: float = 0.05

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.max_step_us <= 0:
            raise ConfigError("tolerances and max_step must be positive")
        if self.t_start_us is not None and self.t_end_us is not None \
                and not self.t_end_us > self.t_start_us:
            raise ConfigError("t_end_us must exceed t_start_us")

    def resolve_window(self, pulses: DrivePulses):
        t0 = self.t_start_us if self.t_start_us is not None else pulses.window()[0]
        t1 = self.t_end_us if self.t_end_us is not None else pulses.window()[1]
        if not t1 > t0:
            raise ConfigError(f"empty integration window [{t0}, {t1}]")
        return t0, t1
