"""Experiment drivers: transfer-efficiency sweeps and the two-step phase gate.

The controlled-phase gate runs two chirped-pulse sequences back to back.  With
the default (antisymmetric) variant the second step mirrors the first in time
with both detunings sign-flipped, so the two-photon detuning obeys
delta(T+t) = -delta(T-t) about the step boundary T while the Rabi envelopes
are symmetric.  Single-atom phases then cancel exactly and the |11> state
keeps only the interaction phase, roughly 2*V_int*(t_c - T) for weak
interaction: the time spent in |rr> between the two chirp crossings times the
|rr> energy shift.  The delay t_c - T is calibrated so this phase hits pi.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .dressed import single_atom_eps
from .dynamics import (DensityTrajectory, Segment, propagate_segments_lindblad,
                       lindblad_propagate)
from .errors import CalibrationError, ConfigError, RydArpError
from .hamiltonian import product_basis
from .params import (AtomSystem, DrivePulses, Levels, PulseSet, SimGrid,
                     UnitConvention, DEFAULT_CONVENTION, TWO_PI)

_SQ2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# transfer efficiency and sweeps
# ---------------------------------------------------------------------------

def adiabaticity_diagnostics(pulses: DrivePulses, convention: UnitConvention) -> dict:
    """Both chirped-ARP adiabaticity numbers, reported under both conventions.

    The two readings disagree by the 2*pi factor and the quoted reference
    arithmetic matches neither exactly, so both are always recorded.
    """
    factor = convention.angular_factor
    omega = abs(pulses.peak_two_photon_rabi())
    alpha = abs(pulses.alpha)
    tau = max(pulses.tau_p, pulses.tau_s)
    raw1 = (omega ** 2 / (2.0 * alpha)) / factor if alpha > 0 else math.inf
    raw2 = 2.0 * (alpha / factor) * tau ** 2
    return {
        "omega2_over_2alpha_plain": raw1,
        "omega2_over_2alpha_two_pi": TWO_PI * raw1,
        "two_alpha_tau2_plain": raw2,
        "two_alpha_tau2_two_pi": TWO_PI * raw2,
    }


@dataclass
class TransferResult:
    efficiency: float
    diagnostics: dict
    trajectory: DensityTrajectory


def transfer_efficiency(pulses, atoms, grid: SimGrid | None = None, *,
                        convention=DEFAULT_CONVENTION, n_samples: int = 201,
                        backend=None) -> TransferResult:
    """Final |rr> population starting from |gg><gg| under the full master equation."""
    if isinstance(pulses, PulseSet):
        pulses_int = pulses.internal(convention)
    else:
        pulses_int = pulses
    traj = lindblad_propagate("gg", pulses_int, atoms, grid,
                              convention=convention, n_samples=n_samples,
                              backend=backend)
    eff = float(traj.population("rr")[-1])
    return TransferResult(efficiency=eff,
                          diagnostics=adiabaticity_diagnostics(pulses_int, convention),
                          trajectory=traj)


@dataclass(frozen=True)
class SweepSpec:
    """Grid over the peak two-photon Rabi frequency and the chirp rate.

    Each point rescales the base pulse amplitudes with Omega0p = Omega0s =
    sqrt(Omega * Delta0p) at fixed Delta0p, so the target two-photon Rabi
    frequency is reached at the envelope center.
    """

    omegas_mhz: tuple
    alphas_mhz_per_us: tuple

    def __post_init__(self):
        if len(self.omegas_mhz) < 1 or len(self.alphas_mhz_per_us) < 1:
            raise ConfigError("sweep grid needs at least one point per axis")
        if any(o < 0 for o in self.omegas_mhz):
            raise ConfigError("two-photon Rabi frequencies must be non-negative")

    @classmethod
    def from_ranges(cls, omega_min, omega_max, n_omega, alpha_min, alpha_max, n_alpha):
        return cls(tuple(np.linspace(omega_min, omega_max, n_omega)),
                   tuple(np.linspace(alpha_min, alpha_max, n_alpha)))

    def points(self):
        """Row-major grid order: omega outer, alpha inner."""
        for om in self.omegas_mhz:
            for al in self.alphas_mhz_per_us:
                yield float(om), float(al)


def derive_point_pulses(base: PulseSet, omega_two_photon_mhz: float,
                        alpha_mhz_per_us: float) -> PulseSet:
    if base.delta0_p_mhz <= 0:
        raise ConfigError("sweep derivation needs a positive static pump detuning")
    om0 = math.sqrt(omega_two_photon_mhz * base.delta0_p_mhz)
    return replace(base, omega0_p_mhz=om0, omega0_s_mhz=om0,
                   alpha_mhz_per_us=alpha_mhz_per_us)


@dataclass
class SweepPoint:
    omega_mhz: float
    alpha_mhz_per_us: float
    efficiency: float
    diagnostics: dict
    error: str | None = None


def _sweep_worker(args):
    base, atoms, grid, conv_name, omega, alpha = args
    convention = UnitConvention.from_name(conv_name)
    try:
        pulses = derive_point_pulses(base, omega, alpha)
        res = transfer_efficiency(pulses, atoms, grid, convention=convention)
        return SweepPoint(omega, alpha, res.efficiency, res.diagnostics)
    except RydArpError as exc:  # record, don't kill the grid
        try:
            diags = adiabaticity_diagnostics(
                derive_point_pulses(base, omega, alpha).internal(convention), convention)
        except RydArpError:
            diags = {}
        return SweepPoint(omega, alpha, math.nan, diags, error=str(exc))


def run_sweep(spec: SweepSpec, base: PulseSet, atoms: AtomSystem,
              grid: SimGrid | None = None, *, convention=DEFAULT_CONVENTION,
              workers: int = 1) -> list:
    """Transfer efficiency over the sweep grid; output order is grid order
    regardless of worker count."""
    grid = grid or SimGrid()
    tasks = [(base, atoms, grid, convention.name, om, al) for om, al in spec.points()]
    if workers <= 1:
        return [_sweep_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# gate protocol
# ---------------------------------------------------------------------------

VARIANT_ANTISYMMETRIC = "antisymmetric"
VARIANT_SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class GateProtocol:
    """Two-step gate geometry.

    boundary_us is the time T separating the steps; half_delay_us is t_c - T,
    half the delay between the two envelope centers (set by calibration);
    tau_step_us is the duration of each step and defaults to
    half_delay + envelope_pad * tau so the pulses fit with negligible
    truncation.
    """

    boundary_us: float = 0.0
    half_delay_us: float | None = None
    tau_step_us: float | None = None
    variant: str = VARIANT_ANTISYMMETRIC
    envelope_pad: float = 5.0

    def __post_init__(self):
        if self.variant not in (VARIANT_ANTISYMMETRIC, VARIANT_SYMMETRIC):
            raise ConfigError(f"unknown gate variant {self.variant!r}")
        if self.half_delay_us is not None and self.half_delay_us <= 0:
            raise ConfigError("half_delay_us must be positive")
        if self.envelope_pad <= 0:
            raise ConfigError("envelope_pad must be positive")

    def resolved_tau_step(self, pulses: DrivePulses) -> float:
        if self.tau_step_us is not None:
            return self.tau_step_us
        if self.half_delay_us is None:
            raise CalibrationError("gate delay not set; calibrate or pass one explicitly")
        return self.half_delay_us + self.envelope_pad * max(pulses.tau_p, pulses.tau_s)

    def with_half_delay(self, half_delay_us: float) -> "GateProtocol":
        return replace(self, half_delay_us=half_delay_us)


def gate_step_pulses(protocol: GateProtocol, pulses: DrivePulses):
    """Per-step drive laws.

    Step I is the base pulse recentered at T - half_delay; step II is its time
    reflection about T, with both one-photon detunings sign-flipped in the
    antisymmetric variant (chirp keeps its sign, delta(T+t) = -delta(T-t)) or
    with the chirp slope reversed in the symmetric one (delta(T+t) = delta(T-t)).
    """
    if protocol.half_delay_us is None:
        raise CalibrationError("gate delay not set; calibrate or pass one explicitly")
    t_c1 = protocol.boundary_us - protocol.half_delay_us
    step1 = replace(pulses, t_c=t_c1)
    step2 = step1.mirrored(protocol.boundary_us,
                           flip_detunings=(protocol.variant == VARIANT_ANTISYMMETRIC))
    return step1, step2


def gate_segments(protocol: GateProtocol, pulses: DrivePulses):
    tau_step = protocol.resolved_tau_step(pulses)
    T = protocol.boundary_us
    step1, step2 = gate_step_pulses(protocol, pulses)
    return [Segment(T - tau_step, T, step1), Segment(T, T + tau_step, step2)]


# ---------------------------------------------------------------------------
# dressed-phase integrals and delay calibration
# ---------------------------------------------------------------------------

def _single_atom_branch_phase(seg: Segment, start_in_ground: bool, n: int) -> float:
    """Integral of the single-atom dressed energy along one step.

    The +/- branches never cross (the root never vanishes inside the window),
    so the followed branch is fixed by which bare state dominates at the
    moment the step begins: the ground state rides the lower branch when the
    two-photon detuning starts positive, the upper one when it starts negative;
    the Rydberg state does the opposite.
    """
    p = seg.pulses
    ts = np.linspace(seg.t_lo, seg.t_hi, n + 1)
    t_start = seg.t_lo
    delta_start = p.delta(t_start)
    lower_is_ground = delta_start > 0
    take_upper = (not lower_is_ground) if start_in_ground else lower_is_ground
    ep, em = single_atom_eps(p.delta(ts), p.omega_p(ts), p.omega_s(ts), p.delta_p(ts))
    return float(simpson(ep if take_upper else em, x=ts))


def _reduced_stack(pulses: DrivePulses, v_int: float, ts: np.ndarray) -> np.ndarray:
    om_p = pulses.omega_p(ts)
    om_s = pulses.omega_s(ts)
    dp = pulses.delta_p(ts)
    de = pulses.delta(ts)
    om = om_p * om_s / dp
    M = np.zeros((len(ts), 3, 3))
    M[:, 0, 0] = -2.0 * om_p ** 2 / dp
    M[:, 1, 1] = de - (om_p ** 2 + om_s ** 2) / dp
    M[:, 2, 2] = 2.0 * de + v_int - 2.0 * om_s ** 2 / dp
    M[:, 0, 1] = M[:, 1, 0] = M[:, 1, 2] = M[:, 2, 1] = -_SQ2 * om
    M[:, 0, 2] = M[:, 2, 0] = -2.0 * om ** 2 / dp
    return M


def _tracked_branch_phase(seg: Segment, v_int: float, start_vector, n: int):
    """Integral of one adiabatically tracked two-atom dressed energy.

    start_vector is None at the beginning of step I (the gg-dominated branch
    is selected) or the tracked eigenvector carried across the step boundary.
    Returns (phase, final eigenvector).
    """
    ts = np.linspace(seg.t_lo, seg.t_hi, n + 1)
    M = _reduced_stack(seg.pulses, v_int, ts)
    w, v = np.linalg.eigh(M)
    if start_vector is None:
        k = int(np.argmax(np.abs(v[0][0, :])))
    else:
        k = int(np.argmax(np.abs(start_vector @ v[0])))
    vec = v[0][:, k]
    eps = np.empty(n + 1)
    eps[0] = w[0][k]
    for i in range(1, n + 1):
        overl = vec @ v[i]
        k = int(np.argmax(np.abs(overl)))
        vec = v[i][:, k] * np.sign(overl[k])
        eps[i] = w[i][k]
    return float(simpson(eps, x=ts)), vec


@dataclass
class PhaseAccumulation:
    phi_01: float
    phi_10: float
    phi_11: float


def phase_accumulation(protocol: GateProtocol, pulses, atoms, *,
                       convention=DEFAULT_CONVENTION, n: int = 4096) -> PhaseAccumulation:
    """Accumulated dressed phases of the computational states over both steps.

    phi_01 = phi_10 follow the single-atom branches (ground branch in step I,
    Rydberg branch in step II); phi_11 follows the two-atom branch that starts
    as |gg>, continued across the boundary by eigenvector overlap.  |00> never
    couples, so phi_00 = 0 identically.
    """
    if isinstance(pulses, PulseSet):
        pulses = pulses.internal(convention)
    if isinstance(atoms, AtomSystem):
        atoms = atoms.internal(convention)
    seg1, seg2 = gate_segments(protocol, pulses)
    phi01 = _single_atom_branch_phase(seg1, start_in_ground=True, n=n) \
        + _single_atom_branch_phase(seg2, start_in_ground=False, n=n)
    p1, vec = _tracked_branch_phase(seg1, atoms.v_int, None, n)
    p2, _ = _tracked_branch_phase(seg2, atoms.v_int, vec, n)
    return PhaseAccumulation(phi_01=phi01, phi_10=phi01, phi_11=p1 + p2)


def phi11_constant_omega(v_int, alpha, omega, half_delay, tau_step) -> float:
    """First-order interaction phase for a constant two-photon Rabi frequency.

    Closed form of 2 * V * integral of (1 + cos(theta))^2 / 4 over step I with
    cos(theta) = delta/sqrt(delta^2 + 4 Omega^2) and delta swept at 2*alpha:
    the |rr> level shift V weighted by how Rydberg-like the followed branch is.
    In the deep-sweep limit it reduces to 2*V*(half_delay - pi*Omega/(4*alpha)).
    """
    a = abs(alpha)
    om = abs(omega)
    db = 2.0 * a * half_delay
    da = -2.0 * a * (tau_step - half_delay)
    sq = lambda d: math.sqrt(d * d + 4.0 * om * om)
    at = lambda d: math.atan2(d, 2.0 * om)
    val = tau_step / 2.0 + (sq(db) - sq(da)) / (4.0 * a) \
        - (om / (4.0 * a)) * (at(db) - at(da))
    return 2.0 * v_int * val


@dataclass
class Calibration:
    half_delay_us: float
    delay_ns: float
    phi_11: float
    residual: float
    protocol: GateProtocol


def calibrate_delay(protocol: GateProtocol, pulses, atoms, *,
                    convention=DEFAULT_CONVENTION, target: float = math.pi,
                    n: int = 4096) -> Calibration:
    """Root-find the half delay t_c - T so the dressed-integral phase hits target.

    Cheap: only 3x3 spectra along the sweep are evaluated.  Verify on the full
    density-matrix gate afterwards via run_gate.
    """
    if isinstance(pulses, PulseSet):
        pulses = pulses.internal(convention)
    if isinstance(atoms, AtomSystem):
        atoms = atoms.internal(convention)
    if protocol.variant != VARIANT_ANTISYMMETRIC:
        raise CalibrationError("delay calibration is defined for the antisymmetric variant")
    v = atoms.v_int
    if v <= 0:
        raise CalibrationError(
            "no interaction phase accumulates at V_int <= 0; phi_11 has no root")

    def phi(h):
        return phase_accumulation(protocol.with_half_delay(h), pulses, atoms, n=n).phi_11

    pad = protocol.envelope_pad * max(pulses.tau_p, pulses.tau_s)
    if protocol.tau_step_us is not None:
        h_max = protocol.tau_step_us - pad
        if h_max <= 0:
            raise CalibrationError(
                f"step duration {protocol.tau_step_us} us leaves no room for the pulses; "
                f"required tau_step ~ {target / (2 * v) + pad:.4f} us (pi/2V plus padding)")
    else:
        h_max = 2.5 * target / (2.0 * v) + 1.0
    h_min = min(1e-3, 0.01 * h_max)
    phi_max = phi(h_max)
    if phi_max < target:
        raise CalibrationError(
            f"phase target {target:.4f} rad unreachable within the step window "
            f"(max phi_11 = {phi_max:.4f}); required tau_step ~ "
            f"{target / (2 * v) + pad:.4f} us (pi/2V plus padding)")
    if phi(h_min) > target:
        raise CalibrationError("phase target already exceeded at the minimum delay")
    h_star = brentq(lambda h: phi(h) - target, h_min, h_max, xtol=1e-12, rtol=1e-14)
    phi_star = phi(h_star)
    return Calibration(half_delay_us=float(h_star),
                       delay_ns=2.0 * float(h_star) * 1e3,
                       phi_11=phi_star,
                       residual=abs(phi_star - target),
                       protocol=protocol.with_half_delay(float(h_star)))


# ---------------------------------------------------------------------------
# full gate
# ---------------------------------------------------------------------------

@dataclass
class GateResult:
    fidelity: float
    phi_00: float
    phi_01: float
    phi_10: float
    phi_11: float
    phi_11_measured: float
    phi_01_measured: float
    delay_ns: float
    error_budget: dict
    trajectory: DensityTrajectory

    def report(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "phases_rad": {"phi_00": self.phi_00, "phi_01": self.phi_01,
                           "phi_10": self.phi_10, "phi_11": self.phi_11},
            "measured_phases_rad": {"phi_01": self.phi_01_measured,
                                    "phi_11": self.phi_11_measured},
            "delay_ns": self.delay_ns,
            "error_budget": self.error_budget,
        }


def run_gate(protocol: GateProtocol, pulses, atoms, grid: SimGrid | None = None, *,
             convention=DEFAULT_CONVENTION, n_samples: int = 401,
             motional: "MotionalParams | None" = None,
             backend=None) -> GateResult:
    """Propagate the full two-step gate and score it against the ideal state.

    Starts from the product superposition (|00>+|01>+|10>+|11>)/2 prepared at
    T - tau_step and compares the final density matrix against
    (|00>+|01>+|10>-|11>)/2.  Requires the four-level scheme and an explicit
    (calibrated) delay.
    """
    if isinstance(pulses, PulseSet):
        pulses = pulses.internal(convention)
    if isinstance(atoms, AtomSystem):
        atoms = atoms.internal(convention)
    if atoms.levels != Levels.FOUR:
        raise ConfigError("the gate needs the four-level scheme (qubit state |0>)")
    if protocol.half_delay_us is None:
        raise CalibrationError("gate delay not set; run calibrate_delay or pass one")
    grid = grid or SimGrid()
    basis = product_basis(Levels.FOUR)
    segs = gate_segments(protocol, pulses)
    T = protocol.boundary_us
    tau_step = protocol.resolved_tau_step(pulses)
    if n_samples % 2 == 0:
        n_samples += 1  # keep the boundary T on the sample grid
    t_eval = np.linspace(T - tau_step, T + tau_step, n_samples)

    psi0 = np.zeros(basis.dim, dtype=complex)
    for q in ("00", "01", "10", "11"):
        psi0[basis.qubit_index(q)] = 0.5
    rho0 = np.outer(psi0, psi0.conj())
    traj = propagate_segments_lindblad(segs, rho0, basis, atoms, grid, t_eval,
                                       backend=backend)
    rho_f = traj.final

    ideal = np.zeros(basis.dim, dtype=complex)
    for q, w in (("00", 0.5), ("01", 0.5), ("10", 0.5), ("11", -0.5)):
        ideal[basis.qubit_index(q)] = w
    fidelity = float(np.real(ideal.conj() @ rho_f @ ideal))

    phases = phase_accumulation(protocol, pulses, atoms)
    i00 = basis.qubit_index("00")
    i01 = basis.qubit_index("01")
    i11 = basis.qubit_index("11")
    phi11_meas = -float(np.angle(rho_f[i11, i00]))
    phi01_meas = -float(np.angle(rho_f[i01, i00]))

    # error budget from the sampled trajectory
    pops = np.einsum("tii->ti", traj.matrices).real
    n_i_pop = pops @ basis.n_i
    n_r_pop = pops @ basis.n_r
    loss_i = float(np.trapezoid(atoms.gamma_i * n_i_pop, traj.times))
    loss_r = float(np.trapezoid(atoms.gamma_r * n_r_pop, traj.times))
    budget = {
        "intermediate_state_loss": loss_i,
        "rydberg_decay_loss": loss_r,
        "nonadiabatic_leakage_residual": 1.0 - fidelity - loss_i - loss_r,
    }
    if motional is not None:
        budget["motional_excitation"] = motional_error(
            replace(motional, dwell_ns=protocol.half_delay_us * 1e3),
            v_int_rad_us=atoms.v_int)

    return GateResult(fidelity=fidelity, phi_00=0.0,
                      phi_01=phases.phi_01, phi_10=phases.phi_10,
                      phi_11=phases.phi_11,
                      phi_11_measured=phi11_meas, phi_01_measured=phi01_meas,
                      delay_ns=2.0 * protocol.half_delay_us * 1e3,
                      error_budget=budget, trajectory=traj)


# ---------------------------------------------------------------------------
# motional excitation estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotionalParams:
    """Trap and geometry inputs for the motional-excitation estimate."""

    r_um: float = 9.3
    omega0_khz: float = 100.0
    delta_r_nm: float = 35.0
    dwell_ns: float = 150.0

    def __post_init__(self):
        if min(self.r_um, self.omega0_khz, self.delta_r_nm, self.dwell_ns) <= 0:
            raise ConfigError("all motional parameters must be positive")


def motional_error(params: MotionalParams, v_int_mhz: float | None = None, *,
                   v_int_rad_us: float | None = None,
                   convention=DEFAULT_CONVENTION) -> float:
    """Probability of exciting the first motional state during the Rydberg dwell.

    |c_mot|^2 = (6 V delta_r / (r omega_0))^2 * |1 - exp(-2 i omega_0 t_dwell)|^2
    with the van-der-Waals force gradient 6 V / r.  Exactly zero whenever
    omega_0 * t_dwell is a multiple of pi.
    """
    if v_int_rad_us is None:
        if v_int_mhz is None:
            raise ConfigError("motional_error needs an interaction strength")
        v_int_rad_us = convention.from_mhz(v_int_mhz)
    if v_int_rad_us == 0:
        return 0.0
    omega0 = convention.from_khz(params.omega0_khz)
    delta_r_um = params.delta_r_nm * 1e-3
    dwell_us = params.dwell_ns * 1e-3
    prefactor = 6.0 * v_int_rad_us * delta_r_um / (params.r_um * omega0)
    return float(prefactor ** 2 * abs(1.0 - np.exp(-2j * omega0 * dwell_us)) ** 2)
