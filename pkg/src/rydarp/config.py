"""JSON run configuration: strict parsing, validation and round-trip emission.

Unknown keys are rejected at every level; all physical values go through the
dataclass validators before any computation.  Bundled reference configs
(fig2, fig3, fig5) carry the standard parameter sets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .experiments import GateProtocol, MotionalParams, SweepSpec
from .params import AtomSystem, PulseSet, SimGrid, UnitConvention

BUNDLED_CONFIGS = ("fig2", "fig3", "fig5")

_PULSE_KEYS = {"omega0_p_mhz", "omega0_s_mhz", "tau_p_ns", "tau_s_ns", "t_c_us",
               "alpha_mhz_per_us", "delta0_p_mhz", "delta0_s_mhz"}
_ATOM_KEYS = {"levels", "gamma_i_mhz", "gamma_r_khz", "v_int_mhz", "qubit_splitting_ghz"}
_GRID_KEYS = {"t_start_us", "t_end_us", "rel_tol", "abs_tol", "max_step_us"}
_SWEEP_KEYS = {"omega_mhz", "alpha_mhz_per_us"}
_RANGE_KEYS = {"min", "max", "points"}
_GATE_KEYS = {"boundary_us", "half_delay_us", "tau_step_us", "variant", "envelope_pad"}
_MOTIONAL_KEYS = {"r_um", "omega0_khz", "delta_r_nm", "dwell_ns"}
_TOP_KEYS = {"angular_convention", "pulses", "atoms", "grid", "sweep", "gate",
             "motional", "workers"}


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"section {where!r} must be a JSON object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _axis(section, key, where):
    spec = section[key]
    _check_keys(spec, _RANGE_KEYS, f"{where}.{key}")
    missing = _RANGE_KEYS - set(spec)
    if missing:
        raise ConfigError(f"{where}.{key} needs keys {sorted(missing)}")
    return tuple(np.linspace(float(spec["min"]), float(spec["max"]), int(spec["points"])))


@dataclass
class RunConfig:
    convention: UnitConvention
    pulses: PulseSet
    atoms: AtomSystem
    grid: SimGrid
    sweep: SweepSpec | None = None
    gate: GateProtocol | None = None
    motional: MotionalParams | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        out = {
            "angular_convention": self.convention.name,
            "pulses": {
                "omega0_p_mhz": self.pulses.omega0_p_mhz,
                "omega0_s_mhz": self.pulses.omega0_s_mhz,
                "tau_p_ns": self.pulses.tau_p_ns,
                "tau_s_ns": self.pulses.tau_s_ns,
                "t_c_us": self.pulses.t_c_us,
                "alpha_mhz_per_us": self.pulses.alpha_mhz_per_us,
                "delta0_p_mhz": self.pulses.delta0_p_mhz,
                "delta0_s_mhz": self.pulses.delta0_s_mhz,
            },
            "atoms": {
                "levels": self.atoms.levels,
                "gamma_i_mhz": self.atoms.gamma_i_mhz,
                "gamma_r_khz": self.atoms.gamma_r_khz,
                "v_int_mhz": self.atoms.v_int_mhz,
                "qubit_splitting_ghz": self.atoms.qubit_splitting_ghz,
            },
            "grid": {
                "t_start_us": self.grid.t_start_us,
                "t_end_us": self.grid.t_end_us,
                "rel_tol": self.grid.rel_tol,
                "abs_tol": self.grid.abs_tol,
                "max_step_us": self.grid.max_step_us,
            },
            "workers": self.workers,
        }
        if self.sweep is not None:
            out["sweep"] = {
                "omega_mhz": {"min": min(self.sweep.omegas_mhz),
                              "max": max(self.sweep.omegas_mhz),
                              "points": len(self.sweep.omegas_mhz)},
                "alpha_mhz_per_us": {"min": min(self.sweep.alphas_mhz_per_us),
                                     "max": max(self.sweep.alphas_mhz_per_us),
                                     "points": len(self.sweep.alphas_mhz_per_us)},
            }
        if self.gate is not None:
            out["gate"] = {
                "boundary_us": self.gate.boundary_us,
                "half_delay_us": self.gate.half_delay_us,
                "tau_step_us": self.gate.tau_step_us,
                "variant": self.gate.variant,
                "envelope_pad": self.gate.envelope_pad,
            }
        if self.motional is not None:
            out["motional"] = {
                "r_um": self.motional.r_um,
                "omega0_khz": self.motional.omega0_khz,
                "delta_r_nm": self.motional.delta_r_nm,
                "dwell_ns": self.motional.dwell_ns,
            }
        return out


def parse_config(data: dict) -> RunConfig:
    _check_keys(data, _TOP_KEYS, "top level")
    for required in ("pulses", "atoms"):
        if required not in data:
            raise ConfigError(f"missing required section {required!r}")
    convention = UnitConvention.from_name(data.get("angular_convention", "two_pi"))

    _check_keys(data["pulses"], _PULSE_KEYS, "pulses")
    missing = _PULSE_KEYS - set(data["pulses"])
    if missing:
        raise ConfigError(f"pulses section needs keys {sorted(missing)}")
    pulses = PulseSet(**{k: float(v) for k, v in data["pulses"].items()})

    _check_keys(data["atoms"], _ATOM_KEYS, "atoms")
    atoms_raw = dict(data["atoms"])
    levels = atoms_raw.pop("levels", "three")
    atoms = AtomSystem(levels=levels, **{k: float(v) for k, v in atoms_raw.items()})

    grid_raw = dict(data.get("grid", {}))
    _check_keys(grid_raw, _GRID_KEYS, "grid")
    for k in ("t_start_us", "t_end_us"):
        if k in grid_raw and grid_raw[k] is not None:
            grid_raw[k] = float(grid_raw[k])
    grid = SimGrid(**grid_raw)

    sweep = None
    if "sweep" in data and data["sweep"] is not None:
        _check_keys(data["sweep"], _SWEEP_KEYS, "sweep")
        sweep = SweepSpec(omegas_mhz=_axis(data["sweep"], "omega_mhz", "sweep"),
                          alphas_mhz_per_us=_axis(data["sweep"], "alpha_mhz_per_us",
                                                  "sweep"))

    gate = None
    if "gate" in data and data["gate"] is not None:
        _check_keys(data["gate"], _GATE_KEYS, "gate")
        raw = dict(data["gate"])
        for k in ("half_delay_us", "tau_step_us"):
            if k in raw and raw[k] is not None:
                raw[k] = float(raw[k])
        gate = GateProtocol(**raw)

    motional = None
    if "motional" in data and data["motional"] is not None:
        _check_keys(data["motional"], _MOTIONAL_KEYS, "motional")
        motional = MotionalParams(**{k: float(v) for k, v in data["motional"].items()})

    workers = int(data.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return RunConfig(convention=convention, pulses=pulses, atoms=atoms, grid=grid,
                     sweep=sweep, gate=gate, motional=motional, workers=workers)


def load_config(source) -> RunConfig:
    """Load a config from a JSON file path or a bundled name (fig2/fig3/fig5)."""
    if isinstance(source, (str, Path)) and str(source) in BUNDLED_CONFIGS:
        text = resources.files("rydarp.configs").joinpath(f"{source}.json").read_text("utf-8")
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in config: {exc}") from exc
    return parse_config(data)
