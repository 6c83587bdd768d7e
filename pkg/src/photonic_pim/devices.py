"""Behavioral models of the photonic devices used by the accelerator.

The multi-level optical phase-change cell (the storage and multiply
element), microring resonators, microdisk laser arrays, mode converters,
and the dB-domain loss/energy parameter sets all live here.  Everything is
an immutable value object: models are safe to share across concurrent
simulation workers.

Physics conventions:
    - Cell state is a "level" in [0, 2^bit_density).  Transmission rises
      linearly with level, from the crystalline floor to the amorphous
      ceiling.  The linear spacing makes readout amplitude proportional to
      the stored value, which the in-memory MAC semantics require.
    - Losses are positive dB; amplifier gain is positive dB and subtracts
      from a path budget.
    - A microring resonates at wavelength 2*pi*n_eff*R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OpcmCellModel",
    "MrModel",
    "MdlModel",
    "ModeConverterModel",
    "LossParams",
    "EnergyParams",
    "fraction_to_db",
    "db_to_fraction",
    "transmission_of_level",
    "transmission_with_scatter",
    "cell_write_energy",
    "mr_resonant_wavelength_um",
]


def fraction_to_db(fraction: float) -> float:
    """Convert a power transmission fraction in (0, 1] to a loss in dB."""
    if fraction <= 0.0 or fraction > 1.0:
        raise ValueError(f"transmission fraction must be in (0, 1], got {fraction}")
    return -10.0 * math.log10(fraction)


def db_to_fraction(loss_db: float) -> float:
    """Convert a loss in dB (>= 0) back to a transmission fraction."""
    if loss_db < 0.0:
        raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class OpcmCellModel:
    """One multi-level optical phase-change memory cell.

    ``t_amorphous`` and ``t_crystalline`` are normalized transmission
    fractions of the fully amorphous (high transmission) and fully
    crystalline (low transmission) states.  Their difference, the
    transmission contrast, is the usable signal range; the default 0.96
    contrast supports 16 distinguishable levels (4 bits/cell).

    ``scatter_bound`` is the worst-case unwanted transmission change from
    scattering and back-reflection.  It is a bound, not a noise process:
    the deterministic model ignores it, and :func:`transmission_with_scatter`
    can draw a uniform perturbation inside it for robustness experiments.

    ``mode`` selects the level-to-transmission map:
        - "ideal":    T(level) = level / (levels - 1)
        - "physical": T(level) = t_crystalline + T_ideal(level) * contrast
    """

    bit_density: int = 4
    t_amorphous: float = 1.0
    t_crystalline: float = 0.04
    scatter_bound: float = 0.05
    read_energy_pj: float = 5.0
    write_energy_pj: float = 250.0
    mode: str = "physical"

    def __post_init__(self) -> None:
        if self.bit_density < 1:
            raise ValueError("bit_density must be >= 1")
        if not (0.0 <= self.t_crystalline < self.t_amorphous <= 1.0):
            raise ValueError(
                "need 0 <= t_crystalline < t_amorphous <= 1, got "
                f"t_c={self.t_crystalline}, t_a={self.t_amorphous}"
            )
        if not (0.0 <= self.scatter_bound < self.contrast):
            raise ValueError("scatter_bound must be in [0, contrast)")
        if self.read_energy_pj < 0 or self.write_energy_pj < 0:
            raise ValueError("cell energies must be >= 0")
        if self.mode not in ("ideal", "physical"):
            raise ValueError(f"mode must be 'ideal' or 'physical', got {self.mode!r}")

    @property
    def levels(self) -> int:
        """Number of programmable transmission levels (2^bit_density)."""
        return 2**self.bit_density

    @property
    def contrast(self) -> float:
        """Transmission contrast between the extreme states."""
        return self.t_amorphous - self.t_crystalline

    def as_ideal(self) -> "OpcmCellModel":
        """Same cell with the ideal (offset-free) transmission map."""
        if self.mode == "ideal":
            return self
        return OpcmCellModel(
            bit_density=self.bit_density,
            t_amorphous=self.t_amorphous,
            t_crystalline=self.t_crystalline,
            scatter_bound=self.scatter_bound,
            read_energy_pj=self.read_energy_pj,
            write_energy_pj=self.write_energy_pj,
            mode="ideal",
        )


def _check_levels(cell: OpcmCellModel, level) -> np.ndarray:
    arr = np.asarray(level)
    if arr.dtype != object:
        if np.any(arr < 0) or np.any(arr >= cell.levels):
            raise ValueError(
                f"level out of range [0, {cell.levels}): {np.asarray(level)}"
            )
    return arr


def transmission_of_level(cell: OpcmCellModel, level):
    """Transmission fraction of a cell programmed to ``level``.

    Accepts scalars or arrays; strictly increasing in level for both
    modes.  Object (symbolic) inputs bypass the range check.
    """
    arr = _check_levels(cell, level)
    ideal = arr / (cell.levels - 1)
    if cell.mode == "ideal":
        out = ideal
    else:
        out = cell.t_crystalline + ideal * cell.contrast
    if np.ndim(level) == 0 and not isinstance(out, np.ndarray):
        return out
    return out if np.ndim(level) else out.item() if arr.dtype != object else out


def transmission_with_scatter(
    cell: OpcmCellModel, level, rng: np.random.Generator
):
    """Transmission with a uniform scatter perturbation inside the bound.

    Models the residual transmission uncertainty as an additive uniform
    draw in [-scatter_bound, +scatter_bound], clipped to [0, 1].  Only for
    robustness experiments; the deterministic paths never call this.
    """
    base = np.asarray(transmission_of_level(cell, level), dtype=float)
    noise = rng.uniform(-cell.scatter_bound, cell.scatter_bound, size=base.shape)
    return np.clip(base + noise, 0.0, 1.0)


def cell_write_energy(cell: OpcmCellModel, from_level: int, to_level: int) -> float:
    """Energy in pJ to reprogram a cell; zero when no pulse is needed.

    The write energy is level-independent: any actual phase transition
    costs the full programming pulse, and a same-level "write" issues no
    pulse at all.
    """
    _check_levels(cell, from_level)
    _check_levels(cell, to_level)
    if from_level == to_level:
        return 0.0
    return cell.write_energy_pj


@dataclass(frozen=True)
class MrModel:
    """Microring resonator: wavelength-selective access/modulation element."""

    effective_index: float = 2.4
    radius_um: float = 10.0
    tuning: str = "electro_optic"

    def __post_init__(self) -> None:
        if self.effective_index <= 1.0:
            raise ValueError("effective_index must be > 1")
        if self.radius_um <= 0.0:
            raise ValueError("radius must be > 0")
        if self.tuning not in ("thermo_optic", "electro_optic"):
            raise ValueError(f"unknown tuning mechanism {self.tuning!r}")


def mr_resonant_wavelength_um(mr: MrModel) -> float:
    """Resonant wavelength of a microring: 2*pi*n_eff*R (micrometers)."""
    return 2.0 * math.pi * mr.effective_index * mr.radius_um


@dataclass(frozen=True)
class MdlModel:
    """Per-subarray microdisk laser array driving in-memory reads.

    ``count_per_subarray`` must equal the subarray column count; the
    pairing is validated when a geometry is attached in the run config.
    """

    per_laser_power_mw: float = 0.009
    count_per_subarray: int = 512
    modulation_rate_hz: float = 5.0e9

    def __post_init__(self) -> None:
        if self.per_laser_power_mw <= 0.0:
            raise ValueError("per_laser_power_mw must be > 0")
        if self.count_per_subarray < 1:
            raise ValueError("count_per_subarray must be >= 1")
        if self.modulation_rate_hz <= 0.0:
            raise ValueError("modulation_rate_hz must be > 0")


@dataclass(frozen=True)
class ModeConverterModel:
    """Spatial mode converter; the platform supports exactly four modes."""

    max_modes: int = 4
    insertion_loss_db: float = 0.2

    def __post_init__(self) -> None:
        if self.max_modes != 4:
            raise ValueError("the mode-division degree is fixed at 4")
        if self.insertion_loss_db < 0.0:
            raise ValueError("insertion loss must be >= 0 dB")


@dataclass(frozen=True)
class LossParams:
    """Insertion losses (dB) of every optical path element, single source of truth.

    Defaults are the vendor/reference device values the simulator ships
    with.  ``gst_switch_db`` is not part of that table and defaults to an
    assumed 0.5 dB (configurable).  ``crossing_loss_fraction`` is the
    fraction of power lost per waveguide crossing (1e-5, i.e. < 0.001%).
    """

    directional_coupler_db: float = 0.02
    mr_drop_db: float = 0.5
    mr_through_db: float = 0.02
    propagation_db_per_cm: float = 0.1
    bend_db_per_90deg: float = 0.01
    eo_mr_drop_db: float = 1.6
    eo_mr_through_db: float = 0.33
    soa_gain_db: float = 20.0
    crossing_loss_fraction: float = 1.0e-5
    crossing_crosstalk_db: float = -40.0
    gst_switch_db: float = 0.5

    def __post_init__(self) -> None:
        for name in (
            "directional_coupler_db",
            "mr_drop_db",
            "mr_through_db",
            "propagation_db_per_cm",
            "bend_db_per_90deg",
            "eo_mr_drop_db",
            "eo_mr_through_db",
            "gst_switch_db",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0 dB")
        if self.soa_gain_db < 0.0:
            raise ValueError("soa_gain_db must be >= 0 dB")
        if not (0.0 <= self.crossing_loss_fraction < 1.0):
            raise ValueError("crossing_loss_fraction must be in [0, 1)")

    @property
    def crossing_db(self) -> float:
        """Insertion loss of one low-leakage waveguide crossing, in dB."""
        return -10.0 * math.log10(1.0 - self.crossing_loss_fraction)


@dataclass(frozen=True)
class EnergyParams:
    """Per-event electrical/optical energies.

    ADC energy per conversion is ``adc_fj_per_step * 2^adc_bits``.  The
    DRAM figure is a reference constant for report comparisons only; the
    simulated memory is the phase-change array itself.
    """

    opcm_read_pj: float = 5.0
    opcm_write_pj: float = 250.0
    adc_fj_per_step: float = 24.4
    adc_bits: int = 5
    dac_pj_per_bit: float = 2.0
    dram_access_pj_per_bit: float = 20.0
    sram_access_pj: float = 0.05

    def __post_init__(self) -> None:
        for name in (
            "opcm_read_pj",
            "opcm_write_pj",
            "adc_fj_per_step",
            "dac_pj_per_bit",
            "dram_access_pj_per_bit",
            "sram_access_pj",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.adc_bits < 1:
            raise ValueError("adc_bits must be >= 1")

    @property
    def adc_conversion_pj(self) -> float:
        return self.adc_fj_per_step * (2**self.adc_bits) / 1000.0
