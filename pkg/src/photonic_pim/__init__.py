"""Functional and analytical simulator for an optical in-memory CNN accelerator.

The package models a multi-level optical phase-change main memory that
doubles as a compute substrate: stored rows modulate driven laser
amplitudes (multiply), equal wavelengths sum in the readout waveguide
(accumulate), and a per-bank aggregation stage finishes wide operands
digitally.  On top of the functional core sit analytical latency, energy,
and power models plus a design-space sweep over the subarray grouping.
"""

from .devices import (
    EnergyParams,
    LossParams,
    MdlModel,
    ModeConverterModel,
    MrModel,
    OpcmCellModel,
    cell_write_energy,
    db_to_fraction,
    fraction_to_db,
    mr_resonant_wavelength_um,
    transmission_of_level,
)
from .errors import ConfigError, InterferenceError, MappingError, MemoryConflictError
from .memory import (
    BankState,
    CellLocation,
    MemoryGeometry,
    available_memory_rows,
    build_read_path,
    capacity_bits,
    capacity_bytes,
    decode_address,
    encode_address,
    mem_access,
    path_loss_db,
    required_laser_power_dbm,
)
from .compute import (
    AggregationConfig,
    GroupMacBatch,
    adc_quantize,
    assign_modes,
    bias_correct,
    check_interference_safety,
    interfere_mac,
    nibble_decompose,
    shift_add_combine,
)
from .mapper import (
    LayerSpec,
    MappingPlan,
    NetworkSpec,
    WritebackPlan,
    build_network_plans,
    map_conv_layer,
    map_fc_layer,
    ofm_dims,
    param_count,
    plan_tdm,
    simulate_network,
)
from .perf import (
    DseRow,
    LayerResult,
    PowerParams,
    TimingParams,
    dse_grouping,
    efficiency_metrics,
    layer_energy,
    layer_latency,
    power_breakdown,
)

__version__ = "0.1.0"
