"""beamsim: a beam-prediction workbench for sectorized massive-MIMO links.

Synthesizes ray-based downlink channels, builds sectorized DFT codebooks,
constructs coarse-RSRP -> fine-beam datasets under controlled SNR, trains
position-assisted fusion models, and evaluates them against hierarchical
and exhaustive codebook search baselines.
"""

from .geometry import AnglePair, UpaGeometry, array_response, steering_axis
from .channel import (
    ChannelTensor,
    OfdmConfig,
    RayPath,
    add_noise,
    noise_power_for_snr,
    snr_of,
    synthesize_channel,
)
from .codebook import (
    BeamEntry,
    Codebook,
    angle_grid,
    bf_matrix,
    build_codebook,
    load_codebook,
    parent_child_map,
    save_codebook,
)
from .scenario import (
    Scenario,
    ScenarioConfig,
    UeRecord,
    assign_sector,
    generate_scenario,
    load_scenario,
    save_scenario,
)
from .measurement import (
    Dataset,
    DatasetSample,
    RsrpGrid,
    achievable_rate,
    best_beam,
    bilinear_upsample,
    build_dataset,
    build_sample,
    load_dataset,
    rsrp,
    save_dataset,
    sweep,
)
from .baseline import SearchTrace, exhaustive_search, hierarchical_search
from .evaluate import EvalReport, cross_scenario_eval, emit_report, evaluate_policy, top1_accuracy

__version__ = "0.1.0"
