"""Hierarchical codebook search baseline with measurement accounting.

Two-stage coarse-to-fine sweeping: stage 1 sweeps the whole coarse
codebook on a noised channel copy, stage 2 sweeps only the winner's fine
children on an independently noised copy.  Every RSRP evaluation counts as
one measurement.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .channel import ChannelTensor, add_noise
from .codebook import Codebook, parent_child_map
from .measurement import rsrp
from .rng import derive_seed


@dataclass
class StageRecord:
    codebook_id: str
    measured_indices: list
    rsrp_values: list
    selected_index: int


@dataclass
class SearchTrace:
    stages: list
    total_measurements: int
    final_beam: int


def _codebook_id(cb: Codebook) -> str:
    x1, x2 = cb.resolution
    return f"sector{cb.sector_id}:{x1}x{x2}"


def _measure_stage(h: ChannelTensor, cb: Codebook, indices) -> StageRecord:
    values = [rsrp(h, cb.beams[i].vector) for i in indices]
    selected = indices[int(np.argmax(values))]
    return StageRecord(
        codebook_id=_codebook_id(cb),
        measured_indices=list(indices),
        rsrp_values=values,
        selected_index=selected,
    )


def hierarchical_search(
    h: ChannelTensor, coarse: Codebook, fine: Codebook, noise_power: float, seed: int
) -> SearchTrace:
    """Coarse sweep, then sweep the winner's children; independent noise per stage."""
    children = parent_child_map(coarse, fine)
    stage1 = _measure_stage(
        add_noise(h, noise_power, derive_seed(seed, 1)), coarse, list(range(coarse.beam_count))
    )
    stage2 = _measure_stage(
        add_noise(h, noise_power, derive_seed(seed, 2)), fine, children[stage1.selected_index]
    )
    return SearchTrace(
        stages=[stage1, stage2],
        total_measurements=len(stage1.measured_indices) + len(stage2.measured_indices),
        final_beam=stage2.selected_index,
    )


def exhaustive_search(h: ChannelTensor, fine: Codebook, noise_power: float, seed: int) -> SearchTrace:
    """Noised sweep over the entire fine codebook."""
    stage = _measure_stage(
        add_noise(h, noise_power, derive_seed(seed, 1)), fine, list(range(fine.beam_count))
    )
    return SearchTrace(
        stages=[stage],
        total_measurements=len(stage.measured_indices),
        final_beam=stage.selected_index,
    )


def export_traces(traces, path) -> None:
    """One JSON object per line, for debugging."""
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(json.dumps(asdict(trace), sort_keys=True))
            fh.write("\n")
