"""RSRP sweeping, beam oracles, achievable rate, and dataset construction.

RSRP of a beam is the mean over selected subcarriers of |h_k . f|^2 (mean,
not sum, so values stay comparable across OFDM configurations).  Dataset
features are the coarse-codebook RSRP grid of the unit-normalized noisy
channel, bilinearly upsampled to 64 x 64 with align-corners registration
and standardized per sample; labels come from the noiseless fine sweep.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelTensor, add_noise, noise_power_for_snr, synthesize_channel
from .codebook import Codebook, build_codebook
from .errors import DataError, NumericError
from .rng import derive_seed, substream
from .scenario import Scenario, UeRecord

FEATURE_SHAPE = (64, 64)

_RECORD_HEAD = struct.Struct("<IBI3f")  # ue_id u32, sector u8, label u32, position 3xf32


@dataclass
class RsrpGrid:
    """Nonnegative RSRP values shaped like the codebook grid (X1, X2)."""

    values: np.ndarray
    codebook: Codebook
    snr_db: float | None = None

    def __post_init__(self):
        if self.values.shape != tuple(self.codebook.resolution):
            raise ValueError(
                f"grid shape {self.values.shape} != codebook resolution {self.codebook.resolution}"
            )


@dataclass
class DatasetSample:
    features: np.ndarray  # (64, 64)
    label_fine_beam: int
    sector_id: int
    position: tuple
    ue_id: int


@dataclass
class Dataset:
    samples: list
    split: dict  # name -> list of record indices
    provenance: dict


def rsrp(h: ChannelTensor, beam: np.ndarray) -> float:
    """Mean beamformed power over the selected subcarriers."""
    if beam.shape != (h.entries.shape[1],):
        raise ValueError(f"beam length {beam.shape} does not match {h.entries.shape[1]} elements")
    return float(np.mean(np.abs(h.entries @ beam) ** 2))


def sweep(h: ChannelTensor, cb: Codebook, snr_db: float | None = None) -> RsrpGrid:
    """RSRP of every beam, arranged on the codebook's angular grid."""
    powers = np.mean(np.abs(h.entries @ cb.matrix.T) ** 2, axis=0)
    return RsrpGrid(values=powers.reshape(cb.resolution), codebook=cb, snr_db=snr_db)


def best_beam(grid: RsrpGrid) -> int:
    """Flattened argmax; ties break toward the lowest index."""
    return int(np.argmax(grid.values))


def achievable_rate(h: ChannelTensor, beam: np.ndarray, noise_power: float) -> float:
    """Spectral efficiency log2(1 + rsrp / noise_power) in bits/s/Hz."""
    if noise_power <= 0:
        raise NumericError("achievable rate requires positive noise power")
    return float(np.log2(1.0 + rsrp(h, beam) / noise_power))


def bilinear_upsample(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Align-corners bilinear resampling of a 2-D grid.

    Input corner samples map exactly onto output corners; interior points
    use the standard four-neighbor weighting.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError("bilinear_upsample expects a 2-D grid")
    in_h, in_w = grid.shape
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    if (out_h > in_h and in_h < 2) or (out_w > in_w and in_w < 2):
        raise ValueError("cannot upsample a degenerate axis of extent < 2")

    def axis_coords(n_in, n_out):
        if n_out == 1:
            return np.zeros(1)
        return np.linspace(0.0, n_in - 1.0, n_out)

    ys = axis_coords(in_h, out_h)
    xs = axis_coords(in_w, out_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - (2 if in_h > 1 else 1))
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - (2 if in_w > 1 else 1))
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    q11 = grid[np.ix_(y0, x0)]
    q21 = grid[np.ix_(y0, x1)]
    q12 = grid[np.ix_(y1, x0)]
    q22 = grid[np.ix_(y1, x1)]
    return (1 - wy) * (1 - wx) * q11 + (1 - wy) * wx * q21 + wy * (1 - wx) * q12 + wy * wx * q22


def standardize(features: np.ndarray) -> np.ndarray:
    """Per-sample zero mean, unit variance; an all-constant grid maps to zeros."""
    mean = features.mean()
    std = features.std()
    if std == 0.0:
        return np.zeros_like(features)
    return (features - mean) / std


def normalized_channel(ue: UeRecord, geom, ofdm) -> ChannelTensor:
    """Synthesize the UE channel and scale it to unit Frobenius norm."""
    h = synthesize_channel(ue.rays, geom, ofdm)
    energy = h.energy
    if energy <= 0.0:
        raise NumericError(f"UE {ue.id} produced a zero-energy channel")
    return ChannelTensor(entries=h.entries / np.sqrt(energy), geom=geom, ofdm=ofdm)


def build_sample(
    ue: UeRecord,
    coarse_cb: Codebook,
    fine_cb: Codebook,
    snr_db: float,
    geom,
    ofdm,
    seed: int,
) -> DatasetSample:
    """One training record: noisy upsampled coarse features, noiseless fine label."""
    if coarse_cb.sector_id != ue.sector_id or fine_cb.sector_id != ue.sector_id:
        raise DataError(f"codebooks for sector {coarse_cb.sector_id} used on UE in sector {ue.sector_id}")
    h = normalized_channel(ue, geom, ofdm)
    noise_power = noise_power_for_snr(h, snr_db)
    noisy = add_noise(h, noise_power, seed)
    coarse_grid = sweep(noisy, coarse_cb, snr_db=snr_db)
    features = standardize(bilinear_upsample(coarse_grid.values, *FEATURE_SHAPE))
    label = best_beam(sweep(h, fine_cb))
    return DatasetSample(
        features=features,
        label_fine_beam=label,
        sector_id=ue.sector_id,
        position=tuple(ue.position),
        ue_id=ue.id,
    )


def sector_codebooks(resolution, geom):
    """One codebook per sector id at the given resolution."""
    return {sector: build_codebook(sector, resolution, geom) for sector in (1, 2, 3)}


def scenario_fingerprint(scenario: Scenario) -> str:
    """Stable sha256 over the scenario's JSON serialization."""
    from .scenario import _config_to_json  # local import avoids a cycle at module load

    blob = json.dumps(
        {
            "config": _config_to_json(scenario.config),
            "ues": [
                [ue.id, list(ue.position), ue.sector_id,
                 [[r.power_db, r.phase_rad, r.delay_s, r.departure.azimuth,
                   r.departure.elevation, r.is_los] for r in ue.rays]]
                for ue in scenario.ues
            ],
        },
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()


def build_dataset(
    scenario: Scenario,
    coarse_res,
    fine_res,
    snr_db: float,
    split_fractions=(0.8, 0.1, 0.1),
    seed: int = 0,
) -> Dataset:
    """One sample per UE plus a deterministic shuffled train/val/test split."""
    if not scenario.ues:
        raise DataError("cannot build a dataset from an empty scenario")
    if abs(sum(split_fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    geom, ofdm = scenario.config.geom, scenario.config.ofdm
    coarse = sector_codebooks(tuple(coarse_res), geom)
    fine = sector_codebooks(tuple(fine_res), geom)
    samples = [
        build_sample(
            ue,
            coarse[ue.sector_id],
            fine[ue.sector_id],
            snr_db,
            geom,
            ofdm,
            seed=derive_seed(seed, 3, ue.id),
        )
        for ue in scenario.ues
    ]
    order = substream(seed, 4).permutation(len(samples))
    f_train, f_val, _ = split_fractions
    c1 = round(f_train * len(samples))
    c2 = round((f_train + f_val) * len(samples))
    split = {
        "train": [int(i) for i in order[:c1]],
        "val": [int(i) for i in order[c1:c2]],
        "test": [int(i) for i in order[c2:]],
    }
    provenance = {
        "scenario_sha256": scenario_fingerprint(scenario),
        "coarse_resolution": list(coarse_res),
        "fine_resolution": list(fine_res),
        "snr_db": snr_db,
        "seed": seed,
        "split_fractions": list(split_fractions),
    }
    return Dataset(samples=samples, split=split, provenance=provenance)


# ---------------------------------------------------------------------------
# On-disk layout: meta.json + records.bin (little-endian, fixed record size).

def save_dataset(ds: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": 1,
        "feature_shape": list(FEATURE_SHAPE),
        "record_count": len(ds.samples),
        "record_order": "as written",
        "split": ds.split,
        **ds.provenance,
    }
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
    with open(out / "records.bin", "wb") as fh:
        for s in ds.samples:
            fh.write(_RECORD_HEAD.pack(s.ue_id, s.sector_id, s.label_fine_beam, *s.position))
            fh.write(np.asarray(s.features, dtype="<f4").tobytes())


def load_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    try:
        with open(src / "meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"{src}: missing meta.json") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{src}/meta.json: not valid JSON (line {exc.lineno})") from exc
    shape = tuple(meta.get("feature_shape", FEATURE_SHAPE))
    n_feat = int(np.prod(shape))
    record_size = _RECORD_HEAD.size + 4 * n_feat
    samples = []
    raw = (src / "records.bin").read_bytes()
    if len(raw) != record_size * int(meta["record_count"]):
        raise DataError(
            f"{src}/records.bin: size {len(raw)} != {record_size} * {meta['record_count']} records"
        )
    for i in range(int(meta["record_count"])):
        chunk = raw[i * record_size : (i + 1) * record_size]
        ue_id, sector, label, px, py, pz = _RECORD_HEAD.unpack_from(chunk)
        features = np.frombuffer(chunk, dtype="<f4", offset=_RECORD_HEAD.size).astype(np.float64)
        samples.append(
            DatasetSample(
                features=features.reshape(shape),
                label_fine_beam=label,
                sector_id=sector,
                position=(px, py, pz),
                ue_id=ue_id,
            )
        )
    split = {k: list(map(int, v)) for k, v in meta["split"].items()}
    provenance = {
        k: meta[k]
        for k in ("scenario_sha256", "coarse_resolution", "fine_resolution", "snr_db", "seed", "split_fractions")
        if k in meta
    }
    return Dataset(samples=samples, split=split, provenance=provenance)
