"""Synthetic city-like scenarios: BS, sectors, UEs, rays, LOS/NLOS labels.

Stands in for externally ray-traced data.  Ray powers follow free-space
path loss at the carrier frequency; NLOS rays bounce off randomly placed
reflectors and pay an extra 6-20 dB reflection loss.  The JSON schema
written by ``save_scenario`` doubles as the import format for real
ray-tracing exports.

Departure-angle convention (shared with ``geometry``): azimuth is the
horizontal bearing of the BS->UE (or BS->reflector) direction from the +x
axis; elevation is the angle of that direction above the horizontal plane
plus the BS downtilt, i.e. a UE sitting exactly on the downtilted
boresight cone has elevation 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .channel import OfdmConfig, RayPath
from .errors import DataError
from .geometry import AnglePair, UpaGeometry
from .rng import substream

SPEED_OF_LIGHT = 299_792_458.0

_SECTOR_EDGES = (-30.0, 90.0, 210.0, 330.0)  # sector i covers [edge_i, edge_{i+1})


def assign_sector(position, bs_position) -> int:
    """Sector id {1,2,3} of the horizontal BS->UE bearing."""
    dx = position[0] - bs_position[0]
    dy = position[1] - bs_position[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("UE is directly above the BS; bearing undefined")
    bearing = math.degrees(math.atan2(dy, dx)) % 360.0
    if bearing >= 330.0 or bearing < 90.0:
        return 1
    if bearing < 210.0:
        return 2
    return 3


def departure_angles(bs_position, target_position, downtilt_deg: float) -> AnglePair:
    """Departure (azimuth, elevation) of the ray from the BS toward a point."""
    dx = target_position[0] - bs_position[0]
    dy = target_position[1] - bs_position[1]
    dz = target_position[2] - bs_position[2]
    horiz = math.hypot(dx, dy)
    if horiz == 0.0:
        raise ValueError("target is on the BS vertical axis; azimuth undefined")
    azimuth = math.degrees(math.atan2(dy, dx))
    elevation = math.degrees(math.atan2(dz, horiz)) + downtilt_deg
    return AnglePair(azimuth=azimuth, elevation=elevation)


def free_space_path_loss_db(distance_m: float, carrier_hz: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance_m * carrier_hz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class ScenarioConfig:
    ue_count: int
    seed: int = 0
    carrier_hz: float = 3.5e9
    bs_position: tuple = (0.0, 0.0, 20.0)  # z is the BS height
    downtilt_deg: float = 20.0
    ue_height_m: float = 1.5
    geom: UpaGeometry = field(default_factory=lambda: UpaGeometry(8, 8, 1))
    ofdm: OfdmConfig = field(default_factory=lambda: OfdmConfig(256, 10e6))
    los_ratio_target: float = 0.7
    area: tuple = (-200.0, 200.0, -200.0, 200.0)  # x_min, x_max, y_min, y_max
    max_paths: int = 4
    reflector_count: int = 24
    tx_power_db: float = 0.0

    def __post_init__(self):
        if self.ue_count < 1:
            raise ValueError("ue_count must be >= 1")
        if not 0.0 <= self.los_ratio_target <= 1.0:
            raise ValueError("los_ratio_target must lie in [0, 1]")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        x_min, x_max, y_min, y_max = self.area
        if not (x_max > x_min and y_max > y_min):
            raise ValueError("area rectangle must have positive extent")


@dataclass
class UeRecord:
    id: int
    position: tuple
    sector_id: int
    rays: list

    def __post_init__(self):
        if not self.rays:
            raise ValueError(f"UE {self.id} has no rays")
        if sum(1 for r in self.rays if r.is_los) > 1:
            raise ValueError(f"UE {self.id} has more than one LOS ray")

    @property
    def is_los(self) -> bool:
        return any(r.is_los for r in self.rays)


@dataclass
class Scenario:
    config: ScenarioConfig
    ues: list


def _los_ray(cfg: ScenarioConfig, ue_pos, rng) -> RayPath:
    bs = cfg.bs_position
    dist = math.dist(bs, ue_pos)
    return RayPath(
        power_db=cfg.tx_power_db - free_space_path_loss_db(dist, cfg.carrier_hz),
        phase_rad=rng.uniform(0.0, 2.0 * math.pi),
        delay_s=dist / SPEED_OF_LIGHT,
        departure=departure_angles(bs, ue_pos, cfg.downtilt_deg),
        is_los=True,
    )


def _reflected_ray(cfg: ScenarioConfig, ue_pos, reflector, rng) -> RayPath:
    bs = cfg.bs_position
    total = math.dist(bs, reflector) + math.dist(reflector, ue_pos)
    loss_db = free_space_path_loss_db(total, cfg.carrier_hz) + rng.uniform(6.0, 20.0)
    return RayPath(
        power_db=cfg.tx_power_db - loss_db,
        phase_rad=rng.uniform(0.0, 2.0 * math.pi),
        delay_s=total / SPEED_OF_LIGHT,
        departure=departure_angles(bs, reflector, cfg.downtilt_deg),
        is_los=False,
    )


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Place UEs uniformly in the area and draw their rays; deterministic in seed."""
    x_min, x_max, y_min, y_max = config.area
    reflector_rng = substream(config.seed, 1)
    reflectors = [
        (
            reflector_rng.uniform(x_min, x_max),
            reflector_rng.uniform(y_min, y_max),
            reflector_rng.uniform(config.ue_height_m, config.bs_position[2]),
        )
        for _ in range(max(1, config.reflector_count))
    ]
    ues = []
    for ue_id in range(config.ue_count):
        rng = substream(config.seed, 2, ue_id)
        while True:
            pos = (rng.uniform(x_min, x_max), rng.uniform(y_min, y_max), config.ue_height_m)
            if (pos[0], pos[1]) != (config.bs_position[0], config.bs_position[1]):
                break
        has_los = rng.uniform() < config.los_ratio_target
        rays = []
        if has_los:
            rays.append(_los_ray(config, pos, rng))
            n_nlos = int(rng.integers(0, config.max_paths))  # up to L-1 extra rays
        else:
            n_nlos = int(rng.integers(1, config.max_paths + 1))
        for _ in range(n_nlos):
            reflector = reflectors[int(rng.integers(0, len(reflectors)))]
            rays.append(_reflected_ray(config, pos, reflector, rng))
        ues.append(
            UeRecord(
                id=ue_id,
                position=pos,
                sector_id=assign_sector(pos, config.bs_position),
                rays=rays,
            )
        )
    return Scenario(config=config, ues=ues)


# ---------------------------------------------------------------------------
# JSON persistence; schema doubles as the ray-file import format.

def _config_to_json(cfg: ScenarioConfig) -> dict:
    return {
        "ue_count": cfg.ue_count,
        "seed": cfg.seed,
        "carrier_hz": cfg.carrier_hz,
        "bs_position": list(cfg.bs_position),
        "downtilt_deg": cfg.downtilt_deg,
        "ue_height_m": cfg.ue_height_m,
        "geom": {"m_x": cfg.geom.m_x, "m_y": cfg.geom.m_y, "m_z": cfg.geom.m_z, "spacing": cfg.geom.spacing},
        "ofdm": {
            "num_subcarriers": cfg.ofdm.num_subcarriers,
            "bandwidth_hz": cfg.ofdm.bandwidth_hz,
            "selected": list(cfg.ofdm.selected),
        },
        "los_ratio_target": cfg.los_ratio_target,
        "area": list(cfg.area),
        "max_paths": cfg.max_paths,
        "reflector_count": cfg.reflector_count,
        "tx_power_db": cfg.tx_power_db,
    }


def config_from_json(obj: dict) -> ScenarioConfig:
    geom = obj.get("geom", {})
    ofdm = obj.get("ofdm", {})
    return ScenarioConfig(
        ue_count=int(obj["ue_count"]),
        seed=int(obj.get("seed", 0)),
        carrier_hz=float(obj.get("carrier_hz", 3.5e9)),
        bs_position=tuple(obj.get("bs_position", (0.0, 0.0, 20.0))),
        downtilt_deg=float(obj.get("downtilt_deg", 20.0)),
        ue_height_m=float(obj.get("ue_height_m", 1.5)),
        geom=UpaGeometry(
            m_x=int(geom.get("m_x", 8)),
            m_y=int(geom.get("m_y", 8)),
            m_z=int(geom.get("m_z", 1)),
            spacing=float(geom.get("spacing", 0.5)),
        ),
        ofdm=OfdmConfig(
            num_subcarriers=int(ofdm.get("num_subcarriers", 256)),
            bandwidth_hz=float(ofdm.get("bandwidth_hz", 10e6)),
            selected=tuple(ofdm.get("selected", ())),
        ),
        los_ratio_target=float(obj.get("los_ratio_target", 0.7)),
        area=tuple(obj.get("area", (-200.0, 200.0, -200.0, 200.0))),
        max_paths=int(obj.get("max_paths", 4)),
        reflector_count=int(obj.get("reflector_count", 24)),
        tx_power_db=float(obj.get("tx_power_db", 0.0)),
    )


def save_scenario(scenario: Scenario, path) -> None:
    payload = {
        "config": _config_to_json(scenario.config),
        "ues": [
            {
                "id": ue.id,
                "position": list(ue.position),
                "sector": ue.sector_id,
                "rays": [
                    {
                        "power_db": r.power_db,
                        "phase_rad": r.phase_rad,
                        "delay_s": r.delay_s,
                        "az_deg": r.departure.azimuth,
                        "el_deg": r.departure.elevation,
                        "is_los": r.is_los,
                    }
                    for r in ue.rays
                ],
            }
            for ue in scenario.ues
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON (line {exc.lineno}, col {exc.colno})") from exc
    if not isinstance(payload, dict) or "config" not in payload or "ues" not in payload:
        raise DataError(f"{path}: scenario file must contain 'config' and 'ues'")
    try:
        config = config_from_json(payload["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad config: {exc}") from exc
    ues = []
    for rec in payload["ues"]:
        ue_id = rec.get("id", "<missing id>")
        rays_json = rec.get("rays", [])
        if not rays_json:
            raise DataError(f"{path}: UE {ue_id} has no rays")
        try:
            rays = [
                RayPath(
                    power_db=float(r["power_db"]),
                    phase_rad=float(r["phase_rad"]),
                    delay_s=float(r["delay_s"]),
                    departure=AnglePair(float(r["az_deg"]), float(r["el_deg"])),
                    is_los=bool(r["is_los"]),
                )
                for r in rays_json
            ]
            ues.append(
                UeRecord(
                    id=int(rec["id"]),
                    position=tuple(rec["position"]),
                    sector_id=int(rec["sector"]),
                    rays=rays,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: UE {ue_id}: {exc}") from exc
        if ues[-1].sector_id != assign_sector(ues[-1].position, config.bs_position):
            raise DataError(f"{path}: UE {ue_id}: stored sector does not match its bearing")
    return Scenario(config=config, ues=ues)
