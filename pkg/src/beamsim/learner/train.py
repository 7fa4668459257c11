"""Seeded training loop: AdamW, linear warmup, plateau decay, checkpoints.

The gan variant alternates one discriminator step and one generator+task
step per batch.  Position targets are standardized with train-split
statistics; the scaler rides along in the checkpoint header so position
estimates can be mapped back to meters.
"""

from __future__ import annotations

import copy
import csv
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np
import torch

from ..errors import ConfigError, DataError, NumericError
from ..rng import derive_seed, substream
from .losses import total_loss
from .nets import (
    FusionModel,
    ModelConfig,
    _lift,
    build_model,
    discriminator_loss,
    generator_loss,
    predict,
)

_CKPT_MAGIC = b"BSCK"


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 150
    batch_size: int = 256
    peak_lr: float = 5e-4
    weight_decay: float = 1e-5
    warmup_epochs: int = 10
    plateau_factor: float = 0.8
    plateau_patience: int = 10
    plateau_threshold: float = 0.01
    plateau_cooldown: int = 2
    min_lr: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if not 0 < self.min_lr <= self.peak_lr:
            raise ConfigError("need 0 < min_lr <= peak_lr")


@dataclass
class PositionScaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, positions):
        return (positions - self.mean) / self.std

    def inverse(self, positions):
        return positions * self.std + self.mean

    def to_json(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(mean=np.asarray(obj["mean"]), std=np.asarray(obj["std"]))

    @classmethod
    def identity(cls):
        return cls(mean=np.zeros(3), std=np.ones(3))


def _dataset_arrays(dataset):
    feats = np.stack([s.features for s in dataset.samples]).astype(np.float64)
    labels = np.array([s.label_fine_beam for s in dataset.samples], dtype=np.int64)
    sectors = np.array([s.sector_id for s in dataset.samples], dtype=np.int64)
    positions = np.stack([np.asarray(s.position, dtype=np.float64) for s in dataset.samples])
    return feats, labels, sectors, positions


def _set_lr(optimizers, lr):
    for opt in optimizers:
        for group in opt.param_groups:
            group["lr"] = lr


def _val_top1(model, feats, labels, sectors, idx, batch_size=512):
    hits = 0
    for start in range(0, len(idx), batch_size):
        chunk = idx[start : start + batch_size]
        beams, _ = predict(model, feats[chunk], sectors[chunk])
        hits += int(np.sum(beams == labels[chunk]))
    return hits / len(idx)


def train(dataset, config: ModelConfig, schedule: TrainSchedule, seed: int = 0):
    """Fit a FusionModel on the dataset's train split; returns (model, history).

    history is a list of per-epoch dicts with keys epoch, lr, j_pos, j_bm,
    j_adv, j_auto, val_top1.  Fully deterministic given (dataset, config,
    schedule, seed) and a fixed thread count.
    """
    model = build_model(config, seed)
    model.pos_scaler = PositionScaler.identity()
    history: list = []
    if schedule.epochs == 0:
        return model, history

    train_idx = np.asarray(dataset.split.get("train", []), dtype=np.int64)
    val_idx = np.asarray(dataset.split.get("val", []), dtype=np.int64)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise DataError("training requires nonempty train and val splits")
    feats, labels, sectors, positions = _dataset_arrays(dataset)
    if labels.max() >= config.fine_beam_count:
        raise DataError(
            f"label {labels.max()} out of range for fine_beam_count={config.fine_beam_count}"
        )

    pos_scaler = PositionScaler(
        mean=positions[train_idx].mean(axis=0),
        std=np.maximum(positions[train_idx].std(axis=0), 1e-9),
    )
    model.pos_scaler = pos_scaler
    positions_n = pos_scaler.transform(positions)

    gan = config.fusion == "gan"
    opt_main = torch.optim.AdamW(
        model.task_parameters(), lr=schedule.peak_lr, weight_decay=schedule.weight_decay
    )
    optimizers = [opt_main]
    opt_disc = None
    if gan:
        opt_disc = torch.optim.AdamW(
            model.discriminator_parameters(), lr=schedule.peak_lr, weight_decay=schedule.weight_decay
        )
        optimizers.append(opt_disc)
    plateau = torch.optim.lr_scheduler.ReduceLROnPlateau(
        opt_main,
        mode="max",
        factor=schedule.plateau_factor,
        patience=schedule.plateau_patience,
        threshold=schedule.plateau_threshold,
        threshold_mode="rel",
        cooldown=schedule.plateau_cooldown,
        min_lr=schedule.min_lr,
    )

    steps_per_epoch = max(1, (len(train_idx) + schedule.batch_size - 1) // schedule.batch_size)
    warmup_steps = schedule.warmup_epochs * steps_per_epoch
    global_step = 0
    last_good = copy.deepcopy(model.state_dict())
    best_val = -np.inf

    for epoch in range(schedule.epochs):
        order = train_idx[substream(seed, 12, epoch).permutation(len(train_idx))]
        model.train()
        sums = {"j_pos": 0.0, "j_bm": 0.0, "j_adv": 0.0, "j_auto": 0.0}
        diverged = False
        for start in range(0, len(order), schedule.batch_size):
            batch = order[start : start + schedule.batch_size]
            if warmup_steps and global_step < warmup_steps:
                _set_lr(optimizers, schedule.peak_lr * (global_step + 1) / warmup_steps)
            x = torch.from_numpy(feats[batch])
            y = torch.from_numpy(labels[batch])
            sec = torch.from_numpy(sectors[batch])
            pos = torch.from_numpy(positions_n[batch])

            j_adv = None
            if gan:
                # discriminator step on detached features
                with torch.no_grad():
                    f_beam, f_pos = model.extract(x)
                    f_enh, _ = model.fusion.enhancer(_lift(f_pos))
                    f_gen = model.fusion.generator(_lift(f_beam))
                d_loss = discriminator_loss(
                    model.fusion.discriminate(f_enh),
                    model.fusion.discriminate(f_gen),
                )
                opt_disc.zero_grad()
                d_loss.backward()
                opt_disc.step()

            output = model(x)
            if gan:
                j_adv = generator_loss(model.fusion.discriminate(output.f_gen))
            loss, breakdown = total_loss(output, y, sec, pos, config, j_adv=j_adv)
            if not torch.isfinite(loss):
                model.load_state_dict(last_good)
                diverged = True
                break
            opt_main.zero_grad()
            if opt_disc is not None:
                opt_disc.zero_grad()
            loss.backward()
            opt_main.step()
            global_step += 1
            weight = len(batch) / len(order)
            for key in sums:
                sums[key] += breakdown[key] * weight

        model.eval()
        val_top1 = _val_top1(model, feats, labels, sectors, val_idx)
        lr_now = opt_main.param_groups[0]["lr"]
        history.append(
            {
                "epoch": epoch,
                "lr": lr_now,
                **sums,
                "val_top1": val_top1,
                "diverged": diverged,
            }
        )
        if diverged:
            break
        best_val = max(best_val, val_top1)
        last_good = copy.deepcopy(model.state_dict())
        if global_step >= warmup_steps:
            plateau.step(val_top1)
            if opt_disc is not None:
                _set_lr([opt_disc], opt_main.param_groups[0]["lr"])
    return model, history


def save_history_csv(history, path) -> None:
    columns = ["epoch", "lr", "j_pos", "j_bm", "j_adv", "j_auto", "val_top1"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in history:
            writer.writerow([row[c] for c in columns])


# ---------------------------------------------------------------------------
# Checkpoints: 4-byte magic, u32 header length, header JSON, f64 LE blob.
# The blob holds parameters then buffers in named_parameters/named_buffers
# iteration order, which is fixed by module construction order.

def _state_entries(model):
    entries = [(name, p.detach()) for name, p in model.named_parameters()]
    entries += [(name, b.detach()) for name, b in model.named_buffers()]
    return entries


def save_checkpoint(model: FusionModel, path, seed=None, epoch=None, metrics=None) -> None:
    entries = _state_entries(model)
    header = {
        "format_version": 1,
        "config": asdict(model.config),
        "entries": [[name, list(t.shape)] for name, t in entries],
        "seed": seed,
        "epoch": epoch,
        "metrics": metrics or {},
        "pos_scaler": getattr(model, "pos_scaler", PositionScaler.identity()).to_json(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, tensor in entries:
            fh.write(tensor.to(torch.float64).numpy().astype("<f8").tobytes())


def load_checkpoint(path):
    """Rebuild the model from a checkpoint; returns (model, header)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _CKPT_MAGIC:
            raise DataError(f"{path}: not a beamsim checkpoint")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len))
        blob = fh.read()
    cfg_dict = dict(header["config"])
    cfg_dict["input_shape"] = tuple(cfg_dict["input_shape"])
    config = ModelConfig(**cfg_dict)
    model = FusionModel(config).double()
    offset = 0
    state = dict(_state_entries(model))
    with torch.no_grad():
        for name, shape in header["entries"]:
            count = int(np.prod(shape)) if shape else 1
            values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            offset += count * 8
            target = state[name]
            target.copy_(torch.from_numpy(values.copy().reshape(tuple(shape))).to(target.dtype))
    if offset != len(blob):
        raise DataError(f"{path}: parameter blob size mismatch")
    model.pos_scaler = PositionScaler.from_json(header["pos_scaler"])
    return model, header
