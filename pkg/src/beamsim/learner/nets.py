"""Dual-branch fusion networks: branch extractors, AutoFusion, GanFusion, heads.

The model consumes the 64 x 64 upsampled RSRP feature map twice, through a
beam branch and a position branch.  Branch features (length F each) are
combined by the configured fusion module into a 2F task feature that feeds
three per-sector beam classification heads and one 3-D position head.
Position coordinates supervise training only; inference consumes RSRP
features and the serving-sector id alone.

GanFusion note: the enhancer and the generator each consume a single
branch feature lifted to the concatenated length 2F by self-concatenation,
which keeps the published layer widths (2F -> 4F -> 4F -> 2F generator,
2F -> 2F -> 2F -> 1 discriminator) intact for one-branch inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, NumericError
from ..rng import derive_seed
from .widths import regnet_widths

_LOG_EPS = 1e-12

_BACKBONES = ("mlp", "conv-lite")
_FUSIONS = ("auto", "gan", "concat")
_DISC_NORMS = ("batch", "none")


@dataclass(frozen=True)
class ModelConfig:
    backbone: str = "mlp"
    feature_dim: int = 64
    fusion: str = "auto"
    fine_beam_count: int = 64
    lambda_pos: float = 0.01
    lambda_bm: float = 0.99
    lambda_adv: float = 0.1
    lambda_auto: float = 0.1
    regnet_w_a: float = 31.41
    regnet_w_0: float = 96.0
    regnet_w_m: float = 2.24
    regnet_depth: int = 22
    disc_norm: str = "batch"
    input_shape: tuple = (64, 64)

    def __post_init__(self):
        if self.backbone not in _BACKBONES:
            raise ConfigError(f"backbone must be one of {_BACKBONES}, got {self.backbone!r}")
        if self.fusion not in _FUSIONS:
            raise ConfigError(f"fusion must be one of {_FUSIONS}, got {self.fusion!r}")
        if self.disc_norm not in _DISC_NORMS:
            raise ConfigError(f"disc_norm must be one of {_DISC_NORMS}, got {self.disc_norm!r}")
        if self.feature_dim < 1 or self.fine_beam_count < 1:
            raise ConfigError("feature_dim and fine_beam_count must be >= 1")
        for name in ("lambda_pos", "lambda_bm", "lambda_adv", "lambda_auto"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        # convention: the two task weights share a unit budget
        if self.lambda_pos + self.lambda_bm > 1.0 + 1e-9:
            raise ConfigError("lambda_pos + lambda_bm must not exceed 1")


@dataclass
class ModelOutput:
    fused: torch.Tensor            # (B, 2F)
    sector_logits: torch.Tensor    # (3, B, J)
    position: torch.Tensor         # (B, 3)
    j_auto: torch.Tensor           # scalar
    f_gen: torch.Tensor | None = None
    f_enh: torch.Tensor | None = None


class MlpBranch(nn.Module):
    def __init__(self, input_shape, feature_dim):
        super().__init__()
        in_dim = int(np.prod(input_shape))
        self.net = nn.Sequential(
            nn.Flatten(),
            nn.Linear(in_dim, 1024),
            nn.ReLU(),
            nn.Linear(1024, 256),
            nn.ReLU(),
            nn.Linear(256, feature_dim),
        )

    def forward(self, x):
        return self.net(x)


class Bottleneck(nn.Module):
    """1x1 reduce, 3x3 transform, 1x1 expand, residual add."""

    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        mid = max(out_ch // 4, 1)
        self.body = nn.Sequential(
            nn.Conv2d(in_ch, mid, 1, bias=False),
            nn.BatchNorm2d(mid),
            nn.ReLU(),
            nn.Conv2d(mid, mid, 3, stride=stride, padding=1, bias=False),
            nn.BatchNorm2d(mid),
            nn.ReLU(),
            nn.Conv2d(mid, out_ch, 1, bias=False),
            nn.BatchNorm2d(out_ch),
        )
        if stride != 1 or in_ch != out_ch:
            self.skip = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.skip = nn.Identity()
        self.act = nn.ReLU()

    def forward(self, x):
        return self.act(self.body(x) + self.skip(x))


class ConvLiteBranch(nn.Module):
    """BasicBlock stem plus two bottleneck blocks on a truncated width schedule."""

    def __init__(self, input_shape, feature_dim, regnet_params):
        super().__init__()
        schedule = regnet_widths(*regnet_params)
        w1 = schedule[0][0]
        w2 = schedule[1][0] if len(schedule) > 1 else w1
        self.stem = nn.Sequential(
            nn.Conv2d(1, w1, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(w1),
            nn.ReLU(),
        )
        self.blocks = nn.Sequential(
            Bottleneck(w1, w1, stride=2),
            Bottleneck(w1, w2, stride=2),
        )
        self.head = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(w2, feature_dim))

    def forward(self, x):
        if x.dim() == 3:
            x = x.unsqueeze(1)
        return self.head(self.blocks(self.stem(x)))


class AutoFusion(nn.Module):
    """Autoencoder-style fusion over an already-concatenated feature vector.

    ``basic`` reshapes the concatenated input into the fused task feature;
    ``gen`` reconstructs the input from it, and the squared reconstruction
    error is returned as the auxiliary loss.
    """

    def __init__(self, cat_dim):
        super().__init__()
        latent = cat_dim // 2
        self.basic = nn.Sequential(
            nn.Linear(cat_dim, latent),
            nn.ReLU(),
            nn.Linear(latent, cat_dim),
            nn.ReLU(),
        )
        self.gen = nn.Sequential(
            nn.Linear(cat_dim, latent),
            nn.ReLU(),
            nn.Linear(latent, cat_dim),
        )

    def forward(self, f_cat):
        fused = self.basic(f_cat)
        f_gen = self.gen(fused)
        return fused, reconstruction_loss(f_gen, f_cat)


class GanFusion(nn.Module):
    """Adversarial fusion: generator maps the beam feature toward the
    AutoFusion-enhanced position feature; a discriminator tells them apart."""

    def __init__(self, cat_dim, disc_norm="batch"):
        super().__init__()
        hidden = 2 * cat_dim
        self.enhancer = AutoFusion(cat_dim)
        self.generator = nn.Sequential(
            nn.Linear(cat_dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, hidden),
            nn.ReLU(),
            nn.Linear(hidden, cat_dim),
        )
        layers = [nn.Linear(cat_dim, cat_dim), nn.LeakyReLU()]
        if disc_norm == "batch":
            layers.append(nn.BatchNorm1d(cat_dim))
        layers += [nn.Linear(cat_dim, cat_dim), nn.LeakyReLU()]
        if disc_norm == "batch":
            layers.append(nn.BatchNorm1d(cat_dim))
        layers += [nn.Linear(cat_dim, 1), nn.Sigmoid()]
        self.discriminator = nn.Sequential(*layers)

    def discriminate(self, x):
        return self.discriminator(x).squeeze(-1)


def _lift(f):
    """Self-concatenate one branch feature to the concatenated length 2F."""
    return torch.cat([f, f], dim=-1)


def _safe_log(p):
    return torch.log(torch.clamp(p, min=_LOG_EPS))


def reconstruction_loss(f_gen, f_cat):
    """Squared reconstruction error per sample, mean over the batch."""
    return ((f_gen - f_cat) ** 2).sum(dim=-1).mean()


def discriminator_loss(d_real, d_fake):
    """-[log D(real) + log(1 - D(fake))], batch means; 2 ln 2 at D = 0.5."""
    return -(_safe_log(d_real).mean() + _safe_log(1.0 - d_fake).mean())


def generator_loss(d_fake):
    """-log D(fake), batch mean."""
    return -_safe_log(d_fake).mean()


def autofusion(module: AutoFusion, f_beam, f_pos):
    """Fuse two branch features; returns (fused 2F vector, reconstruction loss)."""
    return module(torch.cat([f_beam, f_pos], dim=-1))


def ganfusion_step(module: GanFusion, f_beam, f_pos, mode: str):
    """One adversarial fusion pass.

    ``discriminator`` mode scores detached features and returns J_D;
    ``generator`` mode keeps the generator in the graph and returns J_G
    plus the enhancer's reconstruction loss.  The task feature is the
    generated one in both modes.
    """
    f_enh, j_auto = module.enhancer(_lift(f_pos))
    f_gen = module.generator(_lift(f_beam))
    if mode == "discriminator":
        d_real = module.discriminate(f_enh.detach())
        d_fake = module.discriminate(f_gen.detach())
        losses = {"j_d": discriminator_loss(d_real, d_fake)}
    elif mode == "generator":
        d_fake = module.discriminate(f_gen)
        losses = {"j_adv": generator_loss(d_fake), "j_auto": j_auto}
    else:
        raise ValueError(f"mode must be 'discriminator' or 'generator', got {mode!r}")
    for name, value in losses.items():
        if not torch.isfinite(value):
            raise NumericError(f"{name} is not finite (D saturated or inputs degenerate)")
    return f_gen, losses


class FusionModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        cat_dim = 2 * config.feature_dim
        self.beam_branch = self._make_branch(config)
        self.pos_branch = self._make_branch(config)
        if config.fusion == "auto":
            self.fusion = AutoFusion(cat_dim)
        elif config.fusion == "gan":
            self.fusion = GanFusion(cat_dim, disc_norm=config.disc_norm)
        else:
            self.fusion = None
        self.heads = nn.ModuleList(nn.Linear(cat_dim, config.fine_beam_count) for _ in range(3))
        self.position_head = nn.Linear(cat_dim, 3)

    @staticmethod
    def _make_branch(config):
        if config.backbone == "mlp":
            return MlpBranch(config.input_shape, config.feature_dim)
        params = (config.regnet_w_a, config.regnet_w_0, config.regnet_w_m, config.regnet_depth)
        return ConvLiteBranch(config.input_shape, config.feature_dim, params)

    def extract(self, x):
        return self.beam_branch(x), self.pos_branch(x)

    def discriminator_parameters(self):
        if not isinstance(self.fusion, GanFusion):
            return []
        return list(self.fusion.discriminator.parameters())

    def task_parameters(self):
        disc = {id(p) for p in self.discriminator_parameters()}
        return [p for p in self.parameters() if id(p) not in disc]

    def forward(self, x) -> ModelOutput:
        f_beam, f_pos = self.extract(x)
        f_gen = f_enh = None
        if self.config.fusion == "auto":
            fused, j_auto = autofusion(self.fusion, f_beam, f_pos)
        elif self.config.fusion == "gan":
            f_enh, j_auto = self.fusion.enhancer(_lift(f_pos))
            f_gen = self.fusion.generator(_lift(f_beam))
            fused = f_gen
        else:
            fused = torch.cat([f_beam, f_pos], dim=-1)
            j_auto = fused.new_zeros(())
        logits = torch.stack([head(fused) for head in self.heads])
        position = self.position_head(fused)
        return ModelOutput(
            fused=fused,
            sector_logits=logits,
            position=position,
            j_auto=j_auto,
            f_gen=f_gen,
            f_enh=f_enh,
        )


def build_model(config: ModelConfig, seed: int = 0) -> FusionModel:
    """Seeded float64 model; identical (config, seed) gives identical weights."""
    torch.manual_seed(derive_seed(seed, 0x6D6F64))  # namespace the init stream
    return FusionModel(config).double()


def predict(model: FusionModel, features, sectors):
    """Beam index per sample from the head matching its sector, plus position.

    ``sectors`` holds serving-sector ids in {1, 2, 3}; no position input is
    consumed.
    """
    model.eval()
    with torch.no_grad():
        x = torch.as_tensor(np.asarray(features), dtype=torch.float64)
        if x.dim() == 2:
            x = x.unsqueeze(0)
        out = model(x)
        sec = torch.as_tensor(np.asarray(sectors, dtype=np.int64) - 1)
        per_sample = out.sector_logits[sec, torch.arange(x.shape[0])]
        beams = per_sample.argmax(dim=-1).numpy()
        return beams, out.position.numpy()
