"""Training objective: position MSE, per-sector beam cross-entropy, fusion terms.

J_total = lambda_pos * J_pos + lambda_bm * J_bm + lambda_adv * J_adv
          + lambda_auto * J_auto

J_bm is computed only on the head matching each sample's sector; the other
heads receive no task gradient from that sample.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .nets import ModelConfig, ModelOutput


def position_loss(position_hat, positions):
    """Mean squared coordinate error, summed over the 3 axes."""
    return ((position_hat - positions) ** 2).sum(dim=-1).mean()


def beam_loss(sector_logits, labels, sectors):
    """Cross-entropy of each sample's own sector head against its label."""
    n = labels.shape[0]
    if labels.numel() and (labels.min() < 0 or labels.max() >= sector_logits.shape[-1]):
        raise ValueError("beam label out of range for the configured head size")
    per_sample = sector_logits[sectors - 1, torch.arange(n)]
    return F.cross_entropy(per_sample, labels)


def total_loss(
    output: ModelOutput,
    labels,
    sectors,
    positions,
    config: ModelConfig,
    j_adv=None,
):
    """Weighted sum plus a per-term breakdown (floats, for history rows)."""
    j_pos = position_loss(output.position, positions)
    j_bm = beam_loss(output.sector_logits, labels, sectors)
    j_auto = output.j_auto
    if j_adv is None:
        j_adv = j_pos.new_zeros(())
    total = (
        config.lambda_pos * j_pos
        + config.lambda_bm * j_bm
        + config.lambda_adv * j_adv
        + config.lambda_auto * j_auto
    )
    breakdown = {
        "j_pos": float(j_pos.detach()),
        "j_bm": float(j_bm.detach()),
        "j_adv": float(j_adv.detach()),
        "j_auto": float(j_auto.detach()),
    }
    return total, breakdown
