"""Reverse-mode gradients with a central finite-difference oracle.

``backward_with_diagnostics`` runs autograd and reports parameters that
received no gradient (disconnected from the loss) instead of failing.
``finite_difference_check`` probes random parameter components and compares
the analytic gradient against (f(w+h) - f(w-h)) / 2h; the oracle never
touches autograd.
"""

from __future__ import annotations

import numpy as np
import torch


def backward_with_diagnostics(loss, named_params):
    """Gradients for every parameter; disconnected ones come back as zeros.

    Returns (grads: name -> tensor, disconnected: list of names).
    """
    named_params = list(named_params)
    grads = torch.autograd.grad(
        loss, [p for _, p in named_params], allow_unused=True, retain_graph=False
    )
    out, disconnected = {}, []
    for (name, param), grad in zip(named_params, grads):
        if grad is None:
            out[name] = torch.zeros_like(param)
            disconnected.append(name)
        else:
            out[name] = grad
    return out, disconnected


def finite_difference_check(
    loss_fn,
    named_params,
    probes: int = 20,
    step: float = 1e-5,
    rel_tol: float = 1e-4,
    seed: int = 0,
):
    """Compare autograd against central differences on random components.

    loss_fn must be a zero-argument callable returning a scalar tensor and
    re-running the whole forward pass (so perturbed parameters take
    effect).  Returns (passed, records) where each record is a dict with
    the probed component and both gradient values.
    """
    named_params = [(n, p) for n, p in named_params if p.requires_grad]
    loss = loss_fn()
    grads, _ = backward_with_diagnostics(loss, named_params)
    rng = np.random.default_rng(seed)
    flat_index = [(n, p, i) for n, p in named_params for i in range(p.numel())]
    if not flat_index:
        return True, []
    picks = rng.choice(len(flat_index), size=min(probes, len(flat_index)), replace=False)
    records = []
    passed = True
    for pick in picks:
        name, param, i = flat_index[int(pick)]
        with torch.no_grad():
            original = param.view(-1)[i].item()
            param.view(-1)[i] = original + step
            f_plus = float(loss_fn())
            param.view(-1)[i] = original - step
            f_minus = float(loss_fn())
            param.view(-1)[i] = original
        numeric = (f_plus - f_minus) / (2.0 * step)
        analytic = float(grads[name].view(-1)[i])
        denom = max(abs(numeric), abs(analytic), 1e-8)
        rel_err = abs(numeric - analytic) / denom
        ok = rel_err < rel_tol
        passed = passed and ok
        records.append(
            {
                "param": name,
                "component": int(i),
                "analytic": analytic,
                "numeric": numeric,
                "rel_err": rel_err,
                "ok": ok,
            }
        )
    return passed, records
