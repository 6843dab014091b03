"""Shared test oracles: central finite differences against autograd."""

import numpy as np
import torch

from lingmtl.encoder import named_gradients


def finite_difference_check(
    module,
    loss_fn,
    eps=1e-4,
    rel_tol=1e-3,
    samples_per_param=6,
    seed=0,
):
    """Compare autograd gradients to central differences.

    Samples a handful of elements from every parameter tensor, perturbs
    each by +-eps with a fresh forward pass, and returns a list of
    (name, index, autograd, finite_diff, rel_err) failures. The module must
    be float64 for the tolerances to be meaningful.
    """
    rng = np.random.default_rng(seed)
    grads = named_gradients(loss_fn(), module)
    failures = []
    with torch.no_grad():
        flat_params = {n: p.view(-1) for n, p in module.named_parameters()}
    for name in sorted(flat_params):
        flat = flat_params[name]
        gflat = grads[name].reshape(-1)
        count = min(samples_per_param, flat.numel())
        picks = rng.choice(flat.numel(), size=count, replace=False)
        for idx in picks:
            idx = int(idx)
            with torch.no_grad():
                original = flat[idx].item()
                flat[idx] = original + eps
            plus = float(loss_fn().detach())
            with torch.no_grad():
                flat[idx] = original - eps
            minus = float(loss_fn().detach())
            with torch.no_grad():
                flat[idx] = original
            fd = (plus - minus) / (2 * eps)
            ad = float(gflat[idx])
            rel = abs(ad - fd) / max(abs(ad), abs(fd), 1e-8)
            if rel > rel_tol:
                failures.append((name, idx, ad, fd, rel))
    return failures
