"""Least-squares GAN objectives with binary coding (1 real, 0 fake)."""

from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, absolute
from ..diffcore.tensor import _as_tensor


def d_loss(score_real, score_fake):
    """0.5*E[(D(real)-1)^2] + 0.5*E[D(fake)^2]; zero iff real scores 1, fake 0."""
    r = _as_tensor(score_real)
    f = _as_tensor(score_fake)
    return ((r - 1.0) ** 2.0).mean() * 0.5 + (f ** 2.0).mean() * 0.5


def g_loss(score_fake, enhanced, clean, lambda_l1):
    """0.5*E[(D(fake)-1)^2] + lambda * mean |enhanced - clean|."""
    f = _as_tensor(score_fake)
    e = _as_tensor(enhanced)
    c = _as_tensor(clean)
    if e.shape != c.shape:
        raise ValueError(f"enhanced shape {e.shape} does not match clean {c.shape}")
    adv = ((f - 1.0) ** 2.0).mean() * 0.5
    l1 = absolute(e - c).mean()
    return adv + l1 * float(lambda_l1)


def g_loss_parts(score_fake, enhanced, clean, lambda_l1):
    """(total, adversarial, l1) for logging."""
    f = _as_tensor(score_fake)
    e = _as_tensor(enhanced)
    c = _as_tensor(clean)
    if e.shape != c.shape:
        raise ValueError(f"enhanced shape {e.shape} does not match clean {c.shape}")
    adv = ((f - 1.0) ** 2.0).mean() * 0.5
    l1 = absolute(e - c).mean()
    return adv + l1 * float(lambda_l1), adv, l1
