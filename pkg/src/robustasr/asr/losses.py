"""ASR losses: cross entropy, CTC forward algorithm, and their weighted sum."""

from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, gather_rows, log_softmax_lastdim
from ..diffcore.tensor import _from_op


class CtcAlignmentError(ValueError):
    """The reference cannot be aligned within the available frames."""


def ce_loss(logits, targets, pad_id=None, label_smoothing=0.0):
    """Teacher-forced negative log-likelihood: -sum_n log P(y*_n | ...).

    logits: (T, V) Tensor of decoder outputs aligned to targets (T,).
    Pad positions are excluded from the sum.
    """
    targets = np.asarray(targets, dtype=int)
    if logits.shape[0] != len(targets):
        raise ValueError(f"{logits.shape[0]} decoder outputs vs {len(targets)} targets")
    logp = log_softmax_lastdim(logits)
    mask = np.ones(len(targets)) if pad_id is None else (targets != pad_id).astype(float)
    picked = gather_rows(logp, targets)
    nll = -(picked * mask).sum()
    if label_smoothing > 0.0:
        uniform = -(logp.mean(axis=-1) * mask).sum()
        nll = nll * (1.0 - label_smoothing) + uniform * label_smoothing
    return nll


def _ctc_extended(ref, blank):
    ext = [blank]
    for r in ref:
        ext.append(r)
        ext.append(blank)
    return np.asarray(ext, dtype=int)


def ctc_min_frames(ref):
    """Shortest frame count that can realize the reference."""
    repeats = sum(1 for a, b in zip(ref, ref[1:]) if a == b)
    return len(ref) + repeats


def ctc_loss(log_probs, ref, blank=0):
    """-log P(ref | frames) by the forward dynamic program in log space.

    log_probs: (T, V) Tensor of per-frame log posteriors; ref: label ids
    without blanks.  The gradient w.r.t. log_probs is the standard
    forward-backward occupancy expression, verified against enumeration
    and finite differences in the tests.
    """
    ref = [int(r) for r in ref]
    T, V = log_probs.shape
    if any(not 0 <= r < V for r in ref):
        raise ValueError("reference contains out-of-vocabulary ids")
    if blank in ref:
        raise ValueError("reference must not contain the blank id")
    if T < ctc_min_frames(ref):
        raise CtcAlignmentError(
            f"reference of length {len(ref)} (min frames {ctc_min_frames(ref)}) cannot align in T={T} frames"
        )
    y = log_probs.data
    ext = _ctc_extended(ref, blank)
    S = len(ext)
    NEG = -np.inf

    alpha = np.full((T, S), NEG)
    alpha[0, 0] = y[0, ext[0]]
    if S > 1:
        alpha[0, 1] = y[0, ext[1]]
    skip_ok = np.zeros(S, dtype=bool)
    skip_ok[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    for t in range(1, T):
        stay = alpha[t - 1]
        step = np.full(S, NEG)
        step[1:] = alpha[t - 1, :-1]
        skip = np.full(S, NEG)
        skip[2:] = alpha[t - 1, :-2]
        skip[~skip_ok] = NEG
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), skip) + y[t, ext]

    log_z = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2]) if S > 1 else alpha[T - 1, S - 1]
    if not np.isfinite(log_z):
        raise CtcAlignmentError("no feasible alignment: CTC loss is infinite")

    def _grad():
        beta = np.full((T, S), NEG)
        beta[T - 1, S - 1] = y[T - 1, ext[S - 1]]
        if S > 1:
            beta[T - 1, S - 2] = y[T - 1, ext[S - 2]]
        for t in range(T - 2, -1, -1):
            stay = beta[t + 1]
            step = np.full(S, NEG)
            step[:-1] = beta[t + 1, 1:]
            skip = np.full(S, NEG)
            # the backward skip s -> s+2 is legal when state s+2 may be skipped into
            can = np.zeros(S, dtype=bool)
            can[:-2] = skip_ok[2:]
            skip[can] = beta[t + 1, 2:][skip_ok[2:]]
            beta[t] = np.logaddexp(np.logaddexp(stay, step), skip) + y[t, ext]

        # paths through state s at time t consume y[t, ext[s]] exactly once;
        # alpha and beta both include it, so subtract it back out
        gamma = alpha + beta - y[:, ext]
        grad = np.zeros_like(y)
        for k in set(ext.tolist()):
            cols = np.where(ext == k)[0]
            with np.errstate(divide="ignore"):
                occ = np.logaddexp.reduce(gamma[:, cols], axis=1)
            grad[:, k] = -np.exp(occ - log_z)
        return grad

    def bwd(g):
        if log_probs.requires_grad:
            log_probs.accumulate_grad(g * _grad())

    return _from_op(np.array(-log_z), (log_probs,), bwd)


def joint_asr_loss(ce, ctc, w):
    """(1 - w) * ce + w * ctc with w in [0, 1]."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"ctc weight must lie in [0, 1], got {w}")
    if isinstance(ce, Tensor) or isinstance(ctc, Tensor):
        return ce * (1.0 - w) + ctc * w
    return (1.0 - w) * ce + w * ctc
