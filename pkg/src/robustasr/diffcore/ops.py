"""Neural-net primitives on Tensors: convolutions, norms, activations, pooling.

Layout conventions: sequence tensors are (batch, length, channels); dense
inputs keep the feature axis last.  All kernels are written as one or two
BLAS calls plus vectorized scatter/gather so the engine stays usable at
desk scale without native extensions.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    DTYPE,
    DimensionError,
    Tensor,
    _as_tensor,
    _from_op,
    mul,
)


class ConfigurationError(RuntimeError):
    """A layer was used before required setup (e.g. no reference batch)."""


# -- parameter initialization ---------------------------------------------


def fan_in_uniform(rng, shape, fan_in):
    """Uniform init scaled by 1/sqrt(fan_in); zeros would kill gradients."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros_param(shape):
    return Tensor(np.zeros(shape, dtype=DTYPE), requires_grad=True)


def const_param(value, shape):
    return Tensor(np.full(shape, value, dtype=DTYPE), requires_grad=True)


# -- convolutions ----------------------------------------------------------


def _window_index(length, width, stride):
    n_out = (length - width) // stride + 1
    starts = np.arange(n_out) * stride
    return starts[:, None] + np.arange(width)[None, :], n_out


def conv1d(x, w, b=None, stride=1, pad=0):
    """1-d convolution.  x: (B, L, Cin), w: (W, Cin, Cout), b: (Cout,).

    len_out = floor((L + 2*pad - W) / stride) + 1.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 3 or w.ndim != 3:
        raise DimensionError(f"conv1d expects x (B,L,Cin) and w (W,Cin,Cout), got {x.shape} and {w.shape}")
    B, L, cin = x.shape
    W, wcin, cout = w.shape
    if cin != wcin:
        raise DimensionError(f"conv1d channel axis mismatch: x has Cin={cin}, w has Cin={wcin}")
    if stride < 1 or pad < 0:
        raise ValueError(f"conv1d needs stride >= 1 and pad >= 0, got {stride}, {pad}")
    if L + 2 * pad < W:
        raise DimensionError(f"conv1d input too short: L={L} with pad={pad} against width={W}")

    xp = np.pad(x.data, ((0, 0), (pad, pad), (0, 0))) if pad else x.data
    idx, n_out = _window_index(L + 2 * pad, W, stride)
    cols = xp[:, idx, :]                                # (B, n_out, W, Cin)
    cols2 = cols.reshape(B * n_out, W * cin)
    w2 = w.data.reshape(W * cin, cout)
    out = cols2 @ w2
    if b is not None:
        b = _as_tensor(b)
        out = out + b.data[None, :]
    out = out.reshape(B, n_out, cout)

    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        g2 = g.reshape(B * n_out, cout)
        if w.requires_grad:
            w.accumulate_grad((cols2.T @ g2).reshape(W, cin, cout))
        if b is not None and b.requires_grad:
            b.accumulate_grad(g2.sum(axis=0))
        if x.requires_grad:
            dcols = (g2 @ w2.T).reshape(B, n_out, W, cin)
            dxp = np.zeros((B, L + 2 * pad, cin), dtype=DTYPE)
            for k in range(W):
                dxp[:, k : k + stride * n_out : stride, :] += dcols[:, :, k, :]
            x.accumulate_grad(dxp[:, pad : pad + L, :] if pad else dxp)

    return _from_op(out, parents, bwd)


def conv1d_transposed(x, w, b=None, stride=1, pad=0, out_pad=0):
    """Transposed 1-d convolution: the exact adjoint of conv1d's linear map.

    The kernel keeps conv1d's orientation, w: (W, Cout_here, Cin_here), so
    conv1d_transposed(y, w) with the same w maps conv1d's output space back
    to its input space.  x: (B, L, C) with C == w.shape[2].
    len_out = (L-1)*stride - 2*pad + W + out_pad, with 0 <= out_pad < stride
    resolving the length ambiguity of strided convolution (needed for exact
    length doubling with even sizes).
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 3 or w.ndim != 3:
        raise DimensionError(f"conv1d_transposed expects x (B,L,C) and w (W,Cout,C), got {x.shape} and {w.shape}")
    B, L, cin = x.shape
    W, cout, wcin = w.shape
    if cin != wcin:
        raise DimensionError(
            f"conv1d_transposed channel axis mismatch: x has C={cin}, w expects C={wcin} on its last axis"
        )
    if stride < 1 or not 0 <= out_pad < stride:
        raise ValueError(f"conv1d_transposed needs stride >= 1 and 0 <= out_pad < stride, got {stride}, {out_pad}")
    full = (L - 1) * stride + W
    n_out = full - 2 * pad + out_pad
    if n_out < 1:
        raise DimensionError(f"conv1d_transposed output collapses: len_out={n_out}")

    w2 = w.data.transpose(2, 0, 1).reshape(cin, W * cout)      # map C -> (W, Cout)
    z = (x.data.reshape(B * L, cin) @ w2).reshape(B, L, W, cout)
    y_full = np.zeros((B, full + out_pad, cout), dtype=DTYPE)
    for k in range(W):
        y_full[:, k : k + stride * L : stride, :] += z[:, :, k, :]
    out = y_full[:, pad : pad + n_out, :]
    if b is not None:
        b = _as_tensor(b)
        out = out + b.data[None, None, :]

    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 1)))
        g_full = np.zeros((B, full + out_pad, cout), dtype=DTYPE)
        g_full[:, pad : pad + n_out, :] = g
        dz = np.empty((B, L, W, cout), dtype=DTYPE)
        for k in range(W):
            dz[:, :, k, :] = g_full[:, k : k + stride * L : stride, :]
        dz2 = dz.reshape(B * L, W * cout)
        if x.requires_grad:
            x.accumulate_grad((dz2 @ w2.T).reshape(B, L, cin))
        if w.requires_grad:
            dw = x.data.reshape(B * L, cin).T @ dz2            # (C, W*Cout)
            w.accumulate_grad(dw.reshape(cin, W, cout).transpose(1, 2, 0))

    return _from_op(out, parents, bwd)


def dense(x, w, b=None):
    """y = x @ w + b over the trailing axis.  x: (..., d_in), w: (d_in, d_out)."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"dense trailing axis mismatch: x {x.shape} vs w {w.shape}")
    lead = x.shape[:-1]
    d_in, d_out = w.shape
    x2 = x.data.reshape(-1, d_in)
    out = x2 @ w.data
    if b is not None:
        b = _as_tensor(b)
        if b.shape != (d_out,):
            raise DimensionError(f"dense bias shape {b.shape} does not match d_out={d_out}")
        out = out + b.data[None, :]
    out = out.reshape(*lead, d_out)

    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        g2 = g.reshape(-1, d_out)
        if x.requires_grad:
            x.accumulate_grad((g2 @ w.data.T).reshape(x.shape))
        if w.requires_grad:
            w.accumulate_grad(x2.T @ g2)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g2.sum(axis=0))

    return _from_op(out, parents, bwd)


# -- softmax family --------------------------------------------------------


def softmax_lastdim(x):
    """Stable softmax over the last axis; each slice sums to 1."""
    x = _as_tensor(x)
    if np.isnan(x.data).any():
        raise ValueError("softmax_lastdim received NaN input")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        if x.requires_grad:
            dot = (g * out).sum(axis=-1, keepdims=True)
            x.accumulate_grad(out * (g - dot))

    return _from_op(out, (x,), bwd)


def log_softmax_lastdim(x):
    x = _as_tensor(x)
    if np.isnan(x.data).any():
        raise ValueError("log_softmax_lastdim received NaN input")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    sm = np.exp(out)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g - sm * g.sum(axis=-1, keepdims=True))

    return _from_op(out, (x,), bwd)


# -- normalization ---------------------------------------------------------


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize each trailing slice to zero mean / unit variance, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm affine params must be ({d},), got {gamma.shape} and {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def bwd(g):
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            beta.accumulate_grad(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gh = g * gamma.data
            m1 = gh.mean(axis=-1, keepdims=True)
            m2 = (gh * xhat).mean(axis=-1, keepdims=True)
            x.accumulate_grad(inv * (gh - m1 - xhat * m2))

    return _from_op(out, (x, gamma, beta), bwd)


class BatchNormState:
    """Running statistics for train/eval batch norm over (B, L) per channel."""

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.running_mean = np.zeros(channels, dtype=DTYPE)
        self.running_var = np.ones(channels, dtype=DTYPE)
        self.momentum = momentum
        self.eps = eps


def batch_norm(x, gamma, beta, mode, state=None, ref=None, eps=1e-5):
    """Batch normalization over all axes but the channel (last) axis.

    mode 'train': current-batch statistics, running stats updated in `state`.
    mode 'eval' : running statistics from `state`.
    mode 'virtual': statistics of the registered reference activations `ref`
    merged with the current example, the example contributing with weight
    1/(n_ref + 1).  `ref` is a Tensor of activations shaped like x.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if mode == "train":
        if state is None:
            raise ConfigurationError("train-mode batch_norm needs a BatchNormState")
        axes = tuple(range(x.ndim - 1))
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * x.data.mean(axis=axes)
        state.running_var = (1 - m) * state.running_var + m * x.data.var(axis=axes)
        # normalization itself stays on-graph so gradients include the
        # batch-statistic terms exactly
        mu_t = x.mean(axis=axes, keepdims=True)
        xc = x - mu_t
        var_t = (xc * xc).mean(axis=axes, keepdims=True)
        return xc * ((var_t + eps) ** -0.5) * gamma + beta
    if mode == "eval":
        if state is None:
            raise ConfigurationError("eval-mode batch_norm needs a BatchNormState")
        inv = 1.0 / np.sqrt(state.running_var + eps)
        out = (x - Tensor(state.running_mean)) * Tensor(inv)
        return out * gamma + beta
    if mode == "virtual":
        if ref is None:
            raise ConfigurationError("virtual batch_norm used without a registered reference batch")
        return batch_norm_virtual(x, gamma, beta, ref, eps)
    raise ValueError(f"unknown batch_norm mode: {mode!r}")


def batch_norm_virtual(x, gamma, beta, ref, eps=1e-5):
    """Per-example merge of reference-batch and own statistics (fully on-graph)."""
    x, ref = _as_tensor(x), _as_tensor(ref)
    n_ref = ref.shape[0]
    ref_mu = ref.mean(axis=(0, 1), keepdims=True)           # (1, 1, C)
    ref_m2 = (ref * ref).mean(axis=(0, 1), keepdims=True)
    x_mu = x.mean(axis=1, keepdims=True)                     # (B, 1, C)
    x_m2 = (x * x).mean(axis=1, keepdims=True)
    wr = n_ref / (n_ref + 1.0)
    wx = 1.0 / (n_ref + 1.0)
    mu = ref_mu * wr + x_mu * wx
    m2 = ref_m2 * wr + x_m2 * wx
    var = m2 - mu * mu
    inv = (var + eps) ** -0.5
    return (x - mu) * inv * gamma + beta


# -- activations -----------------------------------------------------------


def relu(x):
    x = _as_tensor(x)
    out = np.maximum(x.data, 0.0)
    mask = (x.data > 0).astype(DTYPE)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return _from_op(out, (x,), bwd)


def leaky_relu(x, alpha=0.3):
    x = _as_tensor(x)
    slope = np.where(x.data > 0, 1.0, alpha)
    out = x.data * slope

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * slope)

    return _from_op(out, (x,), bwd)


def prelu(x, a):
    """PReLU with a learnable per-channel slope a (broadcast over last axis)."""
    x, a = _as_tensor(x), _as_tensor(a)
    neg = np.minimum(x.data, 0.0)
    pos = np.maximum(x.data, 0.0)
    out = pos + a.data * neg

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * np.where(x.data > 0, 1.0, a.data))
        if a.requires_grad:
            ga = g * neg
            a.accumulate_grad(ga.reshape(-1, a.data.shape[-1]).sum(axis=0).reshape(a.data.shape))

    return _from_op(out, (x, a), bwd)


def sigmoid(x):
    x = _as_tensor(x)
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * out * (1.0 - out))

    return _from_op(out, (x,), bwd)


def swish(x):
    return mul(x, sigmoid(x))


def glu(x, axis=-1):
    """Gated linear unit: split [A | B] along `axis`, return A * sigmoid(B)."""
    x = _as_tensor(x)
    n = x.shape[axis]
    if n % 2 != 0:
        raise DimensionError(f"glu needs an even extent on axis {axis}, got {n}")
    half = n // 2
    sl_a = [slice(None)] * x.ndim
    sl_b = [slice(None)] * x.ndim
    sl_a[axis] = slice(0, half)
    sl_b[axis] = slice(half, n)
    a = x[tuple(sl_a)]
    b = x[tuple(sl_b)]
    return mul(a, sigmoid(b))


_ACTIVATIONS = {
    "relu": lambda x, **kw: relu(x),
    "prelu": lambda x, a, **kw: prelu(x, a),
    "leaky_relu": lambda x, alpha=0.3, **kw: leaky_relu(x, alpha),
    "sigmoid": lambda x, **kw: sigmoid(x),
    "glu": lambda x, axis=-1, **kw: glu(x, axis),
    "swish": lambda x, **kw: swish(x),
}


def activation(kind, x, **kwargs):
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind: {kind!r}") from None
    return fn(x, **kwargs)


# -- pooling ----------------------------------------------------------------


def max_pool1d(x, width, stride=None):
    """Windowed max over the length axis; gradient goes to the first argmax."""
    x = _as_tensor(x)
    if stride is None:
        stride = width
    if x.ndim != 3:
        raise DimensionError(f"max_pool1d expects (B, L, C), got {x.shape}")
    B, L, C = x.shape
    if width > L:
        raise DimensionError(f"max_pool1d width {width} exceeds length {L}")
    idx, n_out = _window_index(L, width, stride)
    windows = x.data[:, idx, :]                       # (B, n_out, width, C)
    arg = windows.argmax(axis=2)                      # first max on ties
    out = np.take_along_axis(windows, arg[:, :, None, :], axis=2)[:, :, 0, :]
    src = idx[np.arange(n_out)[None, :, None], arg]   # (B, n_out, C) source positions

    def bwd(g):
        if x.requires_grad:
            z = np.zeros_like(x.data)
            bi = np.arange(B)[:, None, None]
            ci = np.arange(C)[None, None, :]
            np.add.at(z, (bi, src, ci), g)
            x.accumulate_grad(z)

    return _from_op(out, (x,), bwd)


# -- misc -------------------------------------------------------------------


def dropout(x, p, rng, train):
    """Inverted dropout; identity when not training or p == 0."""
    if not train or p <= 0.0:
        return _as_tensor(x)
    x = _as_tensor(x)
    keep = (rng.random(x.shape) >= p).astype(DTYPE) / (1.0 - p)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * keep)

    return _from_op(x.data * keep, (x,), bwd)


def iir_scan(arr, c):
    """y[n] = arr[n] + c * y[n-1] along the last axis, by operator doubling."""
    y = np.array(arr, dtype=DTYPE, copy=True)
    n = y.shape[-1]
    m = c
    step = 1
    while step < n:
        y[..., step:] = y[..., step:] + m * y[..., :-step]
        m = m * m
        step *= 2
    return y


def iir_first_order(x, c):
    """Differentiable first-order IIR y[n] = x[n] + c*y[n-1] over the last axis.

    The adjoint is the same recursion run in reverse time.
    """
    x = _as_tensor(x)
    out = iir_scan(x.data, c)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(iir_scan(g[..., ::-1], c)[..., ::-1])

    return _from_op(out, (x,), bwd)
