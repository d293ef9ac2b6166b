"""Central finite-difference gradient checking shared by the test modules."""

import numpy as np

from robustasr.diffcore import Tensor, backward


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def fd_gradcheck(make_loss, tensors, rng, n_coords=6, h=1e-5, rtol=1e-4, atol=5e-8):
    """Check d(make_loss())/d(tensor) against central differences.

    make_loss rebuilds the graph from the tensors' current .data on every
    call (so nudging .data re-evaluates the true function).  A handful of
    randomly sampled coordinates per tensor keeps the check fast.  Pairs
    whose absolute difference is below `atol` count as matching: central
    differences cannot resolve near-zero derivatives past the roundoff of
    the loss itself.
    """
    for t in tensors:
        t.grad = None
    loss = make_loss()
    backward(loss)
    worst = 0.0
    for t in tensors:
        assert t.grad is not None, "leaf did not receive a gradient"
        flat = t.data.reshape(-1)
        gflat = t.grad.reshape(-1)
        coords = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
        for c in coords:
            keep = flat[c]
            flat[c] = keep + h
            up = make_loss().item()
            flat[c] = keep - h
            dn = make_loss().item()
            flat[c] = keep
            numeric = (up - dn) / (2.0 * h)
            if abs(gflat[c] - numeric) < atol:
                continue
            err = rel_err(gflat[c], numeric)
            worst = max(worst, err)
            assert err < rtol, (
                f"gradient mismatch at coord {c}: analytic={gflat[c]:.8g} "
                f"numeric={numeric:.8g} rel_err={err:.3g}"
            )
    return worst


def leaf(rng, shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)
