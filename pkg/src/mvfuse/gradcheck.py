"""Finite-difference gradient verification.

Central differences are the independent oracle for every differentiable
operation in this package; nothing here reuses the reverse-mode machinery
beyond calling the forward pass. ``run_suite`` drives the standard battery
over all layers and fusion functions and is what the command line
``gradcheck`` subcommand executes.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .tensor import Tensor

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


def numerical_gradient(f: Callable[[], float], x: np.ndarray,
                       h: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference gradient of ``f`` with respect to ``x``.

    ``f`` must read ``x`` afresh on every call; ``x`` is perturbed in place
    one coordinate at a time and restored afterwards.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise error, relative for large entries, absolute for small."""
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(build_loss: Callable[[], Tensor],
                    params: Mapping[str, Tensor],
                    h: float = DEFAULT_STEP) -> dict[str, float]:
    """Compare reverse-mode gradients of a scalar loss against central differences.

    ``build_loss`` must run a deterministic forward pass that closes over the
    given parameters. Returns the max relative error per parameter.
    """
    for p in params.values():
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}
    errors = {}
    for name, p in params.items():
        numeric = numerical_gradient(lambda: build_loss().item(), p.data, h=h)
        errors[name] = relative_error(analytic[name], numeric)
    return errors


def _sum_squares(t: Tensor) -> Tensor:
    return (t * t).sum() * 0.5


def run_suite(seeds: Sequence[int] = tuple(range(20)),
              h: float = DEFAULT_STEP) -> dict[str, float]:
    """Gradient-check every layer and fusion path over the given seeds.

    Returns the max relative error per case, aggregated over seeds. Shapes
    are kept tiny so the whole battery runs in seconds.
    """
    from . import layers
    from .fusion import (AverageFusion, CrossAttentionFusion, FusionConfig,
                         GatedFusion, MemoryFusion)

    results: dict[str, float] = {}

    def record(name: str, err: float) -> None:
        results[name] = max(results.get(name, 0.0), err)

    for seed in seeds:
        rng = np.random.default_rng(seed)

        def unit(shape):
            return Tensor(rng.uniform(-1.0, 1.0, size=shape), requires_grad=True)

        # affine
        x = unit((3, 4))
        aff = layers.Affine(4, 5, rng)
        params = {"x": x, "W": aff.W, "b": aff.b}
        errs = check_gradients(lambda: _sum_squares(aff(x)), params, h=h)
        record("affine", max(errs.values()))

        # conv1d, same padding
        x = unit((6, 3))
        conv = layers.Conv1d(3, 4, rng, kernel=3)
        params = {"x": x, "W": conv.W, "b": conv.b}
        errs = check_gradients(lambda: _sum_squares(conv(x)), params, h=h)
        record("conv1d", max(errs.values()))

        # layer norm
        x = unit((3, 6))
        ln = layers.LayerNorm(6)
        ln.gain.data = rng.uniform(0.5, 1.5, size=6)
        ln.shift.data = rng.uniform(-0.5, 0.5, size=6)
        params = {"x": x, "gain": ln.gain, "shift": ln.shift}
        errs = check_gradients(lambda: _sum_squares(ln(x)), params, h=h)
        record("layer_norm", max(errs.values()))

        # lstm cell, three chained steps
        cell = layers.LSTMCell(3, 4, rng)
        xs = [unit((2, 3)) for _ in range(3)]
        params = {"W": cell.W, "b": cell.b}
        params.update({f"x{i}": x for i, x in enumerate(xs)})

        def lstm_loss():
            h_t = Tensor(np.zeros((2, 4)))
            c_t = Tensor(np.zeros((2, 4)))
            for x_t in xs:
                h_t, c_t = cell.step(x_t, h_t, c_t)
            return _sum_squares(h_t)

        errs = check_gradients(lstm_loss, params, h=h)
        record("lstm", max(errs.values()))

        # multi-head attention
        z = unit((3, 8))
        mha = layers.MultiHeadAttention(8, heads=2, rng=rng)
        params = {"z": z, "W_Q": mha.W_Q, "W_K": mha.W_K, "W_V": mha.W_V,
                  "bias": mha.bias}
        errs = check_gradients(lambda: _sum_squares(mha(z)), params, h=h)
        record("attention", max(errs.values()))

        # masked softmax
        x = unit((4, 5))
        mask = np.zeros(5, dtype=bool)
        mask[[1, 3]] = True
        errs = check_gradients(
            lambda: _sum_squares(x.softmax(axis=-1, exclude=mask)), {"x": x}, h=h)
        record("masked_softmax", max(errs.values()))

        # fusion paths over available subset {0, 2} of 3 views
        m, d = 3, 4
        rows_avail = [unit((2, d)), None, unit((2, d))]

        avg = AverageFusion()
        params = {f"z{i}": r for i, r in enumerate(rows_avail) if r is not None}
        errs = check_gradients(lambda: _sum_squares(avg.fuse(rows_avail)), params, h=h)
        record("fusion_average", max(errs.values()))

        gated = GatedFusion(m, d, rng)
        params = {f"z{i}": r for i, r in enumerate(rows_avail) if r is not None}
        params.update({"W_G": gated.W_G, "b": gated.b})
        errs = check_gradients(lambda: _sum_squares(gated.fuse(rows_avail)), params, h=h)
        record("fusion_gated", max(errs.values()))

        cross = CrossAttentionFusion(m, d, FusionConfig(kind="cross", heads=2, layers=1,
                                                        dropout=0.0), rng)
        params = {f"z{i}": r for i, r in enumerate(rows_avail) if r is not None}
        params.update(dict(cross.named_parameters("cross")))
        errs = check_gradients(lambda: _sum_squares(cross.fuse(rows_avail)), params, h=h)
        record("fusion_cross", max(errs.values()))

        memory = MemoryFusion(d, FusionConfig(kind="memory", layers=2, dropout=0.0), rng)
        params = {f"z{i}": r for i, r in enumerate(rows_avail) if r is not None}
        params.update(dict(memory.named_parameters("memory")))
        errs = check_gradients(lambda: _sum_squares(memory.fuse(rows_avail)), params, h=h)
        record("fusion_memory", max(errs.values()))

    return results
