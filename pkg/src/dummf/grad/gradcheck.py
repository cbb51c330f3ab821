"""Central finite-difference validation of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, backward


@dataclass
class GradCheckResult:
    """Outcome of one finite-difference sweep.

    ``max_rel_err`` uses denominator max(1, |ad|, |fd|), so small gradients are
    compared absolutely. Coordinates whose one-sided slopes disagree (the
    function has a kink inside the probe interval, e.g. relu at 0 or a min-tie)
    are skipped rather than failed.
    """

    max_rel_err: float = 0.0
    checked: int = 0
    skipped: list = field(default_factory=list)

    def ok(self, tol=1e-5) -> bool:
        return self.checked > 0 and self.max_rel_err < tol


def grad_check(f, x: np.ndarray, h: float = 1e-5, kink_tol: float = 1e-3) -> GradCheckResult:
    """Compare reverse-mode gradients of scalar ``f`` against central differences.

    ``f`` maps a Tensor to a scalar Tensor; ``x`` is the point to probe. Every
    coordinate is perturbed individually.
    """
    x = np.asarray(x, dtype=np.float64)
    xt = Tensor(x.copy(), requires_grad=True)
    loss = f(xt)
    backward(loss)
    analytic = xt.grad.copy()
    f0 = float(f(Tensor(x.copy())).data)

    result = GradCheckResult()
    flat = x.reshape(-1)
    for i in range(flat.size):
        probe = flat.copy()
        probe[i] = flat[i] + h
        f_plus = float(f(Tensor(probe.reshape(x.shape))).data)
        probe[i] = flat[i] - h
        f_minus = float(f(Tensor(probe.reshape(x.shape))).data)

        slope_plus = (f_plus - f0) / h
        slope_minus = (f0 - f_minus) / h
        scale = max(1.0, abs(slope_plus), abs(slope_minus))
        if abs(slope_plus - slope_minus) > kink_tol * scale:
            result.skipped.append(i)
            continue

        fd = (f_plus - f_minus) / (2.0 * h)
        ad = analytic.reshape(-1)[i]
        err = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
        result.max_rel_err = max(result.max_rel_err, err)
        result.checked += 1
    return result


def grad_check_params(f, params: dict[str, Tensor], rng: np.random.Generator,
                      coords_per_param: int = 4, h: float = 1e-5,
                      kink_tol: float = 1e-3) -> GradCheckResult:
    """Sampled finite-difference check of a loss over a named parameter table.

    ``f`` takes no arguments and reads the live ``params`` tensors, which lets
    large models be spot-checked without perturbing every coordinate.
    """
    loss = f()
    backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}
    f0 = float(f().data)

    result = GradCheckResult()
    for name in sorted(params):
        p = params[name]
        flat_size = p.data.size
        n = min(coords_per_param, flat_size)
        picks = rng.choice(flat_size, size=n, replace=False)
        for i in picks:
            original = p.data.reshape(-1)[i]
            _poke(p, i, original + h)
            f_plus = float(f().data)
            _poke(p, i, original - h)
            f_minus = float(f().data)
            _poke(p, i, original)

            slope_plus = (f_plus - f0) / h
            slope_minus = (f0 - f_minus) / h
            scale = max(1.0, abs(slope_plus), abs(slope_minus))
            if abs(slope_plus - slope_minus) > kink_tol * scale:
                result.skipped.append((name, int(i)))
                continue

            fd = (f_plus - f_minus) / (2.0 * h)
            ad = analytic[name].reshape(-1)[i]
            err = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
            result.max_rel_err = max(result.max_rel_err, err)
            result.checked += 1
    return result


def _poke(p: Tensor, flat_index: int, value: float) -> None:
    flat = p.data.reshape(-1)
    flat[flat_index] = value
