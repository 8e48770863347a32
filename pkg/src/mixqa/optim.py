"""Adam optimizer and a finite-difference gradient checker."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autodiff import Parameter, Tensor


class NonDeterministicLoss(RuntimeError):
    """Raised when two forward passes of a supposedly fixed loss disagree."""


class Adam:
    """Standard Adam with bias correction. Moments live on the parameters."""

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self) -> None:
        for p in self.params:
            p.step_count += 1
            g = p.grad
            p.m = self.beta1 * p.m + (1.0 - self.beta1) * g
            p.v = self.beta2 * p.v + (1.0 - self.beta2) * (g * g)
            m_hat = p.m / (1.0 - self.beta1**p.step_count)
            v_hat = p.v / (1.0 - self.beta2**p.step_count)
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coords_per_block: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` must rebuild the graph from the given parameters on every
    call and be bit-deterministic; anything random inside it (anonymization
    maps, sampling) has to be frozen by the caller. Returns the max relative
    error per parameter block, where the relative error uses an absolute
    floor of 1e-4 in the denominator so that near-zero gradients do not
    amplify finite-difference noise.

    Raises NonDeterministicLoss if two forward passes disagree.
    """
    l1 = loss_fn().values.item()
    l2 = loss_fn().values.item()
    if l1 != l2:
        raise NonDeterministicLoss(f"loss_fn returned {l1!r} then {l2!r}")

    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}

    report: dict[str, float] = {}
    for p in params:
        a = analytic[p.name].ravel()
        flat = p.values.ravel()
        coords = np.arange(flat.size)
        if max_coords_per_block is not None and flat.size > max_coords_per_block:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(flat.size, size=max_coords_per_block, replace=False)
        worst = 0.0
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn().values.item()
            flat[i] = orig - h
            f_minus = loss_fn().values.item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(a[i]), abs(numeric), 1e-4)
            worst = max(worst, abs(a[i] - numeric) / denom)
        report[p.name] = worst
    return report
