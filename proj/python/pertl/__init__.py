"""Perturbation cascades solved by one-shot transfer on a multi-head PINN trunk."""

from ._core import (
    Checkpoint,
    CascadeSpec,
    DuffingParams,
    NumericalError,
    TrainConfig,
    Trunk,
    build_cascade,
    build_system,
    enumerate_multi_indices,
    integrate_duffing,
    load_checkpoint,
    multinomial_coefficient,
    p_sweep,
    solve_duffing,
    train,
)

__all__ = [
    "Checkpoint",
    "CascadeSpec",
    "DuffingParams",
    "NumericalError",
    "TrainConfig",
    "Trunk",
    "build_cascade",
    "build_system",
    "enumerate_multi_indices",
    "integrate_duffing",
    "load_checkpoint",
    "multinomial_coefficient",
    "p_sweep",
    "solve_duffing",
    "train",
]
