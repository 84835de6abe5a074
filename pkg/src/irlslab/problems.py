"""Problem containers consumed by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, as_vector

# meta["family"] marker that enables failure-ratio tracking in the solver
FAILURE_FAMILY = "stacked_identity_failure"


@dataclass
class CsInstance:
    """A compressed-sensing problem ``phi x = y``.

    ``x_star`` and ``support`` are optional ground truth used for error
    tracking; ``meta`` carries generator parameters for serialization.
    """

    phi: np.ndarray
    y: np.ndarray
    x_star: np.ndarray | None = None
    support: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = as_matrix(self.phi, "phi")
        self.y = as_vector(self.y, "y")
        if self.y.shape[0] != self.phi.shape[0]:
            raise ValueError(
                f"y has length {self.y.shape[0]}, expected {self.phi.shape[0]}"
            )
        if self.x_star is not None:
            self.x_star = as_vector(self.x_star, "x_star")
            if self.x_star.shape[0] != self.phi.shape[1]:
                raise ValueError("x_star length does not match phi columns")
        if self.support is not None:
            self.support = np.asarray(self.support, dtype=int)

    @property
    def dim(self) -> int:
        return self.phi.shape[1]


@dataclass
class RegressionInstance:
    """An l1-regression problem ``min_z ||A z - b||_1``.

    The residual vector ``A z - b`` plays the role of the compressed-sensing
    iterate; ``x_star = A z_star - b`` is the residual-side ground truth.
    ``z0`` optionally fixes the starting point, and ``meta`` carries the
    construction constants of instances built by :mod:`irlslab.instances`
    (for the failure family: ``k``, ``gamma``, ``delta``, ``alpha`` ... which
    also enable per-iteration tracking of the failure ratio).
    """

    A: np.ndarray
    b: np.ndarray
    z_star: np.ndarray | None = None
    x_star: np.ndarray | None = None
    z0: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = as_matrix(self.A)
        self.b = as_vector(self.b, "b")
        if self.b.shape[0] != self.A.shape[0]:
            raise ValueError(
                f"b has length {self.b.shape[0]}, expected {self.A.shape[0]}"
            )
        for name in ("z_star", "z0"):
            v = getattr(self, name)
            if v is not None:
                v = as_vector(v, name)
                if v.shape[0] != self.A.shape[1]:
                    raise ValueError(f"{name} length does not match A columns")
                setattr(self, name, v)
        if self.x_star is None and self.z_star is not None:
            self.x_star = self.A @ self.z_star - self.b
        elif self.x_star is not None:
            self.x_star = as_vector(self.x_star, "x_star")

    @property
    def dim(self) -> int:
        """Residual dimension (row count of A)."""
        return self.A.shape[0]
