"""Block-structured vectors, kernels, and Bregman distances.

A point x in R^n is split into N contiguous blocks x_1..x_N.  Everything
downstream (the solver, the applications, the diagnostics) speaks this
vocabulary: kernels and nonsmooth terms are attached per block, and the
Bregman distance is always taken along a single block while the others
stay frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class DomainError(ValueError):
    """A point lies outside a kernel's domain."""


class ParameterError(ValueError):
    """A numeric parameter or shape is outside its admissible range."""


@dataclass(frozen=True)
class BlockPartition:
    """Fixed split of R^n into N contiguous blocks of sizes ``dims[i]``."""

    dims: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ParameterError("a partition needs at least one block")
        if any(d < 1 for d in dims):
            raise ParameterError(f"block sizes must be positive, got {dims}")
        offsets = [0]
        for d in dims[:-1]:
            offsets.append(offsets[-1] + d)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "offsets", tuple(offsets))

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return sum(self.dims)

    def block_slice(self, i: int) -> slice:
        if not 0 <= i < self.N:
            raise IndexError(f"block index {i} out of range for {self.N} blocks")
        off = self.offsets[i]
        return slice(off, off + self.dims[i])


@dataclass(frozen=True, eq=False)
class BlockVector:
    """Immutable point in R^n addressable block by block."""

    partition: BlockPartition
    data: Array

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 1 or data.size != self.partition.n:
            raise ParameterError(
                f"data must be a flat vector of length {self.partition.n}, "
                f"got shape {np.shape(self.data)}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_blocks(cls, partition: BlockPartition, blocks: Sequence[Array]) -> "BlockVector":
        if len(blocks) != partition.N:
            raise ParameterError(f"expected {partition.N} blocks, got {len(blocks)}")
        parts = [np.asarray(b, dtype=float).ravel() for b in blocks]
        for i, p in enumerate(parts):
            if p.size != partition.dims[i]:
                raise ParameterError(
                    f"block {i} has size {p.size}, expected {partition.dims[i]}"
                )
        return cls(partition, np.concatenate(parts))

    def block(self, i: int) -> Array:
        """Read-only view of block i."""
        return self.data[self.partition.block_slice(i)]

    def with_block(self, i: int, values: Array) -> "BlockVector":
        """New vector with block i replaced by ``values``."""
        values = np.asarray(values, dtype=float).ravel()
        if values.size != self.partition.dims[i]:
            raise ParameterError(
                f"block {i} has size {self.partition.dims[i]}, got {values.size}"
            )
        buf = self.data.copy()
        buf[self.partition.block_slice(i)] = values
        return BlockVector(self.partition, buf)


def _everywhere(x: BlockVector) -> bool:
    return True


@dataclass(frozen=True)
class BlockKernel:
    """One kernel h: R^n -> R with its per-block gradient.

    ``sigma`` is the block strong-convexity modulus supplied by the
    application layer.  ``block_grad(i, x)`` returns the gradient of h with
    respect to block i; kernels may support only their own block.
    ``domain_check`` defaults to all of R^n.
    """

    value: Callable[[BlockVector], float]
    block_grad: Callable[[int, BlockVector], Array]
    sigma: float
    block_hess_action: Callable[[int, BlockVector, Array], Array] | None = None
    domain_check: Callable[[BlockVector], bool] = _everywhere

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class NonsmoothBlock:
    """Nonsmooth term g_i on one block.

    ``value`` returns an extended real (math.inf outside the domain).
    ``solver``, when present, returns the exact minimizer of the block model
    and is called as ``solver(problem, schedule, i, x_current, x_prev)``.
    ``project`` is a Euclidean projection onto dom g_i; it enables the
    numeric fallback oracle when no exact solver exists.
    """

    value: Callable[[Array], float]
    solver: Callable | None = None
    project: Callable[[Array], Array] | None = None


def zero_term() -> NonsmoothBlock:
    """g == 0 with the identity projection."""
    return NonsmoothBlock(value=lambda z: 0.0, project=lambda z: np.asarray(z, dtype=float))


def nonnegative_indicator() -> NonsmoothBlock:
    """Indicator of the nonnegative orthant with its exact projection."""

    def value(z: Array) -> float:
        return 0.0 if np.all(np.asarray(z) >= 0.0) else math.inf

    def project(z: Array) -> Array:
        return np.maximum(np.asarray(z, dtype=float), 0.0)

    return NonsmoothBlock(value=value, project=project)


@dataclass(frozen=True)
class BlockProblem:
    """Everything the solver needs: f, its block gradients, kernels, g terms.

    ``L[i]`` is the relative-smoothness constant of f with respect to
    ``kernels[i]`` along block i.
    """

    partition: BlockPartition
    f_value: Callable[[BlockVector], float]
    f_block_grad: Callable[[int, BlockVector], Array]
    kernels: tuple[BlockKernel, ...]
    L: tuple[float, ...]
    g: tuple[NonsmoothBlock, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "L", tuple(float(v) for v in self.L))
        object.__setattr__(self, "g", tuple(self.g))
        N = self.partition.N
        if not (len(self.kernels) == len(self.L) == len(self.g) == N):
            raise ParameterError(
                f"kernels/L/g must all have length {N}, got "
                f"{len(self.kernels)}/{len(self.L)}/{len(self.g)}"
            )
        if any(not v > 0 for v in self.L):
            raise ParameterError(f"all L_i must be positive, got {self.L}")

    @property
    def sigma(self) -> tuple[float, ...]:
        return tuple(k.sigma for k in self.kernels)


def block_bregman_distance(kernel: BlockKernel, i: int, x: BlockVector, y_i: Array) -> float:
    """Bregman distance from x to (x with block i replaced by y_i).

    Returns h(x | x_i <- y_i) - h(x) - <grad_i h(x), y_i - x_i>.  For
    block-convex kernels the result is nonnegative; cancellation-level
    negative roundoff is clamped to zero, anything larger is returned as is.
    """
    y_i = np.asarray(y_i, dtype=float).ravel()
    if not kernel.domain_check(x):
        raise DomainError("base point lies outside the kernel domain")
    y = x.with_block(i, y_i)
    if not kernel.domain_check(y):
        raise DomainError("shifted point lies outside the kernel domain")
    hx = float(kernel.value(x))
    hy = float(kernel.value(y))
    if not (math.isfinite(hx) and math.isfinite(hy)):
        raise DomainError("kernel value is not finite on an in-domain point")
    inner = float(np.dot(kernel.block_grad(i, x), y_i - x.block(i)))
    d = hy - hx - inner
    if d < 0.0:
        slack = 1e-12 * (abs(hx) + abs(hy) + abs(inner) + 1.0)
        if d >= -slack:
            return 0.0
    return d


def phi_value(problem: BlockProblem, x: BlockVector) -> float:
    """Composite objective f(x) + sum_i g_i(x_i), +inf when any g_i is."""
    total = 0.0
    for i, term in enumerate(problem.g):
        gi = float(term.value(x.block(i)))
        if math.isinf(gi):
            return math.inf
        total += gi
    return total + float(problem.f_value(x))


def model_value(
    problem: BlockProblem,
    gamma: float,
    alpha: float,
    i: int,
    x_k: BlockVector,
    x_prev: BlockVector,
    z: Array,
) -> float:
    """Value of the inertial linearized block model at trial point z.

    <grad_i f(x_k) - (alpha/gamma)(x_k_i - x_prev_i), z - x_k_i>
      + (1/gamma) * D_{h_i}(x_k | block i <- z, x_k) + g_i(z)
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    z = np.asarray(z, dtype=float).ravel()
    gz = float(problem.g[i].value(z))
    if math.isinf(gz):
        return math.inf
    xi = x_k.block(i)
    step = problem.f_block_grad(i, x_k) - (alpha / gamma) * (xi - x_prev.block(i))
    lin = float(np.dot(step, z - xi))
    breg = block_bregman_distance(problem.kernels[i], i, x_k, z)
    return lin + breg / gamma + gz


def full_gradient(problem: BlockProblem, x: BlockVector) -> Array:
    """Concatenated block gradients of f at x."""
    return np.concatenate(
        [np.asarray(problem.f_block_grad(i, x), dtype=float).ravel()
         for i in range(problem.partition.N)]
    )


def squared_norm_kernel() -> BlockKernel:
    """The Euclidean kernel h(x) = ||x||^2 / 2 (modulus 1 on every block)."""
    return BlockKernel(
        value=lambda x: 0.5 * float(np.dot(x.data, x.data)),
        block_grad=lambda i, x: np.array(x.block(i)),
        sigma=1.0,
        block_hess_action=lambda i, x, v: np.array(v, dtype=float),
    )
