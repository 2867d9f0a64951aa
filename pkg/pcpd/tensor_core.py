"""
Dense tensors and the multilinear algebra consumed by the inference updates.

Tensors are C-ordered float64 ndarrays (row-major, last index fastest).
Modes are zero-based like numpy axes. The unfolding uses the column ordering
in which the remaining modes are enumerated with the lowest mode varying
fastest, which is the ordering produced by the reversed Khatri-Rao chain
``A[N-1] (.) ... (.) A[k+1] (.) A[k-1] (.) ... (.) A[0]``. With this pair of
conventions::

    unfold(reconstruct(model), k) == model.factors[k] @ khatri_rao_excluding(model, k).T
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import khatri_rao

from .exceptions import ModeError, TensorShapeError


def as_dense_tensor(values) -> np.ndarray:
    """Validate and convert `values` to a C-ordered float64 tensor."""
    tensor = np.ascontiguousarray(values, dtype=np.float64)
    if tensor.ndim < 2:
        raise TensorShapeError(f'tensor needs at least 2 modes, got {tensor.ndim}')
    if 0 in tensor.shape:
        raise TensorShapeError(f'tensor dimensions must be positive, got {tensor.shape}')
    return tensor


def _check_mode(mode: int, ndim: int) -> int:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < ndim:
        raise ModeError(f'mode {mode!r} out of range for a {ndim}-mode tensor')
    return int(mode)


@dataclass
class KruskalModel:
    """Factor matrices of a CP model; factor n is J_n x L."""

    factors: list

    def __post_init__(self):
        self.factors = [np.asarray(f, dtype=np.float64) for f in self.factors]
        if len(self.factors) < 2:
            raise TensorShapeError('a Kruskal model needs at least 2 factors')
        columns = {f.shape[1] if f.ndim == 2 else None for f in self.factors}
        if len(columns) != 1 or None in columns:
            raise TensorShapeError(
                f'factors must be matrices with equal column counts, got shapes '
                f'{[f.shape for f in self.factors]}'
            )

    @property
    def rank_bound(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def reconstruct(self) -> np.ndarray:
        return reconstruct(self)


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode-`mode` matricization, J_mode x prod(other dims)."""
    mode = _check_mode(mode, tensor.ndim)
    return np.reshape(np.moveaxis(tensor, mode, 0), (tensor.shape[mode], -1), order='F')


def fold(matrix: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    dims = tuple(int(d) for d in dims)
    mode = _check_mode(mode, len(dims))
    moved = (dims[mode],) + dims[:mode] + dims[mode + 1:]
    if matrix.shape != (dims[mode], int(np.prod(moved[1:]))):
        raise TensorShapeError(f'matrix of shape {matrix.shape} cannot be folded into {dims}')
    return np.ascontiguousarray(np.moveaxis(np.reshape(matrix, moved, order='F'), 0, mode))


def khatri_rao_excluding(model: KruskalModel | Sequence[np.ndarray],
                         skip: Optional[int] = None) -> np.ndarray:
    """Column-wise Kronecker chain of all factors except `skip`, highest mode first."""
    factors = model.factors if isinstance(model, KruskalModel) else list(model)
    if skip is not None:
        skip = _check_mode(skip, len(factors))
    kept = [f for n, f in enumerate(factors) if n != skip]
    if not kept:
        raise TensorShapeError('nothing left to multiply')
    if len({f.shape[1] for f in kept}) != 1:
        raise TensorShapeError('factors must have equal column counts')
    return reduce(khatri_rao, reversed(kept))


def hadamard_gram_excluding(grams: Sequence[np.ndarray], skip: Optional[int] = None) -> np.ndarray:
    """Elementwise product of the L x L matrices in `grams`, leaving out index `skip`."""
    if skip is not None:
        skip = _check_mode(skip, len(grams))
    shape = np.shape(grams[0])
    if len(shape) != 2 or shape[0] != shape[1]:
        raise TensorShapeError(f'grams must be square, got {shape}')
    result = np.ones(shape)
    for n, gram in enumerate(grams):
        if np.shape(gram) != shape:
            raise TensorShapeError(f'gram {n} has shape {np.shape(gram)}, expected {shape}')
        if n != skip:
            result = result * gram
    return result


def _einsum_operands(factors, skip):
    letters = 'abcdefghijklmnopqrstuvwxyz'
    if len(factors) + 1 > len(letters):
        raise TensorShapeError('too many modes for an einsum contraction')
    rank = 'Z'
    tensor_idx = letters[:len(factors)]
    inputs, operands = [], []
    for n, factor in enumerate(factors):
        if n != skip:
            inputs.append(tensor_idx[n] + rank)
            operands.append(factor)
    return tensor_idx, rank, inputs, operands


def mttkrp(tensor: np.ndarray, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """``unfold(tensor, mode) @ khatri_rao_excluding(factors, mode)`` without forming the chain."""
    mode = _check_mode(mode, tensor.ndim)
    if len(factors) != tensor.ndim:
        raise TensorShapeError(f'{len(factors)} factors for a {tensor.ndim}-mode tensor')
    tensor_idx, rank, inputs, operands = _einsum_operands(factors, mode)
    spec = ','.join([tensor_idx] + inputs) + '->' + tensor_idx[mode] + rank
    return np.einsum(spec, tensor, *operands, optimize='greedy')


def reconstruct(model: KruskalModel | Sequence[np.ndarray]) -> np.ndarray:
    """Kruskal operator: sum over l of the outer products of column l of every factor."""
    factors = model.factors if isinstance(model, KruskalModel) else list(model)
    dims = tuple(f.shape[0] for f in factors)
    first = factors[0]
    chain = khatri_rao_excluding(factors, 0)
    return fold(first @ chain.T, 0, dims)


def frob_norm_sq(tensor: np.ndarray) -> float:
    flat = np.ravel(tensor)
    return float(np.dot(flat, flat))
