"""
On-disk formats: the binary TNSR tensor file and CSV factor matrices.

TNSR layout, all little-endian::

    magic    4 bytes  b'TNSR'
    version  u32      1
    ndims    u32
    reserved u32      0
    dims     ndims x u64
    payload  prod(dims) x f8, row-major
"""
import logging
import os

import numpy as np

from .exceptions import TensorFormatError
from .tensor_core import as_dense_tensor

logger = logging.getLogger(__name__)

MAGIC = b'TNSR'
VERSION = 1
MAX_NDIMS = 64

PREFIX_DTYPE = np.dtype([('magic', 'S4'), ('version', '<u4'), ('ndims', '<u4'), ('reserved', '<u4')])
DIM_DTYPE = np.dtype('<u8')
VALUE_DTYPE = np.dtype('<f8')


def write_tensor(path, tensor):
    tensor = as_dense_tensor(tensor)
    prefix = np.array([(MAGIC, VERSION, tensor.ndim, 0)], dtype=PREFIX_DTYPE)
    with open(path, 'wb') as handle:
        handle.write(prefix.tobytes())
        handle.write(np.asarray(tensor.shape, dtype=DIM_DTYPE).tobytes())
        handle.write(tensor.astype(VALUE_DTYPE, copy=False).tobytes(order='C'))
    logger.debug('wrote %s tensor to %s', tensor.shape, path)


def read_tensor(path) -> np.ndarray:
    with open(path, 'rb') as handle:
        blob = handle.read()
    if len(blob) < PREFIX_DTYPE.itemsize:
        raise TensorFormatError(f'{path}: {len(blob)} bytes is too short for a tensor header')
    prefix = np.frombuffer(blob, dtype=PREFIX_DTYPE, count=1)[0]
    if prefix['magic'] != MAGIC:
        raise TensorFormatError(f'{path}: bad magic {bytes(prefix["magic"])!r}, expected {MAGIC!r}')
    if prefix['version'] != VERSION:
        raise TensorFormatError(f'{path}: unsupported version {int(prefix["version"])}')
    if prefix['reserved'] != 0:
        raise TensorFormatError(f'{path}: reserved header word is not zero')
    ndims = int(prefix['ndims'])
    if not 2 <= ndims <= MAX_NDIMS:
        raise TensorFormatError(f'{path}: ndims={ndims} outside 2..{MAX_NDIMS}')
    offset = PREFIX_DTYPE.itemsize
    dims_end = offset + ndims * DIM_DTYPE.itemsize
    if len(blob) < dims_end:
        raise TensorFormatError(f'{path}: truncated dimension list')
    dims = [int(d) for d in np.frombuffer(blob, dtype=DIM_DTYPE, count=ndims, offset=offset)]
    if 0 in dims:
        raise TensorFormatError(f'{path}: zero-sized dimension in {dims}')
    count = 1
    for d in dims:
        count *= d
    expected = dims_end + count * VALUE_DTYPE.itemsize
    if expected > 2 ** 63 or len(blob) != expected:
        raise TensorFormatError(
            f'{path}: payload holds {len(blob) - dims_end} bytes, dims {dims} need '
            f'{count * VALUE_DTYPE.itemsize}')
    values = np.frombuffer(blob, dtype=VALUE_DTYPE, count=count, offset=dims_end)
    return values.astype(np.float64).reshape(dims)


def write_matrix_csv(path, matrix):
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), fmt='%.17g', delimiter=',')


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=',', ndmin=2)


def write_factors(directory, factors, prefix='factor'):
    """One CSV per mode, numbered from 1: factor_1.csv, factor_2.csv, ..."""
    paths = []
    for n, factor in enumerate(factors, start=1):
        path = os.path.join(directory, f'{prefix}_{n}.csv')
        write_matrix_csv(path, factor)
        paths.append(path)
    return paths
