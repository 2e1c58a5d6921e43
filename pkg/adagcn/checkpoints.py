"""
Binary checkpoints, all little-endian.

params blob:    b'AGCP', u16 version, u32 F, u32 H, u32 C,
                then W0 (F x H) and W1 (H x C) as row-major float64
ensemble blob:  b'AGCE', u16 version, u32 M, u32 C, u32 flags,
                then M records of (params blob, f64 alpha, f64 epsilon)

Ensemble flags: bit 0 transfer learning, bit 1 alpha-weighted prediction.
"""
import struct

import numpy as np

from .exceptions import CheckpointError
from .models import (BoostConfig, EnsembleMember, EnsembleModel, GcnParams,
                     TrainConfig)


PARAMS_MAGIC = b'AGCP'
ENSEMBLE_MAGIC = b'AGCE'
VERSION = 1

_PARAMS_HEADER = struct.Struct('<4sHIII')
_ENSEMBLE_HEADER = struct.Struct('<4sHIII')
_MEMBER_TAIL = struct.Struct('<dd')

FLAG_TRANSFER = 1
FLAG_USE_ALPHA = 2


def params_to_bytes(params):
    f, h = params.w0.shape
    c = params.w1.shape[1]
    return b''.join([
        _PARAMS_HEADER.pack(PARAMS_MAGIC, VERSION, f, h, c),
        params.w0.astype('<f8').tobytes(order='C'),
        params.w1.astype('<f8').tobytes(order='C')])


def _read_params(blob, offset):
    if len(blob) - offset < _PARAMS_HEADER.size:
        raise CheckpointError("truncated params header")
    magic, version, f, h, c = _PARAMS_HEADER.unpack_from(blob, offset)
    if magic != PARAMS_MAGIC:
        raise CheckpointError("not a params blob (magic %r)" % magic)
    if version != VERSION:
        raise CheckpointError("unsupported params version %d" % version)
    offset += _PARAMS_HEADER.size
    needed = 8 * (f * h + h * c)
    if len(blob) - offset < needed:
        raise CheckpointError("truncated params body")
    w0 = np.frombuffer(blob, dtype='<f8', count=f * h, offset=offset)
    offset += 8 * f * h
    w1 = np.frombuffer(blob, dtype='<f8', count=h * c, offset=offset)
    offset += 8 * h * c
    params = GcnParams(w0.reshape(f, h).astype(np.float64),
                       w1.reshape(h, c).astype(np.float64))
    return params, offset


def params_from_bytes(blob):
    params, offset = _read_params(blob, 0)
    if offset != len(blob):
        raise CheckpointError("%d trailing bytes after params"
                              % (len(blob) - offset))
    return params


def ensemble_to_bytes(model):
    flags = 0
    if model.config.transfer_learning:
        flags |= FLAG_TRANSFER
    if model.config.use_alpha_in_prediction:
        flags |= FLAG_USE_ALPHA
    parts = [_ENSEMBLE_HEADER.pack(ENSEMBLE_MAGIC, VERSION, len(model.members),
                                   model.num_classes, flags)]
    for member in model.members:
        parts.append(params_to_bytes(member.params))
        parts.append(_MEMBER_TAIL.pack(member.alpha, member.epsilon))
    return b''.join(parts)


def ensemble_from_bytes(blob, base=None):
    """ Rebuild an ensemble. Only the flags are stored, so the remaining
    BoostConfig fields come from ``base`` (or the defaults). """
    if len(blob) < _ENSEMBLE_HEADER.size:
        raise CheckpointError("truncated ensemble header")
    magic, version, m, c, flags = _ENSEMBLE_HEADER.unpack_from(blob, 0)
    if magic != ENSEMBLE_MAGIC:
        raise CheckpointError("not an ensemble blob (magic %r)" % magic)
    if version != VERSION:
        raise CheckpointError("unsupported ensemble version %d" % version)
    offset = _ENSEMBLE_HEADER.size
    members = []
    for _ in range(m):
        params, offset = _read_params(blob, offset)
        if params.num_classes != c:
            raise CheckpointError("member has %d classes, ensemble %d"
                                  % (params.num_classes, c))
        if len(blob) - offset < _MEMBER_TAIL.size:
            raise CheckpointError("truncated member record")
        alpha, epsilon = _MEMBER_TAIL.unpack_from(blob, offset)
        offset += _MEMBER_TAIL.size
        members.append(EnsembleMember(params, alpha, epsilon))
    if offset != len(blob):
        raise CheckpointError("%d trailing bytes after ensemble"
                              % (len(blob) - offset))
    base = base or BoostConfig(base=TrainConfig())
    config = BoostConfig(num_estimators=max(m, 1),
                         shrinkage=base.shrinkage,
                         transfer_learning=bool(flags & FLAG_TRANSFER),
                         use_alpha_in_prediction=bool(flags & FLAG_USE_ALPHA),
                         base=base.base)
    return EnsembleModel(num_classes=c, config=config, members=members)


def save(obj, path):
    if isinstance(obj, EnsembleModel):
        blob = ensemble_to_bytes(obj)
    elif isinstance(obj, GcnParams):
        blob = params_to_bytes(obj)
    else:
        raise TypeError("cannot checkpoint %r" % type(obj))
    with open(path, 'wb') as f:
        f.write(blob)


def load(path, base=None):
    """ GcnParams or EnsembleModel, whichever the file holds. """
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except IOError as ex:
        raise CheckpointError("cannot read %s: %s" % (path, ex))
    magic = blob[:4]
    if magic == PARAMS_MAGIC:
        return params_from_bytes(blob)
    if magic == ENSEMBLE_MAGIC:
        return ensemble_from_bytes(blob, base)
    raise CheckpointError("%s is not a checkpoint (magic %r)" % (path, magic))
