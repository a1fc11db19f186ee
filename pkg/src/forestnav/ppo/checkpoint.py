"""Versioned binary checkpoints.

Layout (all integers little-endian uint32, all reals little-endian float64)::

    magic        8 bytes  b"FNAVCKPT"
    version      u32      FORMAT_VERSION
    obs_bins     u32
    action_dim   u32
    n_ph, ph...  u32      policy hidden widths
    n_vh, vh...  u32      value hidden widths
    flags        u32      bit 0: observation statistics present
    policy       f64      W1, b1, W2, b2, ..., W_out, b_out   (W row-major, shape (in, out))
    log_std      f64      (action_dim,)
    value        f64      W1, b1, ..., W_out, b_out
    [obs stats]  f64      mean (obs_bins,), var (obs_bins,), count (1,)   if flag bit 0

The file must end exactly after the last block.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .networks import AgentParams, MlpParams, RunningMeanStd

MAGIC = b"FNAVCKPT"
FORMAT_VERSION = 1
_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    """Unreadable, truncated, or incompatible checkpoint."""


def _layer_shapes(sizes: list[int]) -> list[tuple[int, ...]]:
    shapes: list[tuple[int, ...]] = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        shapes += [(n_in, n_out), (n_out,)]
    return shapes


def save_checkpoint(agent: AgentParams, path: str | Path) -> None:
    obs_dim, action_dim = agent.obs_dim, agent.action_dim
    ph = agent.policy.sizes[1:-1]
    vh = agent.value.sizes[1:-1]
    flags = 1 if agent.obs_rms is not None else 0
    header = MAGIC + struct.pack(
        f"<IIII{len(ph)}II{len(vh)}II",
        FORMAT_VERSION, obs_dim, action_dim, len(ph), *ph, len(vh), *vh, flags,
    )
    blocks = [np.asarray(a, dtype=_F64).ravel() for a in agent.arrays()]
    if agent.obs_rms is not None:
        blocks += [
            np.asarray(agent.obs_rms.mean, dtype=_F64),
            np.asarray(agent.obs_rms.var, dtype=_F64),
            np.array([agent.obs_rms.count], dtype=_F64),
        ]
    payload = np.concatenate(blocks).tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)


def _read_u32(buf: bytes, offset: int, what: str) -> tuple[int, int]:
    if offset + 4 > len(buf):
        raise CheckpointError(f"checkpoint truncated while reading {what}")
    return struct.unpack_from("<I", buf, offset)[0], offset + 4


def load_checkpoint(path: str | Path, obs_bins: int | None = None, action_dim: int | None = None) -> AgentParams:
    """Load a checkpoint; optionally insist on the observation/action widths of a config."""
    buf = Path(path).read_bytes()
    if buf[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a forestnav checkpoint (bad magic)")
    off = len(MAGIC)
    version, off = _read_u32(buf, off, "version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    obs_dim, off = _read_u32(buf, off, "obs_bins")
    act_dim, off = _read_u32(buf, off, "action_dim")
    n_ph, off = _read_u32(buf, off, "policy depth")
    ph = []
    for _ in range(n_ph):
        h, off = _read_u32(buf, off, "policy widths")
        ph.append(h)
    n_vh, off = _read_u32(buf, off, "value depth")
    vh = []
    for _ in range(n_vh):
        h, off = _read_u32(buf, off, "value widths")
        vh.append(h)
    flags, off = _read_u32(buf, off, "flags")

    if obs_bins is not None and obs_dim != obs_bins:
        raise CheckpointError(f"{path}: shape mismatch, checkpoint has obs_bins={obs_dim} but config expects {obs_bins}")
    if action_dim is not None and act_dim != action_dim:
        raise CheckpointError(f"{path}: shape mismatch, checkpoint has action_dim={act_dim}, expected {action_dim}")

    p_shapes = _layer_shapes([obs_dim, *ph, act_dim])
    v_shapes = _layer_shapes([obs_dim, *vh, 1])
    shapes = p_shapes + [(act_dim,)] + v_shapes
    if flags & 1:
        shapes += [(obs_dim,), (obs_dim,), (1,)]
    n_floats = sum(int(np.prod(s)) for s in shapes)
    expected = off + 8 * n_floats
    if len(buf) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, found {len(buf)} (truncated or corrupt)")
    data = np.frombuffer(buf, dtype=_F64, offset=off).astype(np.float64)
    arrays = []
    k = 0
    for s in shapes:
        size = int(np.prod(s))
        arrays.append(data[k:k + size].reshape(s).copy())
        k += size

    def mlp(chunk):
        return MlpParams(chunk[0::2], chunk[1::2])

    n_p = len(p_shapes)
    policy = mlp(arrays[:n_p])
    log_std = arrays[n_p]
    value = mlp(arrays[n_p + 1:n_p + 1 + len(v_shapes)])
    obs_rms = None
    if flags & 1:
        mean, var, count = arrays[-3:]
        obs_rms = RunningMeanStd(mean, var, float(count[0]))
    return AgentParams(policy, log_std, value, obs_rms)
