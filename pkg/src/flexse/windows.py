"""Window partitioning of T-F feature maps for local attention.

A feature map (N, C, F, T) is zero-padded so F and T are multiples of the
window extents, optionally cyclically shifted by half a window, and cut into
non-overlapping W_F x W_T tiles. merge_windows() inverts the whole pipeline
bit-exactly. The shifted variant comes with an additive attention mask that
blocks pairs of positions that only became neighbors through the wrap-around,
the usual trick that makes shifted windows cost the same as plain ones.
"""

import dataclasses

import torch

__all__ = [
    "WindowSpec",
    "PadRecord",
    "partition_windows",
    "merge_windows",
    "shift_region_mask",
    "relative_position_index",
]

MASK_OFF = -1e9  # large negative logit; softmax weight underflows to 0


@dataclasses.dataclass(frozen=True)
class WindowSpec:
    w_f: int
    w_t: int
    shifted: bool = False

    def __post_init__(self):
        if self.w_f < 1 or self.w_t < 1:
            raise ValueError(f"window extents must be >= 1, got {self.w_f}x{self.w_t}")

    @property
    def shift(self) -> tuple:
        """(shift_f, shift_t): half-window cyclic shift when shifted."""
        if not self.shifted:
            return (0, 0)
        return (self.w_f // 2, self.w_t // 2)

    @property
    def tokens(self) -> int:
        return self.w_f * self.w_t


@dataclasses.dataclass(frozen=True)
class PadRecord:
    """Bookkeeping needed to undo partitioning."""

    channels: int
    f: int
    t: int
    f_pad: int
    t_pad: int
    spec: WindowSpec


def _padded_extent(size: int, window: int) -> int:
    return ((size + window - 1) // window) * window


def partition_windows(feat: torch.Tensor, spec: WindowSpec):
    """(N, C, F, T) -> (windows (B_w, W_F*W_T, N), PadRecord).

    B_w = C * ceil(F/W_F) * ceil(T/W_T). Zero padding goes at the high end
    of F and T; the cyclic shift (if any) is applied after padding. Window
    order is (channel, window row, window column); token order inside a
    window is row-major (frequency first).
    """
    n, c, f, t = feat.shape
    f_pad = _padded_extent(f, spec.w_f)
    t_pad = _padded_extent(t, spec.w_t)
    x = feat.permute(1, 2, 3, 0)  # (C, F, T, N)
    if f_pad != f or t_pad != t:
        x = torch.nn.functional.pad(x, (0, 0, 0, t_pad - t, 0, f_pad - f))
    sf, st = spec.shift
    if sf or st:
        x = torch.roll(x, shifts=(-sf, -st), dims=(1, 2))
    x = x.reshape(c, f_pad // spec.w_f, spec.w_f, t_pad // spec.w_t, spec.w_t, n)
    x = x.permute(0, 1, 3, 2, 4, 5).reshape(-1, spec.tokens, n)
    return x, PadRecord(c, f, t, f_pad, t_pad, spec)


def merge_windows(windows: torch.Tensor, rec: PadRecord) -> torch.Tensor:
    """Exact inverse of partition_windows (shift undone, padding dropped)."""
    spec = rec.spec
    n = windows.shape[-1]
    n_f = rec.f_pad // spec.w_f
    n_t = rec.t_pad // spec.w_t
    if windows.shape[0] != rec.channels * n_f * n_t or windows.shape[1] != spec.tokens:
        raise ValueError(
            f"window batch {tuple(windows.shape)} does not match record {rec}"
        )
    x = windows.reshape(rec.channels, n_f, n_t, spec.w_f, spec.w_t, n)
    x = x.permute(0, 1, 3, 2, 4, 5).reshape(rec.channels, rec.f_pad, rec.t_pad, n)
    sf, st = spec.shift
    if sf or st:
        x = torch.roll(x, shifts=(sf, st), dims=(1, 2))
    x = x[:, : rec.f, : rec.t, :]
    return x.permute(3, 0, 1, 2).contiguous()


def shift_region_mask(f_pad: int, t_pad: int, spec: WindowSpec, device=None):
    """Additive attention mask for one channel's shifted windows.

    Returns (n_windows, tokens, tokens) with 0 where both positions come
    from the same pre-shift region and MASK_OFF where the cyclic wrap glued
    unrelated regions together, or None for an unshifted window spec.
    """
    sf, st = spec.shift
    if sf == 0 and st == 0:
        return None
    # Region ids live in the shifted frame: inside the seam-bearing last
    # window row/column, [-w, -shift) is content that stayed contiguous and
    # [-shift, 0) is content carried around by the wrap.
    ids = torch.zeros(f_pad, t_pad, dtype=torch.long, device=device)
    region = 0
    for f_slice in (
        slice(0, f_pad - spec.w_f),
        slice(f_pad - spec.w_f, f_pad - sf),
        slice(f_pad - sf, f_pad),
    ):
        for t_slice in (
            slice(0, t_pad - spec.w_t),
            slice(t_pad - spec.w_t, t_pad - st),
            slice(t_pad - st, t_pad),
        ):
            ids[f_slice, t_slice] = region
            region += 1
    ids = ids.reshape(f_pad // spec.w_f, spec.w_f, t_pad // spec.w_t, spec.w_t)
    ids = ids.permute(0, 2, 1, 3).reshape(-1, spec.tokens)
    same = ids[:, :, None] == ids[:, None, :]
    return torch.where(same, 0.0, MASK_OFF)


def relative_position_index(w_f: int, w_t: int) -> torch.Tensor:
    """(tokens, tokens) flat index into a (2*W_F-1)*(2*W_T-1) bias table.

    Entry [i, j] encodes the 2-D offset of token i relative to token j, so
    a bias table indexed this way depends only on the window geometry, not
    on F, T, or the sampling rate.
    """
    ff, tt = torch.meshgrid(torch.arange(w_f), torch.arange(w_t), indexing="ij")
    coords = torch.stack([ff.reshape(-1), tt.reshape(-1)])  # (2, tokens)
    rel = coords[:, :, None] - coords[:, None, :]
    rel_f = rel[0] + (w_f - 1)
    rel_t = rel[1] + (w_t - 1)
    return rel_f * (2 * w_t - 1) + rel_t
