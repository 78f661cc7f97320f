"""Vectorized numpy implementation of the slot-evaluation loop.

Used when the compiled extension is unavailable, and as its reference.
Results are bit-identical to the compiled loop: per-slot totals are summed
in BS order within each segment in both implementations.
"""
import numpy as np


def first_detection(seg_start, gain, bs_target, ue_sector, bs_choice, fading, ue_choice,
                    side_bs, side_ue, noise, threshold):
    """First detecting slot (1-based, 0 = never) per segment.

    Parameters
    ----------
    seg_start : (n_seg + 1,) int64
        Offsets of each segment's BSs in the flat per-BS arrays.
    gain : (n_bs,) float64
        Path gain of each BS toward the origin.
    bs_target : (n_bs,) int64
        Sector a BS must select to point at the origin.
    ue_sector : (n_bs,) int64
        UE sector that contains each BS.
    bs_choice, fading : (n_slots, n_bs)
        Per-slot sector selection and fading power of each BS.
    ue_choice : (n_seg, n_slots) int64
        Per-slot UE sector of each segment.
    side_bs, side_ue : float
        Side-lobe gain relative to the main lobe (0 for ideal sectors).

    Returns
    -------
    first, cand_first : (n_seg,) int64
        First detecting slot, and the number of fully aligned BSs in slot 1.
    """
    seg_start = np.asarray(seg_start)
    n_seg = seg_start.size - 1
    n_slots = bs_choice.shape[0]
    counts = np.diff(seg_start)
    seg_of = np.repeat(np.arange(n_seg), counts)
    n_bs = seg_of.size

    bs_ok = bs_choice == bs_target[None, :]
    ue_ok = ue_choice.T[:, seg_of] == ue_sector[None, :]
    w = np.where(bs_ok, 1.0, side_bs)
    w = np.where(ue_ok, w, w * side_ue)
    power = w * fading * gain[None, :]

    flat = (np.arange(n_slots)[:, None] * n_seg + seg_of[None, :]).ravel()
    total = np.bincount(flat, weights=power.ravel(), minlength=n_slots * n_seg)
    total_bs = total[flat].reshape(n_slots, n_bs)
    hit = (power > 0.0) & (power >= threshold * ((total_bs - power) + noise))
    slot_hit = np.bincount(flat[hit.ravel()], minlength=n_slots * n_seg).reshape(n_slots, n_seg) > 0

    any_hit = slot_hit.any(axis=0)
    first = np.where(any_hit, slot_hit.argmax(axis=0) + 1, 0).astype(np.int64)
    if n_slots:
        aligned = (bs_ok[0] & ue_ok[0]).astype(np.int64)
        cand_first = np.bincount(seg_of, weights=aligned, minlength=n_seg).astype(np.int64)
    else:
        cand_first = np.zeros(n_seg, dtype=np.int64)
    return first, cand_first
