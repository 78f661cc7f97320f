# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot-evaluation loop. Mirrors cellsearch._kernel_py exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def first_detection(
    const cnp.int64_t[::1] seg_start,
    const double[::1] gain,
    const cnp.int64_t[::1] bs_target,
    const cnp.int64_t[::1] ue_sector,
    const cnp.int64_t[:, ::1] bs_choice,
    const double[:, ::1] fading,
    const cnp.int64_t[:, ::1] ue_choice,
    double side_bs,
    double side_ue,
    double noise,
    double threshold,
):
    cdef Py_ssize_t n_seg = seg_start.shape[0] - 1
    cdef Py_ssize_t n_slots = bs_choice.shape[0]
    cdef Py_ssize_t seg, slot, i, lo, hi, max_len = 0
    cdef double total, w, p
    cdef int ncand
    cdef bint hit, bs_ok, ue_ok

    first_np = np.zeros(n_seg, dtype=np.int64)
    cand_np = np.zeros(n_seg, dtype=np.int64)
    cdef cnp.int64_t[::1] first = first_np
    cdef cnp.int64_t[::1] cand_first = cand_np

    for seg in range(n_seg):
        if seg_start[seg + 1] - seg_start[seg] > max_len:
            max_len = seg_start[seg + 1] - seg_start[seg]
    scratch_np = np.empty(max(max_len, 1), dtype=np.float64)
    cdef double[::1] power = scratch_np

    with nogil:
        for seg in range(n_seg):
            lo = seg_start[seg]
            hi = seg_start[seg + 1]
            for slot in range(n_slots):
                total = 0.0
                ncand = 0
                for i in range(lo, hi):
                    bs_ok = bs_choice[slot, i] == bs_target[i]
                    ue_ok = ue_sector[i] == ue_choice[seg, slot]
                    w = 1.0 if bs_ok else side_bs
                    if not ue_ok:
                        w = w * side_ue
                    elif bs_ok:
                        ncand += 1
                    p = w * fading[slot, i] * gain[i]
                    power[i - lo] = p
                    total = total + p
                if slot == 0:
                    cand_first[seg] = ncand
                hit = False
                for i in range(lo, hi):
                    p = power[i - lo]
                    if p > 0.0 and p >= threshold * ((total - p) + noise):
                        hit = True
                        break
                if hit:
                    first[seg] = slot + 1
                    break
    return first_np, cand_np
