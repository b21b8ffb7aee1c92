"""Hot inner loops: rank accumulation and batched supplier selection.

Each kernel exists twice, as a numba ``@njit`` loop and as a vectorized numpy
equivalent.  Both consume the same pre-drawn uniforms, so the two backends
agree bit-for-bit.  The active backend is picked once at import time:

    LIQUIDRANK_BACKEND=numpy   force the pure-numpy path
    LIQUIDRANK_BACKEND=numba   require numba (ImportError if missing)

With the variable unset, numba is used when importable.
"""
import os

import numpy as np

WTA, ROULETTE, THRESHOLDED, RANDOM = 0, 1, 2, 3

_requested = os.environ.get("LIQUIDRANK_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"LIQUIDRANK_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError("numba disabled by LIQUIDRANK_BACKEND")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    if _requested == "numba":
        raise
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# numpy implementations


def scatter_add_numpy(index, values, n):
    return np.bincount(index, weights=values, minlength=n).astype(np.float64)


def _nth_true(mask, m):
    """Column of the m-th (0-based) True entry in every row of ``mask``."""
    return np.argmax(np.cumsum(mask, axis=1) > m[:, None], axis=1)


def _uniform_pick(mask, u):
    count = mask.sum(axis=1)
    m = np.minimum((u * count).astype(np.int64), count - 1)
    return _nth_true(mask, m)


def select_batch_numpy(code, cand_ptr, cand_ids, ranks, req_good, req_self,
                       req_row, u, threshold, avoid):
    out = np.empty(req_good.shape[0], dtype=np.int64)
    for g in np.unique(req_good):
        idx = np.flatnonzero(req_good == g)
        cands = cand_ids[cand_ptr[g]:cand_ptr[g + 1]]
        r = ranks[cands][None, :]
        valid = cands[None, :] != req_self[idx][:, None]
        uu = u[idx]
        if code == WTA:
            col = np.argmax(np.where(valid, r, -np.inf), axis=1)
        elif code == ROULETTE:
            cum = np.cumsum(np.where(valid, r, 0.0), axis=1)
            total = cum[:, -1]
            hit = (cum > (uu * total)[:, None]) & valid
            last_valid = valid.shape[1] - 1 - np.argmax(valid[:, ::-1], axis=1)
            col = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last_valid)
            flat = total <= 0.0
            if flat.any():
                col[flat] = _uniform_pick(valid[flat], uu[flat])
        else:
            if code == THRESHOLDED:
                ok = valid & (r >= threshold)
            else:
                ok = valid & ~avoid[req_row[idx]][:, cands]
            ok = np.where(ok.any(axis=1)[:, None], ok, valid)
            col = _uniform_pick(ok, uu)
        out[idx] = cands[col]
    return out


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True)
    def scatter_add_numba(index, values, n):
        out = np.zeros(n, dtype=np.float64)
        for k in range(index.shape[0]):
            out[index[k]] += values[k]
        return out

    @njit(cache=True)
    def _pick_nth(cands, me, flags, use_flags, m):
        seen = 0
        for j in range(cands.shape[0]):
            c = cands[j]
            if c == me or (use_flags and not flags[j]):
                continue
            if seen == m:
                return c
            seen += 1
        return -1

    @njit(cache=True)
    def _select_one(code, cands, r, me, row, uk, threshold, avoid):
        n = cands.shape[0]
        n_valid = 0
        for j in range(n):
            if cands[j] != me:
                n_valid += 1
        flags = np.zeros(n, dtype=np.bool_)
        if code == WTA:
            best = -1
            best_r = -np.inf
            for j in range(n):
                if cands[j] != me and r[j] > best_r:
                    best = cands[j]
                    best_r = r[j]
            return best
        if code == ROULETTE:
            total = 0.0
            for j in range(n):
                if cands[j] != me:
                    total += r[j]
            if total > 0.0:
                target = uk * total
                cum = 0.0
                last = -1
                for j in range(n):
                    if cands[j] == me:
                        continue
                    cum += r[j]
                    last = cands[j]
                    if cum > target:
                        return cands[j]
                return last
            m = min(int(uk * n_valid), n_valid - 1)
            return _pick_nth(cands, me, flags, False, m)
        n_ok = 0
        for j in range(n):
            if cands[j] == me:
                continue
            if code == THRESHOLDED:
                flags[j] = r[j] >= threshold
            else:
                flags[j] = not avoid[row, cands[j]]
            if flags[j]:
                n_ok += 1
        if n_ok == 0:
            m = min(int(uk * n_valid), n_valid - 1)
            return _pick_nth(cands, me, flags, False, m)
        m = min(int(uk * n_ok), n_ok - 1)
        return _pick_nth(cands, me, flags, True, m)

    @njit(cache=True)
    def select_batch_numba(code, cand_ptr, cand_ids, ranks, req_good, req_self,
                           req_row, u, threshold, avoid):
        out = np.empty(req_good.shape[0], dtype=np.int64)
        for k in range(req_good.shape[0]):
            g = req_good[k]
            cands = cand_ids[cand_ptr[g]:cand_ptr[g + 1]]
            r = ranks[cands]
            out[k] = _select_one(code, cands, r, req_self[k], req_row[k], u[k],
                                 threshold, avoid)
        return out

    scatter_add = scatter_add_numba
    select_batch = select_batch_numba
    BACKEND = "numba"
else:
    scatter_add = scatter_add_numpy
    select_batch = select_batch_numpy
    BACKEND = "numpy"
