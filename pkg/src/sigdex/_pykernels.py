"""Pure-python twins of the compiled kernels.

Semantics must match ``sigdex._ckernels`` exactly: same saturation clamps,
same reduction topology (the pairwise tree is part of the determinism
contract, not an implementation detail).
"""

import math

EXP_CLAMP = 700.0


def spline_eval(starts, bases, slopes, clamps, cap, k):
    """Evaluate a piecewise-linear position model at key ``k``.

    Each segment i covers keys in [starts[i], starts[i+1]) and maps them to
    bases[i] + slopes[i]*(k - starts[i]), clamped into [bases[i], clamps[i]]
    so the overall curve is monotone, then into [0, cap-1].
    """
    n = len(starts)
    seg = 0
    lo, hi = 0, n - 1
    while lo <= hi:
        mid = (lo + hi) >> 1
        if starts[mid] <= k:
            seg = mid
            lo = mid + 1
        else:
            hi = mid - 1
    y = bases[seg] + slopes[seg] * (k - starts[seg])
    if y < bases[seg]:
        y = bases[seg]
    if y > clamps[seg]:
        y = clamps[seg]
    top = cap - 1.0
    if y < 0.0:
        y = 0.0
    if y > top:
        y = top
    return y


def sigmoid_fill(k, amps, omegas, phis, out, lo, hi):
    """Fill out[lo:hi] with amplitude-scaled logistic values at key ``k``.

    Saturates exactly to 0 or the amplitude once the exponent magnitude
    exceeds EXP_CLAMP; zero-amplitude entries contribute exactly 0.0.
    """
    for i in range(lo, hi):
        a = amps[i]
        if a <= 0.0:
            out[i] = 0.0
            continue
        z = omegas[i] * (k - phis[i])
        if z >= EXP_CLAMP:
            out[i] = a
        elif z <= -EXP_CLAMP:
            out[i] = 0.0
        else:
            out[i] = a / (1.0 + math.exp(-z))


def pairwise_sum(values, lo=0, hi=-1):
    """Fixed-topology pairwise reduction of values[lo:hi].

    The split point is always len//2, so the float result is identical no
    matter how many workers filled the buffer.
    """
    if hi < 0:
        hi = len(values)
    n = hi - lo
    if n <= 0:
        return 0.0
    if n == 1:
        return values[lo]
    if n == 2:
        return values[lo] + values[lo + 1]
    mid = lo + (n >> 1)
    return pairwise_sum(values, lo, mid) + pairwise_sum(values, mid, hi)


def locate_window(keys, occ, lo, hi, k):
    """Gapped binary search over slots [lo, hi].

    Returns (pred, exact, succ): the occupied slot holding the greatest
    key < k, the slot holding k, and the occupied slot holding the least
    key > k, each -1 when absent in the window. On an exact hit pred/succ
    are not resolved further.
    """
    pred = -1
    succ = -1
    left, right = lo, hi
    while left <= right:
        mid = (left + right) >> 1
        probe = mid
        while probe >= left and occ[probe] == 0:
            probe -= 1
        if probe < left:
            left = mid + 1
            continue
        km = keys[probe]
        if km == k:
            return (pred, probe, succ)
        if km < k:
            pred = probe
            left = mid + 1
        else:
            succ = probe
            right = probe - 1
    return (pred, -1, succ)


def next_free_right(occ, start, cap, limit):
    """First NULL slot at index >= start, scanning at most ``limit`` slots."""
    end = start + limit
    if end > cap:
        end = cap
    i = start
    while i < end:
        if occ[i] == 0:
            return i
        i += 1
    return -1


def next_occupied(occ, start, cap):
    i = start
    while i < cap:
        if occ[i] != 0:
            return i
        i += 1
    return -1


def prev_occupied(occ, start, lo):
    i = start
    while i >= lo:
        if occ[i] != 0:
            return i
        i -= 1
    return -1
