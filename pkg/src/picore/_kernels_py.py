"""Pure-Python kernels; same contract and witness order as the compiled module."""
import numpy as np


def compose(a, b):
    """Boolean product of two 0/1 uint8 matrices."""
    if a.shape[0] == 0 or b.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    return (a.astype(np.float32) @ b.astype(np.float32) > 0).astype(np.uint8)


def grouped_mismatch(e1, e2, ob, group):
    """First ``(r1, c1, r2, c2)`` with equal row groups and ``ob[c1] != ob[c2]``.

    Rows with ``group < 0`` are skipped. Rows are scanned in increasing order
    and each side of a group keeps at most two distinct observations, so the
    witness is the first one visible after some row completes.
    """
    side1, side2 = {}, {}
    for r in range(e1.shape[0]):
        g = int(group[r])
        if g < 0:
            continue
        changed = _collect(side1.setdefault(g, []), r, e1[r], ob)
        changed |= _collect(side2.setdefault(g, []), r, e2[r], ob)
        if changed:
            for r1, c1, o1 in side1[g]:
                for r2, c2, o2 in side2[g]:
                    if o1 != o2:
                        return (r1, c1, r2, c2)
    return None


def _collect(slots, r, row, ob):
    changed = False
    for c in np.flatnonzero(row):
        if len(slots) == 2:
            break
        o = int(ob[c])
        if all(o != s[2] for s in slots):
            slots.append((r, int(c), o))
            changed = True
    return changed
