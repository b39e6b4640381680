"""Pure-Python implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation, so both backends
return bit-identical results. Used when the extension is not built or when
``MOTTK_PURE_PYTHON=1`` is set.
"""
import numpy as np

# relative tolerance for treating a reduced cost as zero in the tie-break pass
TIGHT_RTOL = 1e-9


def iou_matrix(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    al, at = a[:, None, 0], a[:, None, 1]
    ar, ab = al + a[:, None, 2], at + a[:, None, 3]
    bl, bt = b[None, :, 0], b[None, :, 1]
    br, bb = bl + b[None, :, 2], bt + b[None, :, 3]
    iw = np.minimum(ar, br) - np.maximum(al, bl)
    ih = np.minimum(ab, bb) - np.maximum(at, bt)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (ar - al) * (ab - at) + (br - bl) * (bb - bt) - inter
    return inter / union


def giou_matrix(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    al, at = a[:, None, 0], a[:, None, 1]
    ar, ab = al + a[:, None, 2], at + a[:, None, 3]
    bl, bt = b[None, :, 0], b[None, :, 1]
    br, bb = bl + b[None, :, 2], bt + b[None, :, 3]
    iw = np.minimum(ar, br) - np.maximum(al, bl)
    ih = np.minimum(ab, bb) - np.maximum(at, bt)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (ar - al) * (ab - at) + (br - bl) * (bb - bt) - inter
    enclosing = (np.maximum(ar, br) - np.minimum(al, bl)) * (np.maximum(ab, bb) - np.minimum(at, bt))
    return inter / union - (enclosing - union) / enclosing


def _hungarian(a, n):
    """Shortest augmenting path Hungarian on a square ``n x n`` list matrix.

    Returns the row->column matching and the dual potentials (1-based, as in
    the classic formulation).
    """
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of = [0] * n
    for j in range(1, n + 1):
        col_of[p[j] - 1] = j - 1
    return col_of, u, v


def _lexicographic(a, n, col_of, u, v):
    """Rotate an optimal matching into the lexicographically smallest one.

    Every optimal matching lives on the tight edges of an optimal dual, so
    for each row in turn we pick the smallest tight column that an
    alternating path over the not-yet-fixed rows can hand over.
    """
    scale = 1.0
    for row in a:
        for x in row:
            if abs(x) > scale:
                scale = abs(x)
    tol = TIGHT_RTOL * scale
    tight = [[a[i][j] - u[i + 1] - v[j + 1] <= tol for j in range(n)] for i in range(n)]
    row_of = [0] * n
    for i in range(n):
        row_of[col_of[i]] = i
    for r in range(n):
        c0 = col_of[r]
        reach = [False] * n
        seen = [False] * n
        next_col = [-1] * n
        reach[c0] = True
        queue = [c0]
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            for i in range(r + 1, n):
                if not seen[i] and col_of[i] != j and tight[i][j]:
                    seen[i] = True
                    next_col[i] = j
                    cj = col_of[i]
                    if not reach[cj]:
                        reach[cj] = True
                        queue.append(cj)
        trow = tight[r]
        c = 0
        while not (trow[c] and reach[c]):
            c += 1
        if c == c0:
            continue
        i = row_of[c]
        col_of[r] = c
        row_of[c] = r
        while True:
            j = next_col[i]
            nxt = row_of[j]
            col_of[i] = j
            row_of[j] = i
            if j == c0:
                break
            i = nxt
    return col_of


def solve_lsa(cost):
    """Minimum-cost assignment on a finite float64 matrix.

    Returns ``(rows, cols)`` index lists of length ``min(shape)``, sorted by
    row, forming the lexicographically smallest optimal matching.
    """
    cost = np.asarray(cost, dtype=np.float64)
    nr, nc = cost.shape
    if nr == 0 or nc == 0:
        return [], []
    n = max(nr, nc)
    a = [[0.0] * n for _ in range(n)]
    for i, row in enumerate(cost.tolist()):
        a[i][:nc] = row
    col_of, u, v = _hungarian(a, n)
    col_of = _lexicographic(a, n, col_of, u, v)
    rows, cols = [], []
    for i in range(nr):
        if col_of[i] < nc:
            rows.append(i)
            cols.append(col_of[i])
    return rows, cols
