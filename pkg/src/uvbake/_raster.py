"""Shared scan-conversion kernels.

Triangles are expanded into (face, pixel) candidates over their bounding
boxes in batches, then reduced per pixel with a total order so the winner
never depends on how the faces were partitioned across workers.
"""

import numpy as np

from uvbake.parallel import map_chunks

BATCH_CANDIDATES = 1 << 22


def bbox_ranges(xs, ys, width, height):
    """Inclusive pixel-index ranges whose centres (i + 0.5) fall in each face's bbox."""
    x0 = np.maximum(np.ceil(xs.min(axis=1) - 0.5), 0).astype(np.int64)
    x1 = np.minimum(np.floor(xs.max(axis=1) - 0.5), width - 1).astype(np.int64)
    y0 = np.maximum(np.ceil(ys.min(axis=1) - 0.5), 0).astype(np.int64)
    y1 = np.minimum(np.floor(ys.max(axis=1) - 0.5), height - 1).astype(np.int64)
    nx = np.maximum(x1 - x0 + 1, 0)
    ny = np.maximum(y1 - y0 + 1, 0)
    return x0, y0, nx, ny


def iter_candidates(faces, x0, y0, nx, ny, limit=BATCH_CANDIDATES):
    """Yield (face_ids, ix, iy) arrays, batching faces so each batch stays near `limit`."""
    counts = nx * ny
    keep = counts > 0
    faces, x0, y0, nx, counts = faces[keep], x0[keep], y0[keep], nx[keep], counts[keep]
    if len(faces) == 0:
        return
    csum = np.cumsum(counts)
    start = 0
    while start < len(faces):
        base = csum[start] - counts[start]
        stop = int(np.searchsorted(csum, base + limit, side="right"))
        stop = max(stop, start + 1)
        c = counts[start:stop]
        idx = np.repeat(np.arange(start, stop), c)
        offs = np.arange(int(c.sum()), dtype=np.int64) - np.repeat(np.cumsum(c) - c, c)
        w = nx[idx]
        yield faces[idx], x0[idx] + offs % w, y0[idx] + offs // w
        start = stop


def reduce_min(pix, key, face):
    """Indices of per-pixel winners under the order (key ascending, face ascending)."""
    if len(pix) == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((face, key, pix))
    ps = pix[order]
    first = np.ones(len(ps), dtype=bool)
    first[1:] = ps[1:] != ps[:-1]
    return order[first]


def rasterize_reduce(n_faces, kernel, workers=None):
    """Merge per-pixel winners of kernel(face_start, face_stop) over face partitions.

    The kernel yields batches of (pix, key, face, *payload) arrays; the result
    is the winning (pix, key, face, *payload) arrays or None if nothing was hit.
    """

    def run(a, b):
        acc = None
        for part in kernel(a, b):
            acc = _merge([acc, part])
        return acc

    chunks = map_chunks(run, n_faces, workers)
    return _merge(chunks)


def _merge(parts):
    parts = [p for p in parts if p is not None and len(p[0])]
    if not parts:
        return None
    cat = [np.concatenate(cols) for cols in zip(*parts)]
    win = reduce_min(cat[0], cat[1], cat[2])
    return [c[win] for c in cat]
