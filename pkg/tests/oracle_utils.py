"""Dense, from-first-principles linear algebra oracles shared by tests.

Everything here is built independently of the package's operator code:
explicit DFT matrices, permutation shifts, Kronecker products.  Slow and
memory-hungry by design; only used at small sizes.
"""

import numpy as np


def centered_dft(n: int) -> np.ndarray:
    """Unitary DFT matrix with DC at index n//2 on both sides."""
    k = np.arange(n) - n // 2
    x = np.arange(n) - n // 2
    return np.exp(-2j * np.pi * np.outer(k, x) / n) / np.sqrt(n)


def dense_encoding_matrix(maps: np.ndarray, shifts, mask: np.ndarray) -> np.ndarray:
    """Rows of the full measurement operator: slice stack vec -> sampled k-space.

    maps is (C, MB, H, W) with whole-pixel shift fractions; mask is the
    (MB*H, W) sampling mask.  Returns (C * n_sampled, MB*H*W) complex.
    """
    c, mb, h, w = maps.shape
    n = mb * h * w
    # reorder: per-slice circular column shift (exact permutation), then the
    # row-major stack vec *is* the extended-image vec
    r_mat = np.zeros((n, n))
    for s in range(mb):
        delta = int(round(shifts[s] * w))
        perm = np.roll(np.eye(w), delta, axis=0)  # out[j] = in[j - delta]
        block = np.kron(np.eye(h), perm)
        r_mat[s * h * w : (s + 1) * h * w, s * h * w : (s + 1) * h * w] = block
    f2 = np.kron(centered_dft(mb * h), centered_dft(w))
    keep = mask.ravel()
    rows = []
    for ci in range(c):
        s_diag = (ops_extended_maps_vec(maps, shifts, ci))[None, :]
        rows.append((f2 * s_diag)[keep] @ r_mat)
    return np.vstack(rows)


def ops_extended_maps_vec(maps: np.ndarray, shifts, coil: int) -> np.ndarray:
    """Extended coil map as a vector: per-slice shifted maps, concatenated."""
    _, mb, h, w = maps.shape
    out = []
    for s in range(mb):
        delta = int(round(shifts[s] * w))
        out.append(np.roll(maps[coil, s], delta, axis=-1))
    return np.concatenate(out, axis=0).ravel()
