"""Pure-NumPy Kaczmarz sweeps, used when the compiled extension is unavailable.

Both routines run the regularized Kaczmarz step

    eta = (e_target[r] - <h_r, m> - gamma * n[r]) / (||h_r||^2 + delta)
    m  <- m + eta * h_r,     n[r] <- n[r] + eta

over a pre-drawn row sequence. ``kaczmarz_primal`` keeps m explicitly;
``kaczmarz_dual`` keeps only n and uses <h_r, m> = (G n)[r] with the Gram matrix
G = H^H H, which is the same trajectory because m = H n throughout.
"""

import numpy as np


def kaczmarz_primal(hrows, rows, target, gamma, delta, ref=None):
    hrows = np.ascontiguousarray(hrows, dtype=np.complex128)
    k, length = hrows.shape
    norms = np.einsum("ij,ij->i", hrows.real, hrows.real) + np.einsum("ij,ij->i", hrows.imag, hrows.imag)
    m = np.zeros(length, dtype=np.complex128)
    n = np.zeros(k, dtype=np.complex128)
    hist = None if ref is None else np.empty(len(rows))
    for t, r in enumerate(rows):
        h = hrows[r]
        num = (1.0 if r == target else 0.0) - np.vdot(h, m) - gamma * n[r]
        eta = num / (norms[r] + delta)
        m += eta * h
        n[r] += eta
        if hist is not None:
            hist[t] = np.linalg.norm(m - ref)
    return m, n, hist


def kaczmarz_dual(gram, targets, rows, gamma, delta):
    """All columns advance together; column c follows its own row sequence rows[c]."""
    gram = np.ascontiguousarray(gram, dtype=np.complex128)
    rows = np.asarray(rows)
    cols, steps = rows.shape
    k = gram.shape[0]
    targets = np.asarray(targets)
    n = np.zeros((cols, k), dtype=np.complex128)
    diag = gram.real.diagonal()
    ci = np.arange(cols)
    for t in range(steps):
        r = rows[:, t]
        inner = np.einsum("cj,cj->c", gram[r], n)
        num = (r == targets).astype(np.float64) - inner - gamma * n[ci, r]
        n[ci, r] += num / (diag[r] + delta)
    return n
