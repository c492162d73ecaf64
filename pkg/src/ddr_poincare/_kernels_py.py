"""Pure numpy versions of the hot kernels (fallback when the extension is absent)."""
import numpy as np


def vandermonde(xi, exps):
    """Monomial values: out[p, j] = prod_d xi[p, d] ** exps[j, d]."""
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    npts, dim = xi.shape
    nmon = exps.shape[0]
    if nmon == 0:
        return np.zeros((npts, 0))
    maxdeg = int(exps.max()) if exps.size else 0
    # powers[d, k, p] = xi[p, d] ** k
    powers = np.ones((dim, maxdeg + 1, npts))
    for k in range(1, maxdeg + 1):
        powers[:, k, :] = powers[:, k - 1, :] * xi.T
    out = np.ones((npts, nmon))
    for d in range(dim):
        out *= powers[d, exps[:, d], :].T
    return out


def whitney_local(coords):
    """Batched lowest-order simplicial data for simplices coords[m, 4, 3].

    Returns (vol, grads, M0, M1, M2) with vol the unsigned volumes, grads the
    barycentric gradients (m, 4, 3), M0 the P1 mass (m, 4, 4), M1 the mass of
    the edge functions lam_i grad lam_j - lam_j grad lam_i in lexicographic
    edge order (m, 6, 6), and M2 the Gram of (x - x_l) over l = 0..3 (m, 4, 4),
    the unnormalized face functions.
    """
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    m = coords.shape[0]
    jac = coords[:, 1:, :] - coords[:, :1, :]
    det = np.linalg.det(jac)
    vol = np.abs(det) / 6.0
    inv = np.linalg.inv(jac)
    grads = np.empty((m, 4, 3))
    grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    ll = (np.ones((4, 4)) + np.eye(4)) / 20.0
    M0 = vol[:, None, None] * ll[None]
    gg = np.einsum("mad,mbd->mab", grads, grads)
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    M1 = np.empty((m, 6, 6))
    for a, (i, j) in enumerate(edges):
        for b, (k, l) in enumerate(edges):
            M1[:, a, b] = vol * (ll[i, k] * gg[:, j, l] - ll[i, l] * gg[:, j, k]
                                 - ll[j, k] * gg[:, i, l] + ll[j, l] * gg[:, i, k])
    # int (x - x_l).(x - x_n) = sum_ij (x_i - x_l).(x_j - x_n) int lam_i lam_j
    M2 = np.empty((m, 4, 4))
    for l in range(4):
        dl = coords - coords[:, l:l + 1, :]
        for n in range(4):
            dn = coords - coords[:, n:n + 1, :]
            M2[:, l, n] = vol * np.einsum("mid,ij,mjd->m", dl, ll, dn)
    return vol, grads, M0, M1, M2
