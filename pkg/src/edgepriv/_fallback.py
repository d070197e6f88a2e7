"""Pure-Python versions of the compiled kernels (same signatures, same results)."""
import numpy as np


def rk4_affine(M, forcing, z0, h, nsteps):
    """Classical RK4 for z' = M z + g(t) with g tabulated on the half-step grid.

    ``forcing`` has shape (2*nsteps + 1, d); row 2k is g(t_k), row 2k+1 is
    g(t_k + h/2). Returns the (nsteps + 1, d) array of states.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    G = np.ascontiguousarray(forcing, dtype=np.float64)
    d = M.shape[0]
    if M.shape[1] != d or G.shape[1] != d or G.shape[0] != 2 * nsteps + 1:
        raise ValueError("shape mismatch between M, forcing and nsteps")
    z = np.array(z0, dtype=np.float64, copy=True)
    if z.shape[0] != d:
        raise ValueError("initial state has wrong length")
    out = np.empty((nsteps + 1, d))
    out[0] = z
    half = 0.5 * h
    sixth = h / 6.0
    for n in range(nsteps):
        k1 = M @ z + G[2 * n]
        k2 = M @ (z + half * k1) + G[2 * n + 1]
        k3 = M @ (z + half * k2) + G[2 * n + 1]
        k4 = M @ (z + h * k3) + G[2 * n + 2]
        z = z + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n + 1] = z
    return out


def iterate_linear(W, x0, nsteps):
    """States x_0..x_nsteps of x_{k+1} = W x_k, shape (nsteps + 1, n)."""
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    if W.shape[1] != n:
        raise ValueError("W must be square")
    x = np.asarray(x0, dtype=np.float64)
    if x.shape[0] != n:
        raise ValueError("initial state has wrong length")
    out = np.empty((nsteps + 1, n))
    out[0] = x
    for k in range(nsteps):
        out[k + 1] = W @ out[k]
    return out
