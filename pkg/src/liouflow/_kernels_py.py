"""Pure numpy fallback for the compiled kernels in ``_ckernels.pyx``."""
import numpy as np


def rk4_affine(A, b, X0, dt, nsteps, stride):
    """Classical RK4 for ``x_dot = A x + b`` on a batch of states.

    ``X0`` has shape ``(m, d)``; returns states every ``stride`` steps, shape
    ``(nsteps // stride + 1, m, d)``, the first record being ``X0``.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    X = np.array(X0, dtype=np.float64)
    AT = A.T
    out = np.empty((nsteps // stride + 1,) + X.shape)
    out[0] = X
    rec = 1
    half = 0.5 * dt
    for step in range(1, nsteps + 1):
        k1 = X @ AT + b
        k2 = (X + half * k1) @ AT + b
        k3 = (X + half * k2) @ AT + b
        k4 = (X + dt * k3) @ AT + b
        X = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % stride == 0:
            out[rec] = X
            rec += 1
    return out
