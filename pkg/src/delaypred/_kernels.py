"""Hot simulation kernel: one full closed-loop run per call.

The step loop is sequential in time and cannot be vectorized, so it is the
single hot spot of sweeps and Monte Carlo studies. The same function body
is compiled with numba when available; setting DELAYPRED_NO_NUMBA=1 in the
environment selects the pure-numpy path instead. Both variants stay
importable for equivalence tests and benchmarks.
"""

import os

import numpy as np

METHOD_CODES = {
    "exact": 0,
    "classical": 1,
    "proposed": 2,
    "modified": 3,
    "wu1": 4,
    "wu2": 5,
}

DIVERGENCE_LIMIT = 1e12


def _closed_loop_core(A, Bu, Bw, C, Dw, Abar, Bbar_u, Cbar, L, has_obs,
                      Ad, ApowBu, ApowBw, Gamma, K, w_arr, u_init, x0, eta0,
                      method, N):
    n_p = A.shape[0]
    m_u = Bu.shape[1]
    m_y = C.shape[0]
    n = Abar.shape[0]
    d = ApowBu.shape[0]

    # U_all[t + d] holds u(t); the first d slots are the pre-horizon history
    U_all = np.zeros((N + 1 + d, m_u))
    U_all[:d] = u_init
    X = np.zeros((N + 1, n_p))
    X[0] = x0
    ETA = np.zeros((N + 1, n))
    ETA[0] = eta0
    XHAT = np.zeros((N + 1, n_p))
    U = np.zeros((N + 1, m_u))
    EY = np.zeros((N + 1, m_y))
    XP = np.zeros((N + 1, n_p))
    XP1 = np.zeros((N + 1, n_p))
    div_step = -1

    for k in range(N + 1):
        x = X[k]
        if np.sqrt(np.sum(x * x)) > DIVERGENCE_LIMIT:
            div_step = k
            break
        w_k = w_arr[k]
        y = C @ x + Dw @ w_k

        s_u = np.zeros(n_p)
        for j in range(1, d + 1):
            s_u = s_u + ApowBu[j - 1] @ U_all[k + d - j]

        if method == 0:
            xh = Ad @ x + s_u
            for j in range(1, d + 1):
                xh = xh + ApowBw[j - 1] @ w_arr[k + d - j]
        elif method == 1:
            xh = Ad @ x + s_u
        elif method == 2:
            xh = Gamma @ ETA[k] + s_u
        elif method == 3:
            xh = Ad @ y + Gamma @ ETA[k] + s_u
        else:
            xp = Ad @ x + s_u
            XP[k] = xp
            if k >= d:
                xp1 = xp + x - XP[k - d]
            else:
                xp1 = xp + x
            XP1[k] = xp1
            if method == 4:
                xh = xp1
            elif k >= d:
                xh = xp1 + x - XP1[k - d]
            else:
                xh = xp1 + x

        XHAT[k] = xh
        u_k = K @ xh
        U[k] = u_k
        U_all[k + d] = u_k
        ey = y - Cbar @ ETA[k]
        EY[k] = ey

        if k < N:
            X[k + 1] = A @ x + Bu @ U_all[k] + Bw @ w_k
            if has_obs:
                ETA[k + 1] = Abar @ ETA[k] + Bbar_u @ U_all[k] + L @ ey

    return X, ETA, XHAT, U, EY, div_step


closed_loop_numpy = _closed_loop_core
closed_loop_jit = None

_flag = os.environ.get("DELAYPRED_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        from numba import njit

        closed_loop_jit = njit(cache=True)(_closed_loop_core)
    except ImportError:
        closed_loop_jit = None

USING_NUMBA = closed_loop_jit is not None
closed_loop = closed_loop_jit if USING_NUMBA else closed_loop_numpy
