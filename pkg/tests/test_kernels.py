import numpy as np
import pytest

from delaypred import _kernels
from delaypred.model import build_augmented
from delaypred.predictors import compute_gains
from delaypred.simulate import make_disturbance

from conftest import DEMO_K, DEMO_X0, REF_GAIN_R0


def kernel_args(plant, method, horizon=80):
    r = 0
    aug = build_augmented(plant, r)
    form = "modified" if method == "modified" else "standard"
    gains = compute_gains(plant, r, form)
    sig = make_disturbance("sinusoid", amplitude=0.8, rate=0.31)
    w = np.ascontiguousarray(sig.samples(horizon + plant.d))
    L = np.ascontiguousarray(REF_GAIN_R0)
    eta0 = np.concatenate([DEMO_X0, [0.0]])
    return (plant.A, plant.B_u, plant.B_w, plant.C, plant.D_w,
            np.ascontiguousarray(aug.Abar), np.ascontiguousarray(aug.Bbar_u),
            np.ascontiguousarray(aug.Cbar), L, True,
            np.ascontiguousarray(gains.Ad), gains.ApowBu, gains.ApowBw,
            np.ascontiguousarray(gains.Gamma), np.asarray(DEMO_K, dtype=float),
            w, np.zeros((plant.d, 1)), DEMO_X0.astype(float), eta0,
            _kernels.METHOD_CODES[method], horizon)


@pytest.mark.skipif(_kernels.closed_loop_jit is None,
                    reason="numba unavailable or disabled")
@pytest.mark.parametrize("method", sorted(_kernels.METHOD_CODES))
def test_jit_matches_numpy(demo_plant, method):
    args = kernel_args(demo_plant, method)
    out_np = _kernels.closed_loop_numpy(*args)
    out_jit = _kernels.closed_loop_jit(*args)
    for a, b in zip(out_np[:5], out_jit[:5]):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)
    assert out_np[5] == out_jit[5]


def test_method_codes_cover_api():
    from delaypred.predictors import METHODS
    assert set(_kernels.METHOD_CODES) == set(METHODS)


def test_dispatch_follows_environment():
    # the active kernel is the jitted one unless the flag disabled it
    if _kernels.NUMBA_DISABLED:
        assert _kernels.closed_loop is _kernels.closed_loop_numpy
    elif _kernels.closed_loop_jit is not None:
        assert _kernels.closed_loop is _kernels.closed_loop_jit


def test_numpy_path_runs_standalone(demo_plant):
    out = _kernels.closed_loop_numpy(*kernel_args(demo_plant, "classical", horizon=40))
    X = out[0]
    assert X.shape == (41, 2)
    assert np.all(np.isfinite(X))
