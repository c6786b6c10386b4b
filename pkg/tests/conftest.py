import numpy as np
import pytest

from delaypred import PlantModel

# Benchmark system: unstable 2-state oscillator with a 5-sample input delay,
# full state measurement, and a matched disturbance.
DEMO_A = np.array([[0.0, 1.0], [3.2, -1.4]])
DEMO_BU = np.array([[0.0], [1.0]])
DEMO_BW = np.array([[0.0], [1.0]])
DEMO_D = 5
DEMO_K = np.array([[-3.14, 1.5]])
DEMO_X0 = np.array([1.5, 1.0])

# Published stabilizing observer gains for the benchmark system (r=0 with a
# constant disturbance, r=4 with a sinusoid), used for replication runs.
REF_GAIN_R0 = np.array([[-0.3899, 3.2000, -0.0000],
                        [1.0000, -0.7314, 0.8621]]).T
REF_GAIN_R4 = np.vstack([
    np.array([[-0.3901, 3.1998], [1.0000, 1.6621]]).T,
    np.array([[-0.0005, -0.0006, -0.0005, -0.0003, -0.0001],
              [7.8420, 8.5803, 5.5770, 2.0116, 0.3137]]).T,
])

SIN_AMPLITUDE = 0.6
SIN_RATE = 1.35 / (2.0 * np.pi)


@pytest.fixture
def demo_plant():
    return PlantModel(A=DEMO_A, B_u=DEMO_BU, B_w=DEMO_BW,
                      C=np.eye(2), D_w=np.zeros((2, 1)), d=DEMO_D)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_plant(rng, n_p=None, d=None, m_u=1, q=1, measured=False):
    """Random well-scaled plant for property tests."""
    n_p = n_p or int(rng.integers(1, 5))
    d = d or int(rng.integers(1, 9))
    A = rng.uniform(-1.0, 1.0, (n_p, n_p))
    A *= 0.9 / max(np.abs(np.linalg.eigvals(A)).max(), 0.5)
    B_u = rng.uniform(-1.0, 1.0, (n_p, m_u))
    B_w = rng.uniform(-1.0, 1.0, (n_p, q))
    if measured:
        C = np.eye(n_p)
        D_w = np.zeros((n_p, q))
    else:
        C = rng.uniform(-1.0, 1.0, (max(1, n_p - 1), n_p))
        D_w = rng.uniform(-0.5, 0.5, (max(1, n_p - 1), q))
    return PlantModel(A=A, B_u=B_u, B_w=B_w, C=C, D_w=D_w, d=d)


def dyadic_coefficients(rng, degree):
    """Random polynomial coefficients exactly representable in binary, so the
    finite-difference identities hold without rounding."""
    ints = rng.integers(-9, 10, degree + 1).astype(float)
    if ints[-1] == 0.0:
        ints[-1] = 1.0
    return ints * 2.0 ** float(rng.integers(-3, 4))
