import numpy as np
import pytest

from wrdesign import exponential_scenario

# three-endpoint design of the simulation study
LAMBDA_C3 = (0.00057, 0.0018, 0.0015)
EFFECTS3 = ((0.2, 0.3, 0.1), (0.1, 0.2, 0.3), (0.2, 0.2, 0.2))
DROPOUT = 0.00015
ACCRUAL = 200.0


def three_endpoint(effects, tau, s, **kw):
    return exponential_scenario(
        LAMBDA_C3, effects=effects, tau=tau, study_length=s, accrual_length=ACCRUAL,
        dropout_hazard=DROPOUT, **kw,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
