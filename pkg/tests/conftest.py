import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import ghmlab as g
from ghmlab import kernels, transfer

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def baker():
    return g.build_affine_family(2, 0.5, 0.0, "stack", k=0.5)


@pytest.fixture(scope="session")
def slanted3():
    # three branches, contraction 0.35, maximal feasible shear, overlapping images
    return g.build_affine_family(3, 0.35, "max", "spread")


@pytest.fixture(scope="session")
def stack3():
    # area-preserving three-branch tiling (no shear)
    return g.build_affine_family(3, 1.0 / 3.0, 0.0, "stack", k=0.5)


@pytest.fixture(scope="session")
def stack3_sheared():
    # non-overlapping stack with genuine shear, for straightening-chart tests
    return g.build_affine_family(3, 0.25, 0.1, "stack")


@pytest.fixture(scope="session")
def identity_map():
    return g.single_branch_map(np.eye(2))


@pytest.fixture(scope="session")
def diag_map():
    return g.single_branch_map([[2.0, 0.0], [0.0, 0.5]])


@pytest.fixture(scope="session")
def sl3_ulam64(slanted3):
    return transfer.ulam_matrix(slanted3, 64, 256, seed=0)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)
