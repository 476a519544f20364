import pytest

import cgadam.kernels as kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compile once so timed acceptance sections see steady-state cost
    kernels.warmup()


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    previous = kernels.set_backend(request.param)
    kernels.warmup()
    yield request.param
    kernels.ACTIVE = previous
