import pytest

from iqpbp import _accel


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT-compile hot kernels once so timed checks measure steady-state work
    _accel.warm_up()
