import numpy as np
import pytest

import tomokit as tk


@pytest.fixture(scope="session")
def r16():
    return tk.build_r16()


@pytest.fixture(scope="session")
def j16():
    return tk.build_j16()


@pytest.fixture(scope="session")
def b144():
    return tk.build_b144()


@pytest.fixture(scope="session")
def builtins(r16, j16, b144):
    return {"r16": r16, "j16": j16, "b144": b144}


@pytest.fixture(scope="session")
def phi_minus():
    return tk.bell_phi_minus()


@pytest.fixture(scope="session")
def vv_state():
    return tk.family_state(0.0, 1.0, 0.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
