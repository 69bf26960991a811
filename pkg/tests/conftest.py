import math
import os

import pytest
from hypothesis import HealthCheck, settings

from fatigue_pf import constitutive as C

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def kh_spec_1d(E=205e3, sigma_p=100.0, H_kin=22777.78, H_iso=0.0, beta=0.0, **kw):
    kw.setdefault("w0", 1e12)
    return C.MaterialSpec.from_young(E, 0.0, surfaces=(C.SurfaceParams(sigma_p, H_kin, H_iso),),
                                     beta=beta, uniaxial=True, **kw)


def disp_table_spec(H_iso=(0.0, 0.0), beta=0.0, w0=1e12, gamma0=math.inf, k=0.7):
    """Multi-surface 1D material of the displacement-controlled point tests."""
    surf = C.linear_surfaces(10, (0.4, 0.7), (8.0, 0.73), H_iso)
    return C.MaterialSpec.from_young(1.0, 0.0, surfaces=surf, w0=w0, damage_model="AT1", beta=beta,
                                     gamma0=gamma0, k=k, uniaxial=True)


def force_table_spec(H_iso=(0.0, 0.0), beta=0.0, w0=1e12, gamma0=math.inf):
    surf = C.linear_surfaces(20, (0.6, 1.4), (100.0, 9.09), H_iso)
    return C.MaterialSpec.from_young(10.0, 0.0, surfaces=surf, w0=w0, damage_model="AT1", beta=beta,
                                     gamma0=gamma0, k=0.4, uniaxial=True)


def notched_spec(**kw):
    K, nu = 71659.46, 0.331
    mu = 3 * K * (1 - 2 * nu) / (2 * (1 + nu))
    base = dict(K=K, mu=mu, surfaces=(C.SurfaceParams(345.0, 2500.0, 0.0),), w0=1190.3, eta_d=2.217,
                gamma0=2800.0, k=0.4, eta_p=4.0, beta=0.4, damage_model="AT1")
    base.update(kw)
    return C.MaterialSpec(**base)


@pytest.fixture
def steel():
    return C.MaterialSpec.from_young(
        200e3, 0.3, surfaces=C.linear_surfaces(3, (200.0, 300.0), (20e3, 5e3), (100.0, 10.0)),
        w0=50.0, beta=0.3, damage_model="AT2",
    )
