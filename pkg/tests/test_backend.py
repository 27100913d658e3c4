import json
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

import ajcir

WORKER = textwrap.dedent("""
    import json, sys
    import numpy as np
    from ajcir import BACKEND, preset
    from ajcir.levy_rng import RngStream, sample_subordinator_increment
    from ajcir.model import CoordinateStable, Truncated
    from ajcir.riccati import char_values, riccati_grid
    from ajcir.simulator import simulate_ensemble, weak_error_rate_experiment

    p = preset("reference2d")
    ens = simulate_ensemble(p, [1.0, 2.0], 0.5, 0.01, 300, 17, record_times=[0.25, 0.5])
    diag = simulate_ensemble(p, [1.0, 2.0], 0.5, 0.01, 50, 17, diagonal=True)
    lv = Truncated(CoordinateStable([0.6, 0.6], [0.5, 0.5]), 5.0)
    J = sample_subordinator_increment(lv, 0.05, RngStream(3, 1), size=200)
    phi, psi = riccati_grid(preset("reference1d"), (1j * np.linspace(0, 50, 40))[:, None],
                            [0.5, 1.0])
    cv = char_values(p, [1.0, 2.0], 1.0, 1j * np.array([[1.0, -1.0], [2.0, 0.5]]))
    rates = weak_error_rate_experiment(p, [1.0, 2.0], 0.5, [0.1, 0.05], n_paths=100,
                                       seed=2, ref_factor=5)
    print(json.dumps({"backend": BACKEND, "ens": ens.states.tolist(),
                      "diag": diag.terminal.tolist(), "J": J.tolist(),
                      "psi": [[z.real, z.imag] for z in psi.ravel()],
                      "cv": [[z.real, z.imag] for z in cv],
                      "rates": rates.moment.tolist()}))
""")


def _run(backend):
    env = dict(os.environ, AJCIR_BACKEND=backend)
    env.pop("AJCIR_DISABLE_NUMBA", None)
    res = subprocess.run([sys.executable, "-c", WORKER], env=env, capture_output=True,
                         text=True, timeout=900)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def both():
    return _run("numba"), _run("numpy")


def test_backend_flag_is_honoured(both):
    fast, slow = both
    assert fast["backend"] == ajcir.BACKEND == "numba"
    assert slow["backend"] == "numpy"


def test_paths_agree_across_backends(both):
    fast, slow = both
    for key in ("ens", "diag", "J", "rates"):
        a, b = np.array(fast[key]), np.array(slow[key])
        assert a.shape == b.shape
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14), key


def test_riccati_agrees_across_backends(both):
    fast, slow = both
    for key in ("psi", "cv"):
        assert np.allclose(fast[key], slow[key], rtol=1e-7, atol=1e-10), key


def test_disable_flag_selects_numpy():
    env = dict(os.environ, AJCIR_DISABLE_NUMBA="1")
    env.pop("AJCIR_BACKEND", None)
    res = subprocess.run([sys.executable, "-c", "import ajcir; print(ajcir.BACKEND)"],
                         env=env, capture_output=True, text=True)
    assert res.stdout.strip() == "numpy"
