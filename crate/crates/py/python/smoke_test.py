"""Smoke test for the ncprob extension module.

    pip install --no-build-isolation ./crates/py
    python crates/py/python/smoke_test.py
"""

import cmath
import json
import pathlib

import ncprob

ROOT = pathlib.Path(__file__).resolve().parents[2]


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    for omega in (1, 1j, -1, cmath.exp(1j * cmath.pi / 3)):
        m = ncprob.Model.codomain_perturbed(omega, 4)
        assert close(m.psi_moment([0, 1, 0, 1], [1, 1, 1, 1]), omega.real if isinstance(omega, complex) else omega)
        assert close(m.psi_moment([2, 3, 2, 3], [1, 1, 1, 1]), 1)
        v = m.check_symmetry("stationary", 4)
        assert v["pass"] == (omega == 1), (omega, v["max_violation"])

    iid = ncprob.Model.iid_tensor(8)
    for n in (2, 4, 8):
        assert close(iid.sn_moment(1, 4, n), 3 - 2 / n, 1e-10)
        assert close(iid.sn_moment(1, 4, n, method="bruteforce"), 3 - 2 / n, 1e-10)
    assert close(iid.clt_limit(1, 4)["limit"], 3)

    coin = ncprob.Model.coin_mixture([(0.3, 0.5), (0.7, 0.5)], 4)
    assert coin.check_independence("CI", "fiber_scalars", 2, 1e-10)["pass"]
    plain = coin.check_independence("CI", "scalars", 1, 1e-10)
    assert not plain["pass"] and close(plain["max_violation"], 0.04, 1e-10)

    yb = ncprob.Model.yang_baxter(cmath.exp(1j * cmath.pi / 3), 5)
    assert yb.check_symmetry("spreadable", 3)["pass"]
    assert ncprob.braid_residual(1j) <= 1e-12

    assert ncprob.canon("order", [4, 9, 4]) == [0, 1, 0]
    assert not ncprob.are_equivalent("order", [1, 3, 1, 3, 4, 2, 4, 2, 4], [1, 3, 1, 3, 5, 3, 5, 3, 5])
    assert ncprob.double_factorial(6) == 15
    assert ncprob.reference_moment("semicircle", 6) == 5

    names = ncprob.shipped_scenarios()
    assert len(names) >= 8
    code, report = ncprob.run_scenario("definetti_counterexample")
    assert code == 0 and report["status"] == "pass"
    assert "degree" in ncprob.describe("spreadable")

    try:
        ncprob.Model.iid_tensor(0)
    except ValueError:
        pass
    else:
        raise AssertionError("window 0 accepted")

    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        schema = json.loads((ROOT / "core/docs/scenario.schema.json").read_text())
        for path in sorted((ROOT / "core/scenarios").glob("*.json")):
            jsonschema.validate(json.loads(path.read_text()), schema)

    print(f"smoke test ok ({len(names)} shipped scenarios)")


if __name__ == "__main__":
    main()
