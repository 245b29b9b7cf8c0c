import json
import math

import numpy as np
import pytest

from hallconst.kernels import DivergenceError, KernelSpec
from hallconst.pipeline import (ConstantResult, EntropyResult, ResultCache, average_entropy,
                                bures_redundancy_average, bures_redundancy_supremum, density_grid,
                                expected_eigenvalues, fit_entropy, hall_constant, quasi_constant,
                                quasi_redundancy_constant, theta_marginal_crossover_n2,
                                variant_constant, wallis_variant_n2)
from hallconst.quad import AdaptiveConfig

# Independent route: mpmath tanh-sinh integration directly over the
# eigenvalue simplex d1 >= d2 >= d3 (no angle map), 20 digits.
MP_C3 = 11.140846016458          # accurate to ~1e-11 relative
MP_C3_BETA1 = 0.58854277549572
MP_C3_BETA3 = 167.48451379896
MP_S3 = 0.50793650793662
MP_QUASI2_INTEGRAL = 1.9123273639956777


def test_c2_and_c3():
    assert hall_constant(KernelSpec(2)).constant == pytest.approx(2 / math.pi, rel=1e-12)
    r = hall_constant(KernelSpec(3))
    assert r.constant == pytest.approx(35 / math.pi, rel=1e-11)
    assert r.constant == pytest.approx(MP_C3, rel=1e-10)
    assert r.constant * r.raw_integral * r.ordering_multiplier == pytest.approx(1.0, rel=1e-15)


def test_c4():
    assert hall_constant(KernelSpec(4)).constant == pytest.approx(71680 / math.pi ** 2, rel=1e-9)


@pytest.mark.parametrize("n", [2, 3])
def test_ordered_times_factorial_is_full(n):
    o = hall_constant(KernelSpec(n))
    f = hall_constant(KernelSpec(n), region="full", cfg=AdaptiveConfig(rel_tol=1e-10))
    assert f.ordering_multiplier == 1
    assert o.raw_integral * math.factorial(n) == pytest.approx(f.raw_integral, rel=1e-6)


@pytest.mark.parametrize("n,order", [(3, [1, 0]), (4, [2, 0, 1]), (4, [1, 2, 0])])
def test_axis_order_invariance(n, order):
    a = hall_constant(KernelSpec(n))
    b = hall_constant(KernelSpec(n), axis_order=order)
    assert a.constant == pytest.approx(b.constant, rel=1e-6)


def test_odd_beta_variants_match_independent_route():
    assert variant_constant(3, 1).constant == pytest.approx(MP_C3_BETA1, rel=1e-10)
    assert variant_constant(3, 3).constant == pytest.approx(MP_C3_BETA3, rel=1e-10)


@pytest.mark.parametrize("beta", [2, 4, 6, 8, 10])
def test_n2_variants_against_wallis(beta):
    assert variant_constant(2, beta).constant == pytest.approx(wallis_variant_n2(beta), rel=1e-12)


@pytest.mark.parametrize("beta", [1, 3, 5])
def test_n2_odd_beta_diverges(beta):
    with pytest.raises(DivergenceError):
        variant_constant(2, beta)
    with pytest.raises(DivergenceError):
        wallis_variant_n2(beta)


def test_quasi_integral_dominates_bures():
    for n in (2, 3):
        q, b = quasi_constant(n), hall_constant(KernelSpec(n))
        assert q.raw_integral > b.raw_integral
    assert quasi_constant(2).raw_integral * 2 == pytest.approx(MP_QUASI2_INTEGRAL, rel=1e-11)


def test_entropy_values_and_range():
    e2 = average_entropy(2)
    assert e2.mean_entropy_nats == pytest.approx(2 * math.log(2) - 7 / 6, abs=1e-12)
    assert (e2.fit_numerator, e2.fit_denominator) == (7, 6)
    e3 = average_entropy(3, fit=False)
    assert e3.mean_entropy_nats == pytest.approx(MP_S3, abs=1e-11)
    assert e3.fit is None
    for e in (e2, e3):
        assert 0 <= e.mean_entropy_nats <= math.log(e.n)
    assert 0 <= average_entropy(3, beta=4, fit=False).mean_entropy_nats <= math.log(3)


def test_fit_entropy_is_closest():
    p, q, res = fit_entropy(3, 0.507937)
    target = 3 * math.log(3) - 0.507937
    assert q <= 10 ** 4 and res == pytest.approx(abs(target - p / q))
    for qq in range(1, 2000):
        assert abs(target - round(target * qq) / qq) >= res - 1e-15


@pytest.mark.parametrize("n", [2, 3, 4])
def test_expected_eigenvalues(n):
    r = expected_eigenvalues(n)
    assert sum(r.expected) == pytest.approx(1.0, abs=1e-8)
    assert all(a >= b for a, b in zip(r.expected, r.expected[1:]))


def test_cache_round_trip(tmp_path):
    cache = ResultCache(tmp_path / "c.jsonl")
    a = hall_constant(KernelSpec(3), cache=cache, recognize=True)
    b = hall_constant(KernelSpec(3), cache=cache, recognize=True)
    assert a.constant == b.constant and a.estimate == b.estimate
    assert b.recognition.recognized_integer == 35
    lines = (tmp_path / "c.jsonl").read_text().splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert {"key", "kind", "inputs", "result", "timestamp", "version"} <= set(rec)
    e1 = average_entropy(2, cache=cache)
    e2 = average_entropy(2, cache=cache)
    assert e1 == e2 and len((tmp_path / "c.jsonl").read_text().splitlines()) == 2


def test_result_serialization_round_trip():
    r = hall_constant(KernelSpec(4), recognize=True)
    assert ConstantResult.from_dict(json.loads(json.dumps(r.to_dict()))) == r
    e = average_entropy(3)
    assert EntropyResult.from_dict(json.loads(json.dumps(e.to_dict()))) == e


def test_qmc_region_reported():
    from hallconst.qmc import QmcConfig
    r = hall_constant(KernelSpec(3), "qmc", QmcConfig(max_points=400_000, batch=100_000, rel_tol=1e-3))
    assert r.region == "full" and r.ordering_multiplier == 1
    assert r.constant == pytest.approx(35 / math.pi, rel=1e-3)
    o = hall_constant(KernelSpec(3), "qmc", QmcConfig(max_points=400_000, batch=100_000, rel_tol=1e-3),
                      region="ordered")
    assert o.ordering_multiplier == 6 and o.constant == pytest.approx(35 / math.pi, rel=1e-3)


def test_density_grids():
    g = density_grid("bures2", "theta", 1)
    assert g["rows"] == [[pytest.approx(math.pi / 4), pytest.approx(4 / math.pi * 0.5)]]
    g = density_grid("bures3", "theta-phi", 4)
    assert len(g["rows"]) == 16 and g["columns"] == ["theta", "phi", "density"]
    # the stored leading constant has five digits, so normalization holds to 1e-3
    q = np.array(density_grid("quasi3", "theta", 256)["rows"])
    assert q[:, 1].sum() * math.pi / 256 == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        density_grid("bures2", "phi", 4)
    with pytest.raises(ValueError):
        density_grid("bures2", "theta", 0)


def test_redundancy_helpers():
    assert quasi_redundancy_constant(0.3) == pytest.approx(quasi_redundancy_constant(1.3), abs=1e-12)
    assert bures_redundancy_supremum() > bures_redundancy_average()
    assert 0.3 < theta_marginal_crossover_n2() < 0.6
