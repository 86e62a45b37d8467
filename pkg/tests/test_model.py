import json
import math
import struct

import numpy as np
import pytest

from lowrankpoly.errors import ConfigError
from lowrankpoly.hermite import CoefficientVector, basis
from lowrankpoly.model import (
    BatchOracle,
    Instance,
    Parameters,
    SampleBatch,
    SampleOracle,
    certify_nondegeneracy,
    grad_coef,
    grad_frame,
    gradient_second_moment,
    make_instance,
    predict,
    predict_batch,
    prediction_error,
    random_instance,
    rotate_coefficients,
    sample_batch,
)
from lowrankpoly.subspace import Frame, align, procrustes_distance, random_frame
from conftest import SQUARE, orthogonal
from oracles import central_difference


def test_second_moment_linear():
    np.testing.assert_allclose(gradient_second_moment(CoefficientVector(1, 1, [0.0, 1.0])), [[1.0]])


def test_second_moment_rank_one_example():
    c = CoefficientVector(2, 1, [0.0, 1 / math.sqrt(2), 1 / math.sqrt(2)])
    M = gradient_second_moment(c)
    np.testing.assert_allclose(M, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    assert np.linalg.matrix_rank(M) == 1
    assert certify_nondegeneracy(c) == pytest.approx(0.0, abs=1e-15)


def test_nondegeneracy_mixed_degree():
    c = CoefficientVector.from_terms(2, 2, {(0,): 1.0, (1, 1): 1.0})
    np.testing.assert_allclose(gradient_second_moment(c), np.diag([1.0, 2.0]), atol=1e-14)
    assert certify_nondegeneracy(c) == pytest.approx(0.5)
    assert certify_nondegeneracy(CoefficientVector(1, 1, [0.0, 1.0])) == 1.0


def test_nondegeneracy_rejects_constant():
    with pytest.raises(ValueError):
        certify_nondegeneracy(CoefficientVector(2, 2, [1.0, 0, 0, 0, 0, 0]))


@pytest.mark.parametrize("r,d", [(1, 4), (2, 3), (3, 2), (3, 4)])
def test_second_moment_matches_monte_carlo(r, d):
    rng = np.random.default_rng(r * 10 + d)
    b = basis(r, d)
    c = CoefficientVector(r, d, rng.standard_normal(b.size))
    g = rng.standard_normal((1_000_000, r))
    G = b.features(g) @ b.gradient_coefficients(c.values).T  # (N, r) gradients
    outer = G[:, :, None] * G[:, None, :]
    mc = outer.mean(axis=0)
    se = outer.std(axis=0) / math.sqrt(len(g))
    exact = gradient_second_moment(c)
    assert np.all(np.abs(exact - mc) <= 3 * se + 1e-12)


def test_make_instance_square():
    inst = make_instance(CoefficientVector(1, 2, SQUARE), random_frame(5, 1, 0))
    assert inst.truth.coef.values[0] == 0.0
    # M for z^2 is E[(2z)^2] = 4, so the rescale factor is 1/2
    np.testing.assert_allclose(inst.truth.coef.values, [0.0, 0.0, math.sqrt(2) / 2])
    assert np.linalg.eigvalsh(gradient_second_moment(inst.truth.coef))[-1] == pytest.approx(1.0)
    assert inst.alpha == 1.0
    assert inst.y_variance == pytest.approx(0.5)
    inst.check()


def test_make_instance_linear_unchanged():
    V = random_frame(4, 1, 1)
    inst = make_instance(CoefficientVector(1, 1, [0.0, 1.0]), V)
    np.testing.assert_array_equal(inst.truth.coef.values, [0.0, 1.0])
    assert inst.alpha == 1.0 and inst.y_variance == 1.0


def test_make_instance_rejects_degenerate():
    c = CoefficientVector(2, 1, [0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        make_instance(c, random_frame(4, 2, 0))


def test_random_instance_rank_one():
    inst = random_instance(20, 1, 2, 5, 0.9)
    assert inst.alpha == 1.0
    inst.check()


def test_random_instance_deterministic():
    a, b = random_instance(30, 2, 3, 8, 0.3), random_instance(30, 2, 3, 8, 0.3)
    assert a.truth.coef == b.truth.coef and a.truth.frame == b.truth.frame


@pytest.mark.parametrize("seed", range(5))
def test_random_instance_invariants(seed):
    inst = random_instance(30, 2, 3, seed, 0.3)
    assert inst.alpha >= 0.3
    inst.check()


def test_random_instance_gives_up():
    with pytest.raises(ValueError):
        random_instance(10, 3, 1, 0, 0.999999, max_tries=5)


def test_sample_batch_rows_match_predict(phase_instance):
    batch = sample_batch(phase_instance, 200, 4)
    for i in range(len(batch)):
        assert batch.ys[i] == predict(phase_instance.truth, batch.xs[i])


def test_sample_batch_deterministic(phase_instance):
    a, b = sample_batch(phase_instance, 50, 9), sample_batch(phase_instance, 50, 9)
    np.testing.assert_array_equal(a.xs, b.xs)
    np.testing.assert_array_equal(a.ys, b.ys)


def test_sample_batch_moments():
    inst = random_instance(10, 2, 3, 3, 0.3)
    N = 1_000_000
    batch = sample_batch(inst, N, 1)
    assert abs(batch.ys.mean()) <= 4 * math.sqrt(inst.y_variance / N)
    assert np.var(batch.ys) == pytest.approx(inst.y_variance, rel=0.05)


def test_predict_examples(phase_instance):
    truth = phase_instance.truth
    zero = Parameters(CoefficientVector.zeros(1, 2), truth.frame)
    x = np.random.default_rng(0).standard_normal(50)
    assert predict(zero, x) == 0.0
    v = truth.frame.columns[:, 0]
    x = truth.frame.project_out(x) + 3.0 * v
    theta = Parameters(CoefficientVector(1, 2, SQUARE), truth.frame)
    assert predict(theta, x) == pytest.approx(9.0)
    with pytest.raises(ValueError):
        predict(theta, x[:10])


def test_grad_frame_square_example():
    V = Frame(np.eye(4)[:, :1])
    theta = Parameters(CoefficientVector(1, 2, SQUARE), V)
    t = 1.7
    x = np.array([t, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(grad_frame(theta, x), [[2 * t * t], [0.0], [0.0], [0.0]])
    zero = Parameters(CoefficientVector.zeros(1, 2), V)
    np.testing.assert_array_equal(grad_frame(zero, x), np.zeros((4, 1)))


def _random_theta(rng, n, r, d):
    c = CoefficientVector(r, d, rng.standard_normal(basis(r, d).size))
    return Parameters(c, random_frame(n, r, rng))


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    r, d = 1 + seed % 3, 1 + seed % 4
    n = r + 3
    theta = _random_theta(rng, n, r, d)
    x = rng.standard_normal(n)

    def f_frame(V):
        return (theta.coef.basis.features((x @ V)[None, :]) @ theta.coef.values)[0]

    def f_coef(c):
        return predict(Parameters(theta.coef.with_values(c), theta.frame), x)

    fd_V = central_difference(f_frame, theta.frame.columns)
    fd_c = central_difference(f_coef, theta.coef.values)
    assert np.linalg.norm(grad_frame(theta, x) - fd_V) <= 1e-5 * max(np.linalg.norm(fd_V), 1.0)
    assert np.linalg.norm(grad_coef(theta, x) - fd_c) <= 1e-5 * max(np.linalg.norm(fd_c), 1.0)


def test_prediction_error_examples(phase_instance):
    batch = sample_batch(phase_instance, 200_000, 2)
    assert prediction_error(phase_instance.truth, batch, phase_instance.y_variance) == 0.0
    zero = Parameters(CoefficientVector.zeros(1, 2), phase_instance.truth.frame)
    assert prediction_error(zero, batch, phase_instance.y_variance) == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        prediction_error(zero, batch[0:0], 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_prediction_error_small_perturbation(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(12, 2, 3, seed, 0.3)
    truth = inst.truth
    # tilt the true frame slightly and pair it with the matching rotated coefficients
    W = Frame(np.linalg.qr(truth.frame.columns + 0.01 * rng.standard_normal((12, 2)))[0])
    dp = procrustes_distance(W, truth.frame)
    c = rotate_coefficients(truth.coef, align(W, truth.frame))
    batch = sample_batch(inst, 100_000, seed)
    assert prediction_error(Parameters(c, W), batch, inst.y_variance) <= 10 * dp**2


@pytest.mark.parametrize("r,d", [(1, 3), (2, 3), (3, 2)])
def test_rotation_leaves_samples_unchanged(r, d):
    rng = np.random.default_rng(r + d)
    inst = random_instance(9, r, d, rng.integers(1 << 30), 0.1)
    Q = orthogonal(r, rng)
    rotated = Parameters(rotate_coefficients(inst.truth.coef, Q), inst.truth.frame.rotate(Q))
    xs = rng.standard_normal((500, 9))
    np.testing.assert_allclose(predict_batch(rotated, xs), predict_batch(inst.truth, xs), rtol=1e-10, atol=1e-10)


def test_rotate_identity_is_noop(rng):
    c = CoefficientVector(2, 3, rng.standard_normal(10))
    np.testing.assert_allclose(rotate_coefficients(c, np.eye(2)).values, c.values, atol=1e-12)


def test_instance_json_roundtrip(phase_instance):
    obj = json.loads(phase_instance.to_json())
    assert {"coef", "frame", "alpha", "y_variance"} <= set(obj)
    back = Instance.from_json(phase_instance.to_json())
    assert back.truth.coef == phase_instance.truth.coef
    assert back.truth.frame == phase_instance.truth.frame
    assert back.alpha == phase_instance.alpha


def test_batch_binary_format(tmp_path, phase_instance):
    batch = sample_batch(phase_instance, 7, 0)
    path = tmp_path / "b.bin"
    batch.save(path)
    raw = path.read_bytes()
    assert struct.unpack("<qq", raw[:16]) == (7, 50)
    assert len(raw) == 16 + 8 * 7 * 51
    np.testing.assert_array_equal(np.frombuffer(raw, "<f8", count=50, offset=16), batch.xs[0])
    back = SampleBatch.load(path)
    np.testing.assert_array_equal(back.xs, batch.xs)
    np.testing.assert_array_equal(back.ys, batch.ys)
    path.write_bytes(raw[:-8])
    with pytest.raises(ConfigError):
        SampleBatch.load(path)


def test_oracles_count_draws(phase_instance):
    orc = SampleOracle(phase_instance, 1)
    orc.draw(10)
    orc.draw(1)
    assert orc.samples_used == 11
    fixed = BatchOracle(sample_batch(phase_instance, 5, 0))
    assert len(fixed.draw(3)) == 3
    with pytest.raises(ConfigError):
        fixed.draw(3)


def test_oracle_stream_is_seeded(phase_instance):
    a, b = SampleOracle(phase_instance, 3), SampleOracle(phase_instance, 3)
    np.testing.assert_array_equal(a.draw(4).xs, b.draw(4).xs)
