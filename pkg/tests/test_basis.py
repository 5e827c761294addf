import itertools
import math

import numpy as np
import pytest

from pcegrid.basis import BasisSet, design_matrix, eval_multivariate, qnorm_truncation, recurrences_for
from pcegrid.design import mcs_design
from pcegrid.distributions import Gaussian, JointInput, Uniform
from pcegrid.errors import DomainError, ShapeError


def brute_qball(dim, p, q):
    keep = []
    for alpha in itertools.product(range(p + 1), repeat=dim):
        if sum(a**q for a in alpha) ** (1 / q) <= p + 1e-12:
            keep.append(alpha)
    return set(keep)


def test_documented_orders():
    assert qnorm_truncation(2, 2, 1.0).indices == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    half = qnorm_truncation(2, 2, 0.5).indices
    assert len(half) == 5 and (1, 1) not in half
    assert qnorm_truncation(3, 0, 0.3).indices == ((0, 0, 0),)


@pytest.mark.parametrize("dim", range(1, 7))
@pytest.mark.parametrize("p", range(0, 7))
def test_total_degree_cardinality(dim, p):
    assert len(qnorm_truncation(dim, p, 1.0)) == math.comb(dim + p, p)


@pytest.mark.parametrize("dim,p,q", [(2, 4, 0.5), (3, 5, 0.75), (4, 3, 0.4), (3, 6, 1.0)])
def test_matches_brute_force(dim, p, q):
    bs = qnorm_truncation(dim, p, q)
    assert set(bs.indices) == brute_qball(dim, p, q)
    degrees = [sum(a) for a in bs.indices]
    assert degrees == sorted(degrees)
    assert bs.indices[0] == (0,) * dim


def test_qnorm_monotone():
    for q_small, q_big in [(0.3, 0.5), (0.5, 0.8), (0.8, 1.0)]:
        assert set(qnorm_truncation(4, 5, q_small).indices) <= set(qnorm_truncation(4, 5, q_big).indices)


@pytest.mark.parametrize("q", [0.0, -1.0, 1.5])
def test_invalid_q(q):
    with pytest.raises(DomainError):
        qnorm_truncation(2, 2, q)


def test_basis_set_validation_and_json():
    with pytest.raises(DomainError):
        BasisSet(((1, 0), (0, 0)), 1, 1.0)
    with pytest.raises(DomainError):
        BasisSet(((0, 0), (1, 0), (1, 0)), 1, 1.0)
    bs = qnorm_truncation(3, 3, 0.7)
    assert BasisSet.from_dict(bs.to_dict()) == bs


def test_eval_multivariate_closed_forms():
    bs = BasisSet(((0, 0), (1, 1)), 2, 1.0)
    joint = JointInput((Uniform(-1, 1), Uniform(-1, 1)))
    rec = recurrences_for(joint, bs.max_degrees())
    np.testing.assert_allclose(eval_multivariate(bs, rec, [1.0, 1.0]), [1.0, 3.0], rtol=1e-12)

    bs = BasisSet(((0,), (2,)), 2, 1.0)
    rec = recurrences_for(JointInput((Gaussian(0, 1),)), bs.max_degrees())
    np.testing.assert_allclose(eval_multivariate(bs, rec, [0.0]), [1.0, -1 / math.sqrt(2)], rtol=1e-12)


def test_eval_multivariate_shape_error():
    bs = qnorm_truncation(2, 1)
    rec = recurrences_for(JointInput((Uniform(0, 1),) * 2), bs.max_degrees())
    with pytest.raises(ShapeError):
        eval_multivariate(bs, rec, [0.1, 0.2, 0.3])


def test_design_matrix_rows_and_intercept():
    joint = JointInput((Uniform(0, 1), Gaussian(1, 2)))
    bs = qnorm_truncation(2, 3)
    rec = recurrences_for(joint, bs.max_degrees())
    d = mcs_design(joint, 7, 0)
    A = design_matrix(bs, rec, d)
    assert A.shape == (7, len(bs))
    np.testing.assert_array_equal(A[:, 0], 1.0)
    np.testing.assert_allclose(A[3], eval_multivariate(bs, rec, d.samples[3]), rtol=1e-14)
    single = design_matrix(bs, rec, d.samples[:1])
    np.testing.assert_allclose(single[0], eval_multivariate(bs, rec, d.samples[0]), rtol=1e-14)
    with pytest.raises(ShapeError):
        design_matrix(bs, rec, np.zeros((3, 3)))


def test_empirical_gram_identity():
    joint = JointInput((Uniform(0, 24), Uniform(-1, 1), Uniform(5, 6)))
    bs = qnorm_truncation(3, 3)
    A = design_matrix(bs, recurrences_for(joint, bs.max_degrees()), mcs_design(joint, 10_000, 1))
    np.testing.assert_allclose(A[:, 1:].mean(axis=0), 0, atol=0.05)
    np.testing.assert_allclose(A.T @ A / A.shape[0], np.eye(len(bs)), atol=0.05)
