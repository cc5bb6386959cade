import numpy as np
import pytest

from groupmte.errors import DataError
from groupmte.model import (Dataset, EvalPoint, GroupRecord, Layout,
                            make_dataset, validate_dataset)


def _record(gid=0, y=(1.0, 2.0), d=(1, 0), w=((0.5,), (-0.5,)), x_dim=0):
    return GroupRecord(group_id=gid, y=y, d=d, w=w, x_dim=x_dim)


def test_layout_dims():
    layout = Layout(z_dim=2, x_dim=3)
    assert layout.w_dim == 5
    assert Layout(z_dim=1).x_dim == 0


def test_make_dataset_builds_dense_arrays():
    data = make_dataset([_record(0), _record(1, y=(-1.0, 0.0), d=(0, 1))],
                        Layout(z_dim=1))
    assert data.n_groups == 2
    assert data.y.shape == (2, 2)
    assert data.d.dtype == np.int64
    assert data.w.shape == (2, 2, 1)
    assert data.w_flat().shape == (2, 2)
    assert np.array_equal(data.group_ids, [0, 1])


def test_validate_rejects_duplicate_ids():
    with pytest.raises(DataError, match="duplicate group_id"):
        make_dataset([_record(3), _record(3)], Layout(z_dim=1))


def test_validate_rejects_non_binary_treatment():
    with pytest.raises(DataError, match="non-binary treatment, group 7"):
        make_dataset([_record(7, d=(2, 0))], Layout(z_dim=1))


def test_validate_rejects_non_finite_outcome():
    with pytest.raises(DataError, match="non-finite outcome y1, group 0"):
        make_dataset([_record(y=(0.0, np.nan))], Layout(z_dim=1))


def test_validate_rejects_ragged_layout():
    with pytest.raises(DataError, match="ragged layout"):
        make_dataset([_record(w=((0.5, 1.0), (-0.5,)))], Layout(z_dim=1))


def test_validate_rejects_empty_dataset():
    with pytest.raises(DataError, match="at least one group"):
        make_dataset([], Layout(z_dim=1))


def test_validate_canonicalizes_float_treatments():
    data = make_dataset([_record(d=(1.0, 0.0))], Layout(z_dim=1))
    assert data.d.tolist() == [[1, 0]]


def test_validate_is_idempotent():
    data = make_dataset([_record(0), _record(1)], Layout(z_dim=1))
    again = validate_dataset(data)
    assert np.array_equal(again.y, data.y)
    assert np.array_equal(again.w, data.w)


def test_covariate_block():
    rec = _record(w=((0.5, 9.0), (-0.5, 7.0)), x_dim=1)
    data = make_dataset([rec], Layout(z_dim=1, x_dim=1))
    assert data.x(0).tolist() == [[9.0]]
    assert data.x(1).tolist() == [[7.0]]
    no_x = make_dataset([_record()], Layout(z_dim=1))
    assert no_x.x(0).shape == (1, 0)


def test_eval_point_requires_interior():
    EvalPoint(0.5, 0.5)
    with pytest.raises(ValueError, match="interior"):
        EvalPoint(0.0, 0.5)
    with pytest.raises(ValueError, match="interior"):
        EvalPoint(0.5, 1.0)
