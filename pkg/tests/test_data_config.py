import numpy as np
import pytest

from varselclust.config import EMConfig, SearchConfig, Settings, load_config
from varselclust.data import DataMatrix, load_csv
from varselclust.errors import ConfigInvalid, DataLoadError, InvalidData


def test_data_matrix_validation():
    column = DataMatrix([1.0, 2.0, 3.0])
    assert (column.n, column.p) == (3, 1)
    assert column.names == ['V1']
    with pytest.raises(InvalidData):
        DataMatrix([[1.0, np.nan]])
    with pytest.raises(InvalidData):
        DataMatrix(np.empty((0, 3)))
    with pytest.raises(InvalidData):
        DataMatrix(np.ones((2, 2)), col_names=('a',))
    with pytest.raises(ValueError):
        column.values[0] = 5.0


def test_data_matrix_subset_and_permutation(rng):
    data = DataMatrix(np.arange(12.0).reshape(4, 3), col_names=('a', 'b', 'c'))
    sub = data.subset([2, 0])
    assert sub.names == ['a', 'c']
    np.testing.assert_array_equal(sub.values, data.values[:, [0, 2]])
    permuted = data.permute_columns(rng)
    for j in range(3):
        assert sorted(permuted.values[:, j]) == sorted(data.values[:, j])


def test_load_csv_with_labels(tmp_path):
    path = tmp_path / 'toy.csv'
    path.write_text("x,y,label\n1.5,2,b\n3,4,a\n5,6,b\n")
    data, labels = load_csv(path)
    assert data.names == ['x', 'y']
    np.testing.assert_array_equal(data.values, [[1.5, 2.0], [3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(labels, [1, 0, 1])


@pytest.mark.parametrize('content', [
    "x,y\n1,2\n3,abc\n",
    "x,y\n1,2\n3,\n",
    "label\na\nb\n",
    "",
])
def test_load_csv_rejects_bad_files(tmp_path, content):
    path = tmp_path / 'bad.csv'
    path.write_text(content)
    with pytest.raises(DataLoadError):
        load_csv(path)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataLoadError):
        load_csv(tmp_path / 'absent.csv')


def test_default_configuration(monkeypatch):
    monkeypatch.delenv('VARSELCLUST_CONFIG', raising=False)
    assert load_config() == Settings()


def test_configuration_override_from_environment(tmp_path, monkeypatch):
    path = tmp_path / 'override.ini'
    path.write_text("[em]\nn_starts = 4\n\n[search]\nvariant = independent\n")
    monkeypatch.setenv('VARSELCLUST_CONFIG', str(path))
    settings = load_config()
    assert settings.em.n_starts == 4
    assert settings.em.max_iter == EMConfig().max_iter
    assert settings.search == SearchConfig(variant='independent')


def test_invalid_configuration(tmp_path, monkeypatch):
    monkeypatch.delenv('VARSELCLUST_CONFIG', raising=False)
    path = tmp_path / 'bad.ini'
    path.write_text("[em]\nmax_iter = many\n")
    with pytest.raises(ConfigInvalid):
        load_config(str(path))
    with pytest.raises(ConfigInvalid):
        load_config(str(tmp_path / 'absent.ini'))


def test_starts_for():
    assert EMConfig().starts_for(3) == 10
    assert EMConfig().starts_for(11) == 20
    assert EMConfig(n_starts=2).starts_for(30) == 2
