import numpy as np
import pytest

from bregblock import ParameterError, SymTriInstance, f_value
from bregblock import symtrinmf as stf
from bregblock.io import (
    ParseError,
    ShapeError,
    read_labels,
    read_matrix,
    synth_instance,
    write_labels,
    write_matrix_market,
)


class TestCsvReader:
    def test_single_edge_adjacency(self, tmp_path):
        path = tmp_path / "edge.csv"
        path.write_text("0,1\n1,0\n")
        matrix = read_matrix(path)
        assert np.array_equal(matrix, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_bad_float_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1\n1,zap\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path)
        assert err.value.line == 2

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("0,1\n1\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path)
        assert err.value.line == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("\n\n")
        with pytest.raises(ParseError):
            read_matrix(path)

    def test_non_square_rejected_for_solve(self, tmp_path):
        path = tmp_path / "rect.csv"
        path.write_text("0,1,2\n3,4,5\n")
        with pytest.raises(ShapeError):
            read_matrix(path)
        assert read_matrix(path, require_square=False).shape == (2, 3)


class TestMatrixMarket:
    def test_symmetric_coordinate_expansion(self, tmp_path):
        path = tmp_path / "sym.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n"
            "% one stored off-diagonal entry\n"
            "3 3 1\n"
            "2 1 5.0\n"
        )
        matrix = read_matrix(path)
        assert np.count_nonzero(matrix) == 2
        assert matrix[1, 0] == 5.0 and matrix[0, 1] == 5.0

    def test_array_roundtrip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        original = rng.standard_normal((10, 10))
        path = tmp_path / "dense.mtx"
        write_matrix_market(path, original, comment="round trip")
        again = read_matrix(path)
        assert np.array_equal(again, original)

    def test_array_symmetric_storage(self, tmp_path):
        path = tmp_path / "symarr.mtx"
        # lower triangle of [[1, 2], [2, 3]] in column-major order
        path.write_text(
            "%%MatrixMarket matrix array real symmetric\n2 2\n1.0\n2.0\n3.0\n"
        )
        matrix = read_matrix(path)
        assert np.array_equal(matrix, np.array([[1.0, 2.0], [2.0, 3.0]]))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "hdr.mtx"
        path.write_text("%%MatrixMarket matrix coordinate complex hermitian\n1 1 0\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path)
        assert err.value.line == 1

    def test_wrong_entry_count(self, tmp_path):
        path = tmp_path / "count.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 3.0\n")
        with pytest.raises(ParseError):
            read_matrix(path)

    def test_index_out_of_range(self, tmp_path):
        path = tmp_path / "range.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path)
        assert err.value.line == 3

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "val.mtx"
        path.write_text("%%MatrixMarket matrix array real general\n1 2\n1.0\nxyz\n")
        with pytest.raises(ParseError) as err:
            read_matrix(path, require_square=False)
        assert err.value.line == 4

    def test_rectangular_factor_file(self, tmp_path):
        rng = np.random.default_rng(1)
        factor = rng.random((6, 2))
        path = tmp_path / "factor.mtx"
        write_matrix_market(path, factor)
        assert np.array_equal(read_matrix(path, require_square=False), factor)


class TestLabels:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "labels.txt"
        write_labels(path, [0, 2, 1, -1, 2])
        assert read_labels(path).tolist() == [0, 2, 1, -1, 2]


class TestSynthInstance:
    def test_noiseless_fit_is_exactly_zero(self):
        X, U, V = synth_instance(12, 3, noise_level=0.0, density=1.0, seed=7)
        inst = SymTriInstance(X, 3)
        assert f_value(inst, U, V) == 0.0

    def test_exactly_symmetric(self):
        for noise in (0.0, 0.3):
            X, _, _ = synth_instance(9, 2, noise_level=noise, density=0.8, seed=1)
            assert np.array_equal(X, X.T)

    def test_planted_structure(self):
        X, U, V = synth_instance(10, 3, noise_level=0.0, density=1.0, seed=2)
        assert (U >= 0).all() and (V >= 0).all() and (X >= 0).all()
        assert np.array_equal(V, V.T)
        labels = stf.community_assignment(U)
        assert labels.tolist() == [j % 3 for j in range(10)]

    def test_deterministic_in_seed(self):
        a = synth_instance(8, 2, noise_level=0.1, density=0.5, seed=4)
        b = synth_instance(8, 2, noise_level=0.1, density=0.5, seed=4)
        c = synth_instance(8, 2, noise_level=0.1, density=0.5, seed=5)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
        assert not np.array_equal(a[0], c[0])

    def test_rank_one_all_ones(self):
        # planted algebra sanity: U = ones, V = (1) compose to the ones matrix
        U = np.ones((4, 1))
        V = np.ones((1, 1))
        assert np.array_equal(U @ V @ U.T, np.ones((4, 4)))

    def test_noise_magnitude(self):
        X0, U, V = synth_instance(10, 2, noise_level=0.0, density=1.0, seed=3)
        X1, U1, V1 = synth_instance(10, 2, noise_level=0.5, density=1.0, seed=3)
        assert np.array_equal(U, U1) and np.array_equal(V, V1)
        noise = X1 - X0
        assert (noise >= 0).all()
        assert 0.0 < noise.mean() <= 0.5 * X0.mean()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(m=0, r=1),
            dict(m=3, r=0),
            dict(m=3, r=4),
            dict(m=3, r=1, noise_level=-0.1),
            dict(m=3, r=1, density=0.0),
            dict(m=3, r=1, density=1.5),
        ],
    )
    def test_parameter_validation(self, kwargs):
        with pytest.raises(ParameterError):
            synth_instance(**kwargs)


class TestFactorPersistence:
    def test_phi_reproduced_after_roundtrip(self, tmp_path):
        X, _, _ = synth_instance(8, 2, noise_level=0.2, density=1.0, seed=6)
        inst = SymTriInstance(X, 2)
        result, factors = stf.solve_instance(inst, kappa=0.3, seed=0, max_iters=40)
        write_matrix_market(tmp_path / "f_U.mtx", factors.U)
        write_matrix_market(tmp_path / "f_V.mtx", factors.V)
        U = read_matrix(tmp_path / "f_U.mtx", require_square=False)
        V = read_matrix(tmp_path / "f_V.mtx", require_square=False)
        before = f_value(inst, factors.U, factors.V)
        after = f_value(inst, U, V)
        assert after == pytest.approx(before, rel=1e-12)
