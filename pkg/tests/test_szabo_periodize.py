import json
from fractions import Fraction
from importlib.resources import files

import numpy as np
import pytest

from tileforge.boxes import PeriodicBoxTiling, TilingCheckError
from tileforge.crt_lattice import LatticeTiling, cube_B, read_lattice_text, to_box_tiling
from tileforge.cyclic_core import SizeCapError
from tileforge.szabo_periodize import (
    Counterexample, SeedTiling, build_counterexample, certify_by_slices, check_tiling, estimated_bytes, ingest_seed,
    layer_shift, periodize, read_box_tiling, read_u64, sampled_covering_check, scale_to_primes,
    seed_from_vectors, slice_rectangles, stack, verify_properties, write_box_tiling, write_counterexample,
    write_slice_csv,
)

BRICK = files("tileforge") / "data" / "brick2d.seed"


def _codes(fn, *args, **kw):
    with pytest.raises(TilingCheckError) as exc:
        fn(*args, **kw)
    return exc.value.code


@pytest.fixture
def brick():
    return ingest_seed(BRICK, allow_partial=True)


def test_brick_seed_is_partial(brick):
    assert _codes(ingest_seed, BRICK) == "SHARED_FACE"
    assert brick.face_free == (1,) and brick.partial
    assert brick.tiling.periods == (4, 4) and len(brick.tiling) == 4


def test_seed_file_round_trip(tmp_path, brick):
    path = tmp_path / "copy.seed"
    write_box_tiling(path, brick.tiling, comments=["copy of the brick seed"])
    T, comments, raw = read_box_tiling(path)
    assert comments == ["copy of the brick seed"]
    assert np.array_equal(T.vectors, brick.tiling.vectors)
    assert T.periods == brick.tiling.periods


def _write_seed(path, periods, vectors):
    lines = [f"d={len(periods)} format=doubled period={','.join(map(str, periods))}"]
    lines += [" ".join(map(str, v)) for v in vectors]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_seed_rejections(tmp_path):
    dup = _write_seed(tmp_path / "dup.seed", (4, 4), [[0, 0], [0, 0], [2, 1], [2, 3]])
    assert _codes(ingest_seed, dup, allow_partial=True) == "BAD_COVER"
    gap = _write_seed(tmp_path / "gap.seed", (4, 4), [[0, 0], [0, 1], [2, 1], [2, 3]])
    assert _codes(ingest_seed, gap, allow_partial=True) == "BAD_COVER"
    out = _write_seed(tmp_path / "out.seed", (4, 4), [[0, 0], [0, 2], [2, 1], [2, 7]])
    assert _codes(ingest_seed, out, allow_partial=True) == "BAD_PERIOD"
    odd = _write_seed(tmp_path / "odd.seed", (3, 3), [[0, 0], [0, 2]])
    assert _codes(ingest_seed, odd, allow_partial=True) == "BAD_PERIOD"


def test_stack_one_dimensional_tiling_gives_brick():
    line = seed_from_vectors([[0]], [2])
    T = stack(line.tiling, 1)
    assert T.vectors.tolist() == [[0, 0], [1, 2]]
    assert T.periods == (2, 4)
    assert T.provenance["face_free"] == [2]
    assert T.provenance["certificate"] == "exhaustive"


def test_stack_preserves_tiling_and_faces(brick):
    T = stack(brick.tiling, 5)
    assert T.d == 3 and T.periods == (4, 4, 40) and len(T) == 16
    check_tiling(T)
    assert T.provenance["face_free"] == [1, 3]
    re = check_tiling(T)
    assert re == "exhaustive"


def test_stack_custom_offset(brick):
    T = stack(brick.tiling, 2, offset=3)
    assert T.periods[2] == 4 * 4
    check_tiling(T)


def test_stack_zero_offset_rejected(brick):
    with pytest.raises(ValueError):
        stack(brick.tiling, 2, offset=4)


def test_layer_shift_examples():
    S = PeriodicBoxTiling((3,), (12,), np.array([[3], [9]]))
    assert layer_shift(S, 1, Fraction(1, 2)).tolist() == [[4]]
    assert layer_shift(S, 1, Fraction(3, 2)).tolist() == [[10]]
    E = PeriodicBoxTiling((2,), (8,), np.array([[0], [4]]))
    for a2 in range(4):
        lay = layer_shift(E, 1, Fraction(a2, 2))
        assert (lay[:, 0] == 2 * a2).all()
    assert layer_shift(E, 1, 0).tolist() == [[0]]
    with pytest.raises(ValueError):
        layer_shift(E, 1, 2)
    with pytest.raises(ValueError):
        layer_shift(E, 1, Fraction(1, 3))


def test_periodize_brick(brick):
    U = scale_to_primes(brick.tiling, (2, 3))
    T = periodize(U, 1)
    assert T.periods == (8, 12)
    assert T.vectors.tolist() == [[0, 0], [0, 6], [4, 3], [4, 9]]
    assert T.provenance["certificate"] == "exhaustive"
    assert T.column_witness(0) is None
    rep = verify_properties(T)
    assert rep.periodized == (1,) and rep.faces[2] is not None
    assert verify_properties(T, face_dirs=()).holds
    assert _codes(periodize, T, 2) == "SHARED_FACE"
    with pytest.raises(ValueError):
        periodize(T, 1)


def test_periodize_preconditions(brick):
    # half-unit positions that are not multiples of p_1 / 2
    assert _codes(periodize, PeriodicBoxTiling((2,), (8,), np.array([[1], [5]])), 1) == "BAD_PERIOD"
    assert _codes(periodize, scale_to_primes(brick.tiling, (2, 3)), 2) == "SHARED_FACE"


def test_three_dimensional_partial_pipeline(brick):
    U = scale_to_primes(stack(brick.tiling, 5), (2, 3, 5))
    V = periodize(U, 1)
    W = periodize(V, 3)
    assert W.periods == (8, 12, 50) and len(W) == 20
    check_tiling(W)
    rep = verify_properties(W)
    assert all(rep.integral.values()) and all(rep.periodic.values())
    assert all(v is None for v in rep.columns.values())
    # direction 2 was never face-free, so only it reports a face
    assert list(rep.faces) == [2] and rep.faces[2] is not None
    assert certify_by_slices(W, V, 2) is None
    assert certify_by_slices(V, U, 0) is None


def test_slice_certificate_detects_corruption(brick):
    U = scale_to_primes(stack(brick.tiling, 5), (2, 3, 5))
    V = periodize(U, 1)
    bad = V.copy(vectors=np.vstack([V.vectors[:-1], V.vectors[-1] + np.array([0, 1, 0])]))
    assert certify_by_slices(bad, U, 0) is not None


def test_sampled_covering(brick):
    U = scale_to_primes(stack(brick.tiling, 5), (2, 3, 5))
    T = periodize(periodize(U, 1), 3)
    rng = np.random.default_rng(0)
    s = sampled_covering_check(T, 500, rng)
    assert s.points == 1000 and s.line_pairs == 500
    moved = T.copy(vectors=np.vstack([T.vectors[:-1], T.vectors[-1] + np.array([1, 0, 0])]))
    with pytest.raises(TilingCheckError) as exc:
        sampled_covering_check(moved, 2000, np.random.default_rng(1))
    assert exc.value.code in ("BAD_COVER", "MISALIGNED_LINE")


def test_build_counterexample_guards(brick):
    with pytest.raises(TilingCheckError):
        build_counterexample((2, 3), brick)
    with pytest.raises(ValueError):
        build_counterexample((3, 2), brick)
    with pytest.raises(ValueError):
        build_counterexample((2, 4), brick)
    # the cap is checked before any work, so a nominally face-free seed suffices
    line = seed_from_vectors([[0]], [2])
    nominal = SeedTiling(line.tiling, (1,))
    with pytest.raises(SizeCapError):
        build_counterexample((2, 3, 5), nominal, memory_cap=estimated_bytes((2, 3, 5)) - 1)


def test_write_counterexample(tmp_path):
    A = list(range(0, 36, 6))
    T = to_box_tiling(LatticeTiling.from_sets(A, cube_B((2, 3)), 36))
    ce = Counterexample((2, 3), T, np.array(A, dtype=np.uint64), cube_B((2, 3)), {"modulus": 36})
    write_counterexample(tmp_path, ce)
    assert read_u64(tmp_path / "A.u64").tolist() == A
    frame, vecs = read_lattice_text(tmp_path / "A.lattice")
    assert frame.modulus == 36 and len(vecs) == 6
    assert json.loads((tmp_path / "report.json").read_text()) == {"modulus": 36}


def test_slice_rectangles(tmp_path, brick):
    rows = slice_rectangles(brick.tiling, (0, 1), (0, 0))
    assert rows.tolist() == [[0, 0, 2, 2], [0, 2, 2, 2], [2, 1, 2, 2], [2, 3, 2, 2]]
    T = stack(brick.tiling, 5)
    layer = slice_rectangles(T, (0, 1), (0, 0, 10))
    assert sorted(layer[:, 0].tolist()) == [1, 1, 3, 3]
    write_slice_csv(tmp_path / "s.csv", rows)
    assert (tmp_path / "s.csv").read_text().splitlines()[:2] == ["x,y,width,height", "0,0,2,2"]
    with pytest.raises(ValueError):
        slice_rectangles(T, (1, 1), (0, 0, 0))
