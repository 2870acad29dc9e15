from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cnnpath import GridParams, TemplateImage, build_coupling, load_pgm, make_fixture, save_pgm
from cnnpath.lattice import ShapeError
from cnnpath.obstacles import FIXTURES, PGMError, format_pgm, overlay_path, parse_pgm


def flood(free, start):
    """Plain 4-neighbour flood fill over a boolean mask."""
    seen = np.zeros_like(free)
    seen[start] = True
    queue = deque([start])
    while queue:
        i, j = queue.popleft()
        for k, l in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 0 <= k < free.shape[0] and 0 <= l < free.shape[1] and free[k, l] and not seen[k, l]:
                seen[k, l] = True
                queue.append((k, l))
    return seen


def test_parse_ascii_example():
    img = parse_pgm(b"P2 2 2 255 0 0 255 255")
    assert img.pixels.tolist() == [[0, 0], [255, 255]]
    assert img.free_mask().tolist() == [[False, False], [True, True]]


def test_binary_equals_ascii():
    a = parse_pgm(b"P2 2 2 255 0 0 255 255")
    b = parse_pgm(b"P5\n2 2\n255\n" + bytes([0, 0, 255, 255]))
    assert a == b
    assert hash(a) == hash(b)


def test_comments_in_header():
    img = parse_pgm(b"P2\n# made by hand\n3 1 # width height\n255\n1 2 3\n")
    assert img.pixels.tolist() == [[1, 2, 3]]


def test_sixteen_bit_rejected():
    with pytest.raises(PGMError, match="maxval"):
        parse_pgm(b"P5 1 1 65535\n\x00\x00")


def test_truncated_raster_reports_offset():
    data = b"P5\n4 4\n255\n" + bytes(10)
    with pytest.raises(PGMError) as info:
        parse_pgm(data)
    assert info.value.offset == len(data)
    with pytest.raises(PGMError, match="truncated raster"):
        parse_pgm(b"P2 2 2 255 0 0 255")


@pytest.mark.parametrize("data", [b"P6 1 1 255 \x00", b"P2 x 1 255 0", b"", b"P2 0 1 255"])
def test_malformed_headers(data):
    with pytest.raises(PGMError):
        parse_pgm(data)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))), st.booleans())
def test_save_load_round_trip(tmp_path_factory, pixels, binary):
    path = tmp_path_factory.mktemp("pgm") / "img.pgm"
    save_pgm(path, TemplateImage(pixels), binary=binary, comment="round trip")
    assert np.array_equal(load_pgm(path).pixels, pixels)


def test_format_header():
    assert format_pgm(np.zeros((2, 3), np.uint8)).startswith(b"P5\n3 2\n255\n")


def test_uniform_image_gives_uniform_coupling():
    p = GridParams(6, 7)
    c = build_coupling(TemplateImage(np.full((6, 7), 200)), p)
    assert np.all(c.horizontal == 25.0) and np.all(c.vertical == 25.0)


def test_split_image_cuts_the_boundary():
    p = GridParams(4, 6)
    px = np.full((4, 6), 255)
    px[:, 3:] = 0
    c = build_coupling(TemplateImage(px), p)
    assert np.all(c.horizontal[:, 2] == 0.0)
    assert np.all(np.delete(c.horizontal, 2, axis=1) == 25.0)
    assert np.all(c.vertical == 25.0)


def test_proportional_coupling_value():
    p = GridParams(1, 2)
    c = build_coupling(TemplateImage(np.array([[100, 150]])), p, mode="proportional", alpha=0.1)
    assert c.horizontal[0, 0] == pytest.approx(4.1667, abs=5e-5)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(2, 8), st.integers(2, 8))))
def test_threshold_coupling_is_two_valued(pixels):
    p = GridParams(*pixels.shape)
    c = build_coupling(TemplateImage(pixels), p)
    values = set(np.unique(c.horizontal)) | set(np.unique(c.vertical))
    assert values <= {0.0, 25.0}


def test_coupling_shape_mismatch():
    with pytest.raises(ShapeError):
        build_coupling(TemplateImage(np.zeros((3, 3))), GridParams(4, 4))
    with pytest.raises(ValueError):
        build_coupling(TemplateImage(np.zeros((3, 3))), GridParams(3, 3), mode="log")


def test_corridor_fixture():
    img = make_fixture("corridor", 1, 10)
    assert img.shape == (1, 10) and img.free_mask().all()


def test_maze_is_fully_connected_tree():
    img = make_fixture("maze", 41, 41, seed=7)
    free = img.free_mask()
    assert flood(free, (1, 1)).sum() == free.sum()
    # a perfect maze has exactly one fewer passage than free cells
    edges = np.count_nonzero(free[:, 1:] & free[:, :-1]) + np.count_nonzero(free[1:] & free[:-1])
    assert edges == free.sum() - 1
    assert not free[0].any() and not free[:, 0].any()


def test_sealed_centre_unreachable():
    img = make_fixture("sealed", 21, 21)
    assert not flood(img.free_mask(), (0, 0))[10, 10]
    assert img.free_mask()[10, 10]


@pytest.mark.parametrize("kind", FIXTURES)
def test_fixtures_deterministic(kind):
    rows = 1 if kind == "corridor" else 25
    assert make_fixture(kind, rows, 25, seed=3) == make_fixture(kind, rows, 25, seed=3)


def test_seed_changes_layout():
    assert make_fixture("room", 31, 31, seed=1) != make_fixture("room", 31, 31, seed=2)
    assert make_fixture("maze", 31, 31, seed=1) != make_fixture("maze", 31, 31, seed=2)


@pytest.mark.parametrize("seed", range(5))
def test_room_border_clear_and_sparse(seed):
    free = make_fixture("room", 30, 30, seed).free_mask()
    assert free[0].all() and free[-1].all() and free[:, 0].all() and free[:, -1].all()
    assert 0.8 < free.mean() < 0.95
    assert flood(free, (0, 0)).sum() >= 0.8 * free.size


def test_bad_fixture_requests():
    with pytest.raises(ValueError):
        make_fixture("forest", 10, 10)
    with pytest.raises(ShapeError):
        make_fixture("sealed", 4, 4)


def test_overlay_marks_path():
    img = make_fixture("corridor", 1, 5)
    px = overlay_path(img, [(0, 1), (0, 2)], (0, 0), (0, 2))
    assert px.tolist() == [[200, 255, 230, 127, 127]]
