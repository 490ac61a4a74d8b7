import numpy as np
import pytest

from plaplace.grid import ScalarField, SpaceTimeGrid
from plaplace.snapshots import read_snapshot, write_snapshot


@pytest.mark.parametrize("grid", [
    SpaceTimeGrid(1, 12, 5, -2.0, 3.0, 1.0, 2.0),
    SpaceTimeGrid(2, 6, 4, 0.0, 1.0, 0.0, 0.5, 9, -1.0, 0.5),
])
def test_round_trip(tmp_path, rng, grid):
    u = ScalarField(grid, rng.standard_normal(grid.shape))
    path = write_snapshot(tmp_path / "s.bin", u, level=3)
    head, back = read_snapshot(path)
    assert back.grid == grid
    assert np.array_equal(back.values, u.values)
    assert head["level"] == 3 and head["slices"] == grid.nt + 1
    assert path.stat().st_size == 8 + 5 * 4 + 6 * 8 + 8 * u.values.size


def test_bad_magic_and_size(tmp_path):
    g = SpaceTimeGrid(1, 8, 4)
    path = write_snapshot(tmp_path / "s.bin", ScalarField(g, np.zeros(g.shape)))
    raw = path.read_bytes()
    (tmp_path / "m.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError, match="not a snapshot"):
        read_snapshot(tmp_path / "m.bin")
    (tmp_path / "t.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="payload"):
        read_snapshot(tmp_path / "t.bin")
    (tmp_path / "e.bin").write_bytes(raw[:10])
    with pytest.raises(ValueError, match="too short"):
        read_snapshot(tmp_path / "e.bin")
