import numpy as np
import pytest

from pcinpaint.config import PipelineConfig
from pcinpaint.holes import detect_holes, hole_from_cells
from pcinpaint.inpaint import HoleReport, inpaint_all, inpaint_hole, write_report
from pcinpaint.synth import HoleSynthesisSpec, punch_hole
from pcinpaint.voxel import VoxelGrid
from synthetic import plane_grid


def test_zero_holes_leaves_grid_unchanged():
    g = plane_grid(30, 30)
    out, reports = inpaint_all(g, [])
    assert out is g and reports == []


def test_planar_hole_closed():
    g = plane_grid(60, 60, 5)
    p, removed = punch_hole(g, HoleSynthesisSpec("sphere", (30.5, 30.5, 5.5), 4))
    holes = detect_holes(p)
    assert len(holes) == 1
    out, (rep,) = inpaint_all(p, holes)
    assert rep.status == "filled" and rep.filled_cells == len(removed)
    assert detect_holes(out) == []
    assert np.array_equal(out.cells, g.cells)
    assert rep.residual <= 1e-8 and 0 < rep.delta <= 1


def test_two_disjoint_holes():
    g = plane_grid(60, 60, 5)
    p, r1 = punch_hole(g, HoleSynthesisSpec("sphere", (15.5, 15.5, 5.5), 3))
    p, r2 = punch_hole(p, HoleSynthesisSpec("sphere", (45.5, 40.5, 5.5), 4))
    holes = detect_holes(p)
    assert len(holes) == 2
    out, reports = inpaint_all(p, holes)
    assert [r.hole_id for r in reports] == [1, 2]
    assert all(r.filled_cells > 0 for r in reports)
    assert detect_holes(out) == []


def test_hole_larger_than_a_cube():
    g = plane_grid(80, 80, 5)
    p, removed = punch_hole(g, HoleSynthesisSpec("box", (40.0, 40.0, 5.5), half_extents=(14, 4, 1)))
    holes = detect_holes(p)
    out, (rep,) = inpaint_all(p, holes)
    assert rep.filled_cells == len(removed)
    assert detect_holes(out) == []


def test_filled_cells_are_known_for_later_holes():
    g = plane_grid(60, 60, 5)
    p, removed = punch_hole(g, HoleSynthesisSpec("sphere", (30.5, 30.5, 5.5), 3))
    hole = hole_from_cells(removed.cells, "+z")
    out, rep = inpaint_hole(p, hole)
    assert rep.filled_cells == len(removed)
    again, rep2 = inpaint_hole(out, hole)
    assert rep2.filled_cells == 0 and np.array_equal(again.cells, out.cells)


def test_no_candidate_leaves_hole_reported():
    cells = np.array([[x, y, 0] for x in range(12) for y in range(12)])
    g = VoxelGrid(cells, np.tile([0, 0, 1.0], (len(cells), 1)))
    p, removed = punch_hole(g, HoleSynthesisSpec("sphere", (6.0, 6.0, 0.5), 2))
    with pytest.warns(UserWarning):
        out, rep = inpaint_hole(p, hole_from_cells(removed.cells, "+z"))
    assert rep.status == "no-candidate" and rep.filled_cells == 0
    assert np.array_equal(out.cells, p.cells)


def test_report_line_format(tmp_path):
    reps = [HoleReport(1, (5, 0, 10), False, 0.5, 1e-12, 7, "filled"),
            HoleReport(2, (0, 5, 0), True, 0.25, 0.0, 3, "filled"),
            HoleReport(3)]
    write_report(reps, tmp_path / "r.txt")
    lines = (tmp_path / "r.txt").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "1 5,0,10 0.5 1e-12 7"
    assert lines[2].split()[1] == "0,5,0m"
    assert lines[3].split()[1] == "-" and lines[3].split()[4] == "0"


def test_inpaint_is_deterministic():
    g = plane_grid(60, 60, 5)
    p, _ = punch_hole(g, HoleSynthesisSpec("sphere", (30.5, 30.5, 5.5), 4))
    holes = detect_holes(p)
    cfg = PipelineConfig(seed=11)
    a, ra = inpaint_all(p, holes, cfg)
    b, rb = inpaint_all(p, holes, cfg)
    assert np.array_equal(a.cells, b.cells) and np.array_equal(a.normals, b.normals)
    assert [r.line() for r in ra] == [r.line() for r in rb]
