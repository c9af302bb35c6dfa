import numpy as np
import pytest

from nlpflow.exprlang import evaluate
from nlpflow.field import FieldParams, field_eval
from nlpflow.io import (ProblemFormatError, kkt_block, load_problem,
                        sample_feasible, solve_report_csv, trajectory_csv_rows,
                        trajectory_header)
from nlpflow.model import is_feasible
from nlpflow.solver import SolveConfig, solve


def test_load_problem_41(p41):
    full, red = p41
    assert full.names == ("x1", "x2", "x3")
    assert (full.m, full.k) == (1, 4)
    assert red is not None and red.names == ("x1", "x2")


def test_load_problem_42(p42):
    full, red = p42
    assert full.names == ("x1", "x2", "x3", "x4")
    assert (full.m, full.k) == (1, 2)
    assert red is not None and red.n == 3


def _write(tmp_path, text, name="case.nlp"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_minimal_file(tmp_path):
    path = _write(tmp_path, "vars: x y\nobjective: x^2 + y^2\nineq: -x\n")
    p, red = load_problem(path)
    assert p.names == ("x", "y") and p.k == 1 and red is None


def test_comments_and_blank_lines_ignored(tmp_path):
    path = _write(tmp_path,
                  "# a comment\n\nvars: x\nobjective: x^2  # inline\n")
    p, _ = load_problem(path)
    assert evaluate(p.objective, [3.0]) == 9.0


@pytest.mark.parametrize("text, fragment", [
    ("objective: x\n", "missing vars"),
    ("vars: x\n", "missing objective"),
    ("vars: x\nvars: y\nobjective: x\n", "duplicate vars"),
    ("vars: x\nobjective: x\nobjective: x\n", "duplicate objective"),
    ("vars: x\nobjective: x\nbounds: 0 1\n", "unknown key"),
    ("vars: x\nobjective: x\njust text\n", "expected 'key: value'"),
    ("vars: x\nobjective: x +\n", ":2:"),
    ("vars: x y\nobjective: x\neliminate: y\n", "name = expression"),
])
def test_load_problem_errors(tmp_path, text, fragment):
    with pytest.raises(ProblemFormatError, match=fragment):
        load_problem(_write(tmp_path, text))


def test_sample_feasible_is_seeded_and_feasible(p41):
    _, red = p41
    pts = sample_feasible(red, 50, seed=3)
    assert pts.shape == (50, 2)
    for x in pts:
        assert is_feasible(red, x, tol=1e-12)
    assert np.array_equal(pts, sample_feasible(red, 50, seed=3))


def test_sample_feasible_rejects_equalities(p41):
    full, _ = p41
    with pytest.raises(ValueError):
        sample_feasible(full, 5, seed=0)


def test_trajectory_csv_round_trip(p41):
    from nlpflow.flow import euler_flow
    _, red = p41
    params = FieldParams.default(red.n, red.k, sigma=2.0)
    traj = euler_flow(red, params, np.array([0.5, 0.5]), step=0.01, steps=20)
    header = trajectory_header(red)
    assert header == "t,x1,x2,theta,normF,max_g,max_abs_h"
    rows = list(trajectory_csv_rows(red, traj))
    assert len(rows) == len(traj)
    # 17-significant-digit formatting makes the round trip exact
    for i, row in enumerate(rows):
        vals = [float(tok) for tok in row.split(",")]
        assert vals[1] == traj.x[i][0] and vals[2] == traj.x[i][1]
        assert vals[3] == traj.theta[i]


def test_solve_report_csv_round_trip(p42):
    _, red = p42
    params = FieldParams.default(red.n, red.k, sigma=0.2)
    report = solve(red, params, SolveConfig(max_iter=100),
                   np.array([-0.9, -1.0, 2.0]))
    text = solve_report_csv(red, report)
    lines = text.splitlines()
    assert lines[0] == "iter,x1,x2,x3,theta,normF,step,backtracks,proj_used"
    data = [ln for ln in lines[1:] if not ln.startswith("#")]
    assert len(data) == len(report.records)
    # re-scoring the parsed iterates reproduces theta and |F| exactly
    for row, rec in zip(data, report.records):
        cells = row.split(",")
        x = np.array([float(c) for c in cells[1:4]])
        assert np.array_equal(x, rec.x)
        fe = field_eval(red, params, x)
        assert abs(fe.theta - float(cells[4])) <= 1e-12 * (1 + abs(fe.theta))
        assert abs(np.linalg.norm(fe.F) - float(cells[5])) <= 1e-12
    assert any(ln.startswith("# termination: ") for ln in lines)


def test_kkt_block_format(p42):
    from nlpflow.kkt import report_at
    full, red = p42
    params = FieldParams.default(full.n, full.k, sigma=0.2)
    x = red.lift(np.array([0.0, 1.0, 2.0]))
    block = kkt_block(report_at(full, x, params))
    lines = block.splitlines()
    assert lines[0].startswith("lambda: ")
    assert float(lines[0].split()[1]) == pytest.approx(2.0, abs=1e-12)
    assert lines[1].startswith("mu: ")
    assert lines[-1] == "is_critical: true"
