"""Dense two-phase primal simplex with Bland's rule, plus a pluggable external backend.

Problems have the form::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0
"""
import logging
from typing import NamedTuple

import numpy as np

from .exceptions import InfeasibleError, SolverError, SolverStallError, UnboundedError, ValidationError

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-8
PIVOT_TOLERANCE = 1e-9


def _matrix(values, columns, field):
    if values is None:
        return np.zeros((0, columns))
    matrix = np.array(values, dtype=float)
    if matrix.size == 0:
        return np.zeros((0, columns))
    if matrix.ndim != 2 or matrix.shape[1] != columns:
        raise ValidationError('{}: expected a matrix with {} columns'.format(field, columns))
    if not np.all(np.isfinite(matrix)):
        raise ValidationError('{}: coefficients must be finite'.format(field))
    return matrix


def _vector(values, size, field):
    vector = np.zeros(0) if values is None else np.array(values, dtype=float).reshape(-1)
    if vector.shape != (size,):
        raise ValidationError('{}: expected {} entries, got {}'.format(field, size, vector.size))
    if not np.all(np.isfinite(vector)):
        raise ValidationError('{}: entries must be finite'.format(field))
    return vector


class LinearProgram:

    def __init__(self, objective, a_ub=None, b_ub=None, a_eq=None, b_eq=None, variable_names=None):
        self.objective = np.array(objective, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.objective)):
            raise ValidationError('objective: coefficients must be finite')
        columns = self.objective.size
        self.a_ub = _matrix(a_ub, columns, 'a_ub')
        self.b_ub = _vector(b_ub, self.a_ub.shape[0], 'b_ub')
        self.a_eq = _matrix(a_eq, columns, 'a_eq')
        self.b_eq = _vector(b_eq, self.a_eq.shape[0], 'b_eq')
        self.variable_names = tuple(variable_names) if variable_names else tuple(
            'x{}'.format(j) for j in range(columns))

    @property
    def num_variables(self):
        return self.objective.size

    @property
    def num_rows(self):
        return self.a_ub.shape[0] + self.a_eq.shape[0]

    def dump(self):
        """Plain-text equation format (lp_solve style) for cross-checking with external tools."""
        def terms(row):
            parts = ['{:+.17g} {}'.format(a, name) for a, name in zip(row, self.variable_names) if a]
            return ' '.join(parts) or '0'

        lines = ['/* objective */', 'max: {};'.format(terms(self.objective)), '', '/* constraints */']
        lines += ['c{}: {} <= {:.17g};'.format(i, terms(row), b)
                  for i, (row, b) in enumerate(zip(self.a_ub, self.b_ub))]
        lines += ['e{}: {} = {:.17g};'.format(i, terms(row), b) for i, (row, b) in enumerate(zip(self.a_eq, self.b_eq))]
        return '\n'.join(lines) + '\n'


class LPResult(NamedTuple):
    value: float
    x: np.ndarray
    duals_ub: np.ndarray
    duals_eq: np.ndarray
    residuals: dict
    iterations: int
    backend: str


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def _set_objective(tableau, basis, costs):
    rows = len(basis)
    tableau[-1] = costs[basis] @ tableau[:rows]
    tableau[-1, :-1] -= costs


class _Tableau:

    def __init__(self, lp: LinearProgram):
        self.n = lp.num_variables
        self.m_ub = lp.a_ub.shape[0]
        rows = lp.num_rows
        self.cap = 10 * (rows + self.n) ** 2 + 10
        self.iterations = 0

        self.standard = np.zeros((rows, self.n + self.m_ub))
        self.standard[:self.m_ub, :self.n] = lp.a_ub
        self.standard[self.m_ub:, :self.n] = lp.a_eq
        self.standard[:self.m_ub, self.n:] = np.eye(self.m_ub)
        rhs = np.concatenate((lp.b_ub, lp.b_eq))

        sign = np.where(rhs < 0, -1.0, 1.0)
        artificial_rows = [i for i in range(rows) if i >= self.m_ub or sign[i] < 0]
        self.first_artificial = self.n + self.m_ub
        width = self.first_artificial + len(artificial_rows)
        self.tableau = np.zeros((rows + 1, width + 1))
        self.tableau[:rows, :self.first_artificial] = self.standard * sign[:, None]
        self.tableau[:rows, -1] = rhs * sign
        self.basis = np.array([self.n + i for i in range(rows)], dtype=np.int64)
        for a, i in enumerate(artificial_rows):
            self.tableau[i, self.first_artificial + a] = 1.0
            self.basis[i] = self.first_artificial + a
        self.rows = np.arange(rows)

    def _iterate(self):
        tableau, basis = self.tableau, self.basis
        rows = len(basis)
        while True:
            entering = np.nonzero(tableau[-1, :-1] < -PIVOT_TOLERANCE)[0]
            if entering.size == 0:
                return
            col = entering[0]
            column = tableau[:rows, col]
            candidates = np.nonzero(column > PIVOT_TOLERANCE)[0]
            if candidates.size == 0:
                raise UnboundedError('objective is unbounded along variable {}'.format(col))
            ratios = tableau[candidates, -1] / column[candidates]
            ties = candidates[ratios <= ratios.min() + PIVOT_TOLERANCE]
            row = ties[np.argmin(basis[ties])]
            _pivot(tableau, row, col)
            basis[row] = col
            self.iterations += 1
            if self.iterations > self.cap:
                raise SolverStallError('simplex exceeded {} pivots'.format(self.cap))

    def phase_one(self):
        if self.tableau.shape[1] - 1 == self.first_artificial:
            return
        costs = np.zeros(self.tableau.shape[1] - 1)
        costs[self.first_artificial:] = -1.0
        _set_objective(self.tableau, self.basis, costs)
        self._iterate()
        if self.tableau[-1, -1] < -FEASIBILITY_TOLERANCE:
            raise InfeasibleError('constraints are infeasible (phase one residual {:.3g})'.format(
                -self.tableau[-1, -1]))

        keep = []
        for i in range(len(self.basis)):
            if self.basis[i] >= self.first_artificial:
                structural = np.nonzero(np.abs(self.tableau[i, :self.first_artificial]) > PIVOT_TOLERANCE)[0]
                if structural.size == 0:
                    continue
                _pivot(self.tableau, i, structural[0])
                self.basis[i] = structural[0]
            keep.append(i)
        columns = list(range(self.first_artificial)) + [self.tableau.shape[1] - 1]
        self.tableau = self.tableau[keep + [len(self.basis)]][:, columns]
        self.basis = self.basis[keep]
        self.rows = self.rows[keep]

    def phase_two(self, objective):
        costs = np.concatenate((objective, np.zeros(self.m_ub)))
        _set_objective(self.tableau, self.basis, costs)
        self._iterate()
        x = np.zeros(self.first_artificial)
        x[self.basis] = self.tableau[:-1, -1]
        return np.clip(x[:self.n], 0.0, None), costs

    def duals(self, costs, total_rows):
        y = np.zeros(total_rows)
        if len(self.basis):
            basis_matrix = self.standard[self.rows][:, self.basis]
            y[self.rows] = np.linalg.lstsq(basis_matrix.T, costs[self.basis], rcond=None)[0]
        return y


def _simplex(lp: LinearProgram):
    table = _Tableau(lp)
    table.phase_one()
    x, costs = table.phase_two(lp.objective)
    y = table.duals(costs, lp.num_rows)
    return x, y[:lp.a_ub.shape[0]], y[lp.a_ub.shape[0]:], table.iterations


def _scipy(lp: LinearProgram):
    from scipy.optimize import linprog

    result = linprog(-lp.objective,
                     A_ub=lp.a_ub if lp.a_ub.size else None, b_ub=lp.b_ub if lp.a_ub.size else None,
                     A_eq=lp.a_eq if lp.a_eq.size else None, b_eq=lp.b_eq if lp.a_eq.size else None,
                     bounds=(0, None), method='highs')
    if result.status == 2:
        raise InfeasibleError(result.message)
    if result.status == 3:
        raise UnboundedError(result.message)
    if result.status != 0:
        raise SolverError(result.message)
    duals_ub = -np.asarray(result.ineqlin.marginals) if lp.a_ub.size else np.zeros(0)
    duals_eq = -np.asarray(result.eqlin.marginals) if lp.a_eq.size else np.zeros(0)
    return np.clip(result.x, 0.0, None), duals_ub, duals_eq, int(result.nit)


BACKENDS = {
    'simplex': _simplex,
    'scipy': _scipy,
}


def register_backend(name, solver):
    """``solver(lp)`` must return (x, duals_ub, duals_eq, iterations) under the same contract."""
    BACKENDS[name] = solver


def residuals(lp: LinearProgram, x, duals_ub, duals_eq):
    slack = lp.b_ub - lp.a_ub @ x
    reduced = lp.a_ub.T @ duals_ub + lp.a_eq.T @ duals_eq - lp.objective
    primal = max([0.0] + list(-slack) + list(np.abs(lp.a_eq @ x - lp.b_eq)) + list(-x))
    dual = max([0.0] + list(-reduced) + list(-duals_ub))
    complementarity = max([0.0] + list(np.abs(x * reduced)) + list(np.abs(duals_ub * slack)))
    gap = abs(lp.objective @ x - (lp.b_ub @ duals_ub + lp.b_eq @ duals_eq))
    return {'primal': float(primal), 'dual': float(dual),
            'complementarity': float(complementarity), 'gap': float(gap)}


def solve_lp(lp: LinearProgram, backend='simplex') -> LPResult:
    try:
        solver = BACKENDS[backend]
    except KeyError:
        raise ValidationError('unknown LP backend {!r}; known: {}'.format(backend, ', '.join(sorted(BACKENDS))))
    x, duals_ub, duals_eq, iterations = solver(lp)
    value = float(lp.objective @ x)
    report = residuals(lp, x, duals_ub, duals_eq)
    scale = max([1.0] + list(np.abs(lp.b_ub)) + list(np.abs(lp.b_eq)))
    if report['primal'] > FEASIBILITY_TOLERANCE * scale:
        raise SolverError('LP solution from backend {} violates a constraint by {:.3g}'.format(
            backend, report['primal']))
    logger.debug('LP %dx%d solved by %s in %d iterations: value %.12g, residuals %s',
                 lp.num_rows, lp.num_variables, backend, iterations, value, report)
    return LPResult(value, x, duals_ub, duals_eq, report, iterations, backend)
