"""Additive-heuristic fixpoint kernels.

The delete-relaxation fixpoint is the planner's hot numeric loop: it runs
once per expanded search node. Two interchangeable implementations live
here: a numba-compiled Gauss-Seidel sweep (default) and a vectorized
numpy Jacobi sweep. Set ``TAMPLEARN_DISABLE_NUMBA=1`` to force the numpy
path. Both use a finite sentinel ``BIG`` for unreachable atoms and clamp
saturating sums to it, so they converge to the identical fixpoint (all
arithmetic is exact small integers in float64).
"""

from __future__ import annotations

import os

import numpy as np

BIG = 1_000_000.0

_DISABLE = os.environ.get("TAMPLEARN_DISABLE_NUMBA", "") not in ("", "0")

if not _DISABLE:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        HAS_NUMBA = False
else:
    HAS_NUMBA = False


def _hadd_numpy(
    init_true: np.ndarray,
    pre_idx: np.ndarray,
    pre_off: np.ndarray,
    add_idx: np.ndarray,
    add_off: np.ndarray,
    goal_idx: np.ndarray,
) -> float:
    """Jacobi sweeps with cumulative-sum segment reduction."""
    cost = np.where(init_true != 0, 0.0, BIG)
    add_counts = np.diff(add_off)
    for _ in range(len(cost) + 1):
        gathered = cost[pre_idx]
        cs = np.concatenate(([0.0], np.cumsum(gathered)))
        op_cost = 1.0 + cs[pre_off[1:]] - cs[pre_off[:-1]]
        np.minimum(op_cost, BIG, out=op_cost)
        new_cost = cost.copy()
        np.minimum.at(new_cost, add_idx, np.repeat(op_cost, add_counts))
        if np.array_equal(new_cost, cost):
            break
        cost = new_cost
    total = float(cost[goal_idx].sum()) if len(goal_idx) else 0.0
    return min(total, BIG) if total < BIG else BIG


def _hadd_python(init_true, pre_idx, pre_off, add_idx, add_off, goal_idx) -> float:
    """Gauss-Seidel sweeps; the njit-compiled variant of this is the default."""
    n_atoms = init_true.shape[0]
    cost = np.empty(n_atoms, dtype=np.float64)
    for i in range(n_atoms):
        cost[i] = 0.0 if init_true[i] != 0 else BIG
    n_ops = pre_off.shape[0] - 1
    changed = True
    while changed:
        changed = False
        for op in range(n_ops):
            total = 1.0
            for k in range(pre_off[op], pre_off[op + 1]):
                total += cost[pre_idx[k]]
                if total >= BIG:
                    total = BIG
                    break
            if total >= BIG:
                continue
            for k in range(add_off[op], add_off[op + 1]):
                atom = add_idx[k]
                if total < cost[atom]:
                    cost[atom] = total
                    changed = True
    result = 0.0
    for g in goal_idx:
        if cost[g] >= BIG:
            return BIG
        result += cost[g]
    return result if result < BIG else BIG


if HAS_NUMBA:
    _hadd_numba = njit(cache=True)(_hadd_python)


def hadd_kernel(init_true, pre_idx, pre_off, add_idx, add_off, goal_idx) -> float:
    """Sum of relaxed goal-atom costs; ``BIG`` means unreachable."""
    if HAS_NUMBA:
        return _hadd_numba(init_true, pre_idx, pre_off, add_idx, add_off, goal_idx)
    return _hadd_numpy(init_true, pre_idx, pre_off, add_idx, add_off, goal_idx)


def backend_name() -> str:
    return "numba" if HAS_NUMBA else "numpy"
