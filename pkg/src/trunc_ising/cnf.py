"""CNF formulas: parsing, evaluation, flippability, restriction.

Spin convention used everywhere in this package: a configuration is a vector
of -1/+1 spins, +1 meaning the Boolean variable is true. A positive literal
is satisfied by spin +1, a negated literal by spin -1. The truncation set S
of a formula is the set of spin configurations satisfying every clause.

A coordinate i of a satisfying configuration is *flippable* when flipping
spin i alone stays inside S; only the clauses containing i need rechecking.
"""

from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels as _k
from .errors import DimacsError


class Literal(NamedTuple):
    variable: int  # 0-based variable index
    negated: bool

    @property
    def sign(self) -> int:
        return -1 if self.negated else 1


def as_spin_vector(config, num_vars: Optional[int] = None) -> np.ndarray:
    """Validate and convert a configuration to an int8 vector of -1/+1."""
    arr = np.asarray(config)
    if arr.ndim != 1:
        raise ValueError(f"configuration must be one-dimensional, got shape {arr.shape}")
    if num_vars is not None and arr.shape[0] != num_vars:
        raise ValueError(
            f"configuration length {arr.shape[0]} does not match variable count {num_vars}"
        )
    if arr.shape[0] and not np.logical_or(arr == 1, arr == -1).all():
        raise ValueError("configuration entries must be exactly -1 or +1")
    return np.ascontiguousarray(arr, dtype=np.int8)


class CnfFormula:
    """Immutable CNF formula over variables 0..num_vars-1.

    Clauses keep their construction order. No clause may contain the same
    variable twice (either polarity); the clause width k and variable degree
    d (max clauses per variable) are computed on construction. Flat CSR
    arrays over clauses and over the variable->clause index back the kernels.
    """

    __slots__ = (
        "num_vars",
        "clauses",
        "var_to_clauses",
        "width_k",
        "degree_d",
        "_cls_ptr",
        "_cls_var",
        "_cls_sign",
        "_var_ptr",
        "_var_cls",
    )

    def __init__(self, num_vars: int, clauses: Iterable[Iterable[Literal]] = ()):
        if num_vars < 0:
            raise ValueError("num_vars must be nonnegative")
        norm = []
        for ci, clause in enumerate(clauses):
            lits = tuple(Literal(int(v), bool(neg)) for v, neg in clause)
            seen = set()
            for lit in lits:
                if not 0 <= lit.variable < num_vars:
                    raise ValueError(
                        f"clause {ci}: variable {lit.variable} out of range [0, {num_vars})"
                    )
                if lit.variable in seen:
                    raise ValueError(f"clause {ci}: duplicate variable {lit.variable}")
                seen.add(lit.variable)
            norm.append(lits)
        self.num_vars = int(num_vars)
        self.clauses = tuple(norm)

        occ: list[list[int]] = [[] for _ in range(num_vars)]
        for ci, lits in enumerate(self.clauses):
            for lit in lits:
                occ[lit.variable].append(ci)
        self.var_to_clauses = tuple(tuple(c) for c in occ)
        self.width_k = max((len(c) for c in self.clauses), default=0)
        self.degree_d = max((len(c) for c in occ), default=0)

        lengths = [len(c) for c in self.clauses]
        self._cls_ptr = np.concatenate(([0], np.cumsum(lengths, dtype=np.int64)))
        self._cls_var = np.fromiter(
            (lit.variable for c in self.clauses for lit in c), np.int32,
            count=int(self._cls_ptr[-1]),
        )
        self._cls_sign = np.fromiter(
            (lit.sign for c in self.clauses for lit in c), np.int8,
            count=int(self._cls_ptr[-1]),
        )
        vlen = [len(c) for c in occ]
        self._var_ptr = np.concatenate(([0], np.cumsum(vlen, dtype=np.int64)))
        self._var_cls = np.fromiter(
            (ci for c in occ for ci in c), np.int32, count=int(self._var_ptr[-1])
        )

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CnfFormula):
            return NotImplemented
        return self.num_vars == other.num_vars and self.clauses == other.clauses

    def __hash__(self):
        return hash((self.num_vars, self.clauses))

    def __repr__(self) -> str:
        return (
            f"CnfFormula(num_vars={self.num_vars}, num_clauses={self.num_clauses}, "
            f"width_k={self.width_k}, degree_d={self.degree_d})"
        )


def empty_formula(num_vars: int) -> CnfFormula:
    """Formula with no clauses: every configuration satisfies it."""
    return CnfFormula(num_vars, ())


def parse_dimacs(text: str) -> CnfFormula:
    """Parse standard DIMACS CNF.

    'c' comment lines and blank lines are tolerated anywhere; the header is
    ``p cnf <vars> <clauses>``; clauses are signed 1-based integers terminated
    by 0 and may span lines. Errors report the offending 1-based line number.
    """
    num_vars: Optional[int] = None
    declared_clauses = 0
    clauses: list[list[Literal]] = []
    current: list[Literal] = []
    current_vars: set[int] = set()
    line_no = 0

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] == "c":
            continue
        if line[0] == "p":
            if num_vars is not None:
                raise DimacsError("duplicate header", line_no)
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "cnf":
                raise DimacsError(f"malformed header {line!r}", line_no)
            try:
                num_vars = int(parts[2])
                declared_clauses = int(parts[3])
            except ValueError:
                raise DimacsError(f"malformed header {line!r}", line_no) from None
            if num_vars < 0 or declared_clauses < 0:
                raise DimacsError(f"malformed header {line!r}", line_no)
            continue
        if num_vars is None:
            raise DimacsError("clause data before 'p cnf' header", line_no)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"invalid token {tok!r}", line_no) from None
            if lit == 0:
                if len(clauses) >= declared_clauses:
                    raise DimacsError(
                        f"clause count mismatch: header declares {declared_clauses}",
                        line_no,
                    )
                clauses.append(current)
                current = []
                current_vars = set()
                continue
            var = abs(lit) - 1
            if var >= num_vars:
                raise DimacsError(
                    f"variable index {abs(lit)} out of range (num_vars={num_vars})",
                    line_no,
                )
            if var in current_vars:
                raise DimacsError(
                    f"duplicate variable {abs(lit)} in clause", line_no
                )
            current_vars.add(var)
            current.append(Literal(var, lit < 0))

    if num_vars is None:
        raise DimacsError("missing 'p cnf' header", max(line_no, 1))
    if current:
        raise DimacsError("unterminated clause at end of input", line_no)
    if len(clauses) != declared_clauses:
        raise DimacsError(
            f"clause count mismatch: header declares {declared_clauses}, "
            f"found {len(clauses)}",
            max(line_no, 1),
        )
    return CnfFormula(num_vars, clauses)


def serialize_dimacs(formula: CnfFormula) -> str:
    """Canonical DIMACS text; parse(serialize(f)) reproduces f exactly."""
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    for clause in formula.clauses:
        toks = [str(-(lit.variable + 1) if lit.negated else lit.variable + 1) for lit in clause]
        toks.append("0")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def satisfies(formula: CnfFormula, config) -> bool:
    """True iff every clause has at least one satisfied literal."""
    spins = as_spin_vector(config, formula.num_vars)
    return bool(
        _k.config_satisfies(
            formula._cls_ptr, formula._cls_var, formula._cls_sign,
            formula.num_clauses, spins,
        )
    )


def satisfies_batch(formula: CnfFormula, spins_matrix: np.ndarray) -> np.ndarray:
    """Vectorized satisfies() over the rows of an (N, num_vars) spin matrix."""
    spins_matrix = np.asarray(spins_matrix)
    ok = np.ones(spins_matrix.shape[0], dtype=bool)
    for clause in formula.clauses:
        if not clause:
            ok[:] = False
            break
        vars_ = np.fromiter((l.variable for l in clause), np.int64, count=len(clause))
        signs = np.fromiter((l.sign for l in clause), np.int8, count=len(clause))
        ok &= (spins_matrix[:, vars_] == signs).any(axis=1)
    return ok


def is_flippable(formula: CnfFormula, config, i: int) -> bool:
    """True iff flipping coordinate i of a satisfying config stays satisfying.

    Contract: config must already satisfy the formula; violating that is an
    error. Only the clauses listed for variable i are rechecked.
    """
    spins = as_spin_vector(config, formula.num_vars)
    if not 0 <= i < formula.num_vars:
        raise IndexError(f"variable index {i} out of range [0, {formula.num_vars})")
    if not _k.config_satisfies(
        formula._cls_ptr, formula._cls_var, formula._cls_sign,
        formula.num_clauses, spins,
    ):
        raise ValueError("configuration does not satisfy the formula")
    return bool(
        _k.site_flippable(
            formula._cls_ptr, formula._cls_var, formula._cls_sign,
            formula._var_ptr, formula._var_cls, spins, i,
        )
    )


def flippable_mask(formula: CnfFormula, spins: np.ndarray) -> np.ndarray:
    """Boolean mask of flippable coordinates; assumes spins already satisfies."""
    out = np.empty(formula.num_vars, dtype=bool)
    for i in range(formula.num_vars):
        out[i] = _k.site_flippable(
            formula._cls_ptr, formula._cls_var, formula._cls_sign,
            formula._var_ptr, formula._var_cls, spins, i,
        )
    return out


def flippable_set(formula: CnfFormula, config) -> set:
    """The set of flippable coordinates of a satisfying configuration."""
    spins = as_spin_vector(config, formula.num_vars)
    if not _k.config_satisfies(
        formula._cls_ptr, formula._cls_var, formula._cls_sign,
        formula.num_clauses, spins,
    ):
        raise ValueError("configuration does not satisfy the formula")
    mask = flippable_mask(formula, spins)
    return set(np.flatnonzero(mask).tolist())


def flippable_matrix(formula: CnfFormula, spins_matrix: np.ndarray) -> np.ndarray:
    """Vectorized flippability over rows of a matrix of *satisfying* configs.

    Returns an (N, num_vars) boolean matrix. Row r, column i is the
    flippability of coordinate i in configuration r. Precondition: every row
    satisfies the formula (unchecked here for speed).

    Flipping i breaks clause c containing i exactly when c is currently
    satisfied only through its literal at i, i.e. its satisfied-literal count
    is 1 and that literal sits at variable i.
    """
    spins_matrix = np.asarray(spins_matrix)
    n_rows = spins_matrix.shape[0]
    out = np.ones((n_rows, formula.num_vars), dtype=bool)
    for clause in formula.clauses:
        if not clause:
            continue
        vars_ = np.fromiter((l.variable for l in clause), np.int64, count=len(clause))
        signs = np.fromiter((l.sign for l in clause), np.int8, count=len(clause))
        sat = spins_matrix[:, vars_] == signs  # (N, width)
        counts = sat.sum(axis=1)
        sole = counts == 1
        for j, v in enumerate(vars_):
            out[:, v] &= ~(sole & sat[:, j])
    return out


def restrict(formula: CnfFormula, pinned: Mapping[int, int]) -> CnfFormula:
    """Truncate onto a partial assignment.

    Clauses satisfied by the pinned spins are deleted; literals falsified by
    the pinning are removed from the remaining clauses (a clause emptied this
    way is kept, marking unsatisfiability). The result is a formula over the
    unpinned variables, renumbered compactly in ascending original order.
    """
    pinned = dict(pinned)
    for v, s in pinned.items():
        if not 0 <= v < formula.num_vars:
            raise IndexError(f"pinned variable {v} out of range [0, {formula.num_vars})")
        if s not in (-1, 1):
            raise ValueError(f"pinned value for variable {v} must be -1 or +1")
    free = [v for v in range(formula.num_vars) if v not in pinned]
    remap = {v: j for j, v in enumerate(free)}
    new_clauses = []
    for clause in formula.clauses:
        satisfied = False
        kept: list[Literal] = []
        for lit in clause:
            if lit.variable in pinned:
                if pinned[lit.variable] == lit.sign:
                    satisfied = True
                    break
                # falsified literal: drop it
            else:
                kept.append(Literal(remap[lit.variable], lit.negated))
        if not satisfied:
            new_clauses.append(kept)
    return CnfFormula(len(free), new_clauses)


def formula_stats(formula: CnfFormula) -> tuple:
    """(min clause width, max clause width, max variable degree); zeros if no clauses."""
    if not formula.clauses:
        return (0, 0, 0)
    widths = [len(c) for c in formula.clauses]
    return (min(widths), max(widths), formula.degree_d)


def load_cnf(path: str) -> CnfFormula:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dimacs(fh.read())


def save_cnf(formula: CnfFormula, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_dimacs(formula))


def clause_variables(formula: CnfFormula, c: int) -> Sequence[int]:
    """Variables of clause c in literal order."""
    return tuple(lit.variable for lit in formula.clauses[c])
