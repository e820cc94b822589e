"""The truncated Ising measure: exact enumeration and Glauber dynamics.

The measure on spin configurations sigma in {-1,+1}^n is

    Pr[sigma] proportional to exp(beta * E(sigma) / 2) * 1{sigma satisfies Phi}

where E(sigma) = sigma^T A sigma is the full quadratic form (every edge
counted from both endpoints) with couplings A_ij = sign(i,j)/max_degree.
Halving E counts each pair interaction once, which makes the single-spin
conditional law

    Pr[sigma_i = s | rest] = exp(beta * m_i * s) / (2 cosh(beta * m_i))

with m_i the magnetization at i. The Glauber kernel resamples a uniformly
chosen site from this conditional; unflippable sites hold in place, so the
chain never leaves the satisfying set S (and is not ergodic when the flip
graph on S is disconnected).
"""

from __future__ import annotations

import math
from typing import List, Optional

import numpy as np

from . import _kernels as _k
from . import cnf as _cnf
from . import graph as _graph
from .backend import USE_NUMBA
from .cnf import CnfFormula, as_spin_vector
from .errors import EmptySupportError, SampleFileError, SampleNotInSupportError
from .graph import InteractionGraph

DEFAULT_ENUMERATION_CAP = 20


def _decode_codes(codes: np.ndarray, n: int) -> np.ndarray:
    """Bit-codes -> (N, n) int8 spin matrix; bit i set means spin +1."""
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (bits * 2 - 1).astype(np.int8)


def _encode_spins(spins: np.ndarray) -> int:
    code = 0
    for i, s in enumerate(spins):
        if s > 0:
            code |= 1 << i
    return code


class TruncatedIsingModel:
    """An interaction graph and a CNF formula over the same index set, plus the
    inverse-temperature bound B. Evaluation at |beta| > B is a contract error.

    When n is within the enumeration cap, emptiness of the satisfying set is
    detected eagerly at construction; beyond the cap it surfaces lazily when a
    provided sample fails satisfies() or a satisfying start cannot be found.
    """

    __slots__ = ("graph", "formula", "beta_bound", "enumeration_cap", "_exact_cache")

    def __init__(
        self,
        graph: InteractionGraph,
        formula: CnfFormula,
        beta_bound: float,
        enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
    ):
        if graph.num_vertices != formula.num_vars:
            raise ValueError(
                f"graph has {graph.num_vertices} vertices but formula has "
                f"{formula.num_vars} variables"
            )
        if not beta_bound > 0:
            raise ValueError("beta_bound must be positive")
        self.graph = graph
        self.formula = formula
        self.beta_bound = float(beta_bound)
        self.enumeration_cap = int(enumeration_cap)
        self._exact_cache: dict = {}
        if self.n <= self.enumeration_cap and _first_satisfying(formula) < 0:
            raise EmptySupportError("the formula has no satisfying assignment")

    @property
    def n(self) -> int:
        return self.graph.num_vertices

    def check_beta(self, beta: float) -> float:
        beta = float(beta)
        if abs(beta) > self.beta_bound:
            raise ValueError(
                f"|beta| = {abs(beta)} exceeds the model bound B = {self.beta_bound}"
            )
        return beta

    def __repr__(self) -> str:
        return (
            f"TruncatedIsingModel(n={self.n}, edges={self.graph.num_edges}, "
            f"clauses={self.formula.num_clauses}, B={self.beta_bound})"
        )


def _first_satisfying(formula: CnfFormula) -> int:
    n = formula.num_vars
    if USE_NUMBA:
        return int(
            _k.first_satisfying_code(
                n, formula._cls_ptr, formula._cls_var, formula._cls_sign,
                formula.num_clauses,
            )
        )
    total = 1 << n
    chunk = 1 << 16
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        ok = _cnf.satisfies_batch(formula, _decode_codes(codes, n))
        hits = np.flatnonzero(ok)
        if hits.size:
            return int(codes[hits[0]])
    return -1


class ExactDistribution:
    """Full enumeration of the truncated measure at a fixed beta.

    ``codes`` are the satisfying configurations as ascending bit-codes;
    ``energies`` the matching quadratic forms E(sigma); ``log_weights`` equal
    beta * E / 2; ``log_z`` is their log-sum-exp.
    """

    __slots__ = ("n", "beta", "codes", "energies", "log_weights", "log_z",
                 "_probs", "_spins", "_cum")

    def __init__(self, n: int, beta: float, codes: np.ndarray, energies: np.ndarray):
        self.n = n
        self.beta = float(beta)
        self.codes = codes
        self.energies = energies
        self.log_weights = self.beta * energies / 2.0
        m = float(self.log_weights.max())
        self.log_z = m + math.log(np.exp(self.log_weights - m).sum())
        self._probs = None
        self._spins = None
        self._cum = None

    @property
    def size(self) -> int:
        return int(self.codes.size)

    @property
    def probabilities(self) -> np.ndarray:
        if self._probs is None:
            self._probs = np.exp(self.log_weights - self.log_z)
        return self._probs

    @property
    def spins(self) -> np.ndarray:
        """(|S|, n) int8 matrix of the support, row r decoding codes[r]."""
        if self._spins is None:
            self._spins = _decode_codes(self.codes, self.n)
        return self._spins

    def index_of_code(self, code: int) -> int:
        """Support index of a bit-code, or -1 if the code is not in S."""
        j = int(np.searchsorted(self.codes, code))
        if j < self.size and self.codes[j] == code:
            return j
        return -1

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws of support indices."""
        if self._cum is None:
            self._cum = np.cumsum(self.probabilities)
            self._cum[-1] = 1.0
        u = rng.random(size)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        """One configuration (size None) or a (size, n) matrix of draws."""
        idx = self.sample_indices(rng, 1 if size is None else size)
        rows = self.spins[idx]
        return rows[0].copy() if size is None else rows.copy()


def enumerate_exact(model: TruncatedIsingModel, beta: float) -> ExactDistribution:
    """Enumerate S with weights exp(beta * E / 2); cached per beta on the model."""
    beta = model.check_beta(beta)
    if model.n > model.enumeration_cap:
        raise ValueError(
            f"n = {model.n} exceeds the enumeration cap {model.enumeration_cap}"
        )
    cached = model._exact_cache.get(beta)
    if cached is not None:
        return cached
    base = model._exact_cache.get("support")
    if base is None:
        base = _enumerate_support(model)
        model._exact_cache["support"] = base
    codes, energies = base
    if codes.size == 0:
        raise EmptySupportError("the formula has no satisfying assignment")
    dist = ExactDistribution(model.n, beta, codes, energies)
    model._exact_cache[beta] = dist
    return dist


def _enumerate_support(model: TruncatedIsingModel):
    f, g, n = model.formula, model.graph, model.n
    if USE_NUMBA:
        return _k.enumerate_support(
            n, f._cls_ptr, f._cls_var, f._cls_sign, f.num_clauses,
            g._nbr_ptr, g._nbr_idx, g._nbr_sign, g.inv_delta,
        )
    w = g.dense_weights()
    total = 1 << n
    chunk = 1 << 16
    code_parts, energy_parts = [], []
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        spins = _decode_codes(codes, n)
        ok = _cnf.satisfies_batch(f, spins)
        if ok.any():
            sp = spins[ok].astype(np.float64)
            energy_parts.append(np.einsum("ij,ij->i", sp @ w, sp))
            code_parts.append(codes[ok])
    if not code_parts:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    return np.concatenate(code_parts), np.concatenate(energy_parts)


def energy(model: TruncatedIsingModel, config) -> float:
    """The quadratic form E(sigma) = sigma^T A sigma (both edge directions counted)."""
    spins = as_spin_vector(config, model.n)
    m = _graph.all_magnetizations(model.graph, spins)
    return float(np.dot(spins.astype(np.float64), m))


def conditional_flip_probability(
    model: TruncatedIsingModel, beta: float, config, i: int
) -> float:
    """Probability that resampling site i from its conditional law flips it.

    Requires config in S and i flippable; for unflippable i the conditional
    is a point mass and this quantity is undefined.
    """
    beta = model.check_beta(beta)
    spins = as_spin_vector(config, model.n)
    if not _cnf.satisfies(model.formula, spins):
        raise SampleNotInSupportError("configuration does not satisfy the formula")
    if not _cnf.is_flippable(model.formula, spins, i):
        raise ValueError(f"site {i} is not flippable in this configuration")
    m = _graph.magnetization(model.graph, spins, i)
    x = 2.0 * beta * m * float(spins[i])
    if x >= 0:
        z = math.exp(-x)
        return z / (1.0 + z)
    return 1.0 / (1.0 + math.exp(x))


def glauber_step(
    model: TruncatedIsingModel, beta: float, config, rng: np.random.Generator
):
    """One single-site update. Returns a new configuration; never leaves S."""
    beta = model.check_beta(beta)
    spins = as_spin_vector(config, model.n).copy()
    f, g = model.formula, model.graph
    i = int(rng.integers(model.n))
    coin = rng.random()
    if _k.site_flippable(
        f._cls_ptr, f._cls_var, f._cls_sign, f._var_ptr, f._var_cls, spins, i
    ):
        m = _k.site_magnetization(
            g._nbr_ptr, g._nbr_idx, g._nbr_sign, g.inv_delta, spins, i
        )
        x = 2.0 * beta * m * float(spins[i])
        p = math.exp(-x) / (1.0 + math.exp(-x)) if x >= 0 else 1.0 / (1.0 + math.exp(x))
        if coin < p:
            spins[i] = -spins[i]
    return spins


_CHAIN_CHUNK = 1 << 20


def run_glauber(
    model: TruncatedIsingModel,
    beta: float,
    start,
    num_steps: int,
    rng: np.random.Generator,
):
    """Run num_steps Glauber updates from a satisfying start; returns the final state.

    Site indices and uniform coins are pre-drawn in fixed-size chunks, so the
    rng consumption order (and hence the result) is independent of backend.
    """
    beta = model.check_beta(beta)
    spins = as_spin_vector(start, model.n).copy()
    if not _cnf.satisfies(model.formula, spins):
        raise SampleNotInSupportError("start configuration does not satisfy the formula")
    f, g = model.formula, model.graph
    done = 0
    while done < num_steps:
        block = min(_CHAIN_CHUNK, num_steps - done)
        sites = rng.integers(0, model.n, size=block)
        coins = rng.random(block)
        _k.glauber_chain(
            g._nbr_ptr, g._nbr_idx, g._nbr_sign, g.inv_delta,
            f._cls_ptr, f._cls_var, f._cls_sign, f._var_ptr, f._var_cls,
            beta, spins, sites, coins,
        )
        done += block
    return spins


def glauber_occupation_codes(
    model: TruncatedIsingModel,
    beta: float,
    start,
    num_steps: int,
    record_every: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Chain trajectory as bit-codes recorded every record_every steps (n <= 63)."""
    beta = model.check_beta(beta)
    if model.n > 63:
        raise ValueError("bit-code recording requires n <= 63")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    spins = as_spin_vector(start, model.n).copy()
    if not _cnf.satisfies(model.formula, spins):
        raise SampleNotInSupportError("start configuration does not satisfy the formula")
    f, g = model.formula, model.graph
    sites = rng.integers(0, model.n, size=num_steps)
    coins = rng.random(num_steps)
    out = np.empty(num_steps // record_every, np.int64)
    _k.glauber_chain_codes(
        g._nbr_ptr, g._nbr_idx, g._nbr_sign, g.inv_delta,
        f._cls_ptr, f._cls_var, f._cls_sign, f._var_ptr, f._var_cls,
        beta, spins, sites, coins, record_every, out,
    )
    return out


def sample_exact(
    model: TruncatedIsingModel,
    beta: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
):
    """Draws distributed exactly as the truncated measure (enumeration scale)."""
    return enumerate_exact(model, beta).sample(rng, size)


def find_satisfying_config(
    model: TruncatedIsingModel, rng: np.random.Generator, max_tries: int = 20000
):
    """A configuration in S, by rejection over uniform random configurations.

    Suited to lightly constrained formulas (the generator regime); falls back
    to exhaustive search below the enumeration cap. Raises EmptySupportError
    when nothing is found.
    """
    f = model.formula
    for _ in range(max_tries):
        spins = (rng.integers(0, 2, size=model.n) * 2 - 1).astype(np.int8)
        if _k.config_satisfies(
            f._cls_ptr, f._cls_var, f._cls_sign, f.num_clauses, spins
        ):
            return spins
    if model.n <= model.enumeration_cap:
        code = _first_satisfying(f)
        if code >= 0:
            return _decode_codes(np.array([code], np.int64), model.n)[0]
        raise EmptySupportError("the formula has no satisfying assignment")
    raise EmptySupportError(
        f"no satisfying configuration found in {max_tries} random tries"
    )


def flip_graph_components(model: TruncatedIsingModel) -> List[np.ndarray]:
    """Partition of S into Hamming-distance-1 connected components.

    Components are returned as sorted code arrays, ordered by smallest member.
    These are the closed classes of the Glauber dynamics.
    """
    dist = enumerate_exact(model, 0.0)
    codes = dist.codes
    size = codes.size
    parent = np.arange(size)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for idx in range(size):
        code = int(codes[idx])
        for i in range(model.n):
            nb = code ^ (1 << i)
            if nb < code:
                continue  # each edge once
            j = dist.index_of_code(nb)
            if j >= 0:
                ra, rb = find(idx), find(j)
                if ra != rb:
                    parent[rb] = ra
    groups: dict = {}
    for idx in range(size):
        groups.setdefault(find(idx), []).append(int(codes[idx]))
    comps = [np.array(sorted(v), np.int64) for v in groups.values()]
    comps.sort(key=lambda a: int(a[0]))
    return comps


def fatness_estimate(
    model: TruncatedIsingModel,
    beta: float,
    i: int,
    rng: Optional[np.random.Generator] = None,
    num_samples: Optional[int] = None,
    burn_in: Optional[int] = None,
) -> float:
    """Pr[coordinate i is flippable] under the truncated measure.

    Exact via enumeration when n is within the cap; otherwise a Glauber
    occupation estimate over num_samples thinned records (approximate, and
    only as good as the chain's mixing).
    """
    beta = model.check_beta(beta)
    if not 0 <= i < model.n:
        raise IndexError(f"vertex {i} out of range [0, {model.n})")
    if model.n <= model.enumeration_cap:
        dist = enumerate_exact(model, beta)
        fmask = model._exact_cache.get("flippable")
        if fmask is None:
            fmask = _cnf.flippable_matrix(model.formula, dist.spins)
            model._exact_cache["flippable"] = fmask
        return float(dist.probabilities @ fmask[:, i])
    if rng is None or num_samples is None:
        raise ValueError("Monte Carlo fatness needs rng and num_samples beyond the cap")
    if burn_in is None:
        burn_in = default_burn_in(model.n)
    spins = find_satisfying_config(model, rng)
    spins = run_glauber(model, beta, spins, burn_in, rng)
    f = model.formula
    hits = 0
    for _ in range(num_samples):
        spins = run_glauber(model, beta, spins, model.n, rng)
        if _k.site_flippable(
            f._cls_ptr, f._cls_var, f._cls_sign, f._var_ptr, f._var_cls, spins, i
        ):
            hits += 1
    return hits / num_samples


def default_burn_in(n: int) -> int:
    """Heuristic chain burn-in: 100 * n * ln(n) single-site updates."""
    return int(math.ceil(100.0 * n * math.log(max(n, 2))))


def parse_samples(text: str, num_vars: Optional[int] = None) -> np.ndarray:
    """Parse spin configurations, one whitespace-separated row of +1/-1 per line.

    Blank lines are skipped. Returns an int8 matrix of shape (rows, n).
    """
    rows: List[List[int]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        try:
            vals = [int(t) for t in tokens]
        except ValueError:
            raise SampleFileError(f"line {line_no}: spins must be +1 or -1")
        if any(v not in (-1, 1) for v in vals):
            raise SampleFileError(f"line {line_no}: spins must be +1 or -1")
        if num_vars is not None and len(vals) != num_vars:
            raise SampleFileError(
                f"line {line_no}: expected {num_vars} spins, got {len(vals)}"
            )
        if rows and len(vals) != len(rows[0]):
            raise SampleFileError(f"line {line_no}: inconsistent row length")
        rows.append(vals)
    if not rows:
        raise SampleFileError("no sample rows found")
    return np.array(rows, dtype=np.int8)


def serialize_samples(samples: np.ndarray) -> str:
    matrix = np.atleast_2d(np.asarray(samples))
    lines = [" ".join(f"{int(v):+d}" for v in row) for row in matrix]
    return "\n".join(lines) + "\n"


def load_samples(path: str, num_vars: Optional[int] = None) -> np.ndarray:
    with open(path) as fh:
        return parse_samples(fh.read(), num_vars)


def save_samples(samples: np.ndarray, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_samples(samples))
