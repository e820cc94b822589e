"""Scalar hot loops shared by both backends.

Formulas and graphs arrive as flat CSR arrays (built once by the owning
objects) so every kernel is numba-compilable; under the numpy backend the
same functions run as plain Python. Spin configurations are int8 vectors
of -1/+1, +1 meaning true. All functions assume validated inputs.
"""

import math

import numpy as np

from .backend import jit


@jit
def config_satisfies(cls_ptr, cls_var, cls_sign, num_clauses, spins):
    # a clause is satisfied iff some literal's variable carries its sign
    for c in range(num_clauses):
        sat = False
        for e in range(cls_ptr[c], cls_ptr[c + 1]):
            if spins[cls_var[e]] == cls_sign[e]:
                sat = True
                break
        if not sat:
            return False
    return True


@jit
def site_flippable(cls_ptr, cls_var, cls_sign, var_ptr, var_cls, spins, i):
    # assumes spins satisfies the formula; only clauses touching i can break
    for t in range(var_ptr[i], var_ptr[i + 1]):
        c = var_cls[t]
        sat = False
        for e in range(cls_ptr[c], cls_ptr[c + 1]):
            v = cls_var[e]
            s = spins[v]
            if v == i:
                s = -s
            if s == cls_sign[e]:
                sat = True
                break
        if not sat:
            return False
    return True


@jit
def site_magnetization(nbr_ptr, nbr_idx, nbr_sign, inv_delta, spins, i):
    acc = 0
    for e in range(nbr_ptr[i], nbr_ptr[i + 1]):
        acc += nbr_sign[e] * spins[nbr_idx[e]]
    return acc * inv_delta


@jit
def glauber_chain(
    nbr_ptr,
    nbr_idx,
    nbr_sign,
    inv_delta,
    cls_ptr,
    cls_var,
    cls_sign,
    var_ptr,
    var_cls,
    beta,
    spins,
    sites,
    coins,
):
    """Run len(sites) single-site updates in place.

    Each step resamples the uniformly pre-drawn site from its conditional
    law; unflippable sites hold (the conditional is a point mass).
    """
    for t in range(sites.shape[0]):
        i = sites[t]
        if not site_flippable(cls_ptr, cls_var, cls_sign, var_ptr, var_cls, spins, i):
            continue
        m = site_magnetization(nbr_ptr, nbr_idx, nbr_sign, inv_delta, spins, i)
        x = 2.0 * beta * m * spins[i]
        if x >= 0.0:
            z = math.exp(-x)
            p = z / (1.0 + z)
        else:
            p = 1.0 / (1.0 + math.exp(x))
        if coins[t] < p:
            spins[i] = -spins[i]


@jit
def glauber_chain_codes(
    nbr_ptr,
    nbr_idx,
    nbr_sign,
    inv_delta,
    cls_ptr,
    cls_var,
    cls_sign,
    var_ptr,
    var_cls,
    beta,
    spins,
    sites,
    coins,
    record_every,
    out_codes,
):
    """Same chain, recording the configuration bit-code every record_every steps.

    Bit i of the code is set iff spins[i] == +1. Only valid for n <= 63.
    """
    n = spins.shape[0]
    code = 0
    for i in range(n):
        if spins[i] > 0:
            code |= 1 << i
    r = 0
    for t in range(sites.shape[0]):
        i = sites[t]
        if site_flippable(cls_ptr, cls_var, cls_sign, var_ptr, var_cls, spins, i):
            m = site_magnetization(nbr_ptr, nbr_idx, nbr_sign, inv_delta, spins, i)
            x = 2.0 * beta * m * spins[i]
            if x >= 0.0:
                z = math.exp(-x)
                p = z / (1.0 + z)
            else:
                p = 1.0 / (1.0 + math.exp(x))
            if coins[t] < p:
                spins[i] = -spins[i]
                code ^= 1 << i
        if (t + 1) % record_every == 0:
            out_codes[r] = code
            r += 1


@jit
def enumerate_support(
    n,
    cls_ptr,
    cls_var,
    cls_sign,
    num_clauses,
    nbr_ptr,
    nbr_idx,
    nbr_sign,
    inv_delta,
):
    """All satisfying bit-codes (ascending) with their interaction energies.

    The energy is the full quadratic form: sum_i spins[i] * m_i, every edge
    counted from both endpoints.
    """
    total = 1 << n
    codes = np.empty(total, np.int64)
    energies = np.empty(total, np.float64)
    spins = np.empty(n, np.int8)
    cnt = 0
    for code in range(total):
        for i in range(n):
            if (code >> i) & 1 == 1:
                spins[i] = 1
            else:
                spins[i] = -1
        if not config_satisfies(cls_ptr, cls_var, cls_sign, num_clauses, spins):
            continue
        e = 0.0
        for i in range(n):
            acc = 0
            for t in range(nbr_ptr[i], nbr_ptr[i + 1]):
                acc += nbr_sign[t] * spins[nbr_idx[t]]
            e += spins[i] * acc
        codes[cnt] = code
        energies[cnt] = e * inv_delta
        cnt += 1
    return codes[:cnt].copy(), energies[:cnt].copy()


@jit
def first_satisfying_code(n, cls_ptr, cls_var, cls_sign, num_clauses):
    """Smallest satisfying bit-code, or -1 when the formula is unsatisfiable."""
    spins = np.empty(n, np.int8)
    for code in range(1 << n):
        for i in range(n):
            if (code >> i) & 1 == 1:
                spins[i] = 1
            else:
                spins[i] = -1
        if config_satisfies(cls_ptr, cls_var, cls_sign, num_clauses, spins):
            return code
    return -1
