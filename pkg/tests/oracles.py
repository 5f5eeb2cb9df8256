"""Independent reference implementations used only by the tests.

Everything here is written with explicit loops over subjects and pairs so
that it shares no code path with the vectorised package routines.
"""

import math

import numpy as np


def km_aalen_johansen(time, status, weights=None, n_causes=2):
    """Weighted product-limit survival and Aalen-Johansen CIFs by direct loops.

    Returns ``(grid, surv, cifs)`` where ``grid`` holds the distinct event
    times and ``cifs[k-1][g]`` the cause-k incidence at ``grid[g]``.
    """
    time = list(map(float, time))
    status = list(map(int, status))
    n = len(time)
    w = [1.0] * n if weights is None else list(map(float, weights))
    grid = sorted({t for t, s, wi in zip(time, status, w) if s != 0})
    surv, cifs = [], [[] for _ in range(n_causes)]
    s_prev = 1.0
    f = [0.0] * n_causes
    for z in grid:
        at_risk = sum(w[j] for j in range(n) if time[j] >= z)
        d = [sum(w[j] for j in range(n) if time[j] == z and status[j] == k) for k in range(1, n_causes + 1)]
        if at_risk > 0:
            for k in range(n_causes):
                f[k] += s_prev * d[k] / at_risk
            s_prev = s_prev * (1.0 - sum(d) / at_risk)
        surv.append(s_prev)
        for k in range(n_causes):
            cifs[k].append(f[k])
    return np.array(grid), np.array(surv), np.array(cifs)


def step_value(grid, values, t, before=1.0):
    idx = [g for g in range(len(grid)) if grid[g] <= t]
    return values[idx[-1]] if idx else before


def span_neighbours(score, anchor, span):
    """Indices in the span neighbourhood of ``anchor`` by brute-force ranking."""
    n = len(score)
    # average ranks
    rank = []
    for i in range(n):
        less = sum(1 for j in range(n) if score[j] < score[i])
        equal = sum(1 for j in range(n) if score[j] == score[i])
        rank.append(less + (equal + 1) / 2.0)
    k = max(1, min(n, math.ceil(round(n * span, 9))))
    dist = sorted(abs(rank[j] - rank[anchor]) for j in range(n))
    cutoff = dist[k - 1]
    return [j for j in range(n) if abs(rank[j] - rank[anchor]) <= cutoff]


def case_weight_loop(time, status, score, tau, span, n_causes=2):
    """Case-weight matrix via per-subject neighbourhood tabulation."""
    n = len(time)
    out = np.zeros((n, n_causes))
    for i in range(n):
        if time[i] > tau:
            continue
        if status[i] != 0:
            out[i, status[i] - 1] = 1.0
            continue
        nb = span_neighbours(score, i, span)
        w = [1.0 if j in nb else 0.0 for j in range(n)]
        grid, surv, cifs = km_aalen_johansen(time, status, w, n_causes)
        s_i = step_value(grid, surv, time[i])
        for k in range(n_causes):
            f_tau = step_value(grid, cifs[k], tau, 0.0)
            f_t = step_value(grid, cifs[k], time[i], 0.0)
            out[i, k] = (f_tau - f_t) / s_i
        out[i] = np.clip(out[i], 0, 1)
        if out[i].sum() > 1:
            out[i] /= out[i].sum()
    return out


def empirical_metrics(time, status, score, tau, cause=1):
    """Plain empirical Se/Sp/AUC/Brier/KL/AbsErr when status at ``tau`` is known.

    AUCs are brute-force averages over all (case, control) pairs.
    """
    n = len(time)
    case = [time[i] <= tau and status[i] == cause for i in range(n)]
    ctrl_a = [not c for c in case]
    ctrl_b = [time[i] > tau for i in range(n)]

    def auc(ctrl):
        num = den = 0.0
        for i in range(n):
            if not case[i]:
                continue
            for j in range(n):
                if not ctrl[j]:
                    continue
                den += 1
                if score[i] > score[j]:
                    num += 1
                elif score[i] == score[j]:
                    num += 0.5
        return num / den

    def clip(u):
        return min(max(u, 1e-12), 1 - 1e-12)

    brier = sum((float(case[i]) - score[i]) ** 2 for i in range(n)) / n
    abs_err = sum(abs(float(case[i]) - score[i]) for i in range(n)) / n
    kl = -sum(math.log(clip(score[i])) if case[i] else math.log(1 - clip(score[i])) for i in range(n)) / n
    return {
        "auc_a": auc(ctrl_a),
        "auc_b": auc(ctrl_b),
        "brier": brier,
        "kl": kl,
        "abs_err": abs_err,
        "case": case,
        "ctrl_a": ctrl_a,
        "ctrl_b": ctrl_b,
    }


def empirical_se(score, case, c):
    cases = [i for i in range(len(score)) if case[i]]
    return sum(1 for i in cases if score[i] > c) / len(cases)


def empirical_sp(score, ctrl, c):
    ctrls = [i for i in range(len(score)) if ctrl[i]]
    return sum(1 for i in ctrls if score[i] <= c) / len(ctrls)


def random_uncensored(rng, n, k=2):
    """Uncensored competing-risks data with ties in time and score."""
    time = np.round(rng.exponential(2.0, n), 1) + 0.1
    status = rng.integers(1, k + 1, n)
    status[0] = 1
    score = np.round(rng.random(n), 2)
    return time, status, score


def random_censored(rng, n, k=2, censor_frac=0.3):
    time = np.round(rng.exponential(2.0, n), 2) + 0.01
    status = rng.integers(1, k + 1, n)
    status[rng.random(n) < censor_frac] = 0
    status[0] = 1
    score = rng.random(n)
    return time, status, score
