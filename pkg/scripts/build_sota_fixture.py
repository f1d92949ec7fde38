"""Construct the five-method reference result fixture.

The two in-house methods carry their published per-task MASE/WQL values. The
three external reference methods only have published summary statistics
(average, average excluding the jena_weather datasets, and average rank over
the 31-task set that drops jena_weather/10T/short), so this script
synthesizes per-task values for them that reproduce every one of those
summary statistics exactly, while keeping each task's five values strictly
ordered according to a rank assignment found by dynamic programming.

Structure assumptions, consistent with the published rank sums: Chronos 2 is
worst on jena tasks (rank 5, TimePFN 4) and best or second elsewhere;
TimePFN is worst elsewhere. When those defaults leave no numeric room, k
jena tasks are relaxed (Chronos 2 rank 4, TimePFN 5) and k non-jena tasks
get TimePFN 4 / TempoPFN 5, preserving every method's rank sum candidates.

Run from the repository root:  python scripts/build_sota_fixture.py
"""
from __future__ import annotations

import csv
import itertools
import random
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "src" / "rollcast" / "fixtures"
PAIR = FIXTURE_DIR / "reference_results_mv_pair.csv"
OUT = FIXTURE_DIR / "reference_results_sota.csv"

EXCLUDED_TASK = "jena_weather/10T/short"
TS, MV = "TabPFN-TS", "TabPFN-TS-MV"
C2, TPFN, TIPFN = "Chronos 2", "TempoPFN", "TimePFN"

# Published summaries per metric and method: (average over the 31 tasks,
# average over the 27 non-jena tasks, rank sum = average rank * 31).
TARGETS = {
    "mase": {
        C2: (6.8068, 1.0355, 51),
        TPFN: (1.2838, 1.32823, 88),
        TIPFN: (2.8429, 3.00798, 151),
        TS: (None, None, 92),
        MV: (None, None, 83),
    },
    "wql": {
        C2: (0.2577, 0.1392, 48),
        TPFN: (0.1511, 0.1648, 81),
        TIPFN: (0.3354, 0.3659, 151),
        TS: (None, None, 90),
        MV: (None, None, 95),
    },
}

MARGIN_FRAC = 0.015
MARGIN_ABS = 1e-5
GROWTH = 2.0  # width multiplier for windows above the largest fixed value


def load_pair():
    rows = {}
    with open(PAIR) as f:
        for rec in csv.DictReader(f):
            rows.setdefault(rec["dataset_task"], {})[rec["method"]] = (
                float(rec["mase"]),
                float(rec["wql"]),
            )
    return rows


def tpfn_slots(kind: str) -> tuple[int, ...]:
    """Free slots for {TempoPFN, TS, MV} given a task's fixed placements."""
    return {
        "jena": (1, 2, 3),         # C2 @5, TimePFN @4
        "jena_relaxed": (1, 2, 3),  # C2 @4, TimePFN @5
        "c2_second": (1, 3, 4),    # C2 @2, TimePFN @5
        "tipfn_fourth": (2, 3, 5),  # C2 @1, TimePFN @4
        "plain": (2, 3, 4),        # C2 @1, TimePFN @5
    }[kind]


def _window_distance(window, share):
    """Squared relative distance from the per-task budget share to the window."""
    lo, hi = window
    if share < lo:
        return ((lo - share) / share) ** 2
    if hi is not None and share > hi:
        return ((share - hi) / share) ** 2
    return 0.0


def task_options(task, metric, shares, bias):
    """(tpfn, ts, mv, cost) candidates.

    The cost measures how far each synthesized method's implied value window
    sits from its per-task budget share, so the DP prefers rank layouts the
    waterfill can actually satisfy. bias[(method, region)] > 0 asks for wider
    headroom above the share (raise window highs), < 0 for lows below it;
    the repair loop escalates these when a region's waterfill fails.
    """
    mv_wins = task[f"{metric}_mv_wins"]
    kind = task["kind"]
    region = "jena" if task["jena"] else "nonjena"
    options = []
    for tpfn in tpfn_slots(kind):
        rest = sorted(set(tpfn_slots(kind)) - {tpfn})
        winner, loser = rest
        ts_rank, mv_rank = (loser, winner) if mv_wins else (winner, loser)
        synth = synth_rank_map(task, tpfn)
        fixed = {ts_rank: task[f"{metric}_ts"], mv_rank: task[f"{metric}_mv"]}
        windows = windows_for_task(fixed, synth)
        cost = 0.0
        for m in (C2, TPFN, TIPFN):
            share = shares[(m, region)]
            cost += _window_distance(windows[m], share)
            b = bias.get((m, region), 0.0)
            if b:
                lo, hi = windows[m]
                hi_eff = hi if hi is not None else lo + 4 * share
                # positive bias rewards high window tops, negative rewards low bottoms
                cost -= b * (hi_eff / share) if b > 0 else -b * (-lo / share)
        options.append((tpfn, ts_rank, mv_rank, cost))
    return options


def solve_ranks(tasks, metric, bias):
    """Min-cost DP over (sum tpfn, sum ts) hitting the published rank sums."""
    t_tpfn = TARGETS[metric][TPFN][2]
    t_ts = TARGETS[metric][TS][2]
    shares = {}
    for method in (C2, TPFN, TIPFN):
        avg, avg_nj, _ = TARGETS[metric][method]
        n_jena = sum(1 for t in tasks if t["jena"])
        shares[(method, "jena")] = (avg * 31 - avg_nj * 27) / n_jena
        shares[(method, "nonjena")] = avg_nj * 27 / (31 - n_jena)
    layers = [{(0, 0): (0.0, None, None)}]
    for task in tasks:
        nxt = {}
        options = task_options(task, metric, shares, bias)
        for state, (cost, _, _) in layers[-1].items():
            for opt in options:
                key = (state[0] + opt[0], state[1] + opt[1])
                if key[0] > t_tpfn or key[1] > t_ts:
                    continue
                new_cost = cost + opt[3]
                if key not in nxt or new_cost < nxt[key][0]:
                    nxt[key] = (new_cost, state, opt)
        layers.append(nxt)
    key = (t_tpfn, t_ts)
    if key not in layers[-1]:
        return None
    chosen = []
    for layer in reversed(layers[1:]):
        _, prev, opt = layer[key]
        chosen.append(opt)
        key = prev
    return chosen[::-1]


def synth_rank_map(task, tpfn_rank):
    kind = task["kind"]
    if kind == "jena":
        return {C2: 5, TIPFN: 4, TPFN: tpfn_rank}
    if kind == "jena_relaxed":
        return {C2: 4, TIPFN: 5, TPFN: tpfn_rank}
    if kind == "c2_second":
        return {C2: 2, TIPFN: 5, TPFN: tpfn_rank}
    if kind == "tipfn_fourth":
        return {C2: 1, TIPFN: 4, TPFN: tpfn_rank}
    return {C2: 1, TIPFN: 5, TPFN: tpfn_rank}


def windows_for_task(fixed, synth_ranks):
    """Per-method (lo, hi) windows; hi None means unbounded above.

    Maximal runs of consecutive synth ranks share the enclosing gap between
    fixed values evenly; runs above the largest fixed value grow
    geometrically, the topmost window unbounded.
    """
    order = sorted(synth_ranks.items(), key=lambda kv: kv[1])
    out = {}
    i = 0
    while i < len(order):
        run = [order[i]]
        while i + 1 < len(order) and order[i + 1][1] == run[-1][1] + 1:
            run.append(order[i + 1])
            i += 1
        i += 1
        lo_val = fixed.get(run[0][1] - 1, 0.0)
        hi_val = fixed.get(run[-1][1] + 1)
        if hi_val is not None:
            width = (hi_val - lo_val) / len(run)
            for j, (method, _) in enumerate(run):
                a = lo_val + j * width
                m = max(MARGIN_FRAC * width, MARGIN_ABS)
                out[method] = (a + m, a + width - m)
        else:
            base = max(lo_val, MARGIN_ABS * 10)
            for j, (method, _) in enumerate(run):
                a = lo_val + j * GROWTH * base
                m = max(MARGIN_FRAC * base, MARGIN_ABS)
                hi = None if j == len(run) - 1 else a + GROWTH * base - m
                out[method] = (a + m, hi)
    return out


def waterfill(windows, target):
    """Values inside (lo, hi) windows summing exactly to target, or None."""
    los = [w[0] for w in windows]
    sum_lo = sum(los)
    if target < sum_lo:
        return None
    his = [
        w[1] if w[1] is not None else w[0] + max(1.0, 2 * (target - sum_lo))
        for w in windows
    ]
    sum_hi = sum(his)
    if target > sum_hi:
        return None
    if sum_hi == sum_lo:
        return los if abs(target - sum_lo) < 1e-9 else None
    t = (target - sum_lo) / (sum_hi - sum_lo)
    return [lo + t * (hi - lo) for lo, hi in zip(los, his)]


def synthesize(tasks, metric, bias):
    """One DP + waterfill pass; returns (values, ranks) or failure diagnostics."""
    ranks = solve_ranks(tasks, metric, bias)
    if ranks is None:
        return None, [("rank-dp", None, 0.0)]
    rank_maps = []
    for task, (r_tpfn, r_ts, r_mv, _) in zip(tasks, ranks):
        synth = synth_rank_map(task, r_tpfn)
        fixed = {r_ts: task[f"{metric}_ts"], r_mv: task[f"{metric}_mv"]}
        rank_maps.append((synth, fixed, dict(synth, **{TS: r_ts, MV: r_mv})))
    values = {}
    failures = []
    for method in (C2, TPFN, TIPFN):
        avg, avg_nj, _ = TARGETS[metric][method]
        total_nj = avg_nj * 27
        for is_jena, target in ((True, avg * 31 - total_nj), (False, total_nj)):
            region = "jena" if is_jena else "nonjena"
            idx = [i for i, t in enumerate(tasks) if t["jena"] == is_jena]
            wins = [windows_for_task(rank_maps[i][1], rank_maps[i][0])[method] for i in idx]
            filled = waterfill(wins, target)
            if filled is None:
                sum_lo = sum(w[0] for w in wins)
                direction = 1.0 if target > sum_lo else -1.0
                failures.append((method, region, direction))
                continue
            for i, v in zip(idx, filled):
                values[(i, method)] = v
    if failures:
        return None, failures
    return (values, [rm[2] for rm in rank_maps]), []


def verify(tasks, metric, values, full_ranks):
    sums = {m: 0 for m in (C2, TPFN, TIPFN, TS, MV)}
    for ranks in full_ranks:
        for method, rank in ranks.items():
            sums[method] += rank
    for method, total in sums.items():
        assert total == TARGETS[metric][method][2], (
            f"{metric} rank sum for {method}: {total} != {TARGETS[metric][method][2]}"
        )
    for i, task in enumerate(tasks):
        by_rank = {}
        for method, rank in full_ranks[i].items():
            if method == TS:
                v = task[f"{metric}_ts"]
            elif method == MV:
                v = task[f"{metric}_mv"]
            else:
                v = values[(i, method)]
            by_rank[rank] = v
        ordered = [by_rank[r] for r in sorted(by_rank)]
        assert sorted(by_rank) == [1, 2, 3, 4, 5], f"bad ranks on {task['name']}"
        assert all(b - a > 5e-6 for a, b in zip(ordered, ordered[1:])), (
            f"rank order too tight on {task['name']} ({metric}): {ordered}"
        )


def configure_structure(tasks, metric, k, relaxed_jena, rng):
    """Assign a structure kind to every task for this attempt.

    The number of tasks where the lead method places second (instead of
    first) follows from its published rank sum: jena contributes 5s (4s on
    the k relaxed tasks), every other task contributes 1, and each
    second-place task adds one more unit.
    """
    non_jena = [t for t in tasks if not t["jena"]]
    n_second = TARGETS[metric][C2][2] - 47 + k
    assert 0 <= n_second <= len(non_jena) - k
    # Chronos-2-second tasks: largest headroom below the in-house loser.
    by_gap = sorted(
        non_jena,
        key=lambda t: max(t[f"{metric}_ts"], t[f"{metric}_mv"]),
        reverse=True,
    )
    second = {t["name"] for t in by_gap[:n_second]}
    # TempoPFN-fifth tasks: smallest values, so the forced-high value is cheap.
    by_small = sorted(
        (t for t in non_jena if t["name"] not in second),
        key=lambda t: max(t[f"{metric}_ts"], t[f"{metric}_mv"]),
    )
    fourth = {t["name"] for t in by_small[:k]}
    for t in tasks:
        if t["jena"]:
            t["kind"] = "jena_relaxed" if t["name"] in relaxed_jena else "jena"
        elif t["name"] in second:
            t["kind"] = "c2_second"
        elif t["name"] in fourth:
            t["kind"] = "tipfn_fourth"
        else:
            t["kind"] = "plain"


def main():
    pair = load_pair()
    tasks = []
    for name in sorted(pair):
        if name == EXCLUDED_TASK:
            continue
        methods = pair[name]
        ts_mase, ts_wql = methods[TS]
        mv_mase, mv_wql = methods[MV]
        tasks.append(
            {
                "name": name,
                "jena": name.startswith("jena_weather"),
                "mase_ts": ts_mase, "mase_mv": mv_mase,
                "wql_ts": ts_wql, "wql_mv": mv_wql,
                "mase_mv_wins": mv_mase < ts_mase,
                "wql_mv_wins": mv_wql < ts_wql,
            }
        )
    assert len(tasks) == 31
    jena_names = [t["name"] for t in tasks if t["jena"]]

    results = {}
    ranks_out = {}
    for metric in ("mase", "wql"):
        solved = None
        for k in range(0, 3):
            for relaxed in itertools.combinations(jena_names, k):
                configure_structure(tasks, metric, k, set(relaxed), random.Random(7))
                bias = {}
                for round_no in range(60):
                    solved, failures = synthesize(tasks, metric, bias)
                    if solved is not None:
                        break
                    for method, region, direction in failures:
                        if method == "rank-dp":
                            break
                        key = (method, region)
                        step = 0.05 * direction
                        same_sign = bias.get(key, 0.0) * direction > 0
                        bias[key] = bias.get(key, 0.0) * (2.0 if same_sign else 0.0) + step
                    else:
                        continue
                    break
                if solved is not None:
                    break
            if solved is not None:
                break
        assert solved is not None, f"no feasible synthesis for {metric}"
        print(f"{metric}: solved")
        values, full_ranks = solved
        verify(tasks, metric, values, full_ranks)
        results[metric] = values
        ranks_out[metric] = full_ranks

    with open(OUT, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["dataset_task", "method", "mase", "wql"])
        for i, task in enumerate(tasks):
            for method in (C2, TPFN, TIPFN, TS, MV):
                if method == TS:
                    m, q = task["mase_ts"], task["wql_ts"]
                elif method == MV:
                    m, q = task["mase_mv"], task["wql_mv"]
                else:
                    m = results["mase"][(i, method)]
                    q = results["wql"][(i, method)]
                w.writerow([task["name"], method, f"{m:.6f}", f"{q:.6f}"])
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
