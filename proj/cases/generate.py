#!/usr/bin/env python3
"""Writes the shipped cases. Deterministic; rerun after editing.

Feeder electrical data is the standard 33-bus test feeder. Road lengths are
the standard Sioux Falls link lengths doubled. Load profiles, critical-load
picks, outage rates and fleet data are synthetic.
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# from, to, r_ohm, x_ohm
FEEDER33 = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]
TIES33 = [(8, 21, 2.0, 2.0), (9, 15, 2.0, 2.0), (12, 22, 2.0, 2.0), (18, 33, 0.5, 0.5), (25, 29, 0.5, 0.5)]
SECTIONALIZERS33 = {(2, 19), (3, 23), (6, 26), (9, 10), (15, 16)}
LOADS33 = {
    1: (0, 0), 2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20), 7: (200, 100),
    8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30), 12: (60, 35), 13: (60, 35), 14: (120, 80),
    15: (60, 10), 16: (60, 20), 17: (60, 20), 18: (90, 40), 19: (90, 40), 20: (90, 40), 21: (90, 40),
    22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200), 26: (60, 25), 27: (60, 25), 28: (60, 20),
    29: (120, 70), 30: (200, 600), 31: (150, 70), 32: (210, 100), 33: (60, 40),
}
CLASS33 = {b: ("commercial" if b in (7, 8, 24, 25) else "industrial" if b in (30, 31, 32) else "residential")
           for b in LOADS33}
CRITICAL33 = {4, 7, 14, 24, 30, 32}  # fixed labeled selection

# a, b, length (standard table units); shipped doubled as km
SIOUX = [
    (1, 2, 6), (1, 3, 4), (2, 6, 5), (3, 4, 4), (3, 12, 4), (4, 5, 2), (4, 11, 6), (5, 6, 4), (5, 9, 5),
    (6, 8, 2), (7, 8, 3), (7, 18, 2), (8, 9, 10), (8, 16, 5), (9, 10, 3), (10, 11, 5), (10, 15, 6),
    (10, 16, 4), (10, 17, 8), (11, 12, 6), (11, 14, 4), (12, 13, 3), (13, 24, 4), (14, 15, 5), (14, 23, 4),
    (15, 19, 3), (15, 22, 3), (16, 17, 2), (16, 18, 3), (17, 19, 2), (18, 20, 4), (19, 20, 4), (20, 21, 6),
    (20, 22, 5), (21, 22, 2), (21, 24, 3), (22, 23, 4), (23, 24, 2),
]

# synthetic 24 h demand factors
PROFILE = {
    "residential": [0.55, 0.50, 0.48, 0.47, 0.50, 0.58, 0.70, 0.80, 0.78, 0.74, 0.72, 0.72,
                    0.73, 0.72, 0.74, 0.80, 0.90, 1.00, 0.98, 0.95, 0.90, 0.80, 0.70, 0.60],
    "commercial": [0.40, 0.38, 0.36, 0.36, 0.38, 0.45, 0.60, 0.78, 0.92, 1.00, 1.00, 0.98,
                   0.96, 0.98, 1.00, 0.97, 0.92, 0.85, 0.72, 0.62, 0.55, 0.50, 0.45, 0.42],
    "industrial": [0.70, 0.68, 0.68, 0.68, 0.70, 0.75, 0.85, 0.95, 1.00, 1.00, 1.00, 0.98,
                   0.95, 0.98, 1.00, 1.00, 0.98, 0.92, 0.85, 0.80, 0.78, 0.75, 0.72, 0.70],
}


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(str(x) for x in r) + "\n")


def fmt(x):
    return f"{x:g}"


def feeder33(prefix, feeder, damaged=(), flaky=()):
    """Buses, branches and outage rows of one 33-bus feeder."""
    buses = []
    for b, (p, q) in LOADS33.items():
        buses.append((f"{prefix}{b}", feeder, fmt(p), fmt(q), CLASS33[b], int(b in CRITICAL33)))
    branches, outages = [], []
    for a, b, r, x in FEEDER33:
        bid = f"{prefix}l{a}_{b}"
        branches.append((bid, f"{prefix}{a}", f"{prefix}{b}", r, x, 4000, int((a, b) in SECTIONALIZERS33)))
    for a, b, r, x in TIES33:
        branches.append((f"{prefix}t{a}_{b}", f"{prefix}{a}", f"{prefix}{b}", r, x, 2000, 1))
    for a, b, down_h in damaged:
        outages.append(("branch", f"{prefix}l{a}_{b}", 0, "inf", down_h))
    for a, b, up_h, down_h in flaky:
        outages.append(("branch", f"{prefix}l{a}_{b}", 1, up_h, down_h))
    return buses, branches, outages


def profile_rows():
    return [(t, PROFILE["residential"][t], PROFILE["commercial"][t], PROFILE["industrial"][t]) for t in range(24)]


def write_case(name, doc, tables):
    d = os.path.join(HERE, name)
    os.makedirs(d, exist_ok=True)
    for fname, (header, rows) in tables.items():
        write_csv(os.path.join(d, fname), header, rows)
    with open(os.path.join(d, "case.json"), "w", newline="\n") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


BUS_H = ["id", "feeder", "p_kw", "q_kvar", "class", "critical"]
BRANCH_H = ["id", "from", "to", "r_ohm", "x_ohm", "s_max_kva", "switchable"]
MG_H = ["id", "bus", "p_max_kw", "q_max_kvar", "e_max_kwh", "e_min_kwh", "e_init_kwh", "local_kw", "local_pf",
        "local_class", "local_critical"]
FLEET_H = ["id", "depot", "p_ch_kw", "p_dch_kw", "capacity_kwh", "soc_init", "soc_min", "soc_max", "eta_ch",
           "eta_dch", "speed_kmh", "c_bat_per_kwh", "c_tran_per_h"]
OUT_H = ["kind", "id", "initially_up", "mean_up_h", "mean_down_h"]


def files(extra=()):
    f = {"roads": "roads.csv", "sites": "sites.csv", "buses": "buses.csv", "branches": "branches.csv",
         "microgrids": "microgrids.csv", "fleet": "fleet.csv", "profile": "profile.csv", "outages": "outages.csv"}
    for k in extra:
        f[k] = f"{k}.csv"
    return f


def toy2():
    buses = [("n0", 0, 0, 0, "residential", 0), ("n1", 0, 120, 50, "residential", 1),
             ("n2", 0, 260, 100, "commercial", 0), ("n3", 0, 150, 60, "residential", 0),
             ("n4", 0, 0, 0, "residential", 0)]
    z = 0.01 * 12.66 ** 2  # 0.01 pu on the 12.66 kV base
    x = 0.008 * 12.66 ** 2
    branches = [("l01", "n0", "n1", z, x, 1000, 0), ("l12", "n1", "n2", z, x, 1000, 1),
                ("l23", "n2", "n3", z, x, 1000, 1), ("l34", "n3", "n4", z, x, 1000, 0),
                ("l13", "n1", "n3", z, x, 1000, 1)]
    mgs = [("A", "n0", 150, 150, 300, 0, 300, 40, 0.95, "residential", 0),
           ("B", "n4", 600, 600, 3000, 0, 3000, 40, 0.95, "residential", 0)]
    doc = {
        "name": "toy2",
        "synthetic": True,
        "description": "Five-bus feeder with two microgrids and one MESS; small enough for exhaustive checks.",
        "files": files(),
        "horizon": {"intervals": 3, "prediction": 3, "dt_h": 1.0},
        "costs": {"critical_per_kwh": 10.0, "noncritical_per_kwh": 2.0, "generation_per_kwh": 0.5},
        "scenarios": {"generate": 20, "keep": 1, "load_sd": 0.02},
        "solver": {"rel_gap": 1e-9, "time_limit_s": 60},
        "base_kv": 12.66,
    }
    write_case("toy2", doc, {
        "roads.csv": (["a", "b", "length_km"], [(1, 2, 10), (2, 3, 10), (3, 4, 12), (1, 4, 25)]),
        "sites.csv": (["id", "kind", "node"], [("A", "microgrid", 1), ("B", "microgrid", 3), ("D", "depot", 4)]),
        "buses.csv": (BUS_H, buses),
        "branches.csv": (BRANCH_H, branches),
        "microgrids.csv": (MG_H, mgs),
        "fleet.csv": (FLEET_H, [("v1", "D", 300, 300, 1000, 0.5, 0.1, 0.9, 0.95, 0.95, 30, 0.2, 80)]),
        "profile.csv": (["interval", "residential", "commercial", "industrial"],
                        [(0, 1.0, 1.0, 1.0), (1, 1.1, 1.1, 1.1), (2, 1.2, 1.2, 1.2)]),
        "outages.csv": (OUT_H, [("branch", "l23", 1, 20, 2), ("road", "2-3", 1, 10, 2)]),
    })


def sioux(name, feeders, mg_nodes, depots, fleet, horizon, prediction, generate, keep, description,
          events=None, synthetic=True, roads=None):
    buses, branches, outages, mgs, sites = [], [], [], [], []
    damage_sets = [
        ([(5, 6, 6)], [(27, 28, 30, 4)]),
        ([(20, 21, 4)], [(11, 12, 30, 4)]),
        ([(26, 27, 8)], [(3, 4, 30, 4)]),
        ([(16, 17, 5)], [(23, 24, 30, 4)]),
        ([(7, 8, 6)], [(29, 30, 30, 4)]),
        ([(4, 5, 4)], [(19, 20, 30, 4)]),
    ]
    for f in range(feeders):
        prefix = f"f{f + 1}_"
        damaged, flaky = damage_sets[f % len(damage_sets)]
        b, br, out = feeder33(prefix, f, damaged, flaky)
        buses += b
        branches += br
        outages += out
        mid = f"MG{f + 1}"
        mgs.append((mid, f"{prefix}14", 1000, 800, 6000, 600, 5000, 150, 0.9, "residential", 1))
        sites.append((mid, "microgrid", mg_nodes[f]))
    for i, node in enumerate(depots):
        sites.append((f"D{i + 1}", "depot", node))
    road_list = roads if roads is not None else SIOUX
    road_rows = [(a, b, 2 * length) for a, b, length in road_list]
    road_outages = [("road", f"{a}-{b}", 1, 20, 3) for a, b, _ in road_list[::5]]
    tables = {
        "roads.csv": (["a", "b", "length_km"], road_rows),
        "sites.csv": (["id", "kind", "node"], sites),
        "buses.csv": (BUS_H, buses),
        "branches.csv": (BRANCH_H, branches),
        "microgrids.csv": (MG_H, mgs),
        "fleet.csv": (FLEET_H, fleet),
        "profile.csv": (["interval", "residential", "commercial", "industrial"], profile_rows()),
        "outages.csv": (OUT_H, outages + road_outages),
    }
    extra = []
    if events:
        tables["events.csv"] = (["interval", "kind", "id", "up"], events)
        extra.append("events")
    doc = {
        "name": name,
        "synthetic": synthetic,
        "description": description,
        "files": files(extra),
        "horizon": {"intervals": horizon, "prediction": prediction, "dt_h": 1.0},
        "costs": {"critical_per_kwh": 10.0, "noncritical_per_kwh": 2.0, "generation_per_kwh": 0.5},
        "scenarios": {"generate": generate, "keep": keep, "load_sd": 0.02},
        "solver": {"rel_gap": 1e-4, "time_limit_s": 120},
        "base_kv": 12.66,
    }
    write_case(name, doc, tables)


def mess_row(i, depot):
    return (f"M{i}", depot, 500, 500, 1500, 0.5, 0.1, 0.9, 0.95, 0.95, 30, 0.2, 80)


def grid_roads(n):
    """n x n lattice, 4 length units per edge, nodes numbered row-major from 1."""
    out = []
    for r in range(n):
        for c in range(n):
            v = r * n + c + 1
            if c + 1 < n:
                out.append((v, v + 1, 4))
            if r + 1 < n:
                out.append((v, v + n, 4))
    return out


if __name__ == "__main__":
    toy2()
    sioux("sioux4x33", 4, [3, 10, 16, 22], [13], [mess_row(i + 1, "D1") for i in range(3)], 24, 12, 2000, 10,
          "Four 33-bus feeders on the Sioux Falls road network; loads, profiles and outages are synthetic.")
    sioux("sioux4x33-small", 2, [10, 16], [13], [mess_row(1, "D1")], 12, 3, 60, 2,
          "Two-feeder, twelve-interval reduction of sioux4x33 for repeated runs; synthetic data.")
    sioux("synthetic6", 6, [1, 6, 15, 22, 31, 36], [8, 29], [mess_row(i + 1, "D1" if i < 3 else "D2") for i in range(5)],
          24, 12, 2000, 10, "Synthetic six-feeder, two-depot, five-MESS system on a 6x6 road lattice.",
          roads=grid_roads(6))
