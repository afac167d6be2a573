"""Independent reference values for the eight composition descriptors.

Reads the bundled element and pair tables and writes
data/featurize_golden.json, which the Rust test suite compares against at
1e-9. Rerun after editing either table:
    python3 scripts/featurize_oracle.py > data/featurize_golden.json
"""
import csv
import json
import math
import re
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"
R = 8.314

ALLOYS = [
    "Fe20Ni20Co20Ti20Cu20",
    "CoCrFeMnNi",
    "Al4Ti23Mo23V23Ta23",
    "Fe19Ni19Cr19Co13Al19Mo9",
    "NbMoTaW",
    "Fe",
    "Al0.5CoCrCuFeNi",
]


def rows(name):
    with open(DATA / name) as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))


def parse(formula):
    amounts = {}
    for sym, num in re.findall(r"([A-Z][a-z]?)([0-9.]*)", formula):
        amounts[sym] = amounts.get(sym, 0.0) + (float(num) if num else 1.0)
    total = sum(amounts.values())
    return {s: a / total for s, a in amounts.items()}


def features(c, props, omega):
    def mean(key):
        return sum(x * props[s][key] for s, x in c.items())

    r_bar = mean("atomic_radius_pm")
    chi_bar = mean("electronegativity")
    syms = list(c)
    dh = 0.0
    for i, a in enumerate(syms):
        for b in syms[i + 1:]:
            dh += 4.0 * omega[frozenset((a, b))] * c[a] * c[b]
    return {
        "k": mean("bulk_modulus_gpa"),
        "v_m": mean("molar_volume_cm3mol"),
        "t_m": mean("melting_t_k"),
        "vec": mean("vec"),
        "delta": math.sqrt(sum(x * (1 - props[s]["atomic_radius_pm"] / r_bar) ** 2 for s, x in c.items())),
        "delta_chi": math.sqrt(sum(x * (props[s]["electronegativity"] - chi_bar) ** 2 for s, x in c.items())),
        "ds_mix": max(0.0, -R * sum(x * math.log(x) for x in c.values())),
        "dh_mix": dh,
    }


def main():
    props = {r["symbol"]: {k: float(v) for k, v in r.items() if k != "symbol"} for r in rows("elements.csv")}
    omega = {frozenset((r["symbol_a"], r["symbol_b"])): float(r["omega_kj_mol"]) for r in rows("pair_enthalpy.csv")}
    out = [{"formula": f, "features": features(parse(f), props, omega)} for f in ALLOYS]
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
