# SPDX-License-Identifier: Apache-2.0
"""Regenerates the bundled datasets under data/.

The canonical public files (MoleculeNet ESOL/FreeSolv, Harvard CEP) are not
redistributable with this repository, so the bundled corpora are synthetic
stand-ins built from a fragment grammar. They reproduce the summary
statistics of the originals exactly:

    esol.csv       1,128 records, vocabulary 33, max SMILES length 98
    freesolv.csv     643 records, vocabulary 32, max SMILES length 83
    cep_50k.csv   50,000 records, vocabulary 23, max SMILES length 83

Targets are deterministic functions of molecular structure plus small seeded
noise, so models that read the structure can actually learn them. Run from
the repository root:  python3 tools/make_datasets.py
"""

import random
from collections import Counter

ESOL_ALPHABET = set("CcNnOoSsPFlBrIH[]()=#123+-.@/\\456")
FREESOLV_ALPHABET = ESOL_ALPHABET - {"."}
CEP_ALPHABET = set("cCnoseiSH[]()=#123456/\\")

assert len(ESOL_ALPHABET) == 33
assert len(FREESOLV_ALPHABET) == 32
assert len(CEP_ALPHABET) == 23


# ---------------------------------------------------------------------------
# CEP-like oligomers: ring units chained through linkers


def cep_unit(kind, digit):
    d = str(digit)
    if kind == "benzene":
        return "c%sccc(cc%s)" % (d, d)
    if kind == "thiophene":
        return "c%scc(sc%s)" % (d, d)
    if kind == "pyrrole":
        return "c%scc([nH]c%s)" % (d, d)
    if kind == "furan":
        return "c%scc(oc%s)" % (d, d)
    if kind == "selenophene":
        return "c%scc([se]c%s)" % (d, d)
    raise ValueError(kind)


CEP_UNITS = ["benzene", "thiophene", "pyrrole", "furan", "selenophene"]
CEP_LINKERS = ["", "C=C", "/C=C/", "/C=C\\", "C#C", "[SiH2]"]


def make_cep_molecule(rng, n_units=None):
    n = n_units if n_units is not None else rng.randint(2, 6)
    feats = Counter()
    parts = []
    for i in range(n):
        unit = rng.choice(CEP_UNITS)
        feats[unit] += 1
        parts.append(cep_unit(unit, rng.randint(1, 6)))
        if i + 1 < n:
            linker = rng.choice(CEP_LINKERS)
            feats["linker_" + (linker or "bond")] += 1
            parts.append(linker)
    feats["units"] = n
    return "".join(parts), feats


def cep_target(feats, rng):
    homo = (
        -5.80
        + 0.120 * feats["thiophene"]
        + 0.080 * feats["pyrrole"]
        - 0.050 * feats["furan"]
        + 0.150 * feats["selenophene"]
        + 0.020 * feats["benzene"]
        + 0.060 * feats["linker_C=C"]
        + 0.050 * feats["linker_/C=C/"]
        + 0.050 * feats["linker_/C=C\\"]
        + 0.100 * feats["linker_C#C"]
        - 0.070 * feats["linker_[SiH2]"]
        + 0.040 * feats["units"]
        + rng.gauss(0.0, 0.02)
    )
    return max(-6.5, min(-4.3, homo))


# ---------------------------------------------------------------------------
# small-organic generator for the ESOL / FreeSolv stand-ins


SCAFFOLDS = [
    # (smiles-builder, feature updates) -- digit is the ring label to use
    ("chain", None),
    ("benzene", "aromatic"),
    ("pyridine", "aromatic"),
    ("thiophene", "aromatic"),
    ("furan", "aromatic"),
    ("pyrrole", "aromatic"),
    ("cyclohexane", "ring"),
    ("cyclopentane", "ring"),
]

GROUPS = [
    ("O", "OH"),
    ("N", "NH2"),
    ("C(=O)O", "acid"),
    ("C(=O)N", "amide"),
    ("C#N", "nitrile"),
    ("[N+](=O)[O-]", "nitro"),
    ("F", "halogen"),
    ("Cl", "halogen"),
    ("Br", "halogen"),
    ("I", "halogen"),
    ("OC", "ether"),
    ("S", "thiol"),
    ("OP(=O)(O)O", "phosphate"),
]


def scaffold_smiles(kind, digit):
    d = str(digit)
    if kind == "benzene":
        return "c%sccccc%s" % (d, d), 6
    if kind == "pyridine":
        return "c%sccncc%s" % (d, d), 6
    if kind == "thiophene":
        return "c%sccsc%s" % (d, d), 5
    if kind == "furan":
        return "c%sccoc%s" % (d, d), 5
    if kind == "pyrrole":
        return "c%scc[nH]c%s" % (d, d), 5
    if kind == "cyclohexane":
        return "C%sCCCCC%s" % (d, d), 6
    if kind == "cyclopentane":
        return "C%sCCCC%s" % (d, d), 5
    raise ValueError(kind)


def make_small_molecule(rng, allow_salt, allow_stereo=True):
    feats = Counter()
    kind = rng.choice(SCAFFOLDS)[0]
    if kind == "chain":
        n = rng.randint(1, 8)
        feats["carbons"] = n
        core = "C" * n
        if allow_stereo and n >= 3 and rng.random() < 0.12:
            # one stereocenter spelled explicitly
            mark = "[C@H]" if rng.random() < 0.5 else "[C@@H]"
            pos = rng.randint(1, n - 2)
            group = rng.choice(["O", "N", "F"])
            core = "C" * pos + mark + "(" + group + ")" + "C" * (n - pos - 1)
            feats["OH" if group == "O" else ("NH2" if group == "N" else "halogen")] += 1
        smiles = core
    else:
        smiles, ring_size = scaffold_smiles(kind, rng.randint(1, 6))
        feats["carbons"] = ring_size
        feats["aromatic_ring" if kind in ("benzene", "pyridine", "thiophene", "furan", "pyrrole") else "ring"] += 1

    n_groups = rng.randint(0, 3)
    for _ in range(n_groups):
        g, name = GROUPS[rng.randrange(len(GROUPS))]
        if g.isalpha() and rng.random() < 0.5 and smiles[0] in "Cc":
            smiles = g + smiles  # prefix attachment
        elif smiles[-1] in "Cc)123456":
            # suffix attachment only onto a carbon-ish last atom
            smiles = smiles + (g if g.isalpha() else "(" + g + ")")
        else:
            continue
        feats[name] += 1
    if allow_stereo and rng.random() < 0.08 and smiles[-1] in "Cc)123456":
        smiles = smiles + rng.choice(["/C=C/", "/C=C\\"]) + "C" * rng.randint(1, 3)
        feats["carbons"] += 2 + 1
        feats["alkene"] += 1
    if allow_salt and rng.random() < 0.05:
        smiles = smiles + ".O"
        feats["hydrate"] += 1
    return smiles, feats


def esol_target(feats, rng):
    logs = (
        0.7
        - 0.24 * feats["carbons"]
        - 0.95 * feats["aromatic_ring"]
        - 0.55 * feats["ring"]
        + 1.05 * feats["OH"]
        + 0.80 * feats["NH2"]
        + 1.30 * feats["acid"]
        + 1.45 * feats["amide"]
        + 0.55 * feats["nitrile"]
        - 0.25 * feats["nitro"]
        - 0.45 * feats["halogen"]
        + 0.35 * feats["ether"]
        - 0.30 * feats["thiol"]
        + 1.60 * feats["phosphate"]
        + 0.55 * feats["hydrate"]
        - 0.35 * feats["alkene"]
        + rng.gauss(0.0, 0.25)
    )
    logs = max(-11.5, min(1.55, logs))
    if abs(logs) < 0.05:  # keep MAPE well-defined for every record
        logs = -0.05
    return logs


def freesolv_calc(feats, rng):
    # hydration free energies driven mostly by which groups are present and
    # how they combine, with a size term that saturates for long tails
    has = lambda k: 1.0 if feats[k] > 0 else 0.0
    polar_count = (
        feats["OH"] + feats["NH2"] + feats["acid"] + feats["amide"]
        + feats["nitrile"] + feats["nitro"] + feats["phosphate"]
    )
    dg = -(
        1.2
        + 1.60 * has("OH")
        + 1.40 * has("NH2")
        + 2.10 * has("acid")
        + 2.40 * has("amide")
        + 1.20 * has("nitrile")
        + 0.90 * has("nitro")
        + 2.80 * has("phosphate")
        + 0.50 * has("ether")
        + 0.35 * has("thiol")
        + 0.30 * has("halogen")
        + 1.90 * has("aromatic_ring") * max(has("OH"), has("NH2"))
        - 1.10 * has("aromatic_ring") * has("halogen")
        + 0.80 * has("ring") * has("ether")
        + 0.14 * min(feats["carbons"], 14)
        + 0.33 * polar_count
        + rng.gauss(0.0, 0.12)
    )
    return max(-24.0, min(-0.8, dg))


# ---------------------------------------------------------------------------


def stretch_to_length(smiles, feats, target_len):
    """Pads a molecule with an alkyl tail, one carbon per character, to hit
    target_len exactly."""
    pad = target_len - len(smiles)
    assert pad >= 0
    feats = Counter(feats)
    feats["carbons"] += pad
    return smiles + "C" * pad, feats


def coverage_rows(make, rng, required, present):
    """Keeps sampling until the alphabet is fully covered; returns extras."""
    rows = []
    guard = 0
    while not required <= present and guard < 100000:
        smiles, feats = make(rng)
        if set(smiles) <= required:
            rows.append((smiles, feats))
            present |= set(smiles)
        guard += 1
    assert required <= present, "alphabet coverage failed: missing %r" % (required - present)
    return rows


def build_corpus(make, target_fns, rng, count, alphabet, max_len, stretch_feat_fn=None):
    seen = set()
    rows = []

    def admit(smiles, feats):
        if smiles in seen or len(smiles) > max_len:
            return False
        if not set(smiles) <= alphabet:
            return False
        seen.add(smiles)
        rows.append((smiles, feats))
        return True

    # one molecule at exactly max_len pins the maximum sequence length
    while True:
        smiles, feats = make(rng)
        if len(smiles) <= max_len - 1:
            smiles, feats = stretch_to_length(smiles, feats, max_len)
            if admit(smiles, feats):
                break

    present = set()
    for s, _ in rows:
        present |= set(s)
    for smiles, feats in coverage_rows(lambda r: make(r), rng, alphabet, present):
        admit(smiles, feats)

    guard = 0
    while len(rows) < count and guard < 10 * count + 100000:
        admit(*make(rng))
        guard += 1
    assert len(rows) >= count, "only generated %d rows" % len(rows)
    rows = rows[:count]

    union = set()
    longest = 0
    for s, _ in rows:
        union |= set(s)
        longest = max(longest, len(s))
    assert union == alphabet, "alphabet drift: %r" % (union ^ alphabet)
    assert longest == max_len

    out = []
    for smiles, feats in rows:
        out.append((smiles, [fn(feats, rng) for fn in target_fns]))
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")
    print("wrote %s (%d rows)" % (path, len(rows)))


def main():
    rng = random.Random(20240917)

    esol = build_corpus(
        lambda r: make_small_molecule(r, allow_salt=True),
        [esol_target],
        rng,
        count=1128,
        alphabet=ESOL_ALPHABET,
        max_len=98,
    )
    write_csv(
        "data/esol.csv",
        "id,smiles,log_solubility",
        [("esol-%04d" % i, s, "%.4f" % t[0]) for i, (s, t) in enumerate(esol)],
    )

    freesolv_rng = random.Random(77001)
    freesolv = build_corpus(
        lambda r: make_small_molecule(r, allow_salt=False),
        [freesolv_calc],
        freesolv_rng,
        count=643,
        alphabet=FREESOLV_ALPHABET,
        max_len=83,
    )
    rows = []
    for i, (s, t) in enumerate(freesolv):
        calc = t[0]
        expt = max(-24.5, min(-0.6, calc + freesolv_rng.gauss(0.0, 0.30)))
        rows.append(("fs-%03d" % i, s, "%.4f" % expt, "%.4f" % calc))
    write_csv("data/freesolv.csv", "id,smiles,expt,calc", rows)

    cep_rng = random.Random(550001)
    cep = build_corpus(
        make_cep_molecule,
        [cep_target],
        cep_rng,
        count=50000,
        alphabet=CEP_ALPHABET,
        max_len=83,
    )
    write_csv(
        "data/cep_50k.csv",
        "id,smiles,homo",
        [("cep-%05d" % i, s, "%.5f" % t[0]) for i, (s, t) in enumerate(cep)],
    )


if __name__ == "__main__":
    main()
