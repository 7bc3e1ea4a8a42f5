"""Published reference values used as acceptance anchors."""

# (problem-size[-a1 for alpha = 1], N_f, alpha, [(levels, m*, N_it*, S*, N_p), ...])
SPEEDUP_TABLES = [
    ("mp1-n40", 8503, 2.9, [(2, 112, 7, 2.73, 76), (3, 27, 8, 3.29, 315)]),
    ("mp1-n60", 18050, 3.1, [(2, 167, 8, 3.37, 109), (3, 35, 8, 5.11, 516)]),
    ("mp1-n80", 30018, 3.5, [(2, 229, 8, 4.09, 132), (3, 42, 8, 6.41, 715)]),
    ("mp1-n40-a1", 8503, 1.0, [(2, 65, 8, 4.07, 131), (3, 22, 8, 8.33, 387)]),
    ("mp1-n60-a1", 18050, 1.0, [(2, 95, 8, 5.93, 190), (3, 28, 8, 13.84, 645)]),
    ("mp1-n80-a1", 30018, 1.0, [(2, 123, 8, 7.65, 245), (3, 33, 8, 19.48, 910)]),
    ("mp2-1d-n256", 109888, 2.4, [(2, 363, 10, 7.56, 303), (3, 60, 9, 19.52, 1832)]),
    ("mp2-1d-n512", 369612, 3.9, [(2, 849, 10, 10.88, 436), (3, 100, 9, 27.12, 3697)]),
    ("mp2-1d-n256-a1", 109888, 1.0, [(2, 234, 10, 11.72, 470), (3, 52, 9, 40.61, 2114)]),
    ("mp2-1d-n512-a1", 369612, 1.0, [(2, 430, 10, 21.49, 860), (3, 77, 10, 82.62, 4801)]),
    ("mp2-2d-n64", 13256, 13.0, [(2, 294, 9, 1.25, 46), (3, 46, 10, 0.67, 289)]),
    ("mp2-2d-n128", 46431, 7.0, [(2, 403, 9, 3.19, 116), (3, 58, 10, 3.24, 801)]),
    ("mp2-2d-n64-a1", 13256, 1.0, [(2, 81, 10, 4.07, 164), (3, 25, 9, 10.07, 531)]),
    ("mp2-2d-n128-a1", 46431, 1.0, [(2, 152, 10, 7.61, 306), (3, 39, 9, 22.87, 1191)]),
]

SPEEDUP_ROWS = [(label, nf, a, *row) for label, nf, a, rows in SPEEDUP_TABLES for row in rows]

# MGRIT iteration counts
MP1_N40 = {4: [9, 9, 9, 9, 9, 9], 16: [8, 8, 8], 64: [8, 8], 256: [7]}  # levels 2, 3, ...
MP2_1D_N256_M4 = [10, 10, 11, 12, 12, 12, 13]  # levels 2..8

# sequential iteration counts (seed dependent; order of magnitude only)
SEQUENTIAL_NT = {("mp1", 40): 8503, ("mp2-1d", 256): 109888, ("mp2-2d", 64): 13256}
