"""Base data: the classic 51-node Eilon instance (depot first).

Coordinates and demands as in the TSPLIB/CVRPLIB originals; the small
P-series instances with Q=160 are customer subsets of this node set.
"""

EIL51_COORDS = [
    (30, 40), (37, 52), (49, 49), (52, 64), (20, 26), (40, 30), (21, 47),
    (17, 63), (31, 62), (52, 33), (51, 21), (42, 41), (31, 32), (5, 25),
    (12, 42), (36, 16), (52, 41), (27, 23), (17, 33), (13, 13), (57, 58),
    (62, 42), (42, 57), (16, 57), (8, 52), (7, 38), (27, 68), (30, 48),
    (43, 67), (58, 48), (58, 27), (37, 69), (38, 46), (46, 10), (61, 33),
    (62, 63), (63, 69), (32, 22), (45, 35), (59, 15), (5, 6), (10, 17),
    (21, 10), (5, 64), (30, 15), (39, 10), (32, 39), (25, 32), (25, 55),
    (48, 28), (56, 37),
]

EIL51_DEMANDS = [
    0, 7, 30, 16, 9, 21, 15, 19, 23, 11, 5, 19, 29, 23, 21, 10, 15, 3, 41,
    9, 28, 8, 8, 16, 10, 28, 7, 15, 14, 6, 19, 11, 12, 23, 26, 17, 6, 9,
    15, 14, 7, 27, 13, 11, 16, 10, 5, 25, 17, 18, 10,
]

assert len(EIL51_COORDS) == 51 and len(EIL51_DEMANDS) == 51
assert sum(EIL51_DEMANDS) == 777
