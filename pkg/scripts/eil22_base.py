"""The 21-customer Eilon instance (depot first); demands in original units."""

EIL22_COORDS = [
    (145, 215), (151, 264), (159, 261), (130, 254), (128, 252), (163, 247),
    (146, 246), (161, 242), (142, 239), (163, 236), (148, 232), (128, 231),
    (156, 217), (129, 214), (146, 208), (164, 208), (141, 206), (147, 193),
    (164, 193), (129, 189), (155, 185), (139, 182),
]

EIL22_DEMANDS = [
    0, 1100, 700, 800, 1400, 2100, 400, 800, 100, 500, 600, 1200, 1300,
    1300, 300, 900, 2100, 1000, 900, 2500, 1800, 700,
]

assert len(EIL22_COORDS) == 22 and len(EIL22_DEMANDS) == 22
assert sum(EIL22_DEMANDS) == 22500
