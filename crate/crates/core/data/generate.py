"""Regenerates the bundled curvature profiles.

Each profile is a list of segments: straights, and constant-radius arcs with
linear curvature ramps (clothoid transitions) on both ends. Output is the
two-column `arc_length_m,curvature_per_m` format sampled every metre.
"""
import math

RAMP = 20.0


def build(segments, total=None):
    # segments: ("S", length) or ("C", radius, arc_length, sign)
    pieces = []
    for seg in segments:
        if seg[0] == "S":
            pieces.append((seg[1], 0.0, 0.0))
        else:
            _, radius, arc, sign = seg
            k = sign / radius
            pieces.append((RAMP, 0.0, k))
            pieces.append((arc, k, k))
            pieces.append((RAMP, k, 0.0))
    length = sum(p[0] for p in pieces)
    if total is not None:
        # stretch the first straight so the profile has the requested length
        first = next(i for i, p in enumerate(pieces) if p[1] == 0.0 and p[2] == 0.0)
        l, a, b = pieces[first]
        pieces[first] = (l + total - length, a, b)
        length = total

    def curvature(s):
        acc = 0.0
        for l, a, b in pieces:
            if s <= acc + l + 1e-9:
                t = (s - acc) / l if l > 0 else 0.0
                return a + (b - a) * t
            acc += l
        return pieces[-1][2]

    n = int(round(length))
    return [(float(i), curvature(float(i))) for i in range(n + 1)]


def write(path, rows, header):
    with open(path, "w") as f:
        f.write(header + "\n")
        for s, k in rows:
            f.write(f"{s:.1f},{k:.9f}\n")


# A 4232 m clockwise circuit: long start/finish straight, a hairpin, a run of
# medium and fast corners, a slow chicane and a fast final sweep.
circuit = [
    ("S", 640.0),
    ("C", 24.0, 40.0, -1),   # hairpin
    ("S", 180.0),
    ("C", 75.0, 60.0, -1),
    ("S", 120.0),
    ("C", 40.0, 45.0, 1),
    ("S", 260.0),
    ("C", 120.0, 90.0, -1),
    ("S", 150.0),
    ("C", 55.0, 50.0, -1),
    ("S", 300.0),
    ("C", 220.0, 160.0, 1),
    ("S", 120.0),
    ("C", 32.0, 35.0, -1),
    ("S", 90.0),
    ("C", 30.0, 30.0, 1),    # chicane
    ("C", 30.0, 30.0, -1),
    ("S", 220.0),
    ("C", 90.0, 80.0, -1),
    ("S", 140.0),
    ("C", 180.0, 140.0, -1),  # final sweep onto the straight
    ("S", 60.0),
]

# Braking zone, one medium-slow corner, acceleration zone.
section = [
    ("S", 100.0),
    ("C", 30.0, 40.0, -1),
    ("S", 90.0),
]

if __name__ == "__main__":
    write("synthetic_circuit.csv", build(circuit, total=4232.0), "arc_length_m,curvature_per_m")
    write("brake_corner_accel.csv", build(section), "arc_length_m,curvature_per_m")
