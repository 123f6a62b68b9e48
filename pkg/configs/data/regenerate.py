"""Regenerate the bundled demo datasets.

Run from anywhere:

    python3 configs/data/regenerate.py

Writes franson_scan.csv, g2_histogram.csv and bell_expectations.csv
next to this script. Everything is seeded or exact, so reruns are
byte-stable.
"""

from pathlib import Path

import numpy as np

from qfc_link.reporting import write_csv
from qfc_link.verification import (
    FRANSON_PORTS,
    model_expectations,
    optimal_schedule,
    simulate_franson_scan,
)

HERE = Path(__file__).resolve().parent

# Interferometer scan in the infinite-statistics limit: per-port fringe
# visibilities and the flat accidental pedestal each port sits on. The
# mean coincidence rate is 2500 Hz, so subtracting the pedestal lifts
# the fitted visibility by about 0.006.
FRANSON_VISIBILITY = {"++": 0.985, "+-": 0.987, "-+": 0.988, "--": 0.977}
FRANSON_ACCIDENTAL_HZ = {"++": 15.32, "+-": 15.29, "-+": 15.27, "--": 15.45}
FRANSON_AMPLITUDE_HZ = 5000.0
FRANSON_TIME_S = 5.0
FRANSON_PHASES = 16

# Delay histogram: flat Poisson background, one planted zero-delay
# peak, two laser-leakage sidelobes that the run config masks out.
G2_BINS = 2001
G2_BIN_WIDTH_S = 1e-12
G2_BACKGROUND_MEAN = 13500
G2_PEAK_COUNTS = 4191075
G2_SIDELOBE_BINS = (500, 1500)
G2_SIDELOBE_COUNTS = 40500
G2_SEED = 17

# Chained-Bell terms: model expectations at the source visibility with
# a per-term uncertainty chosen so the ten terms sum to sigma_S = 0.017.
BELL_N = 5
BELL_VISIBILITY = 0.976
BELL_SIGMA_S = 0.017


def franson_rows():
    phases = np.arange(FRANSON_PHASES) * (2.0 * np.pi / FRANSON_PHASES)
    rows = []
    for port in FRANSON_PORTS:
        scan = simulate_franson_scan(
            phases, FRANSON_AMPLITUDE_HZ, FRANSON_VISIBILITY[port],
            accidental_rate=FRANSON_ACCIDENTAL_HZ[port],
            integration_time=FRANSON_TIME_S, ports=(port,), exact=True)
        rows.extend((p.phase, p.port, p.counts, p.time_s)
                    for p in scan.points)
    return rows


def g2_rows():
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(G2_SEED)))
    counts = rng.poisson(G2_BACKGROUND_MEAN, G2_BINS)
    center = G2_BINS // 2
    counts[center] = G2_PEAK_COUNTS
    for i in G2_SIDELOBE_BINS:
        counts[i] = G2_SIDELOBE_COUNTS
    delays = (np.arange(G2_BINS) - center) * G2_BIN_WIDTH_S
    return [(float(d), int(c)) for d, c in zip(delays, counts)]


def bell_rows():
    schedule = optimal_schedule(BELL_N)
    model = model_expectations(schedule, BELL_VISIBILITY)
    sigma = BELL_SIGMA_S / np.sqrt(len(schedule.terms))
    return [(term.a_index + 1, term.b_index + 1, term.sign,
             float(e), float(sigma))
            for term, e in zip(schedule.terms, model.expectations)]


def main():
    write_csv(HERE / "franson_scan.csv",
              ["phase_rad", "port", "counts", "time_s"], franson_rows())
    write_csv(HERE / "g2_histogram.csv", ["delay_s", "counts"], g2_rows())
    write_csv(HERE / "bell_expectations.csv",
              ["a_index", "b_index", "sign", "expectation", "sigma"],
              bell_rows())
    print(f"wrote 3 files under {HERE}")


if __name__ == "__main__":
    main()
