"""Turn a simulated h12.csv into a measurement-style CSV.

The simulated transfer function is multiplied by a smooth microphone-mismatch
response Hc (so that calibration has something to undo) and perturbed by a
little seeded noise. Usage:

    insitu simulate --config cfg.toml --out sim     # cfg with a 5 Hz [grid]
    python3 make_example_measurement.py sim/h12.csv out.csv
"""

import csv
import math
import random
import sys


def mismatch(f_hz):
    gain = 1.0 + 0.03 * math.sin(f_hz / 700.0)
    phase = 0.02 * f_hz / 1000.0
    return complex(gain * math.cos(phase), gain * math.sin(phase))


def main():
    src, dst = sys.argv[1], sys.argv[2]
    rng = random.Random(20240603)
    with open(src, newline="") as f:
        rows = list(csv.DictReader(f))
    with open(dst, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["frequency_hz", "re_h12", "im_h12", "re_hc", "im_hc"])
        for r in rows:
            hz = float(r["frequency_hz"])
            h = complex(float(r["re_h12"]), float(r["im_h12"]))
            hc = mismatch(hz)
            noise = complex(rng.gauss(0.0, 2e-3), rng.gauss(0.0, 2e-3))
            raw = h * hc * (1.0 + noise)
            out.writerow([f"{hz:g}", f"{raw.real:.12g}", f"{raw.imag:.12g}", f"{hc.real:.12g}", f"{hc.imag:.12g}"])


if __name__ == "__main__":
    main()
