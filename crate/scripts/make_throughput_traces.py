"""Regenerates the bundled synthetic throughput traces.

Each trace has one throughput value (kbps) per second for 200 seconds.
  trace1: stable network around 4500 kbps with slight fluctuation.
  trace2: strongly fluctuating network averaging a little over 2000 kbps.
  trace3: moderately fluctuating network averaging about 2000 kbps, below
          2000 kbps for the whole of its first 25 seconds.
"""

import random
import sys
from pathlib import Path

SECONDS = 200


def rescale(values, target_mean, lo, hi):
    for _ in range(50):
        m = sum(values) / len(values)
        values = [min(hi, max(lo, v * target_mean / m)) for v in values]
    return values


def trace1(rng):
    out, level = [], 4500.0
    for t in range(SECONDS):
        level += 0.3 * (4500.0 - level) + rng.gauss(0, 120)
        v = level + rng.gauss(0, 150)
        if rng.random() < 0.04:
            v -= rng.uniform(400, 900)
        out.append(v)
    return rescale(out, 4500.0, 3300.0, 5600.0)


def trace2(rng):
    out = []
    while len(out) < SECONDS:
        level = rng.choice([rng.uniform(300, 1200), rng.uniform(1500, 2800), rng.uniform(3000, 4800)])
        for _ in range(rng.randint(2, 9)):
            out.append(level * rng.uniform(0.8, 1.2))
    return rescale(out[:SECONDS], 2150.0, 200.0, 5200.0)


def trace3(rng):
    head = [rng.uniform(900, 1700) for _ in range(25)]
    tail, level = [], 2200.0
    for _ in range(SECONDS - 25):
        level += 0.35 * (2150.0 - level) + rng.gauss(0, 300)
        tail.append(level + rng.gauss(0, 250))
    tail = rescale(tail, (2000.0 * SECONDS - sum(head)) / len(tail), 900.0, 3600.0)
    return head + tail


DESCRIPTIONS = {
    "trace1": "stable network, mean about 4500 kbps, slight fluctuation",
    "trace2": "strongly fluctuating network, mean a little over 2000 kbps",
    "trace3": "moderately fluctuating network, mean about 2000 kbps, below 2000 kbps for the first 25 s",
}


def main(out_dir):
    out_dir = Path(out_dir)
    for i, (name, make) in enumerate([("trace1", trace1), ("trace2", trace2), ("trace3", trace3)]):
        values = make(random.Random(1000 + i))
        mean = sum(values) / len(values)
        lines = [
            f"# synthetic reconstruction: {DESCRIPTIONS[name]}",
            f"# generated by scripts/make_throughput_traces.py, seed {1000 + i}, mean {mean:.1f} kbps",
        ]
        lines += [f"{round(v)}" for v in values]
        (out_dir / f"{name}.txt").write_text("\n".join(lines) + "\n")
        print(name, f"mean={mean:.1f}", f"min={min(values):.0f}", f"max={max(values):.0f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/traces")
