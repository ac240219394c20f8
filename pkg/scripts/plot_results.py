#!/usr/bin/env python3
"""Plot the CSV outputs of scripts/run_all.sh (requires matplotlib).

Reads results/*.csv produced by the CLI and writes one PNG per sweep plus
the beampattern overlay.  Pass a different results directory as argv[1].
"""

import csv
import pathlib
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

LABELS = {
    "ptrso": "trust region (proposed)",
    "pgd": "projected gradient",
    "pnm": "projected Newton",
    "ptrso_avg": "trust region, averaged history",
    "ula": "fixed ULA",
}
MARKERS = {"ptrso": "o", "pgd": "s", "pnm": "^", "ptrso_avg": "d", "ula": "x"}

AXIS_LABELS = {
    "snr": "SNR (dB)",
    "nr": "antennas",
    "t": "snapshots per block",
    "i": "jammers",
    "block": "block index",
}


def read_rows(path: pathlib.Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


def sweep_series(rows: list[dict], field: str):
    acc = defaultdict(lambda: defaultdict(list))
    for row in rows:
        acc[row["algo"]][float(row["value"])].append(float(row[field]))
    series = {}
    for algo, by_value in acc.items():
        values = sorted(by_value)
        means = [sum(by_value[v]) / len(by_value[v]) for v in values]
        series[algo] = (values, means)
    return series


def plot_sweep(path: pathlib.Path, out_dir: pathlib.Path) -> None:
    rows = read_rows(path)
    if not rows:
        return
    axis = rows[0]["axis"]
    for field, suffix in (("true_sinr_db", ""), ("effective", "_effectiveness")):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for algo, (values, means) in sorted(sweep_series(rows, field).items()):
            if field == "effective" and algo == "ula":
                continue
            ax.plot(
                values,
                means,
                marker=MARKERS.get(algo, "o"),
                label=LABELS.get(algo, algo),
            )
        ax.set_xlabel(AXIS_LABELS.get(axis, axis))
        ax.set_ylabel(
            "mean output SINR (dB)" if field == "true_sinr_db" else "effectiveness"
        )
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        target = out_dir / f"{path.stem}{suffix}.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        print(f"wrote {target}")


def plot_beampattern(path: pathlib.Path, out_dir: pathlib.Path) -> None:
    rows = read_rows(path)
    if not rows:
        return
    by_algo = defaultdict(lambda: ([], []))
    for row in rows:
        angles, gains = by_algo[row["algo"]]
        angles.append(float(row["angle_deg"]))
        gains.append(float(row["gain_db"]))
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for algo, (angles, gains) in sorted(by_algo.items()):
        order = sorted(range(len(angles)), key=angles.__getitem__)
        ax.plot(
            [angles[i] for i in order],
            [gains[i] for i in order],
            label=LABELS.get(algo, algo),
            linewidth=1.2,
        )
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalized gain (dB)")
    ax.set_ylim(-60, 3)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    target = out_dir / "beampattern.png"
    fig.savefig(target, dpi=150)
    plt.close(fig)
    print(f"wrote {target}")


def main() -> int:
    results = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "results")
    if not results.is_dir():
        print(f"no such directory: {results}", file=sys.stderr)
        return 1
    for path in sorted(results.glob("sweep_*.csv")) + sorted(
        results.glob("two_timescale.csv")
    ):
        plot_sweep(path, results)
    bp = results / "beampattern.csv"
    if bp.exists():
        plot_beampattern(bp, results)
    return 0


if __name__ == "__main__":
    sys.exit(main())
