"""Writes the 8x8 handwritten digits bundled with scikit-learn as data/digits.csv.

The images come from the UCI Optical Recognition of Handwritten Digits data
set (CC BY 4.0). Columns: label, then the 64 pixel intensities (0..16).
"""
import sys
from pathlib import Path

from sklearn.datasets import load_digits


def main(out: Path) -> None:
    d = load_digits()
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as f:
        f.write("label," + ",".join(f"p{i}" for i in range(d.data.shape[1])) + "\n")
        for x, y in zip(d.data.astype(int), d.target):
            f.write(f"{y}," + ",".join(map(str, x)) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "data" / "digits.csv")
