"""train-toy: train the toy classifier on class-foldered images."""

from __future__ import annotations

from ..model import train_toy
from ._protocol import input_path, output_path, param, run


def main():
    bundle = train_toy(
        input_path("data"),
        epochs=int(param("epochs", "50")),
        lr=float(param("lr", "0.1")),
        seed=int(param("seed", "1")),
        dims=int(param("dims", "16")),
        holdout=float(param("holdout", "0.2")),
    )
    output_path("model").write_text(bundle.to_json() + "\n", encoding="utf-8")


if __name__ == "__main__":
    run(main)
