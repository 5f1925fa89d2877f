#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Plots the CSV outputs of the loadcast CLI.

  plot_results.py forecast fc.csv out.png      actual vs predicted
  plot_results.py grid grid.csv out.png        RMSE per grid candidate
  plot_results.py online per.b64.csv [per.b128.csv ...] out.png
                                               per-batch RMSE curves
"""
import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_forecast(path, out):
    df = pd.read_csv(path)
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(df["timestamp"], df["actual"], label="actual")
    ax.plot(df["timestamp"], df["predicted"], label="predicted")
    ax.set_xlabel("timestamp (s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)


def plot_grid(path, out):
    df = pd.read_csv(path).dropna(subset=["rmse"])
    labels = [f"{h}/{l}/{k}" for h, l, k in zip(df["hidden"], df["layers"], df["lookback"])]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.bar(labels, df["rmse"])
    ax.set_ylabel("validation RMSE")
    ax.set_xlabel("hidden/layers/lookback")
    ax.tick_params(axis="x", rotation=60)
    fig.tight_layout()
    fig.savefig(out)


def plot_online(paths, out):
    fig, ax = plt.subplots(figsize=(10, 4))
    for path in paths:
        df = pd.read_csv(path)
        ax.plot(df["batch_index"], df["rmse"], marker=".", label=path)
    ax.set_xlabel("batch")
    ax.set_ylabel("RMSE before adaptation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)


def main(argv):
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("kind", choices=["forecast", "grid", "online"])
    parser.add_argument("inputs", nargs="+", help="input CSV file(s) followed by output image")
    args = parser.parse_args(argv)
    if len(args.inputs) < 2:
        parser.error("need at least one input and an output path")
    *inputs, out = args.inputs
    if args.kind == "forecast":
        plot_forecast(inputs[0], out)
    elif args.kind == "grid":
        plot_grid(inputs[0], out)
    else:
        plot_online(inputs, out)


if __name__ == "__main__":
    main(sys.argv[1:])
