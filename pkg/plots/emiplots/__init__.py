"""Render benchmark figures from the solver CLI's CSV outputs.

Three figure kinds are supported, matching the CSV schemas the solver
writes: an eigenvalue-versus-symbol-sample overlay, a two-panel
spectral-interval / iteration-bound chart over the time-step sweep, and an
iteration-count table chart.  Rendering never recomputes anything: inputs
are read, sorted at most, and drawn.
"""

import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGURE_KINDS = ("spectrum-vs-symbol", "bound-vs-tau", "iterations-table")

__version__ = "0.1.0"


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


class EmptyInputError(ValueError):
    """Input CSV carries a header but no data rows."""


@dataclass(frozen=True)
class FigureJob:
    """Input CSV paths, figure kind, output image path."""

    inputs: tuple
    kind: str
    output: str

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r} (use one of {FIGURE_KINDS})")


def read_columns(path, required):
    """Read a CSV with a header row; returns {column: list of strings}."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInputError(f"{path}: no header row")
        for col in required:
            if col not in reader.fieldnames:
                raise SchemaError(f"{path}: missing column {col!r} (found {reader.fieldnames})")
        rows = list(reader)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    return {col: [row[col] for row in rows] for col in reader.fieldnames}


def _floats(values):
    return [float(v) for v in values]


def _render_spectrum_vs_symbol(job):
    eig = sorted(_floats(read_columns(job.inputs[0], ["eigenvalue"])["eigenvalue"]))
    smp = sorted(_floats(read_columns(job.inputs[1], ["sample"])["sample"]))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    x_e = [j / max(len(eig) - 1, 1) for j in range(len(eig))]
    x_s = [j / max(len(smp) - 1, 1) for j in range(len(smp))]
    ax.plot(x_s, smp, ".", ms=2.5, color="tab:orange", label="symbol samples (sorted)")
    ax.plot(x_e, eig, ".", ms=2.5, color="tab:blue", label="eigenvalues (sorted)")
    ax.set_xlabel("normalized index")
    ax.set_ylabel("value")
    ax.legend()
    ax.set_title(f"spectrum vs rearranged symbol ({len(eig)} / {len(smp)} points)")
    return fig


def _render_bound_vs_tau(job):
    cols = read_columns(
        job.inputs[0], ["tau", "a", "b", "q", "two_N_gamma", "k_bound", "observed_iters"]
    )
    tau = _floats(cols["tau"])
    a = _floats(cols["a"])
    b = _floats(cols["b"])
    q = _floats(cols["q"])
    k = _floats(cols["k_bound"])
    obs = _floats(cols["observed_iters"])
    fig, (left, right) = plt.subplots(1, 2, figsize=(10.0, 4.2))
    left.fill_between(tau, a, b, color="tab:blue", alpha=0.25, label="[a, b]")
    left.plot(tau, a, "o-", color="tab:blue", lw=1)
    left.plot(tau, b, "o-", color="tab:blue", lw=1)
    left.set_xscale("log")
    left.set_yscale("log")
    left.set_xlabel("tau")
    left.set_ylabel("spectral interval")
    twin = left.twinx()
    twin.plot(tau, q, "s--", color="tab:red", label="outliers above b")
    twin.set_ylabel("outlier count")
    left.set_title("clustered interval and outliers")
    left.legend(loc="upper left")
    twin.legend(loc="upper right")

    right.plot(tau, obs, "o-", label="observed CG iterations")
    right.plot(tau, k, "s-", color="gold", label="iteration bound")
    right.set_xscale("log")
    right.set_xlabel("tau")
    right.set_ylabel("iterations")
    right.set_title("iterations vs bound")
    right.legend()
    fig.tight_layout()
    return fig


def _render_iterations_table(job):
    cols = read_columns(job.inputs[0], ["N", "tau", "iterations"])
    Ns = sorted({int(v) for v in cols["N"]})
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for N in Ns:
        pts = sorted(
            (float(t), int(it))
            for n_val, t, it in zip(cols["N"], cols["tau"], cols["iterations"])
            if int(n_val) == N
        )
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=f"N={N}")
    ax.set_xscale("log")
    ax.set_xlabel("tau")
    ax.set_ylabel("iterations to convergence")
    ax.legend()
    ax.set_title("iteration counts")
    return fig


_RENDERERS = {
    "spectrum-vs-symbol": (_render_spectrum_vs_symbol, 2),
    "bound-vs-tau": (_render_bound_vs_tau, 1),
    "iterations-table": (_render_iterations_table, 1),
}


def render(job: FigureJob) -> str:
    """Render one figure; returns the output path.

    Inputs are validated before any file is written: schema mismatches and
    empty inputs raise without touching the output path.
    """
    renderer, n_inputs = _RENDERERS[job.kind]
    if len(job.inputs) != n_inputs:
        raise SchemaError(f"{job.kind} needs {n_inputs} input file(s), got {len(job.inputs)}")
    plt.rcParams["svg.hashsalt"] = "emiplots"   # reproducible SVG ids
    fig = renderer(job)
    try:
        if job.output.lower().endswith(".svg"):
            fig.savefig(job.output, metadata={"Date": None})
        else:
            fig.savefig(job.output)
    finally:
        plt.close(fig)
    return job.output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="emiplots", description=__doc__)
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("inputs", nargs="+", help="input CSV file(s)")
    parser.add_argument("-o", "--output", required=True, help="output image (.svg or .png)")
    args = parser.parse_args(argv)
    try:
        path = render(FigureJob(tuple(args.inputs), args.kind, args.output))
    except (SchemaError, EmptyInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
