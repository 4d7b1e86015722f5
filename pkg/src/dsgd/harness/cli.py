"""Command-line front end: ``dsgd run``, ``dsgd compare`` and ``dsgd data prepare``."""
from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from ..tasks.classifier import DATA_DIR_ENV, load_mnist, make_synthetic_data, write_dataset_csv
from .config import load_spec
from .ensemble import build_task, compare_measurement_frontiers, run_ensemble, write_frontiers


@click.group()
def main():
    """Stochastic and doubly stochastic gradient descent for simulated variational circuits."""


@main.command("run")
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1), help="Parallel runs.")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Output directory (default: results/<spec name>).")
@click.option("--seed", default=None, type=click.IntRange(min=0), help="Override the base seed.")
@click.option("--dump-circuit", is_flag=True, help="Write the task circuit as text and exit.")
def run_cmd(spec_file, jobs, out_dir, seed, dump_circuit):
    """Run the seeded ensemble described by SPEC_FILE and write traces plus summary.csv."""
    try:
        spec = load_spec(spec_file)
    except ValueError as exc:
        raise click.ClickException(f"invalid spec: {exc}") from None
    if seed is not None:
        spec = replace(spec, seed=seed)
    out = Path(out_dir) if out_dir else Path("results") / spec.name
    if dump_circuit:
        text = build_task(spec.task).circuit.to_text()
        out.mkdir(parents=True, exist_ok=True)
        (out / "circuit.txt").write_text(text)
        click.echo(text, nl=False)
        return
    try:
        ens = run_ensemble(spec, out, jobs=jobs)
    except OSError as exc:
        raise click.ClickException(f"cannot write results: {exc}") from None
    except Exception as exc:  # any failed run fails the command
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    final = ens.final_losses()
    click.echo(f"{spec.name}: {spec.repeats} runs, MC_1={ens.mc1}, final loss "
               f"min={final.min():.6g} mean={final.mean():.6g} max={final.max():.6g}")
    if ens.ground_energy is not None:
        click.echo(f"ground energy {ens.ground_energy:.6g}")
    click.echo(f"summary written to {out / 'summary.csv'}")


@main.command("compare")
@click.argument("spec_files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", required=True, type=float, help="Loss level to reach.")
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--out", "out_file", default="frontiers.csv", show_default=True, type=click.Path(dir_okay=False))
def compare_cmd(spec_files, threshold, jobs, out_file):
    """Align loss curves of several specs on the measurement axis (multiples of MC_1)."""
    try:
        specs = [load_spec(p) for p in spec_files]
        ensembles = [run_ensemble(s, jobs=jobs) for s in specs]
        result = compare_measurement_frontiers(ensembles, threshold)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    write_frontiers(result, out_file)
    for name, x in result["reached"].items():
        click.echo(f"{name}: mean loss <= {threshold:g} after {x:.6g} x MC_1 measurements")
    click.echo(f"frontiers written to {out_file}")


@main.group("data")
def data_group():
    """Dataset utilities."""


@data_group.command("prepare")
@click.option("--source", type=click.Choice(["mnist", "synthetic"]), required=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--raw", "raw_dir", default=None, type=click.Path(file_okay=False),
              help=f"Directory with MNIST IDX files (default: ${DATA_DIR_ENV} or ./data).")
@click.option("--num-qubits", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--num-train", default=200, show_default=True, type=click.IntRange(min=1))
@click.option("--num-validation", default=200, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0))
def prepare_cmd(source, out_dir, raw_dir, num_qubits, num_train, num_validation, seed):
    """Write train.csv and validation.csv (64 or 2^N features, then the label)."""
    try:
        if source == "mnist":
            split = load_mnist(raw_dir)
        else:
            split = make_synthetic_data(num_qubits, num_train, num_validation, seed)
    except (OSError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(split.train, out / "train.csv")
    write_dataset_csv(split.validation, out / "validation.csv")
    click.echo(f"wrote {len(split.train)} training and {len(split.validation)} validation rows to {out}")


if __name__ == "__main__":
    main()
