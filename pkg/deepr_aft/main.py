import logging
import os
import sys

import click
import numpy as np
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from deepr_aft.bench import loss_timing_sweep, sweep_slopes
from deepr_aft.config import (
    coerce_value, preferences_file, load_config, load_experiment_config, save_config,
    save_experiment_config, set_config_value,
)
from deepr_aft.constants import (
    ARCHITECTURES, BANDWIDTHS, BENCH_REPETITIONS, BENCH_SIZES, BIAS_VARIANCE_PAIRS_PER_EVENT,
    BIAS_VARIANCE_N_TRAIN, BIAS_VARIANCE_POINTS, BIAS_VARIANCE_TAU, CENTERING_METHODS,
    DEFAULT_CONFIG, DEFAULT_PAIRS_PER_EVENT, DEFAULT_TRAIN_FRACTION, ERROR_DISTS, HIGH_DIM_SWEEP,
    MEAN_KINDS, METHODS, OPTIMIZERS, OUTPUT_FORMATS, REALDATA_PRESETS, VERSION,
)
from deepr_aft.dataio import (
    DATASET_SPECS, ColumnSpec, Standardizer, emit_bias_variance, emit_results, emit_timings,
    load_csv, load_model, save_model, split_train_test,
)
from deepr_aft.display import (
    bias_variance_table, config_table, console, datasets_table, display_error, display_message,
    display_results, timing_table,
)
from deepr_aft.errors import DeepRAftError, DimensionError, SchemaError
from deepr_aft.experiment import (
    ExperimentConfig, fit_method, high_dimension_sweep, make_fitters, preset_config, run_grid,
)
from deepr_aft.metrics import c_index
from deepr_aft.net import predict
from deepr_aft.simgen import bias_variance_config, bias_variance_protocol


def setup_logging(verbose: bool):
    """Routes library logging through a RichHandler on the shared console."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def fail(message: str):
    display_error(message)
    sys.exit(1)


def _overrides(**options) -> dict:
    """Keeps only the options given on the command line."""
    return {key: value for key, value in options.items() if value is not None and value != ()}


def _base_config(config_path, preferences: dict) -> ExperimentConfig:
    """Experiment file if given, otherwise defaults seeded from stored preferences."""
    if config_path:
        return load_experiment_config(config_path)
    return ExperimentConfig(
        seed=preferences["seed"],
        replicates=preferences["replicates"],
        centering=preferences["centering"],
        bandwidth=preferences["bandwidth"],
    )


@click.group(help="\nDeep AFT regression for right-censored data, trained on sub-sampled Gehan rank pairs, with parametric and semiparametric linear baselines, simulation studies and timing benchmarks.\n")
@click.option('--verbose', '-v', is_flag=True, help='Show debug logging (per-epoch losses, solver iterations).')
def cli(verbose):
    """Command-line entry point for deepr-aft."""
    setup_logging(verbose)


@cli.command(help="Run simulation scenarios and report MSE and C-index for each method.\n\nExamples:\n  deepr-aft simulate --seed 1 --mean-kind linear --replicates 20 --epochs 200\n  deepr-aft simulate --seed 7 --tau 20 --tau 40 --tau 60 --output results.csv\n  deepr-aft simulate --seed 3 --mean-kind linear --sweep-noise --methods deepr_aft")
@click.option('--seed', type=int, required=True, help='Base seed; every replicate stream is spawned from it.')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), help='Flat JSON experiment file. Command-line flags override its values.')
@click.option('--mean-kind', multiple=True, type=click.Choice(MEAN_KINDS), help='Mean function(s) to simulate. Can be used multiple times.')
@click.option('--error-dist', multiple=True, type=click.Choice(ERROR_DISTS), help='Error law(s). Can be used multiple times.')
@click.option('--tau', multiple=True, type=float, help='Censoring scale(s); C = tau * U. Can be used multiple times.')
@click.option('--n-train', multiple=True, type=click.IntRange(2), help='Training size(s). Can be used multiple times.')
@click.option('--n-test', type=click.IntRange(1), help='Test sample size.')
@click.option('--noise-dims', type=click.IntRange(0), help='Number of pure-noise covariates added to the three informative ones.')
@click.option('--replicates', type=click.IntRange(1), help='Independent train/test draws per scenario.')
@click.option('--methods', multiple=True, type=click.Choice(METHODS), help='Methods to fit. Defaults to all.')
@click.option('--epochs', type=click.IntRange(0), help='Training epochs for the network.')
@click.option('--learning-rate', type=float, help='Learning rate. Defaults to the table value for the training size and error law.')
@click.option('--pairs-per-event', type=click.IntRange(1), help='Partners drawn per event subject.')
@click.option('--centering', type=click.Choice(CENTERING_METHODS), help='How the intercept of rank-based fits is fixed.')
@click.option('--bandwidth', type=click.Choice(BANDWIDTHS), help='Smoothing bandwidth for the semiparametric baseline.')
@click.option('--sweep-noise', is_flag=True, help=f'Repeat the scenario for K in {HIGH_DIM_SWEEP} noise covariates, dropping baselines past their cutoffs.')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write the result table to this file.')
@click.option('--format', 'fmt', type=click.Choice(OUTPUT_FORMATS), help='Result file format (csv or text).')
def simulate(seed, config_path, mean_kind, error_dist, tau, n_train, n_test, noise_dims, replicates,
             methods, epochs, learning_rate, pairs_per_event, centering, bandwidth, sweep_noise, output, fmt):
    """Run a grid of simulation scenarios.

    Args:
        seed (int): Base seed for every replicate stream.
        config_path (str): Optional experiment file.
        mean_kind (tuple): Mean functions in the grid.
        error_dist (tuple): Error laws in the grid.
        tau (tuple): Censoring scales in the grid.
        n_train (tuple): Training sizes in the grid.
        sweep_noise (bool): Run the noise-dimension sweep instead of a grid.
        output (str): Optional result file.
        fmt (str): Result file format.
    """
    try:
        preferences = load_config()
        base = _base_config(config_path, preferences).with_changes(**_overrides(
            seed=seed, n_test=n_test, noise_dims=noise_dims, replicates=replicates,
            methods=tuple(methods) or None, epochs=epochs, learning_rate=learning_rate,
            pairs_per_event=pairs_per_event, centering=centering, bandwidth=bandwidth,
        ))
        if sweep_noise:
            base = base.with_changes(**_overrides(mean_kind=mean_kind[0] if mean_kind else None,
                                                  error_dist=error_dist[0] if error_dist else None,
                                                  tau=tau[0] if tau else None,
                                                  n_train=n_train[0] if n_train else None))
            with console.status("[bold green]Running noise-dimension sweep...[/bold green]"):
                results = high_dimension_sweep(base)
            _display_sweep(results)
        else:
            with console.status("[bold green]Running simulation scenarios...[/bold green]"):
                results = run_grid(base, mean_kind or [base.mean_kind], error_dist or [base.error_dist],
                                   tau or [base.tau], n_train or [base.n_train])
            display_results(results)
        if output:
            emit_results(results, output, fmt or preferences["output_format"])
            display_message(f"Results written to {output} (config hash {base.config_hash()}).")
    except DeepRAftError as e:
        fail(str(e))


def _display_sweep(results):
    table = Table(title="[bold blue]C-index by number of noise covariates[/bold blue]", show_header=True, header_style="bold magenta")
    table.add_column("K", style="cyan", justify="right")
    for method in METHODS:
        table.add_column(method, style="green", justify="right")
    for result in results:
        cells = [f"{result.methods[m].mean_cindex:.3f}" if m in result.methods else "-" for m in METHODS]
        table.add_row(str(result.scenario.noise_dims), *cells)
    console.print(table)


def _column_spec(dataset, time_column, event_column, covariates) -> ColumnSpec:
    if dataset:
        return DATASET_SPECS[dataset]
    if not (time_column and event_column and covariates):
        raise SchemaError("give --dataset, or all of --time-column, --event-column and --covariates")
    return ColumnSpec(time_column, event_column, tuple(c.strip() for c in covariates.split(",") if c.strip()))


@cli.command(help="Fit one method on a CSV dataset and save the model.\n\nExamples:\n  deepr-aft fit flchain.csv --dataset flchain --preset flchain -o flchain.model\n  deepr-aft fit data.csv --time-column time --event-column event --covariates x1,x2,x3 --method saft -o saft.model")
@click.argument('data', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', '-o', type=click.Path(dir_okay=False), required=True, help='Model file to write.')
@click.option('--method', type=click.Choice(METHODS), default="deepr_aft", show_default=True, help='Method to fit.')
@click.option('--dataset', type=click.Choice(sorted(DATASET_SPECS)), help='Use a built-in column schema.')
@click.option('--time-column', type=str, help='Observed time column (custom schema).')
@click.option('--event-column', type=str, help='Event indicator column (custom schema).')
@click.option('--covariates', type=str, help='Comma separated covariate columns (custom schema).')
@click.option('--preset', type=click.Choice(sorted(REALDATA_PRESETS)), help='Real-data training preset (architecture, optimizer, learning rate, batch size, epochs, s).')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), help='Flat JSON experiment file with training settings.')
@click.option('--architecture', type=click.Choice(ARCHITECTURES), help='Hidden layer layout.')
@click.option('--optimizer', type=click.Choice(OPTIMIZERS), help='Optimizer for the network.')
@click.option('--epochs', type=click.IntRange(0), help='Training epochs.')
@click.option('--learning-rate', type=float, help='Learning rate.')
@click.option('--batch-size', type=click.IntRange(1), help='Pairs per minibatch.')
@click.option('--pairs-per-event', type=click.IntRange(1), help='Partners drawn per event subject.')
@click.option('--seed', type=int, help='Seed for the split and the training run. Defaults to the stored preference.')
@click.option('--train-fraction', type=float, default=DEFAULT_TRAIN_FRACTION, show_default=True, help='Share of rows used for training; the rest is held out.')
@click.option('--no-split', is_flag=True, help='Train on every row.')
@click.option('--no-standardize', is_flag=True, help='Keep continuous covariates on their original scale.')
def fit(data, output, method, dataset, time_column, event_column, covariates, preset, config_path,
        architecture, optimizer, epochs, learning_rate, batch_size, pairs_per_event, seed,
        train_fraction, no_split, no_standardize):
    """Fit DeepR-AFT, PAFT or SAFT on a CSV file and save it."""
    try:
        preferences = load_config()
        seed = preferences["seed"] if seed is None else seed
        spec = _column_spec(dataset, time_column, event_column, covariates)
        full, report = load_csv(data, spec, return_report=True)
        display_message(f"Loaded {report.loaded_rows} of {report.raw_rows} rows ({report.dropped} dropped); "
                        f"censoring rate {full.censoring_rate:.2f}.")

        if no_split:
            train, test = full, None
            if not no_standardize and any(full.continuous):
                train = Standardizer.fit(full).apply(full)
        else:
            train, test = split_train_test(full, train_fraction, seed, standardize=not no_standardize)

        if preset:
            config = preset_config(preset, seed=seed)
        elif config_path:
            config = load_experiment_config(config_path)
        else:
            config = ExperimentConfig(seed=seed, architecture="realdata", activation="relu",
                                      centering=preferences["centering"], bandwidth=preferences["bandwidth"])
        config = config.with_changes(**_overrides(
            architecture=architecture, optimizer=optimizer, epochs=epochs, learning_rate=learning_rate,
            batch_size=batch_size, pairs_per_event=pairs_per_event,
        ))

        with console.status(f"[bold green]Fitting {method}...[/bold green]"):
            model = fit_method(method, config, train, seed)
        if not model.converged:
            display_message(f"{method} did not converge; the last iterate was saved.")

        metadata = {
            "method": method,
            "offset": model.offset,
            "converged": model.converged,
            "seed": seed,
            "column_spec": spec.to_dict(),
            "covariate_names": list(train.covariate_names),
            "scaler": train.scaler.to_dict() if train.scaler is not None else None,
            "config": config.to_dict(),
        }
        save_model(output, model.params, metadata)

        table = Table(title=f"[bold blue]{method} fit[/bold blue]", show_header=True, header_style="bold magenta")
        table.add_column("Split", style="cyan")
        table.add_column("Subjects", style="green", justify="right")
        table.add_column("Events", style="green", justify="right")
        table.add_column("C-index", style="yellow", justify="right")
        for label, part in (("train", train), ("test", test)):
            if part is not None:
                score = c_index(part.observed_time, part.event, model.predict(part.covariates))
                table.add_row(label, str(part.n), str(part.n_events), f"{score:.3f}")
        console.print(table)
        display_message(f"Model saved to {output}.")
    except DeepRAftError as e:
        fail(str(e))


def load_for_evaluation(model_path, data_path):
    """Reads a saved model and a dataset prepared the same way as its training data."""
    params, metadata = load_model(model_path)
    spec = ColumnSpec.from_dict(metadata["column_spec"])
    dataset = load_csv(data_path, spec)
    if metadata.get("scaler"):
        dataset = Standardizer.from_dict(metadata["scaler"]).apply(dataset)
    if dataset.p != params.input_dim:
        raise DimensionError(f"model expects {params.input_dim} covariates, data has {dataset.p}")
    return params, metadata, dataset


@cli.command(help="Score a saved model on a CSV dataset with the C-index.\n\nExample: deepr-aft evaluate flchain.model flchain_test.csv")
@click.argument('model_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('data', type=click.Path(exists=True, dir_okay=False))
def evaluate(model_path, data):
    """Evaluate a saved model on new data."""
    try:
        params, metadata, dataset = load_for_evaluation(model_path, data)
        predictions = predict(params, dataset.covariates) + float(metadata.get("offset", 0.0))
        score = c_index(dataset.observed_time, dataset.event, predictions)
        table = Table(title=f"[bold blue]Evaluation of {metadata.get('method', 'model')}[/bold blue]", show_header=True, header_style="bold magenta")
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("Subjects", str(dataset.n))
        table.add_row("Events", str(dataset.n_events))
        table.add_row("Censoring rate", f"{dataset.censoring_rate:.3f}")
        table.add_row("C-index", f"{score:.4f}")
        console.print(table)
    except DeepRAftError as e:
        fail(str(e))


def _parse_sizes(value: str):
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("sizes must be comma separated integers")


@cli.command(help="Time the exact Gehan loss against the sub-sampled loss over growing sample sizes.\n\nExample: deepr-aft bench --sizes 1000,2000,4000,8000 --repetitions 5")
@click.option('--sizes', default=",".join(str(n) for n in BENCH_SIZES), show_default=True, help='Comma separated ascending sample sizes.')
@click.option('--pairs-per-event', '-s', type=click.IntRange(1), default=DEFAULT_PAIRS_PER_EVENT, show_default=True, help='Partners drawn per event subject.')
@click.option('--repetitions', type=click.IntRange(3), default=BENCH_REPETITIONS, show_default=True, help='Timed repetitions per size (median reported).')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed for the generated samples.')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write the timing rows as CSV.')
def bench(sizes, pairs_per_event, repetitions, seed, output):
    """Run the loss timing sweep."""
    try:
        size_list = _parse_sizes(sizes)
        with console.status("[bold green]Timing loss evaluations...[/bold green]"):
            rows = loss_timing_sweep(size_list, pairs_per_event, repetitions, np.random.default_rng(seed))
        slopes = sweep_slopes(rows) if len(rows) > 1 else None
        console.print(timing_table(rows, slopes))
        if output:
            emit_timings(rows, output)
            display_message(f"Timings written to {output}.")
    except DeepRAftError as e:
        fail(str(e))


@cli.command(name="bias-variance", help="Decompose each method's MSE into squared bias and variance at fixed test points.\n\nExample: deepr-aft bias-variance --mean-kind gam --replicates 20 --seed 4")
@click.option('--mean-kind', type=click.Choice(MEAN_KINDS), default="interaction", show_default=True, help='Mean function.')
@click.option('--replicates', type=click.IntRange(2), default=20, show_default=True, help='Training samples drawn.')
@click.option('--methods', multiple=True, type=click.Choice(METHODS), help='Methods to include. Defaults to all.')
@click.option('--tau', type=float, default=BIAS_VARIANCE_TAU, show_default=True, help='Censoring scale.')
@click.option('--n-train', type=click.IntRange(2), default=BIAS_VARIANCE_N_TRAIN, show_default=True, help='Training size.')
@click.option('--points', type=click.IntRange(1), default=BIAS_VARIANCE_POINTS, show_default=True, help='Fixed test points.')
@click.option('--pairs-per-event', type=click.IntRange(1), default=BIAS_VARIANCE_PAIRS_PER_EVENT, show_default=True, help='Partners drawn per event subject.')
@click.option('--epochs', type=click.IntRange(0), help='Training epochs for the network.')
@click.option('--seed', type=int, help='Base seed. Defaults to the stored preference.')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write the summary as CSV.')
def bias_variance(mean_kind, replicates, methods, tau, n_train, points, pairs_per_event, epochs, seed, output):
    """Run the bias/variance protocol."""
    try:
        preferences = load_config()
        seed = preferences["seed"] if seed is None else seed
        scenario = bias_variance_config(mean_kind, seed=seed, tau=tau, n_train=n_train, n_test=points)
        experiment = ExperimentConfig(
            mean_kind=mean_kind, tau=tau, n_train=n_train, n_test=points, seed=seed,
            pairs_per_event=pairs_per_event, centering=preferences["centering"],
            bandwidth=preferences["bandwidth"],
        ).with_changes(**_overrides(methods=tuple(methods) or None, epochs=epochs))
        with console.status("[bold green]Running bias/variance replicates...[/bold green]"):
            result = bias_variance_protocol(scenario, replicates, make_fitters(experiment))
        console.print(bias_variance_table(result))
        if output:
            emit_bias_variance(result, output)
            display_message(f"Summary written to {output}.")
    except DeepRAftError as e:
        fail(str(e))


@cli.group(help="Manage stored preferences (seed, replicates, output format, centering, bandwidth) and experiment templates.")
def config():
    """Manage stored preferences."""
    pass


@config.command(name="init", help="Write the default preferences to the config file.")
@click.option('--force', is_flag=True, help='Overwrite an existing config file.')
def config_init(force):
    path = preferences_file()
    if os.path.exists(path) and not force:
        display_message(f"{path} already exists. Use --force to overwrite it.")
        return
    save_config(dict(DEFAULT_CONFIG))
    display_message(f"Default preferences written to {path}.")


@config.command(name="show", help="Show the stored preferences.")
def config_show():
    try:
        console.print(config_table(load_config(), title="Preferences"))
    except DeepRAftError as e:
        fail(str(e))


@config.command(name="set", help="Set one preference.\n\nExample: deepr-aft config set replicates 20")
@click.argument('key', type=click.Choice(sorted(DEFAULT_CONFIG)))
@click.argument('value', type=str)
def config_set(key, value):
    try:
        parsed = coerce_value(key, value)
        choices = {"output_format": OUTPUT_FORMATS, "centering": CENTERING_METHODS, "bandwidth": BANDWIDTHS}
        if key in choices and parsed not in choices[key]:
            fail(f"{key} must be one of: {', '.join(choices[key])}")
        set_config_value(key, parsed)
        display_message(f"{key} set to {parsed}. This preference has been saved.")
    except DeepRAftError as e:
        fail(str(e))


@config.command(name="template", help="Write a default experiment file to edit and pass with --config.")
@click.argument('path', type=click.Path(dir_okay=False))
def config_template(path):
    save_experiment_config(ExperimentConfig(), path)
    display_message(f"Experiment template written to {path}.")


@cli.command(help="List the built-in dataset schemas and how to obtain the files.\n\nExample: deepr-aft datasets")
def datasets():
    """Show each named schema with the R command that exports a matching CSV."""
    console.print(datasets_table(DATASET_SPECS))
    display_message("Files are not downloaded. Export them with R, then run: deepr-aft fit FILE --dataset NAME")


@cli.command(help="Display information about deepr-aft.")
def about():
    """Show version and a short description."""
    console.print(Panel(
        "[bold blue]deepr-aft[/bold blue]\n\n" +
        f"Version: {VERSION}\n" +
        "Description: Accelerated failure time regression with a feedforward mean function, trained by minibatch SGD on sub-sampled Gehan rank pairs.\n" +
        "Baselines: log-normal maximum likelihood (PAFT) and induced-smoothing Gehan (SAFT).\n" +
        "Commands: simulate, fit, evaluate, bench, bias-variance, datasets, config."
    , title="[bold green]About deepr-aft[/bold green]"))


if __name__ == '__main__':
    cli()
