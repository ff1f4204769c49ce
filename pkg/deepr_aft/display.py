from rich.console import Console
from rich.table import Table
from rich.panel import Panel
from rich import box

console = Console()


def _fmt(value, digits: int = 3) -> str:
    if value is None or value != value:
        return "-"
    return f"{value:.{digits}f}"


def display_results(results):
    """Displays scenario results using rich.

    One row per mean function, error law and tau; one MSE (C-index) cell per
    method and training size, laid out like the usual simulation tables.

    Args:
        results (list): ScenarioResult objects, typically from ``run_grid``.
    """
    if not results:
        console.print(Panel("[bold yellow]No results to display.[/bold yellow]", title="[bold yellow]Results[/bold yellow]"))
        return
    console.print(results_table(results))


def results_table(results) -> Table:
    """Builds the MSE (C-index) table for a list of scenario results."""
    columns = []
    for result in results:
        for method in result.methods:
            key = (method, result.scenario.n_train)
            if key not in columns:
                columns.append(key)

    table = Table(title="[bold blue]MSE (C-index) by scenario[/bold blue]", show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Mean", style="cyan", no_wrap=True)
    table.add_column("Error", style="cyan")
    table.add_column("tau", style="cyan", justify="right")
    for method, n in columns:
        table.add_column(f"{method} n={n}", style="green", justify="right")

    rows = {}
    for result in results:
        s = result.scenario
        row = rows.setdefault((s.mean_kind, s.error_dist, s.tau), {})
        for method, summary in result.methods.items():
            row[(method, s.n_train)] = f"{_fmt(summary.mean_mse)} ({_fmt(summary.mean_cindex)})"
    for (mean_kind, error_dist, tau), cells in rows.items():
        table.add_row(mean_kind, error_dist, f"{tau:g}", *[cells.get(key, "-") for key in columns])
    return table


def timing_table(rows, slopes: dict = None) -> Table:
    """Builds the full vs sub-sampled loss timing table.

    Args:
        rows (list): TimingRow entries from ``loss_timing_sweep``.
        slopes (dict): Optional fitted log-log slopes keyed ``"full"``/``"subsampled"``.
    """
    title = "[bold blue]Gehan loss timing[/bold blue]"
    if slopes:
        title += f" (slopes: full {_fmt(slopes.get('full'), 2)}, sub-sampled {_fmt(slopes.get('subsampled'), 2)})"
    table = Table(title=title, show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("n", style="cyan", justify="right")
    table.add_column("events", style="cyan", justify="right")
    table.add_column("Full (s)", style="red", justify="right")
    table.add_column("Sub-sampled (s)", style="green", justify="right")
    table.add_column("Pairs touched", style="yellow", justify="right")
    for row in rows:
        table.add_row(str(row.n), str(row.n_events), f"{row.full_seconds:.2e}",
                      f"{row.subsampled_seconds:.2e}", str(row.pairs_touched))
    return table


def bias_variance_table(result) -> Table:
    """Builds the squared bias / variance summary table (means over test points, sd in brackets)."""
    table = Table(title="[bold blue]Squared bias and variance[/bold blue]", show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Method", style="cyan")
    table.add_column("Bias^2", style="green", justify="right")
    table.add_column("Variance", style="green", justify="right")
    table.add_column("MSE", style="yellow", justify="right")
    for name, stats in result.summary().items():
        table.add_row(
            name,
            f"{_fmt(stats['bias2'])} ({_fmt(stats['bias2_sd'])})",
            f"{_fmt(stats['variance'])} ({_fmt(stats['variance_sd'])})",
            _fmt(stats["mse"]),
        )
    return table


def datasets_table(specs: dict) -> Table:
    """Lists named column schemas with the R call that exports a matching CSV."""
    table = Table(title="[bold blue]Built-in datasets[/bold blue]", show_header=True, header_style="bold magenta", box=box.ROUNDED)
    table.add_column("Name", style="cyan")
    table.add_column("Time", style="green")
    table.add_column("Event", style="green")
    table.add_column("Covariates")
    table.add_column("Export from R", style="yellow")
    for name, spec in specs.items():
        export = f'library(survival); write.csv({name}, "{name}.csv", row.names = FALSE)'
        table.add_row(name, spec.time_column, spec.event_column, ", ".join(spec.covariate_columns), export)
    return table


def config_table(config: dict, title: str = "Configuration") -> Table:
    table = Table(title=f"[bold blue]{title}[/bold blue]", show_header=True, header_style="bold magenta")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    for key, value in config.items():
        table.add_row(key, str(value))
    return table


def display_error(message: str):
    """Prints an error in a red panel.

    Args:
        message (str): What went wrong.
    """
    console.print(Panel(f"[bold red]{message}[/bold red]", title="[bold red]deepr-aft error[/bold red]", border_style="red"))


def display_message(message: str):
    """Prints a status line in a green panel."""
    console.print(Panel(message, title="[bold green]deepr-aft[/bold green]", border_style="green"))
