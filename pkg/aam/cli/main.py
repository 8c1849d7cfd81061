"""
AAM CLI - benchmark driver, single algorithm runs and cost-model fits.

CSV rows go to stdout (or --out); summaries, progress and errors go to the
themed stderr console so the two never mix.

Exit codes: 0 ok, 1 a result failed validation, 2 bad configuration or input.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence

import typer
from pydantic import ValidationError as PydanticValidationError
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from aam.core.bench import (
    DEFAULT_SWEEP_SIZES,
    bench_algorithm,
    bench_coalesce_sweep,
    bench_coarsen_sweep,
    bench_distributed,
    bench_pr_scaling,
    bench_single_vertex,
    bench_thread_sweep,
    coalescing_crossover,
    cost_sweep,
)
from aam.core.errors import (
    AAMError,
    ConfigError,
    FitError,
    MalformedInputError,
    ValidationError,
)
from aam.core.perf_model import (
    crossing_point,
    fit_linear,
    read_samples_csv,
    split_by_mechanism,
    write_samples_csv,
)
from aam.logging import console, setup_logging
from aam.models import BenchConfig, RunConfig
from aam.utils.config import Settings, load_settings
from aam.utils.helpers import load_graph, parse_int_range, write_csv

app = typer.Typer(
    help="Atomic active messages: transactional graph operators on a simulated cluster.",
    add_completion=False,
    no_args_is_help=True,
)

ALGORITHMS = ("bfs", "pr", "mst", "st", "color")
SUMMARY_FIELDS = (
    "commits",
    "total_aborts",
    "aborts_conflict",
    "aborts_capacity",
    "aborts_other",
    "serializations",
    "atomics",
    "operators_executed",
    "messages_sent",
    "backoffs",
    "sim_time_ns",
    "wall_time_s",
)


class Reporter:
    """Human-facing output on the stderr console."""

    def __init__(self, verbose: bool = False):
        self.console = console
        self.verbose = verbose

    @contextmanager
    def working(self, label: str) -> Iterator[None]:
        with Progress(
            SpinnerColumn(),
            TextColumn(f"[info]{label}[/info]"),
            console=self.console,
            transient=True,
        ) as progress:
            progress.add_task("", total=None)
            yield

    def show_row(self, title: str, row: Dict[str, Any], keys: Sequence[str]) -> None:
        table = Table(title=title, show_header=False, title_style="step")
        table.add_column("key", style="info")
        table.add_column("value", style="metric")
        for key in keys:
            if key in row:
                table.add_row(key, str(row[key]))
        self.console.print(table)

    def show_rows(self, title: str, rows: Sequence[Dict[str, Any]], keys: Sequence[str]) -> None:
        table = Table(title=title, title_style="step")
        present = [k for k in keys if rows and k in rows[0]]
        for key in present:
            table.add_column(key, style="metric" if key.endswith("_ns") else None)
        for row in rows:
            table.add_row(*(_fmt(row.get(k)) for k in present))
        self.console.print(table)

    def success(self, message: str) -> None:
        self.console.print(f"[success]{message}[/success]")

    def error(self, message: str) -> None:
        self.console.print(f"[error]{message}[/error]")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.2f}"
    return "" if value is None else str(value)


@contextmanager
def exit_codes(reporter: Reporter) -> Iterator[None]:
    """Translate AAM failures into the documented exit codes."""
    try:
        yield
    except ValidationError as e:
        reporter.error(f"Validation failed: {e}")
        raise typer.Exit(1)
    except (ConfigError, MalformedInputError, FitError) as e:
        reporter.error(str(e))
        raise typer.Exit(2)
    except PydanticValidationError as e:
        reporter.error(f"Invalid configuration:\n{e}")
        raise typer.Exit(2)
    except OSError as e:
        reporter.error(f"Cannot read input: {e}")
        raise typer.Exit(2)
    except AAMError as e:
        reporter.error(f"{type(e).__name__}: {e}")
        if reporter.verbose:
            reporter.console.print_exception()
        raise typer.Exit(1)


def _settings(
    message_ns: Optional[float] = None,
    element_ns: Optional[float] = None,
    net_latency_us: Optional[float] = None,
    log_level: Optional[str] = None,
) -> Settings:
    """Load settings with the CLI overrides applied, then configure logging from them."""
    overrides: Dict[str, Any] = {}
    cost: Dict[str, float] = {}
    if message_ns is not None:
        cost["message_ns"] = message_ns
    if element_ns is not None:
        cost["element_ns"] = element_ns
    if net_latency_us is not None:
        cost["latency_ns"] = net_latency_us * 1000.0
    if cost:
        overrides["cost"] = cost
    if log_level is not None:
        overrides["log_level"] = log_level
    settings = load_settings(overrides or None)
    setup_logging(settings=settings)
    return settings


@app.command()
def run(
    algorithm: str = typer.Option("bfs", "--algorithm", "-a", help="bfs, pr, mst, st or color"),
    graph: str = typer.Option("kron:10,16", help="kron:<scale>,<ef> | er:<n>,<p> | file:<path>"),
    source: Optional[int] = typer.Option(None, help="BFS source (random non-isolated vertex if omitted)"),
    damping: float = typer.Option(0.85, help="PageRank damping factor"),
    iters: int = typer.Option(10, min=1, help="PageRank iterations"),
    s: Optional[int] = typer.Option(None, "--s", help="st-connectivity source"),
    t: Optional[int] = typer.Option(None, "--t", help="st-connectivity target"),
    coarsen: int = typer.Option(1, help="Coarsening factor M"),
    coalesce: int = typer.Option(1, help="Coalescing factor C"),
    threads: int = typer.Option(1, help="Worker threads per process T"),
    procs: int = typer.Option(1, help="Simulated processes N"),
    policy: str = typer.Option("rtm", help="rtm, hle, bgq-short, bgq-long, atomics or locks"),
    seed: int = typer.Option(0),
    deterministic: bool = typer.Option(False, "--deterministic/--threaded"),
    selection: str = typer.Option("fifo", help="Activity selection: fifo or sorted"),
    message_ns: Optional[float] = typer.Option(None, help="Synthetic per-message cost"),
    element_ns: Optional[float] = typer.Option(None, help="Synthetic per-element cost"),
    net_latency: Optional[float] = typer.Option(None, help="Synthetic message latency in µs"),
    out: Optional[Path] = typer.Option(None, help="Write CSV here instead of stdout"),
    log_level: Optional[str] = typer.Option(None, help="Log level (default AAM_LOG_LEVEL from the environment or .env)"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Run one algorithm, check it against its sequential oracle, print its stats row."""
    reporter = Reporter(verbose)
    with exit_codes(reporter):
        settings = _settings(message_ns, element_ns, net_latency, log_level)
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm '{algorithm}' (expected {', '.join(ALGORITHMS)})")
        config = RunConfig(
            coarsen=coarsen,
            coalesce=coalesce,
            threads=threads,
            procs=procs,
            policy=policy,
            seed=seed,
            deterministic=deterministic,
            selection=selection,
        )
        g = load_graph(graph, seed)
        start = s if algorithm == "st" and s is not None else source
        with reporter.working(f"Running {algorithm} on {graph}..."):
            row, _ = bench_algorithm(
                algorithm, g, config, settings,
                source=start, target=t, damping=damping, iterations=iters, graph_spec=graph,
            )
        reporter.show_row(f"{algorithm} on {graph}", row, [k for k in row if k not in ("benchmark", "build_id")])
        reporter.success("Result matches the oracle.")
        write_csv([row], out)


@app.command()
def bench(
    benchmark: str = typer.Argument(..., help="single-vertex-cas | single-vertex-acc | coarsen-sweep | "
                                              "thread-sweep | coalesce-sweep | distributed-scenario | "
                                              "pr-scaling | algorithm-run"),
    graph: str = typer.Option("kron:10,16"),
    m_range: str = typer.Option("1:321:16", help="Coarsening factors, a:b:step or x,y,z"),
    c_range: str = typer.Option("1,2,4,8,16,32,64", help="Coalescing factors, a:b:step or x,y,z"),
    t_range: str = typer.Option("1,2,4,8", help="Thread counts for thread-sweep"),
    axis: str = typer.Option("procs", help="pr-scaling axis: procs, threads or vertices"),
    values: str = typer.Option("1,2,4,8", help="pr-scaling values along --axis"),
    vertices_per_process: int = typer.Option(256, help="pr-scaling |V_i| when not the axis"),
    edge_probability: float = typer.Option(0.005, help="pr-scaling edge probability"),
    threads: int = typer.Option(4),
    procs: int = typer.Option(2),
    policy: str = typer.Option("rtm"),
    seed: int = typer.Option(0),
    repetitions: Optional[int] = typer.Option(None, help="Defaults depend on the benchmark"),
    contention: int = typer.Option(10, help="Operations per vertex: 10 or 100"),
    scenario: str = typer.Option("o1", help="o1, o2, o3 or o4"),
    transactions: Optional[int] = typer.Option(None, help="Override the scenario's transactions per process"),
    kind: str = typer.Option("acc", help="Remote operation for coalesce-sweep: cas or acc"),
    fan_in: bool = typer.Option(False, "--fan-in", help="All processes target the last one"),
    ops_per_process: int = typer.Option(256),
    algorithm: str = typer.Option("bfs", help="Algorithm for algorithm-run"),
    deterministic: bool = typer.Option(True, "--deterministic/--threaded"),
    message_ns: Optional[float] = typer.Option(None),
    element_ns: Optional[float] = typer.Option(None),
    net_latency: Optional[float] = typer.Option(None, help="µs"),
    out: Optional[Path] = typer.Option(None),
    log_level: Optional[str] = typer.Option(None),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
) -> None:
    """Run one benchmark and emit its CSV rows."""
    reporter = Reporter(verbose)
    with exit_codes(reporter):
        settings = _settings(message_ns, element_ns, net_latency, log_level)
        cfg = BenchConfig(
            benchmark=benchmark,
            graph=graph,
            m_values=parse_int_range(m_range),
            c_values=parse_int_range(c_range),
            t_values=parse_int_range(t_range),
            axis=axis,
            axis_values=parse_int_range(values),
            vertices_per_process=vertices_per_process,
            edge_probability=edge_probability,
            threads=threads,
            procs=procs,
            policy=policy,
            seed=seed,
            repetitions=repetitions,
            contention=contention,
            scenario=scenario,
            deterministic=deterministic,
            fan_in=fan_in,
            ops_per_process=ops_per_process,
            algorithm=algorithm,
        )
        with reporter.working(f"Running {cfg.benchmark}..."):
            rows = _dispatch(cfg, kind, transactions, settings)
        _summarize(reporter, cfg, rows)
        write_csv(rows, out)


def _dispatch(cfg: BenchConfig, kind: str, transactions: Optional[int], settings: Settings) -> List[Dict[str, Any]]:
    if cfg.benchmark in ("single-vertex-cas", "single-vertex-acc"):
        rows, _ = bench_single_vertex(
            cfg.benchmark.rsplit("-", 1)[1],
            contention=cfg.contention,
            threads=cfg.threads,
            seed=cfg.seed,
            repetitions=cfg.reps(10),
            settings=settings,
            deterministic=cfg.deterministic,
        )
        return rows
    if cfg.benchmark == "coarsen-sweep":
        return bench_coarsen_sweep(
            load_graph(cfg.graph, cfg.seed),
            cfg.m_values,
            threads=cfg.threads,
            policy=cfg.policy,
            seed=cfg.seed,
            repetitions=cfg.reps(3),
            settings=settings,
            deterministic=cfg.deterministic,
            graph_spec=cfg.graph,
        )
    if cfg.benchmark == "thread-sweep":
        return bench_thread_sweep(
            load_graph(cfg.graph, cfg.seed),
            cfg.t_values,
            coarsen=cfg.m_values[0],
            policy=cfg.policy,
            seed=cfg.seed,
            repetitions=cfg.reps(3),
            settings=settings,
            deterministic=cfg.deterministic,
            graph_spec=cfg.graph,
        )
    if cfg.benchmark == "pr-scaling":
        return bench_pr_scaling(
            cfg.axis,
            cfg.axis_values,
            procs=cfg.procs,
            threads=cfg.threads,
            vertices_per_process=cfg.vertices_per_process,
            edge_probability=cfg.edge_probability,
            coalesce=cfg.c_values[0],
            policy=cfg.policy,
            seed=cfg.seed,
            settings=settings,
            deterministic=cfg.deterministic,
        )
    if cfg.benchmark == "coalesce-sweep":
        return bench_coalesce_sweep(
            cfg.procs,
            cfg.c_values,
            kind=kind,
            policy=cfg.policy,
            fan_in=cfg.fan_in,
            ops_per_process=cfg.ops_per_process,
            seed=cfg.seed,
            settings=settings,
            deterministic=cfg.deterministic,
        )
    if cfg.benchmark == "distributed-scenario":
        return bench_distributed(
            cfg.scenario,
            procs=cfg.procs,
            policy=cfg.policy,
            seed=cfg.seed,
            settings=settings,
            deterministic=cfg.deterministic,
            transactions=transactions,
        )
    # algorithm-run: first M and C of the configured ranges
    config = RunConfig(
        coarsen=cfg.m_values[0],
        coalesce=cfg.c_values[0],
        threads=cfg.threads,
        procs=cfg.procs,
        policy=cfg.policy,
        seed=cfg.seed,
        deterministic=cfg.deterministic,
    )
    row, _ = bench_algorithm(cfg.algorithm, load_graph(cfg.graph, cfg.seed), config, settings, graph_spec=cfg.graph)
    return [row]


def _summarize(reporter: Reporter, cfg: BenchConfig, rows: List[Dict[str, Any]]) -> None:
    lead = {
        "single-vertex-cas": ("mechanism", "mean_time_ns", "abort_pct_conflict", "abort_pct_capacity",
                              "abort_pct_other", "serializations"),
        "single-vertex-acc": ("mechanism", "mean_time_ns", "abort_pct_conflict", "abort_pct_capacity",
                              "abort_pct_other", "serializations"),
        "coarsen-sweep": ("M", "time_ns", "time_per_vertex_ns", "commits", "total_aborts", "serializations"),
        "thread-sweep": ("threads", "time_ns", "speedup", "total_aborts", "serializations"),
        "pr-scaling": ("axis", "procs", "threads", "vertices_per_process", "time_ns", "messages_sent"),
        "coalesce-sweep": ("mechanism", "C", "time_ns", "time_per_op_ns", "messages_sent", "batches_sent"),
        "distributed-scenario": ("scenario", "procs", "commits_per_process", "backoffs", "time_ns"),
        "algorithm-run": ("algorithm",) + SUMMARY_FIELDS,
    }[cfg.benchmark]
    reporter.show_rows(cfg.benchmark, rows, lead)
    if cfg.benchmark == "coalesce-sweep":
        crossover = coalescing_crossover(rows)
        if crossover is None:
            reporter.console.print("[warning]No coalescing factor beats the remote atomics baseline.[/warning]")
        else:
            reporter.console.print(f"[info]Coalesced activities win from C = {crossover}.[/info]")
    reporter.success(f"{len(rows)} validated row(s).")


@app.command()
def fit(
    csv_path: Optional[Path] = typer.Argument(None, help="mechanism,n_vertices,mean_time_ns CSV"),
    from_sweep: bool = typer.Option(False, "--from-sweep", help="Generate samples with the simulator"),
    sizes: str = typer.Option(",".join(str(n) for n in DEFAULT_SWEEP_SIZES), help="Activity sizes for --from-sweep"),
    threads: int = typer.Option(4, min=1),
    policy: str = typer.Option("rtm"),
    seed: int = typer.Option(0),
    samples_out: Optional[Path] = typer.Option(None, help="Save the generated samples as CSV"),
    out: Optional[Path] = typer.Option(None),
    log_level: Optional[str] = typer.Option(None),
) -> None:
    """Fit time = A·N + B for atomics and transactions and report the crossing point."""
    reporter = Reporter()
    with exit_codes(reporter):
        settings = _settings(log_level=log_level)
        if from_sweep:
            with reporter.working("Sweeping activity sizes..."):
                samples = cost_sweep(
                    parse_int_range(sizes), threads=threads, policy=RunConfig(policy=policy).policy,
                    seed=seed, settings=settings,
                )
            if samples_out is not None:
                write_samples_csv(samples, samples_out)
        elif csv_path is not None:
            samples = read_samples_csv(csv_path)
        else:
            raise ConfigError("give a samples CSV or --from-sweep")

        grouped = split_by_mechanism(samples)
        fits = {mechanism: fit_linear(group) for mechanism, group in grouped.items()}
        crossing = crossing_point(fits["atomics"], fits["htm"])

        rows = [
            {
                "mechanism": mechanism,
                "slope_ns": f.slope,
                "intercept_ns": f.intercept,
                "r2": round(f.r2, 6),
                "n_star": crossing.n_star,
            }
            for mechanism, f in fits.items()
        ]
        reporter.show_rows("linear fits", rows, ("mechanism", "slope_ns", "intercept_ns", "r2"))
        if crossing.exists:
            reporter.console.print(Panel(
                f"Transactions are cheaper for N > {crossing.n_star:.2f}", title="Crossing point", border_style="green"
            ))
        else:
            reporter.console.print(f"[warning]No crossing point: {crossing.reason}[/warning]")
        write_csv(rows, out)


def main() -> None:
    """Main entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
