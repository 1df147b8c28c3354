"""Command-line entry point for every capability.

Defaults mirror the experiment constants (V=50, s_max=0.5, reward constants,
VR difficulty levels), so standard runs need few flags. Every subcommand
honors --seed; repeated invocations with identical flags produce
byte-identical outputs at any --threads value.
"""

from __future__ import annotations

import csv
import glob
import json
import logging
import os
import sys

import click

from . import __version__
from .bench import (
    RESULT_COLUMNS,
    SuiteSpec,
    checkpoint_sweep,
    make_controller,
    run_suite,
    scenarios_from_dir,
    scenarios_from_generator,
    write_summary_csv,
    write_summary_json,
)
from .constellation import ConstellationSpec, generate, load, save
from .engine import EnvConfig, Outcome, read_trace, run_episode, write_trace
from .errors import SwarmGatherError
from .ppo import GeneratedScenarios, TrainerConfig, train
from .protocol import serve as protocol_serve
from .render import render_trace
from .rewards import RewardConfig

logger = logging.getLogger("swarmgather")


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _out_dir(ctx) -> str:
    path = ctx.obj["out_dir"]
    os.makedirs(path, exist_ok=True)
    return path


env_options = [
    click.option("--V", "visibility", type=float, default=50.0, show_default=True,
                 help="Visibility range."),
    click.option("--s-max", type=float, default=0.5, show_default=True,
                 help="Max per-step displacement."),
    click.option("--conv-radius", type=float, default=5.0, show_default=True,
                 help="Gathered-disc radius for convergence."),
    click.option("--cutoff", type=int, default=None,
                 help="Step cutoff (default: 150 per agent)."),
    click.option("--p-ln", type=float, default=-0.5, show_default=True,
                 help="Per-lost-neighbor penalty."),
    click.option("--p-acc", type=float, default=-0.01, show_default=True,
                 help="Per-step penalty."),
    click.option("--c-g", type=float, default=0.1, show_default=True,
                 help="Global shrink reward constant."),
]


def add_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func
    return wrap


def build_env_config(visibility, s_max, conv_radius, cutoff, p_ln, p_acc, c_g) -> EnvConfig:
    return EnvConfig(
        v=visibility,
        s_max=s_max,
        conv_radius=conv_radius,
        cutoff_steps=cutoff,
        reward=RewardConfig(p_ln=p_ln, p_acc=p_acc, c_g=c_g),
    )


@click.group()
@click.version_option(version=__version__, prog_name="swarmgather")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker parallelism; outputs are identical at any value.")
@click.option("--out-dir", default=None,
              help="Output directory [env: SWARMGATHER_OUT_DIR; default: .].")
@click.option("--log-level", default=None,
              help="Logging level [env: SWARMGATHER_LOG_LEVEL; default: warning].")
@click.pass_context
def cli(ctx, seed, threads, out_dir, log_level):
    """Deterministic multi-agent gathering simulator and benchmark suite."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["threads"] = threads
    ctx.obj["out_dir"] = out_dir or os.environ.get("SWARMGATHER_OUT_DIR", ".")
    _setup_logging(log_level or os.environ.get("SWARMGATHER_LOG_LEVEL", "warning"))


@cli.command("generate")
@click.option("--n", type=int, required=True, help="Agents per constellation.")
@click.option("--V", "visibility", type=float, default=50.0, show_default=True)
@click.option("--VR", "visibility_ratio", type=float, default=0.75, show_default=True,
              help="Visibility ratio (0.75 challenging, 1.0 marginal).")
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--min-separation", type=float, default=1.0, show_default=True)
@click.option("--prefix", default="scenario", show_default=True)
@click.pass_context
def generate_cmd(ctx, n, visibility, visibility_ratio, count, min_separation, prefix):
    """Generate connected constellations as scenario JSON files."""
    out = _out_dir(ctx)
    base_seed = ctx.obj["seed"]
    for index in range(count):
        spec = ConstellationSpec(
            n_agents=n,
            visibility=visibility,
            visibility_ratio=visibility_ratio,
            seed=base_seed + index,
            min_separation=min_separation,
        )
        state = generate(spec)
        save(state, spec, os.path.join(out, f"{prefix}_{index:04d}.json"))
    click.echo(f"wrote {count} scenario(s) to {out}")


@cli.command("run")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--controller", default="analytical", show_default=True,
              help="analytical | stationary | random | policy:<weights> | external:<cmd>")
@click.option("--trace", "trace_path", default=None, help="Write the episode trace (JSONL).")
@add_options(env_options)
@click.pass_context
def run_cmd(ctx, scenario_path, controller, trace_path, **env_kwargs):
    """Run a single episode on a scenario file."""
    env_cfg = build_env_config(**env_kwargs)
    state, _ = load(scenario_path)
    ctl = make_controller(controller, seed=ctx.obj["seed"])
    result = run_episode(state, env_cfg, ctl, record_trace=trace_path is not None)
    if trace_path is not None:
        write_trace(trace_path, state, env_cfg, result)
    click.echo(
        f"outcome={result.outcome.value} steps={result.steps} "
        f"connectivity_preserved={result.connectivity_preserved} "
        f"gather_fraction={result.final_gather_fraction:.3f}"
    )
    if result.outcome is not Outcome.CONVERGED:
        logger.info("episode did not converge")


@cli.command("bench")
@click.option("--controller", default="analytical", show_default=True)
@click.option("--scenario-dir", default=None, type=click.Path(exists=True),
              help="Run on saved scenario files instead of generating.")
@click.option("--n", type=int, default=10, show_default=True)
@click.option("--VR", "visibility_ratio", type=float, default=0.75, show_default=True)
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--min-separation", type=float, default=1.0, show_default=True)
@click.option("--repetitions", type=int, default=1, show_default=True)
@add_options(env_options)
@click.pass_context
def bench_cmd(ctx, controller, scenario_dir, n, visibility_ratio, count, min_separation,
              repetitions, **env_kwargs):
    """Evaluate a controller over a scenario suite; writes results.csv + summary.json."""
    env_cfg = build_env_config(**env_kwargs)
    if scenario_dir:
        scenarios = scenarios_from_dir(scenario_dir)
    else:
        scenarios = scenarios_from_generator(
            count=count,
            n=n,
            visibility=env_kwargs["visibility"],
            visibility_ratio=visibility_ratio,
            seed=ctx.obj["seed"],
            min_separation=min_separation,
        )
    out = _out_dir(ctx)
    with open(os.path.join(out, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)

        def stream_row(row):
            writer.writerow([row.get(col, "") for col in RESULT_COLUMNS])
            fh.flush()

        suite = run_suite(
            SuiteSpec(
                scenarios=scenarios,
                controller=controller,
                env=env_cfg,
                controller_seed=ctx.obj["seed"],
                repetitions=repetitions,
            ),
            threads=ctx.obj["threads"],
            on_row=stream_row,
        )
    write_summary_json(
        suite.aggregates,
        os.path.join(out, "summary.json"),
        extra={"controller": controller, "seed": ctx.obj["seed"]},
    )
    write_summary_csv(suite.aggregates, os.path.join(out, "summary.csv"))
    for group in suite.aggregates["groups"]:
        steps = f"{group['mean_steps']:.1f}" if group["mean_steps"] is not None else "-"
        click.echo(
            f"{group['controller']} n={group['n']} VR={group['VR']}: "
            f"steps={steps} conn%={group['conn_pct']:.1f} "
            f"strict%={group['strict_connectivity_pct']:.1f} "
            f"converged={group['converged']}/{group['scenarios']}"
        )


@cli.command("train")
@click.option("--n", type=int, default=4, show_default=True, help="Agents per episode.")
@click.option("--VR", "visibility_ratio", type=float, default=0.5, show_default=True)
@click.option("--total-steps", type=int, default=200_000, show_default=True,
              help="Agent transitions to train for.")
@click.option("--batch-size", type=int, default=2048, show_default=True)
@click.option("--n-envs", type=int, default=8, show_default=True)
@click.option("--lr", type=float, default=2e-5, show_default=True)
@click.option("--gamma", type=float, default=0.95, show_default=True)
@click.option("--checkpoint-interval", type=int, default=50_000, show_default=True)
@add_options(env_options)
@click.pass_context
def train_cmd(ctx, n, visibility_ratio, total_steps, batch_size, n_envs, lr, gamma,
              checkpoint_interval, **env_kwargs):
    """Train the shared policy with PPO; writes checkpoints and training_log.csv."""
    env_cfg = build_env_config(**env_kwargs)
    cfg = TrainerConfig(
        gamma=gamma,
        lr=lr,
        batch_size=batch_size,
        n_envs=n_envs,
        total_steps=total_steps,
        checkpoint_interval=checkpoint_interval,
        seed=ctx.obj["seed"],
    )
    source = GeneratedScenarios(
        n_agents=n,
        visibility=env_kwargs["visibility"],
        visibility_ratio=visibility_ratio,
        seed=ctx.obj["seed"],
    )
    run = train(cfg, source, _out_dir(ctx), env_cfg=env_cfg)
    last = run.history[-1] if run.history else None
    click.echo(
        f"trained {len(run.history)} update(s); checkpoints: "
        + ", ".join(path for _, path in run.checkpoints)
    )
    if last:
        click.echo(
            f"final mean_return={last['mean_return']:.4f} "
            f"connectivity_rate={last['connectivity_rate']:.2f}"
        )


@cli.command("sweep")
@click.option("--checkpoints", required=True,
              help="Glob or comma-separated list of weight files.")
@click.option("--scenario-dir", default=None, type=click.Path(exists=True))
@click.option("--n", type=int, default=10, show_default=True)
@click.option("--VR", "visibility_ratio", type=float, default=0.75, show_default=True)
@click.option("--count", type=int, default=40, show_default=True,
              help="Fixed evaluation constellations when generating.")
@add_options(env_options)
@click.pass_context
def sweep_cmd(ctx, checkpoints, scenario_dir, n, visibility_ratio, count, **env_kwargs):
    """Evaluate checkpoints on a fixed scenario set and select the best."""
    env_cfg = build_env_config(**env_kwargs)
    if "," in checkpoints:
        paths = [p for p in checkpoints.split(",") if p]
    else:
        paths = sorted(glob.glob(checkpoints))
    if not paths:
        raise SwarmGatherError(f"no checkpoints match {checkpoints!r}")
    if scenario_dir:
        scenarios = scenarios_from_dir(scenario_dir)
    else:
        scenarios = scenarios_from_generator(
            count=count,
            n=n,
            visibility=env_kwargs["visibility"],
            visibility_ratio=visibility_ratio,
            seed=ctx.obj["seed"],
        )
    sweep = checkpoint_sweep(paths, scenarios, env=env_cfg, threads=ctx.obj["threads"])
    out = _out_dir(ctx)
    doc = {
        "best": sweep["best"],
        "conventions": sweep["conventions"],
        "results": [
            {k: v for k, v in entry.items() if k != "rows"} for entry in sweep["results"]
        ],
    }
    with open(os.path.join(out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for entry in sweep["results"]:
        if "error" in entry:
            click.echo(f"{entry['checkpoint']}: ERROR {entry['error']}")
        else:
            steps = f"{entry['mean_steps']:.1f}" if entry["mean_steps"] is not None else "-"
            click.echo(
                f"{entry['checkpoint']}: conn%={entry['connectivity_pct']:.1f} steps={steps} "
                f"converged={entry['converged']}/{entry['scenarios']}"
            )
    click.echo(f"best: {sweep['best']}")


@cli.command("render")
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
@click.option("--visibility-disc", is_flag=True, help="Overlay the visibility-range disc.")
def render_cmd(trace_path, out_path, visibility_disc):
    """Render an episode trace (JSONL) to SVG."""
    header, records = read_trace(trace_path)
    render_trace(header, records, out_path, visibility_disc=visibility_disc)
    click.echo(f"wrote {out_path}")


@cli.command("serve")
@click.option("--transport", type=click.Choice(["stdio", "socket"]), default="stdio",
              show_default=True)
@click.option("--socket-path", default=None, help="Unix socket path (socket transport).")
def serve_cmd(transport, socket_path):
    """Serve the environment over the line protocol (stdio by default)."""
    protocol_serve(transport=transport, socket_path=socket_path)


def entrypoint(argv=None) -> int:
    """Programmatic entry with the documented exit codes (0 ok, 1 runtime, 2 usage)."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 1
    except SwarmGatherError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
