"""Scenario-suite evaluation, aggregation, and checkpoint sweeps.

Conventions (also embedded in every emitted report): the Steps aggregate
averages converged episodes only; Conn(%) is the mean final
largest-component fraction x100, with the stricter connected-at-every-step
rate reported alongside.
"""

from __future__ import annotations

import csv
import glob
import json
import os
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .constellation import ConstellationSpec, generate, load
from .control import (
    AnalyticalController,
    Controller,
    RandomController,
    StationaryController,
)
from .engine import EnvConfig, Outcome, run_episode
from .errors import ControllerError, SwarmGatherError
from .net import PolicyController, load_weights
from .protocol import PROTOCOL_VERSION, ProtocolClient, encode_message

RESULT_COLUMNS = (
    "scenario_id",
    "n",
    "VR",
    "seed",
    "controller",
    "steps",
    "outcome",
    "connectivity_preserved",
    "gather_fraction",
)

CONVENTIONS = {
    "steps_mean": "mean over converged episodes only; truncated episodes excluded",
    "conn_pct": "mean over scenarios of final largest-component fraction x 100",
    "strict_connectivity_pct": "percent of scenarios connected at every step",
    "convergence_test": "largest connected component bounding radius <= conv_radius",
}


@dataclass
class SuiteSpec:
    scenarios: list  # of (SwarmState, ConstellationSpec)
    controller: str = "analytical"
    env: EnvConfig = field(default_factory=EnvConfig)
    controller_seed: int = 0
    repetitions: int = 1

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ValueError("suite needs at least one scenario")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass
class SuiteResult:
    rows: list  # of dicts with RESULT_COLUMNS keys (plus optional "error")
    aggregates: dict


class ExternalController(Controller):
    """Drives a child process over the line protocol: obs out, act back."""

    def __init__(self, command: str):
        self._proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )
        self._client = ProtocolClient(self._proc.stdout, self._proc.stdin)
        response = self._client.request({"type": "hello", "version": PROTOCOL_VERSION})
        if response.get("type") != "hello":
            raise ControllerError(f"external controller handshake failed: {response}")

    def act_all(self, observations) -> list:
        payload = {
            "type": "obs",
            "agents": [
                {"bearings": [[float(x), float(y)] for x, y in obs.bearings]}
                for obs in observations
            ],
        }
        response = self._client.request(payload)
        if response.get("type") != "act":
            raise ControllerError(f"external controller sent {response.get('type')!r}")
        from .control import Action, clamp_action

        return [clamp_action(Action(float(a), float(s))) for a, s in response["actions"]]

    def act(self, observation):
        return self.act_all([observation])[0]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(encode_message({"type": "bye"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            self._proc.terminate()
        self._proc.wait(timeout=10)


def make_controller(spec: str, seed: int = 0) -> Controller:
    """Resolve a controller spec string.

    Forms: analytical | stationary | random | policy:<weights path> |
    policy-stochastic:<weights path> | external:<command>
    """
    if spec == "analytical":
        return AnalyticalController()
    if spec == "stationary":
        return StationaryController()
    if spec == "random":
        return RandomController(seed=seed)
    if spec.startswith("policy:"):
        return PolicyController(load_weights(spec.split(":", 1)[1]), mode="deterministic")
    if spec.startswith("policy-stochastic:"):
        return PolicyController(
            load_weights(spec.split(":", 1)[1]), mode="stochastic", seed=seed
        )
    if spec.startswith("external:"):
        return ExternalController(spec.split(":", 1)[1])
    raise ValueError(f"unknown controller spec {spec!r}")


def scenarios_from_generator(count: int, n: int, visibility: float = 50.0,
                             visibility_ratio: float = 0.75, seed: int = 0,
                             min_separation: float = 1.0) -> list:
    scenarios = []
    for index in range(count):
        spec = ConstellationSpec(
            n_agents=n,
            visibility=visibility,
            visibility_ratio=visibility_ratio,
            seed=seed + index,
            min_separation=min_separation,
        )
        scenarios.append((generate(spec), spec))
    return scenarios


def scenarios_from_dir(directory) -> list:
    paths = sorted(glob.glob(os.path.join(str(directory), "*.json")))
    if not paths:
        raise SwarmGatherError(f"no scenario files in {directory}")
    return [load(path) for path in paths]


def _run_row(index: int, scenario, controller_spec: str, env: EnvConfig, seed: int) -> dict:
    state, spec = scenario
    row = {
        "scenario_id": index,
        "n": state.n,
        "VR": spec.visibility_ratio,
        "seed": spec.seed,
        "controller": controller_spec,
    }
    controller = None
    try:
        controller = make_controller(controller_spec, seed=seed)
        result = run_episode(state, env, controller)
        row.update(
            steps=result.steps if result.outcome is Outcome.CONVERGED else None,
            outcome=result.outcome.value,
            connectivity_preserved=result.connectivity_preserved,
            gather_fraction=result.final_gather_fraction,
        )
    except Exception as exc:
        row.update(
            steps=None,
            outcome="error",
            connectivity_preserved=False,
            gather_fraction=0.0,
            error=str(exc),
        )
    finally:
        if isinstance(controller, ExternalController):
            controller.close()
    return row


def run_suite(spec: SuiteSpec, threads: int = 1, on_row=None) -> SuiteResult:
    """Run every scenario; rows come back in scenario order regardless of threads.

    on_row, when given, is called with each row as soon as it is available
    (still in scenario order), so long suites can stream results.
    """
    jobs = []
    index = 0
    for scenario in spec.scenarios:
        for rep in range(spec.repetitions):
            jobs.append((index, scenario, spec.controller_seed + index))
            index += 1

    def work(job):
        job_index, scenario, seed = job
        return _run_row(job_index, scenario, spec.controller, spec.env, seed)

    rows = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for row in pool.map(work, jobs):
                rows.append(row)
                if on_row is not None:
                    on_row(row)
    else:
        for job in jobs:
            row = work(job)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return SuiteResult(rows=rows, aggregates=aggregate(rows))


def aggregate(rows) -> dict:
    """Group rows by (controller, n, VR) and compute the summary metrics."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["controller"], row["n"], row["VR"]), []).append(row)
    table = []
    for (controller, n, vr), members in sorted(groups.items(), key=lambda kv: str(kv[0])):
        converged = [r for r in members if r["outcome"] == "converged"]
        steps = [r["steps"] for r in converged]
        table.append(
            {
                "controller": controller,
                "n": n,
                "VR": vr,
                "scenarios": len(members),
                "converged": len(converged),
                "mean_steps": (sum(steps) / len(steps)) if steps else None,
                "conn_pct": 100.0 * sum(r["gather_fraction"] for r in members) / len(members),
                "strict_connectivity_pct": 100.0
                * sum(bool(r["connectivity_preserved"]) for r in members)
                / len(members),
                "errors": sum(1 for r in members if r["outcome"] == "error"),
            }
        )
    return {"conventions": dict(CONVENTIONS), "groups": table}


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([row.get(col, "") for col in RESULT_COLUMNS])


def write_summary_json(aggregates: dict, path, extra: dict | None = None) -> None:
    doc = dict(aggregates)
    if extra:
        doc["run"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


SUMMARY_COLUMNS = (
    "controller",
    "n",
    "VR",
    "scenarios",
    "converged",
    "mean_steps",
    "conn_pct",
    "strict_connectivity_pct",
    "errors",
)


def write_summary_csv(aggregates: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for group in aggregates["groups"]:
            writer.writerow([
                "" if group[col] is None else group[col] for col in SUMMARY_COLUMNS
            ])


def checkpoint_sweep(checkpoint_paths, scenarios, env: EnvConfig | None = None,
                     threads: int = 1) -> dict:
    """Evaluate each checkpoint on the fixed scenario set and pick the best.

    Selection: highest strict connectivity percent first, then fewer mean
    steps (no-convergence counts as infinitely many steps).
    """
    if not checkpoint_paths:
        raise ValueError("sweep needs at least one checkpoint")
    env = env or EnvConfig()
    results = []
    for path in checkpoint_paths:
        entry = {"checkpoint": str(path)}
        try:
            load_weights(path)  # validate before spending episode time
            suite = run_suite(
                SuiteSpec(scenarios=list(scenarios), controller=f"policy:{path}", env=env),
                threads=threads,
            )
            group = suite.aggregates["groups"]
            entry.update(
                connectivity_pct=sum(g["strict_connectivity_pct"] * g["scenarios"] for g in group)
                / sum(g["scenarios"] for g in group),
                mean_steps=_weighted_mean_steps(group),
                converged=sum(g["converged"] for g in group),
                scenarios=sum(g["scenarios"] for g in group),
                rows=suite.rows,
            )
        except Exception as exc:
            entry.update(error=str(exc))
        results.append(entry)

    return {"results": results, "best": select_best(results), "conventions": dict(CONVENTIONS)}


def select_best(entries) -> str | None:
    """Highest connectivity wins; ties go to fewer mean steps.

    Entries with errors never win; no converged episodes counts as infinitely
    many steps. Remaining ties keep the earliest checkpoint (stable max).
    """
    best = None
    best_key = None
    for entry in entries:
        if "error" in entry:
            continue
        steps = entry["mean_steps"]
        key = (entry["connectivity_pct"], -(steps if steps is not None else float("inf")))
        if best_key is None or key > best_key:
            best = entry["checkpoint"]
            best_key = key
    return best


def _weighted_mean_steps(groups) -> float | None:
    total_steps = 0.0
    total_converged = 0
    for g in groups:
        if g["mean_steps"] is not None:
            total_steps += g["mean_steps"] * g["converged"]
            total_converged += g["converged"]
    return total_steps / total_converged if total_converged else None
