"""Command-line client for the calibration service.

Every subcommand goes through the HTTP API. With --server the requests hit
a remote instance and long jobs are polled; without it an in-process app is
used, so no server needs to be running for local work.
"""

from __future__ import annotations

import json
import sys
import time

import click
import httpx

POLL_INTERVAL_S = 2.0


def _load_config_payload(config_path, profile, seed, out):
    try:
        with open(config_path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read config: {exc}")
    if profile is not None:
        payload["profile"] = profile
    if seed is not None:
        payload["seed"] = seed
    if out is not None:
        payload["out_dir"] = out
    return payload


def _client(server: str | None):
    """(client, in_process) pair; in-process requests execute jobs inline."""
    if server:
        return httpx.Client(base_url=server, timeout=None), False
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient

    from .service import create_app
    return TestClient(create_app()), True


def _check(response) -> dict:
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{response.status_code}: {detail}")
    return response.json()


def _run_job(client, in_process, endpoint, body) -> dict:
    status = _check(client.post(endpoint, json=body,
                                params={"wait": in_process}))
    while status["status"] in ("queued", "running"):
        time.sleep(POLL_INTERVAL_S)
        status = _check(client.get(f"/jobs/{status['job_id']}"))
    if status["status"] == "failed":
        raise click.ClickException(f"job failed: {status['error']}")
    return status["result"]


def _common(func):
    func = click.option("--config", "config_path", required=True,
                        type=click.Path(exists=True, dir_okay=False),
                        help="Experiment configuration (JSON).")(func)
    func = click.option("--profile", type=click.Choice(["smoke", "paper"]),
                        default=None, help="Override the config profile.")(func)
    func = click.option("--seed", type=int, default=None,
                        help="Override the base seed.")(func)
    func = click.option("--out", type=click.Path(file_okay=False),
                        default=None, help="Output directory.")(func)
    func = click.option("--server", default=None,
                        help="Base URL of a running service; default is an "
                             "in-process instance.")(func)
    return func


@click.group()
def main():
    """Material parameter calibration from full-field displacement data."""


@main.command()
@_common
def generate(config_path, profile, seed, out, server):
    """Write the configured case's synthetic data set to disk."""
    payload = _load_config_payload(config_path, profile, seed, out)
    client, _ = _client(server)
    result = _check(client.post("/generate", json={"config": payload}))
    click.echo(json.dumps(result, indent=2))


@main.command()
@_common
def calibrate(config_path, profile, seed, out, server):
    """Run one identification and print the result record."""
    payload = _load_config_payload(config_path, profile, seed, out)
    client, in_process = _client(server)
    result = _run_job(client, in_process, "/calibrate", {"config": payload})
    click.echo(json.dumps(result, indent=2))


@main.command()
@_common
def sweep(config_path, profile, seed, out, server):
    """Run the study grid named in the config's study section."""
    payload = _load_config_payload(config_path, profile, seed, out)
    client, in_process = _client(server)
    result = _run_job(client, in_process, "/sweep", {"config": payload})
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.option("--results", "results_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory holding run and sweep results.")
@click.option("--out", default=None, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True,
              help="Merge results from differing configurations.")
@click.option("--server", default=None)
def report(results_dir, out, force, server):
    """Merge result files into plot-ready CSV tables."""
    client, _ = _client(server)
    result = _check(client.post("/report", json={
        "results_dir": results_dir, "out_dir": out, "force": force}))
    if result["problems"]:
        for problem in result["problems"]:
            click.echo(f"skipped: {problem}", err=True)
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
