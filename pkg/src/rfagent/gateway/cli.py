"""Command line entry points."""

from __future__ import annotations

import json
import sys
import tempfile

import click

from .. import knowledge
from ..scpi import dut
from ..scpi.simulator import SimulatorConfig, serve
from .bench import SCENARIOS, format_report, run_benchmark
from .service import Gateway, GatewayConfig
from .store import RunStore


def _make_dut(name: str) -> dut.DutModel:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise click.BadParameter(f"unknown device model {name!r}; "
                                 f"choose from {', '.join(sorted(SCENARIOS))}")


@click.group()
def main() -> None:
    """Natural-language VNA operation against a built-in simulator."""


@main.group()
def sim() -> None:
    """Instrument simulator."""


@sim.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=5025, show_default=True)
@click.option("--dut", "dut_name", default="through_line", show_default=True)
@click.option("--latency-ms", default=0.0, show_default=True)
@click.option("--noise-seed", default=0, show_default=True)
def sim_serve(host: str, port: int, dut_name: str, latency_ms: float, noise_seed: int) -> None:
    """Run the SCPI simulator until interrupted."""
    config = SimulatorConfig(
        port=port,
        dut=_make_dut(dut_name),
        response_latency_ms=latency_ms,
        noise_seed=noise_seed,
    )
    handle = serve(config, host=host)
    click.echo(f"simulator listening on {handle.host}:{handle.port} (dut={dut_name})")
    try:
        handle.join()
    except KeyboardInterrupt:
        handle.stop()


@main.command("run")
@click.argument("utterance")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=5025, show_default=True)
@click.option("--simulate", is_flag=True, help="Spawn a simulator for this run.")
@click.option("--dut", "dut_name", default="through_line", show_default=True)
@click.option("--store", "store_root", default=None, help="Run store directory.")
@click.option("--json", "as_json", is_flag=True, help="Print the whole run record.")
def run_one(utterance: str, host: str, port: int, simulate: bool,
            dut_name: str, store_root: str | None, as_json: bool) -> None:
    """Execute one utterance end to end and print the outcome."""
    handle = None
    if simulate:
        handle = serve(SimulatorConfig(dut=_make_dut(dut_name)))
        host, port = handle.host, handle.port
    try:
        store = RunStore(store_root or tempfile.mkdtemp(prefix="rfagent-run-"))
        gateway = Gateway(
            knowledge.builtin(),
            store,
            GatewayConfig(instrument_host=host, instrument_port=port),
        )
        record = gateway.run_intent(utterance)
    finally:
        if handle is not None:
            handle.stop()
    if as_json:
        click.echo(json.dumps(record, indent=2, sort_keys=True))
    else:
        click.echo(f"[{record['outcome']}] {record.get('route_label', '')}")
        click.echo(record.get("summary", ""))
    if record["outcome"] not in ("Completed", "Blocked"):
        sys.exit(1)


@main.command("bench")
@click.option("--store", "store_root", default=None, help="Run store directory.")
@click.option("--noise-seed", default=0, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def bench(store_root: str | None, noise_seed: int, as_json: bool) -> None:
    """Run the sixteen-intent benchmark."""
    report = run_benchmark(store_root=store_root, noise_seed=noise_seed)
    if as_json:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
    else:
        click.echo(format_report(report))
    if not report["all_match"]:
        sys.exit(1)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--instrument-host", default="127.0.0.1", show_default=True)
@click.option("--instrument-port", default=5025, show_default=True)
@click.option("--simulate", is_flag=True, help="Spawn a simulator alongside the gateway.")
@click.option("--dut", "dut_name", default="through_line", show_default=True)
@click.option("--store", "store_root", default=None, help="Run store directory.")
def serve_api(host: str, port: int, instrument_host: str, instrument_port: int,
              simulate: bool, dut_name: str, store_root: str | None) -> None:
    """Serve the gateway HTTP API."""
    import uvicorn

    from .api import create_app

    handle = None
    if simulate:
        handle = serve(SimulatorConfig(dut=_make_dut(dut_name)))
        instrument_host, instrument_port = handle.host, handle.port
        click.echo(f"simulator on {instrument_host}:{instrument_port} (dut={dut_name})")
    store = RunStore(store_root or tempfile.mkdtemp(prefix="rfagent-api-"))
    gateway = Gateway(
        knowledge.builtin(),
        store,
        GatewayConfig(instrument_host=instrument_host, instrument_port=instrument_port),
    )
    try:
        uvicorn.run(create_app(gateway), host=host, port=port, log_level="warning")
    finally:
        gateway.shutdown()
        if handle is not None:
            handle.stop()


@main.group("knowledge")
def knowledge_group() -> None:
    """Knowledge base inspection."""


@knowledge_group.command("lint")
def knowledge_lint() -> None:
    """Check the packaged knowledge base for gaps."""
    findings = knowledge.builtin().lint()
    for finding in findings:
        click.echo(finding)
    click.echo("no findings" if not findings else f"{len(findings)} finding(s)")
    if findings:
        sys.exit(1)


@knowledge_group.command("show")
@click.option("--stage", default="intent", show_default=True,
              type=click.Choice(["intent", "planning", "execution", "retrieval_on_demand"]))
def knowledge_show(stage: str) -> None:
    """Print the disclosure view for one stage."""
    from ..knowledge.types import DisclosureStage

    view = knowledge.builtin().disclose(DisclosureStage(stage))
    click.echo(json.dumps(view.payload, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
