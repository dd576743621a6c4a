"""Command-line entry points: world generation, training, tracking, evaluation, serving."""

from __future__ import annotations

import json
import sys

import click

from . import checkpoint, drivers, simworld, training
from .data_io import read_tracks, write_annotations, write_tracks
from .errors import SchemaError, IntegrityError
from .metrics import TrackSet, ca_idf1, ca_mota, match_frames, mota_from_counts, summary
from .net import TrackerNet
from .service import SessionServer
from .tokens import PromptKind, PromptText
from .tracker import TrackerParams


def _load_schedule(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        entries = json.load(fh)
    return tuple((int(f), PromptText(PromptKind.NM, tuple(text.replace(".", " ").split()))) for f, text in entries)


def _tracker_params(gamma, gamma_reassign, ttlr) -> TrackerParams:
    return TrackerParams(gamma=gamma, gamma_reassign=gamma_reassign, t_tlr=ttlr)


@click.group()
def main():
    """Prompt-driven multiple object tracking."""


@main.command("gen-world")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--frames", type=int, default=320, show_default=True)
@click.option("--grid", type=int, default=10, show_default=True, help="Grid cells per side.")
@click.option("--objects", "n_objects", type=int, default=4, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--annotations", "annotations_out", type=click.Path(), default=None, help="Also export the annotation document.")
def gen_world(seed, frames, grid, n_objects, out, annotations_out):
    """Generate a seeded scenario file."""
    cfg = simworld.WorldConfig(frames=frames, grid=(grid, grid), n_objects=n_objects)
    scenario = simworld.generate(seed, cfg)
    simworld.save_scenario(scenario, out)
    click.echo(f"wrote {out}: {frames} frames, {n_objects} objects, grid {grid}x{grid}")
    if annotations_out:
        ann = simworld.export_annotations(scenario)
        with open(annotations_out, "w", encoding="utf-8") as fh:
            fh.write(write_annotations(ann))
        click.echo(f"wrote {annotations_out}")


@main.command("train")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True)
@click.option("--epochs", type=int, default=220, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resume", type=click.Path(exists=True), default=None, help="Checkpoint to continue from.")
@click.option("--out", type=click.Path(), required=True)
@click.option("--loss-csv", type=click.Path(), default=None)
def cli_train(scenario_path, epochs, seed, resume, out, loss_csv):
    """Train the tracker on a scenario; writes a weight checkpoint."""
    scenario = simworld.load_scenario(scenario_path)
    if resume:
        net = checkpoint.load_net(resume)
    else:
        net = TrackerNet(seed=seed, grid=scenario.grid)
    cfg = training.TrainConfig(epochs=epochs, seed=seed)
    history = training.train(net, scenario, cfg, csv_path=loss_csv)
    checkpoint.save_net(net, out)
    if history:
        last = history[-1]
        click.echo(
            f"epoch {last['epoch']}: alignment {last['alignment']:.4f} "
            f"objectness {last['objectness']:.4f} giou {last['giou']:.4f} total {last['total']:.4f}"
        )
    click.echo(f"wrote {out} ({net.step_count} optimizer steps)")


def _load_net(weights, mode):
    try:
        net = checkpoint.load_net(weights)
    except FileNotFoundError:
        raise click.UsageError(f"weights file not found: {weights}")
    net.mode = mode
    return net


@main.command("track")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True)
@click.option("--weights", type=click.Path(), default=None, help="Weight checkpoint (omit with --oracle).")
@click.option("--oracle", is_flag=True, help="Use the ground-truth decoder instead of weights.")
@click.option("--schedule", "schedule_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(["simplified", "full"]), default="simplified", show_default=True)
@click.option("--gamma", type=float, default=0.7, show_default=True)
@click.option("--gamma-reassign", type=float, default=0.75, show_default=True)
@click.option("--ttlr", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--timings", is_flag=True, help="Print per-frame forward seconds.")
def cli_track(scenario_path, weights, oracle, schedule_path, mode, gamma, gamma_reassign, ttlr, seed, out, timings):
    """Track a scenario and write records plus a metric summary."""
    scenario = simworld.load_scenario(scenario_path)
    schedule = _load_schedule(schedule_path) if schedule_path else None
    if oracle:
        probe = TrackerNet(seed=seed, grid=scenario.grid)
        decoder = simworld.OracleDecoder(scenario, probe.encoder, probe.vocab)
    elif weights:
        decoder = _load_net(weights, mode)
    else:
        raise click.UsageError("pass --weights or --oracle")
    frame_times = [] if timings else None
    records = drivers.track_scenario(
        decoder, scenario, schedule, _tracker_params(gamma, gamma_reassign, ttlr), timings=frame_times
    )
    write_tracks(records, out)
    if timings:
        for t, dt in enumerate(frame_times):
            click.echo(f"frame {t} {mode} {dt:.6f}s")
    report = drivers.evaluate_records(records, scenario, schedule)
    click.echo(report.as_text())
    click.echo(f"wrote {out} ({len(records)} records)")


@main.command("eval")
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--pred", "pred_path", type=click.Path(exists=True), required=True)
@click.option("--class-agnostic/--class-aware", "agnostic", default=True, show_default=True)
@click.option("--csv", "csv_out", type=click.Path(), default=None)
def cli_eval(gt_path, pred_path, agnostic, csv_out):
    """Score predicted track records against ground-truth records."""
    try:
        gt = TrackSet(read_tracks(gt_path), is_gt=True)
        pred = TrackSet(read_tracks(pred_path))
    except (SchemaError, IntegrityError, KeyError, json.JSONDecodeError) as err:
        click.echo(f"malformed input: {err}", err=True)
        sys.exit(2)
    if agnostic:
        _, counts = match_frames(gt, pred, mode="class_agnostic")
        click.echo(f"CA-MOTA  {ca_mota(counts):.4f}")
        click.echo(f"CA-IDF1  {ca_idf1(gt, pred, mode='class_agnostic'):.4f}")
    else:
        _, counts = match_frames(gt, pred, mode="class_aware")
        click.echo(f"MOTA     {mota_from_counts(counts):.4f}")
        click.echo(f"IDF1     {ca_idf1(gt, pred, mode='class_aware'):.4f}")
    report = summary(gt, pred)
    click.echo(report.as_text())
    if csv_out:
        with open(csv_out, "w", encoding="utf-8") as fh:
            fh.write(report.as_csv())


@main.command("serve")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True)
@click.option("--weights", type=click.Path(), default=None)
@click.option("--oracle", is_flag=True)
@click.option("--mode", type=click.Choice(["simplified", "full"]), default="simplified", show_default=True)
@click.option("--gamma", type=float, default=0.7, show_default=True)
@click.option("--gamma-reassign", type=float, default=0.75, show_default=True)
@click.option("--ttlr", type=int, default=30, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
def cli_serve(scenario_path, weights, oracle, mode, gamma, gamma_reassign, ttlr, host, port):
    """Serve interactive tracking sessions on a local socket."""
    scenario = simworld.load_scenario(scenario_path)
    params = _tracker_params(gamma, gamma_reassign, ttlr)
    if oracle:
        probe = TrackerNet(seed=scenario.seed, grid=scenario.grid)
        server = SessionServer(scenario, params=params, oracle=True, encoder=probe.encoder, vocab=probe.vocab, announce=True)
    elif weights:
        server = SessionServer(scenario, net=_load_net(weights, mode), params=params, announce=True)
    else:
        raise click.UsageError("pass --weights or --oracle")
    server.serve_forever(host=host, port=port)


if __name__ == "__main__":
    main()
