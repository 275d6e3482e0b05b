"""Command-line interface."""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import pgm, pipeline, reports, simulate
from .imgproc import inpaint, text_cleanup_mask
from .metrics import evaluate, sweep_confidence
from .pipeline import (
    DEFAULT_CONF_THR,
    DEFAULT_IOU_THR,
    ParseError,
    RunConfig,
    load_ground_truth,
    load_predictions,
)
from .service import ServiceConfig, serve
from .ssim import SsimParams
from .temporal import HoldConfig, HoldMode

log = logging.getLogger(__name__)


def _hold_options(fn):
    fn = click.option(
        "--hold-mode",
        type=click.Choice([m.value for m in HoldMode]),
        default=HoldMode.BBOX_HOLD_SIM.value,
        show_default=True,
        help="False-negative suppression rule.",
    )(fn)
    fn = click.option(
        "--hold-frames", "-N", type=int, default=15, show_default=True,
        help="Frames a detection is held after the detector goes silent.",
    )(fn)
    fn = click.option(
        "--ssim-threshold", type=float, default=0.85, show_default=True,
        help="Similarity above which the hold is refreshed.",
    )(fn)
    fn = click.option(
        "--ssim-downsample", type=int, default=2, show_default=True,
        help="Block-mean reduction factor before SSIM.",
    )(fn)
    return fn


def _hold_config(hold_mode, hold_frames, ssim_threshold, ssim_downsample) -> HoldConfig:
    return HoldConfig(
        mode=HoldMode(hold_mode),
        hold_frames=hold_frames,
        ssim_threshold=ssim_threshold,
        ssim_params=SsimParams(downsample=ssim_downsample),
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    """Real-time ultrasound region masking and detector evaluation tools."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--frames", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of numbered PGM frames.")
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False),
              help="Detections sidecar (JSON Lines).")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output directory for masked frames and the decision log.")
@click.option("--conf-thr", type=float, default=DEFAULT_CONF_THR, show_default=True)
@click.option("--mask-style", type=click.Choice(["solid", "pixelate"]),
              default="solid", show_default=True)
@click.option("--pixelate-block", type=int, default=16, show_default=True)
@click.option("--figure/--no-figure", default=True, show_default=True,
              help="Also render a decision-source timeline figure.")
@_hold_options
def mask(frames, predictions, out, conf_thr, mask_style, pixelate_block, figure,
         hold_mode, hold_frames, ssim_threshold, ssim_downsample):
    """Mask a frame stream using detections and the hold rules."""
    cfg = RunConfig(
        frames_dir=Path(frames),
        predictions_path=Path(predictions) if predictions else None,
        output_dir=Path(out),
        conf_thr=conf_thr,
        hold=_hold_config(hold_mode, hold_frames, ssim_threshold, ssim_downsample),
        mask_style=mask_style,
        pixelate_block=pixelate_block,
    )
    summary = pipeline.run(cfg)
    if figure:
        with open(cfg.output_dir / "decisions.jsonl") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
        reports.plot_decision_timeline(records, cfg.output_dir / "decisions.png")
    click.echo(
        f"{summary.n_frames} frames in {summary.elapsed_s:.2f}s "
        f"({summary.fps:.1f} fps); sources: {summary.source_counts}"
    )


@main.command("eval")
@click.option("--ground-truth", "gt_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--predictions", "pred_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--conf-thr", type=float, default=0.5, show_default=True)
@click.option("--iou-thr", type=float, default=0.5, show_default=True)
@click.option("--n-images", type=int, default=None,
              help="Evaluated frame count incl. negatives; default: frames seen.")
@click.option("--out", default="eval", show_default=True,
              help="Output stem; writes <stem>.json and <stem>.csv.")
def eval_command(gt_path, pred_path, conf_thr, iou_thr, n_images, out):
    """Evaluate predictions against ground truth at one operating point."""
    try:
        gts = load_ground_truth(gt_path)
        preds = load_predictions(pred_path)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    dets = [d for frame_dets in preds.values() for d in frame_dets]
    if n_images is None:
        n_images = max(
            1, len({g.frame_index for g in gts} | set(preds))
        )
    report = evaluate(dets, gts, conf_thr, iou_thr, n_images)
    json_path = reports.ensure_parent(f"{out}.json")
    reports.write_eval_report(report, json_path, f"{out}.csv")
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command()
@click.option("--ground-truth", "gt_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--predictions", "pred_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--iou-thr", type=float, default=DEFAULT_IOU_THR, show_default=True)
@click.option("--steps", type=int, default=101, show_default=True,
              help="Evenly spaced thresholds over [0, 1].")
@click.option("--n-images", type=int, default=None)
@click.option("--out", default="sweep", show_default=True,
              help="Output stem; writes <stem>.csv and <stem>.png.")
def sweep(gt_path, pred_path, iou_thr, steps, n_images, out):
    """Sweep the confidence threshold and report the best-F1 operating point."""
    try:
        gts = load_ground_truth(gt_path)
        preds = load_predictions(pred_path)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    dets = [d for frame_dets in preds.values() for d in frame_dets]
    grid = [i / (steps - 1) for i in range(steps)] if steps > 1 else [0.0]
    curve = sweep_confidence(dets, gts, iou_thr, grid, n_images=n_images)
    csv_path = reports.ensure_parent(f"{out}.csv")
    reports.write_sweep_csv(curve, csv_path)
    reports.plot_sweep(curve, f"{out}.png")
    click.echo(f"best F1 {curve.best_f1:.4f} at confidence {curve.best_conf:.4f}")


@main.command()
@click.argument("input_pgm", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_pgm", type=click.Path(dir_okay=False))
@click.option("--mask-out", type=click.Path(dir_okay=False),
              help="Also write the text mask as a {0,255} PGM.")
@click.option("--tol", type=float, default=1e-3, show_default=True)
@click.option("--max-iters", type=int, default=500, show_default=True)
def preprocess(input_pgm, output_pgm, mask_out, tol, max_iters):
    """Remove small bright overlays (burned-in text) from one frame."""
    img = pgm.read(input_pgm)
    mask_arr = text_cleanup_mask(img)
    cleaned = inpaint(img, mask_arr, tol=tol, max_iters=max_iters)
    pgm.write(output_pgm, cleaned)
    if mask_out:
        pgm.write(mask_out, mask_arr.astype(np.uint8) * 255)
    click.echo(f"inpainted {int(mask_arr.sum())} pixels")


@main.command()
@click.option("--ground-truth", "gt_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--squareness-tol", type=float, default=0.01, show_default=True)
def validate(gt_path, squareness_tol):
    """Check annotations against the square-box convention."""
    from .core import validate_annotations

    try:
        gts = load_ground_truth(gt_path)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    report = validate_annotations(gts, squareness_tol)
    if report.ok:
        click.echo(f"{len(gts)} annotations conform")
    else:
        for index, message in report.violations:
            click.echo(f"annotation {index}: {message}", err=True)
        sys.exit(1)


@main.command("simulate")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--frames", "n_frames", type=int, default=120, show_default=True)
@click.option("--size", type=int, default=384, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dropout-every", type=int, default=7, show_default=True)
@click.option("--gap-length", type=int, default=3, show_default=True)
def simulate_command(out, n_frames, size, seed, dropout_every, gap_length):
    """Generate a synthetic dropout stream for exercising the hold rules."""
    spec = simulate.SimSpec(
        n_frames=n_frames,
        width=size,
        height=size,
        seed=seed,
        dropout_every=dropout_every,
        gap_length=gap_length,
    )
    simulate.write_stream(out, spec)
    click.echo(f"wrote {n_frames} frames and sidecars under {out}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=7855, show_default=True)
@click.option("--conf-thr", type=float, default=DEFAULT_CONF_THR, show_default=True)
@click.option("--mask-style", type=click.Choice(["solid", "pixelate"]),
              default="solid", show_default=True)
@_hold_options
def serve_command(host, port, conf_thr, mask_style,
                  hold_mode, hold_frames, ssim_threshold, ssim_downsample):
    """Run the streaming masking service."""
    cfg = ServiceConfig(
        conf_thr=conf_thr,
        hold=_hold_config(hold_mode, hold_frames, ssim_threshold, ssim_downsample),
        mask_style=mask_style,
    )
    serve(host, port, cfg)


if __name__ == "__main__":
    main()
