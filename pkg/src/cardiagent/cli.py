"""Command-line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import metrics
from .aha17 import assign_segments, bullseye_export, lge_burden, locate_rv_insertions, \
    segment_wall_thickness
from .backends.phantom import PhantomSpec, mask_from_intensities, phantom_generate
from .quantify import quantify_study
from .reporting import ReferenceFindings, StructuredReport, score_report
from .volume_io import LABEL_SCHEMAS, LabelMask, SequenceKind, load_volume, save_volume


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON config file with default options.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--data-root", type=click.Path(file_okay=False), default="./cardiagent-data",
              show_default=True)
@click.pass_context
def main(ctx, config, seed, data_root):
    """Cardiac MRI quantification and interpretation toolkit."""
    ctx.ensure_object(dict)
    if config:
        ctx.obj.update(json.loads(Path(config).read_text()))
    ctx.obj.setdefault("seed", seed)
    ctx.obj.setdefault("data_root", data_root)


def _mask_from_volume(path: str, kind: SequenceKind, phase: int = 0) -> LabelMask:
    """Label mask from a desk volume.

    Small integer values are taken as labels directly; larger values are
    treated as intensity-coded (label x 100, the phantom convention).
    """
    vol = load_volume(path, format="desk")
    data = np.asarray(vol.data[phase])
    if data.max() >= 50:
        mask = mask_from_intensities(data, kind, vol.spacing)
        return LabelMask(labels=mask.labels, spacing=vol.spacing,
                         schema=LABEL_SCHEMAS[kind], kind=kind, phase=phase)
    return LabelMask(labels=data.astype(np.int16), spacing=vol.spacing,
                     schema=LABEL_SCHEMAS[kind], kind=kind, phase=phase)


@main.command()
@click.argument("sax_masks", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--heart-rate", type=float, default=None, help="bpm, enables cardiac output.")
@click.option("--ch4-mask", type=click.Path(exists=True, dir_okay=False), default=None)
def quantify(sax_masks, heart_rate, ch4_mask):
    """Measurement set from per-phase SAX label volumes (desk format)."""
    masks = []
    for p in sax_masks:
        phases = load_volume(p, format="desk").phases
        masks.extend(_mask_from_volume(p, SequenceKind.SAX_CINE, i) for i in range(phases))
    ch4 = _mask_from_volume(ch4_mask, SequenceKind.CH4_CINE, 0) if ch4_mask else None
    ms = quantify_study(masks, heart_rate=heart_rate, ch4_mask=ch4)
    click.echo(json.dumps(ms.to_json(), indent=1))


@main.command("seg-eval")
@click.argument("gt", type=click.Path(exists=True, dir_okay=False))
@click.argument("pred", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice([k.value for k in SequenceKind]),
              default=SequenceKind.SAX_CINE.value, show_default=True)
def seg_eval(gt, pred, kind):
    """Per-label DSC / Hausdorff / ASD between two label volumes."""
    seq = SequenceKind(kind)
    gt_mask = _mask_from_volume(gt, seq)
    pred_mask = _mask_from_volume(pred, seq)
    out = {}
    for label, name in sorted(gt_mask.schema.items()):
        entry = {"dsc": metrics.dsc(gt_mask, pred_mask, label)}
        try:
            entry["hd_mm"] = metrics.hausdorff(gt_mask, pred_mask, label)
            entry["asd_mm"] = metrics.asd(pred_mask, gt_mask, label)
        except metrics.UndefinedMetricError as exc:
            entry["note"] = str(exc)
        out[name] = entry
    click.echo(json.dumps(out, indent=1))


@main.command("cls-eval")
@click.argument("predictions", type=click.Path(exists=True, dir_okay=False))
@click.option("--bootstrap", type=int, default=0,
              help="Bootstrap resamples for the AUC confidence interval.")
@click.pass_context
def cls_eval(ctx, predictions, bootstrap):
    """Classification metrics from {y_true: [...], y_score: [...]} JSON."""
    payload = json.loads(Path(predictions).read_text())
    y_true = np.asarray(payload["y_true"]).astype(bool)
    y_score = np.asarray(payload["y_score"], dtype=float)
    y_pred = np.asarray(payload.get("y_pred", y_score >= 0.5)).astype(bool)
    cm = metrics.ConfusionMatrix(
        tp=int((y_true & y_pred).sum()), fn=int((y_true & ~y_pred).sum()),
        tn=int((~y_true & ~y_pred).sum()), fp=int((~y_true & y_pred).sum()))
    out = dict(metrics.confusion_metrics(cm))
    auc = metrics.roc_auc(y_score, y_true, n_boot=bootstrap or 2000,
                          seed=ctx.obj["seed"])
    out["auc"] = auc["auc"]
    if bootstrap:
        out["auc_ci95"] = [auc["ci_low"], auc["ci_high"]]
    click.echo(json.dumps(out, indent=1))


@main.command()
@click.argument("sax_mask", type=click.Path(exists=True, dir_okay=False))
@click.option("--lge-mask", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--landmark-angle", type=float, default=None,
              help="Anterior insertion fallback angle, radians.")
def bullseye(sax_mask, lge_mask, landmark_angle):
    """17-segment wall thickness (and LGE burden) polar-map export."""
    mask = _mask_from_volume(sax_mask, SequenceKind.SAX_CINE)
    insertions = locate_rv_insertions(mask, landmark_angle=landmark_angle)
    labeling = assign_segments(mask, insertions)
    out = {"wall_thickness": bullseye_export(segment_wall_thickness(labeling, mask))}
    if lge_mask:
        lmask = _mask_from_volume(lge_mask, SequenceKind.SAX_LGE)
        llab = assign_segments(lmask, locate_rv_insertions(
            lmask, landmark_angle=insertions["anterior_angle"]))
        out["lge_burden"] = bullseye_export(lge_burden(lmask, llab))
    click.echo(json.dumps(out, indent=1))


@main.command()
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--lge-segment", type=int, default=None)
@click.option("--shell-thickness", type=float, default=8.0, show_default=True)
@click.option("--es-scale", type=float, default=0.8, show_default=True,
              help="ES semi-axes as a fraction of the 30 mm ED semi-axes.")
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.pass_context
def phantom(ctx, out, lge_segment, shell_thickness, es_scale, noise):
    """Generate a synthetic study (desk volumes + analytic reference)."""
    es = tuple(30.0 * es_scale for _ in range(3))
    spec = PhantomSpec(es_axes=es, shell_thickness=shell_thickness,
                       lge_segment=lge_segment, noise_level=noise,
                       seed=ctx.obj["seed"])
    ph = phantom_generate(spec)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_volume(ph.sax_cine, out_dir / "sax_cine.json")
    save_volume(ph.ch2_cine, out_dir / "ch2_cine.json")
    save_volume(ph.ch4_cine, out_dir / "ch4_cine.json")
    if ph.lge_volume is not None:
        save_volume(ph.lge_volume, out_dir / "sax_lge.json")
    (out_dir / "analytic.json").write_text(json.dumps(ph.analytic.to_json(), indent=1))
    click.echo(f"phantom written to {out_dir}")


@main.command("report-score")
@click.argument("candidate", type=click.Path(exists=True, dir_okay=False))
@click.argument("reference", type=click.Path(exists=True, dir_okay=False))
@click.option("--hallucination", type=click.Choice(["none", "logical_conflict",
                                                    "mild", "major"]),
              default="none", show_default=True)
def report_score(candidate, reference, hallucination):
    """Score a structured report JSON against reference findings JSON."""
    report = StructuredReport.from_json(json.loads(Path(candidate).read_text()))
    ref = ReferenceFindings.from_json(json.loads(Path(reference).read_text()))
    score = score_report(report, ref, hallucination=hallucination)
    click.echo(json.dumps(score.to_json(), indent=1))


@main.command("agent-repl")
@click.option("--study-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of desk studies (sax_cine/ch2_cine/ch4_cine/sax_lge).")
@click.pass_context
def agent_repl(ctx, study_dir):
    """Interactive dialogue loop on stdin."""
    from .agent import AgentMessage, SessionState, run_turn
    from .backends import LocalBackend, phantom_oracle_logic
    from .service import _load_default_kb
    session = SessionState(backend=LocalBackend(logic=phantom_oracle_logic),
                           kb=_load_default_kb())
    if study_dir:
        for stem, kind in (("sax_cine", SequenceKind.SAX_CINE),
                           ("ch2_cine", SequenceKind.CH2_CINE),
                           ("ch4_cine", SequenceKind.CH4_CINE),
                           ("sax_lge", SequenceKind.SAX_LGE)):
            path = Path(study_dir) / f"{stem}.json"
            if path.exists():
                session.studies[kind] = load_volume(path, format="desk")
        click.echo(f"loaded sequences: {[k.value for k in session.studies]}")
    for line in sys.stdin:
        text = line.strip()
        if text in ("exit", "quit"):
            break
        events = run_turn(session, AgentMessage(role="user", text=text))
        for event in events:
            if event["event"] == "tool_use":
                names = [a["api_name"] for a in event["data"]["actions"]]
                click.echo(f"[tools] {names}")
            elif event["event"] == "agent_message":
                click.echo(event["data"]["text"])


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_context
def serve(ctx, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(data_root=ctx.obj["data_root"]), host=host, port=port)


if __name__ == "__main__":
    main()
