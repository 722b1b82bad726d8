"""Command-line entry point orchestrating the full pipeline:
extract -> analyze -> select -> grid -> stimuli -> serve -> score."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import audio, distortion, features, grid as gridmod, latent, stimuli, table

DEFAULT_SEED = 2013


def _fail(message: str):
    raise click.ClickException(message)


@click.group()
def main():
    """Latent-space controllability toolkit."""


@main.command("extract-features")
@click.option("--audio-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path())
@click.option("--frame-length", default=0.025, show_default=True)
@click.option("--hop", default=0.010, show_default=True)
@click.option("--f0-min", default=60.0, show_default=True)
@click.option("--f0-max", default=500.0, show_default=True)
def extract_features_cmd(audio_dir, out, frame_length, hop, f0_min, f0_max):
    """Extract the built-in feature subset from every WAV in a directory."""
    cfg = features.ExtractionConfig(frame_length=frame_length, hop=hop,
                                    f0_min=f0_min, f0_max=f0_max)
    rows = {}
    paths = sorted(Path(audio_dir).glob("*.wav"))
    if not paths:
        _fail(f"--audio-dir {audio_dir}: no .wav files")
    for path in paths:
        clip = audio.load_audio(path)
        track = features.extract_frame_descriptors(clip, cfg)
        rows[clip.id] = features.apply_functionals(track)
    table.export_feature_table(table.from_rows(rows), out)
    click.echo(f"wrote {len(rows)} utterances to {out}")


@main.command("import-features")
@click.option("--input", "path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def import_features_cmd(path, out):
    """Validate and normalize an externally produced feature table."""
    t = table.import_feature_table(path)
    table.export_feature_table(t, out)
    click.echo(f"{len(t.ids)} utterances, {len(t.names)} features -> {out}")


@main.command("fit-pca")
@click.option("--embeddings", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def fit_pca_cmd(embeddings, out):
    """Fit the 2-D projection and persist it for reuse."""
    e = latent.load_embeddings(embeddings)
    p = latent.fit_pca(e)
    latent.save_projection(p, out)
    ev = p.explained_variance
    click.echo(f"explained variance: {ev[0]:.6g}, {ev[1]:.6g} -> {out}")


@main.command("analyze-trends")
@click.option("--embeddings", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--projection", type=click.Path(exists=True))
@click.option("--out", type=click.Path())
@click.option("--cross-validate", is_flag=True,
              help="Also report out-of-fold APCC (extension).")
def analyze_trends_cmd(embeddings, features_path, projection, out, cross_validate):
    """Fit one plane per feature and print the APCC table."""
    e = latent.load_embeddings(embeddings)
    t = table.import_feature_table(features_path)
    p = latent.load_projection(projection) if projection else latent.fit_pca(e)
    trends = latent.fit_all_trends(e, p, t)
    click.echo(f"{'feature':40s} {'APCC':>8s}")
    records = []
    points = latent.project(p, e.vectors)
    for tr in trends:
        apcc = "   n/a" if tr.no_trend else f"{tr.apcc:8.6f}"
        click.echo(f"{tr.name:40s} {apcc}")
        rec = {"feature": tr.name, "a": tr.a, "b": tr.b, "c": tr.c,
               "apcc": None if tr.no_trend else tr.apcc, "n": tr.n}
        if cross_validate:
            cv = latent.cross_validated_apcc(points, t.column(tr.name))
            rec["cv_apcc"] = None if np.isnan(cv) else cv
        records.append(rec)
    if out:
        Path(out).write_text(json.dumps(records, indent=1) + "\n")


@main.command("select-features")
@click.option("--embeddings", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--projection", type=click.Path(exists=True))
@click.option("--redundancy-cutoff", default=0.8, show_default=True)
@click.option("--prediction-cutoff", default=0.3, show_default=True)
@click.option("--out", type=click.Path())
def select_features_cmd(embeddings, features_path, projection,
                        redundancy_cutoff, prediction_cutoff, out):
    """Correlation-filter the feature set down to a diverse subset."""
    e = latent.load_embeddings(embeddings)
    t = table.import_feature_table(features_path)
    p = latent.load_projection(projection) if projection else latent.fit_pca(e)
    trends = latent.fit_all_trends(e, p, t)
    result = latent.select_features(trends, t, redundancy_cutoff, prediction_cutoff)
    click.echo("kept: " + ", ".join(result.kept))
    for rec in result.eliminated:
        click.echo(f"eliminated {rec['name']}: {rec['reason']}")
    if out:
        Path(out).write_text(json.dumps(
            {"kept": result.kept, "eliminated": result.eliminated}, indent=1) + "\n")


@main.command("trend-map")
@click.option("--embeddings", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--projection", type=click.Path(exists=True))
@click.option("--color-feature", required=True)
@click.option("--out", required=True, type=click.Path())
def trend_map_cmd(embeddings, features_path, projection, color_feature, out):
    """Export the gradient map as SVG plus a CSV data file."""
    e = latent.load_embeddings(embeddings)
    t = table.import_feature_table(features_path)
    p = latent.load_projection(projection) if projection else latent.fit_pca(e)
    trends = latent.fit_all_trends(e, p, t)
    svg, csv_path = latent.export_trend_map(p, e, trends, color_feature, t, out)
    click.echo(f"wrote {svg} and {csv_path}")


@main.command("distortion")
@click.option("--ref", required=True, type=click.Path(exists=True))
@click.option("--pred", required=True, type=click.Path(exists=True))
@click.option("--k", "K", default=13, show_default=True)
@click.option("--scaled", is_flag=True, help="Apply the (10/ln10)*sqrt(2) dB constant.")
@click.option("--max-shift", default=50, show_default=True)
@click.option("--out", type=click.Path())
def distortion_cmd(ref, pred, K, scaled, max_shift, out):
    """MCD/VDE/F0 metrics between two WAV files, DTW and shift rows."""
    ref_track = features.extract_frame_descriptors(audio.load_audio(ref))
    pred_track = features.extract_frame_descriptors(audio.load_audio(pred))
    rows = distortion.distortion_report(ref_track, pred_track, K=K,
                                        scaled=scaled, max_shift=max_shift)
    click.echo(distortion.format_report(rows))
    if out:
        Path(out).write_text(json.dumps([r.as_dict() for r in rows], indent=1) + "\n")


@main.command("build-grid")
@click.option("--embeddings", required=True, type=click.Path(exists=True))
@click.option("--projection", type=click.Path(exists=True))
@click.option("--resolution", default=100, show_default=True)
@click.option("--out", required=True, type=click.Path())
def build_grid_cmd(embeddings, projection, resolution, out):
    """Bounding rectangle, lattice, and 5x5 anchors from the embeddings."""
    e = latent.load_embeddings(embeddings)
    p = latent.load_projection(projection) if projection else latent.fit_pca(e)
    spec = gridmod.build_grid(p, e, resolution=resolution)
    gridmod.save_grid(spec, out)
    click.echo(f"bounds {spec.bounds}, {spec.resolution}^2 lattice -> {out}")


@main.command("gen-stimuli")
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True))
@click.option("--texts", default=5, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def gen_stimuli_cmd(grid_path, texts, out_dir, seed):
    """Synthesize one clip per (text, lattice point)."""
    spec = gridmod.load_grid(grid_path)
    manifest = stimuli.generate_synthetic_stimuli(spec, texts, out_dir, seed=seed)
    click.echo(f"{len(manifest.entries)} stimuli -> {out_dir}")


@main.command("serve")
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--log", "answer_log", required=True, type=click.Path())
@click.option("--session-log", type=click.Path())
@click.option("--admin-key", envvar="STYLESPACE_ADMIN_KEY", default="admin")
@click.option("--static-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
def serve_cmd(grid_path, manifest, answer_log, session_log, admin_key,
              static_dir, host, port, seed):
    """Run the experiment HTTP service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        grid_path=Path(grid_path), manifest_path=Path(manifest),
        answer_log=Path(answer_log),
        session_log=Path(session_log) if session_log
        else Path(answer_log).with_suffix(".sessions.jsonl"),
        admin_key=admin_key, seed=seed,
        static_dir=Path(static_dir) if static_dir else None)
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")


@main.command("score")
@click.option("--log", "answer_log", required=True, type=click.Path(exists=True))
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def score_cmd(answer_log, grid_path, out):
    """Score an answer log: means, 95% CIs, per-index stats, slope tests."""
    spec = gridmod.load_grid(grid_path)
    answers = gridmod.load_answers(answer_log, effective=True)
    if not answers:
        _fail(f"--log {answer_log}: no answers")
    report = gridmod.score_answers(spec, answers)
    report["durations"] = gridmod.summarize_durations(answers)
    for variant, entry in report["variants"].items():
        click.echo(f"variant {variant}: n={entry['n']} "
                   f"mean {entry['mean']:.3f} +/- {entry['ci95']:.3f} "
                   f"median {entry['median']:.3f}")
    if out:
        Path(out).write_text(json.dumps(report, indent=1) + "\n")


@main.command("baseline")
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True))
@click.option("--scheme", default="anchor-to-anchor", show_default=True,
              type=click.Choice(["anchor-to-anchor", "anchor-to-lattice",
                                 "anchor-to-uniform-click"]))
@click.option("--n-mc", default=10 ** 6, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--out", type=click.Path())
def baseline_cmd(grid_path, scheme, n_mc, seed, out):
    """Expected distance of a random guesser."""
    spec = gridmod.load_grid(grid_path)
    report = gridmod.random_baseline(spec, scheme=scheme, n_mc=n_mc, seed=seed)
    line = f"{scheme}: expected {report['expected']:.6f}"
    if "stderr" in report:
        line += f" +/- {report['stderr']:.6f} (stderr)"
    click.echo(line)
    if out:
        Path(out).write_text(json.dumps(report, indent=1) + "\n")


@main.command("slope-test")
@click.option("--series", required=True,
              help="Comma-separated index:value pairs, e.g. 1:5,2:3,3:1")
def slope_test_cmd(series):
    """Least-squares slope and zero-slope p-value for a small series."""
    try:
        pairs = [tuple(float(v) for v in item.split(":"))
                 for item in series.split(",")]
    except ValueError:
        _fail("--series must look like 1:5,2:3,3:1")
    result = gridmod.slope_test(pairs)
    click.echo(f"slope {result['slope']:.6g} p {result['p_value']:.6g}")


if __name__ == "__main__":
    sys.exit(main())
