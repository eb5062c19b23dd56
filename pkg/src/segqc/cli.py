"""Command-line entry point wiring all modules into one tool.

Exit codes: 0 success, 1 operational failure, 2 usage error, and 3 from
`evaluate` when any case fell to a fail-closed rejection (so CI can tell
"quality gate tripped" apart from "tool broke").
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import audit as audit_mod
from .config import AppConfig, load_config
from .dataset import load_manifest
from .errors import ConfigError, SegqcError
from .guardrail import decide_case, decision_line
from .imaging import BinaryMask, OverlayStyle, RasterImage, render_overlay
from .judge import JudgeTranscript, MockProvider, TranscriptStore, run_batch
from .metrics import per_group_breakdown, render_report
from .phantoms import PhantomSpec, generate_phantom_suite

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_GUARDRAIL = 3


def _fail(message: str) -> "click.exceptions.Exit":
    click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(EXIT_FAILURE)


def _resolve_config(ctx: click.Context, **overrides) -> AppConfig:
    try:
        return load_config(file_path=ctx.obj.get("config_path"), overrides=overrides)
    except ConfigError as exc:
        raise _fail(str(exc))


@click.group(invoke_without_command=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              envvar="SEGQC_CONFIG", help="Path to a JSON config file.")
@click.option("--show-config", is_flag=True, help="Print the resolved config (key redacted) and exit.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, show_config: bool):
    """Quality control for AI-generated 2D segmentations."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    if show_config:
        cfg = _resolve_config(ctx)
        click.echo(json.dumps(cfg.redacted_dict(), indent=2))
        ctx.exit(EXIT_OK)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        ctx.exit(EXIT_USAGE)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Suite output directory.")
@click.option("--count-per-defect", default=10, show_default=True)
@click.option("--size", default="128x128", show_default=True, help="Image size WxH.")
@click.option("--noise-sigma", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out_dir: str, count_per_defect: int, size: str, noise_sigma: float, seed: int):
    """Generate the synthetic phantom suite."""
    try:
        w, h = (int(p) for p in size.lower().split("x"))
    except ValueError:
        raise click.UsageError(f"--size must look like 128x128, got {size!r}")
    try:
        spec = PhantomSpec(
            count_per_defect=count_per_defect,
            image_size=(w, h),
            noise_sigma=noise_sigma,
            seed=seed,
        )
        manifest = generate_phantom_suite(spec, out_dir)
    except (SegqcError, ValueError, OSError) as exc:
        raise _fail(str(exc))
    click.echo(f"wrote {len(manifest)} cases under {out_dir}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--contour-width", default=1, show_default=True)
@click.option("--fill-alpha", default=0.25, show_default=True)
def prepare(manifest_path: str, out_dir: str, contour_width: int, fill_alpha: float):
    """Render an overlay PNG for every case."""
    try:
        manifest = load_manifest(manifest_path)
        assets = Path(manifest_path).parent
        overlays = Path(out_dir) / "overlays"
        overlays.mkdir(parents=True, exist_ok=True)
        style = OverlayStyle(contour_width=contour_width, fill_alpha=fill_alpha)
        for case in manifest:
            image = RasterImage.load(assets / case.image_ref)
            mask = BinaryMask.load(assets / case.mask_ref)
            (overlays / f"{case.id}.png").write_bytes(render_overlay(image, mask, style))
    except (SegqcError, OSError, ValueError) as exc:
        raise _fail(str(exc))
    click.echo(f"rendered {len(manifest)} overlays under {overlays}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--provider", "provider_kind", type=click.Choice(["mock", "live"]), default=None)
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--model", "model_id", default=None)
@click.option("--endpoint", "endpoint_url", default=None)
@click.option("--samples", default=None, type=int, help="Judgments per case (>=2 enables ensembling).")
@click.pass_context
def judge(ctx, manifest_path, provider_kind, cache_dir, model_id, endpoint_url, samples):
    """Run the judge over every case, with transcript caching."""
    cfg = _resolve_config(
        ctx,
        **{
            "provider.kind": provider_kind,
            "provider.model_id": model_id,
            "provider.endpoint_url": endpoint_url,
            "paths.manifest": manifest_path,
            "paths.cache_dir": cache_dir,
            "ensemble_k": samples if samples and samples >= 2 else None,
        },
    )
    try:
        manifest = load_manifest(cfg.paths.manifest)
        assets = Path(cfg.paths.manifest).parent
        if cfg.provider_kind == "mock":
            provider: MockProvider | object = MockProvider(model_id=cfg.provider.model_id)
        else:
            if not cfg.provider.endpoint_url:
                raise ConfigError("provider.endpoint_url", "required for --provider live")
            if not cfg.provider.model_id:
                raise ConfigError("provider.model_id", "required for --provider live")
            provider = cfg.provider
        n_samples = samples or cfg.ensemble_k or 1
        transcripts = run_batch(
            list(manifest),
            provider,
            cfg.paths.cache_dir,
            assets,
            samples=n_samples,
            prompt_version=cfg.prompt_version,
        )
    except (SegqcError, OSError) as exc:
        raise _fail(str(exc))
    failures = sum(1 for t in transcripts if not hasattr(t.outcome, "clinical_synthesis"))
    click.echo(f"judged {len(transcripts)} transcript(s), {failures} failure(s)")


def _transcripts_by_case(cache_dir: str, model_id: str) -> dict[str, list[JudgeTranscript]]:
    store = TranscriptStore(cache_dir, model_id)
    grouped: dict[str, list[JudgeTranscript]] = {}
    for transcript in store.load().values():
        grouped.setdefault(transcript.case_id, []).append(transcript)
    for case_id in grouped:
        grouped[case_id].sort(key=lambda t: (t.prompt_hash, t.sample))
    return grouped


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--model", "model_id", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--positive-class", type=click.Choice(["accept", "reject"]), default=None)
@click.pass_context
def evaluate(ctx, manifest_path, cache_dir, model_id, out_dir, positive_class):
    """Guardrail decisions for every judged case plus a metrics report."""
    cfg = _resolve_config(
        ctx,
        **{
            "paths.manifest": manifest_path,
            "paths.cache_dir": cache_dir,
            "paths.out_dir": out_dir,
            "provider.model_id": model_id,
            "positive_class": positive_class,
        },
    )
    try:
        manifest = load_manifest(cfg.paths.manifest)
        grouped = _transcripts_by_case(cfg.paths.cache_dir, cfg.provider.model_id)
        decisions = []
        gt = []
        for case in manifest:
            transcripts = grouped.get(case.id)
            if not transcripts:
                continue
            decision = decide_case([t.outcome for t in transcripts])
            decisions.append((case.id, decision))
            if case.gt_label is not None:
                gt.append((case.id, case.gt_label))
        if not decisions:
            raise _fail("no judged cases found; run `segqc judge` first")

        out = Path(cfg.paths.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [decision_line(cid, cfg.provider.model_id, d) for cid, d in decisions]
        (out / "decisions.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")

        if gt:
            labeled_ids = {cid for cid, _ in gt}
            scored = [(cid, d) for cid, d in decisions if cid in labeled_ids]
            if len(scored) < len(decisions):
                click.echo(
                    f"note: {len(decisions) - len(scored)} judged case(s) lack ground truth "
                    "and are excluded from metrics",
                    err=True,
                )
            report = per_group_breakdown(scored, gt, manifest, cfg.positive_class)
            doc, table = render_report(report)
            (out / "report.json").write_text(
                json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            (out / "report.txt").write_text(table, encoding="utf-8")
            click.echo(table)
        else:
            click.echo("skipped metrics: no judged case has ground truth", err=True)
    except (SegqcError, OSError) as exc:
        raise _fail(str(exc))

    tripped = sum(1 for _, d in decisions if d.fail_closed)
    if tripped:
        click.echo(f"guardrail tripped: {tripped} fail-closed decision(s)", err=True)
        sys.exit(EXIT_GUARDRAIL)
    click.echo(f"evaluated {len(decisions)} decision(s)")


@main.command()
@click.option("--rows", "rows_path", type=click.Path(), default=None,
              help="Rows file (JSONL: name, accuracy, precision, recall, f1, n). Defaults to the bundled table.")
@click.option("--tolerance", default=audit_mod.DEFAULT_TOLERANCE, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write results as JSON.")
def audit(rows_path, tolerance, out_path):
    """Check reported metric rows for confusion-matrix consistency."""
    try:
        path = Path(rows_path) if rows_path else audit_mod.bundled_rows_path()
        rows = audit_mod.load_reported_rows(path)
        results = audit_mod.audit_rows(rows, tolerance=tolerance)
    except (SegqcError, OSError) as exc:
        raise _fail(str(exc))
    for result in results:
        click.echo(result.summary_line())
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(
            json.dumps([r.to_dict() for r in results], indent=2) + "\n", encoding="utf-8"
        )


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--cache-dir", default=None, type=click.Path())
@click.option("--model", "model_id", default=None)
@click.option("--labels", "labels_path", default=None, type=click.Path(),
              help="Label log path (default <out_dir>/labels.jsonl).")
@click.option("--host", default="127.0.0.1", show_default=True,
              help="Bind address; set 0.0.0.0 to open to the LAN.")
@click.option("--port", default=8400, show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(), help="Static review-UI bundle to serve at /.")
@click.pass_context
def serve(ctx, manifest_path, cache_dir, model_id, labels_path, host, port, ui_dir):
    """Run the review service."""
    import uvicorn

    from .service import build_state, create_app

    cfg = _resolve_config(
        ctx,
        **{
            "paths.manifest": manifest_path,
            "paths.cache_dir": cache_dir,
            "provider.model_id": model_id,
        },
    )
    try:
        manifest = load_manifest(cfg.paths.manifest)
        grouped = _transcripts_by_case(cfg.paths.cache_dir, cfg.provider.model_id)
        transcripts = [t for ts in grouped.values() for t in ts]
        label_log = Path(labels_path) if labels_path else Path(cfg.paths.out_dir) / "labels.jsonl"
        state = build_state(
            manifest, Path(cfg.paths.manifest).parent, label_log, transcripts
        )
        app = create_app(state, ui_dir=ui_dir)
    except (SegqcError, OSError) as exc:
        raise _fail(str(exc))
    click.echo(f"serving {len(manifest)} cases on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
