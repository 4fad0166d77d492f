"""Command-line interface: forging, training, scoring, retrieval, serving."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import assess, corpus, evalharness, forge, training
from .encoder import EncoderConfig, init_params, load_checkpoint, save_checkpoint
from .raster import load_png


@click.group()
def main():
    """UI design-quality pipeline."""


@main.command("gen-corpus")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--pages", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--device", default="mobile", show_default=True)
def gen_corpus(out_dir, pages, seed, device):
    """Generate a deterministic corpus of styled HTML fixtures."""
    entries = corpus.generate_corpus(out_dir, pages, seed, device)
    click.echo(f"wrote {len(entries)} pages to {out_dir}")


@main.group()
def forge_cmd():
    """Dataset forging steps."""


main.add_command(forge_cmd, name="forge")


@forge_cmd.command("synth")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--variants", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--renderer", default=None, help="external renderer command")
def forge_synth(corpus_dir, variants, seed, out_dir, renderer):
    """Forge originals plus jittered variants and preference pairs."""
    samples, pairs = forge.synthesize_corpus(corpus_dir, variants, seed, out_dir, renderer)
    click.echo(f"forged {len(samples)} samples and {len(pairs)} pairs into {out_dir}")


@forge_cmd.command("cluster")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--eps", default=0.1, show_default=True)
@click.option("--min-samples", default=5, show_default=True)
def forge_cluster(dataset_dir, eps, min_samples):
    """Cluster captions; rewrites sample keys to cluster keys."""
    dataset_dir = Path(dataset_dir)
    samples = forge.read_samples(dataset_dir / "samples.jsonl")
    assignment = forge.cluster_by_caption(samples, eps, min_samples)
    from dataclasses import replace

    new_samples = []
    for s in samples:
        cid = assignment[s.id]
        # noise keys group by origin family so preference pairs stay co-located
        key = f"c{cid}" if cid >= 0 else f"noise-{s.origin_id}"
        new_samples.append(replace(s, key=key))
    forge.write_samples(new_samples, dataset_dir / "samples.jsonl")
    clusters = len({c for c in assignment.values() if c >= 0})
    noise = sum(1 for c in assignment.values() if c < 0)
    click.echo(f"{clusters} clusters, {noise} noise samples")


@forge_cmd.command("split")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True)
@click.option("--key", "key_kind", type=click.Choice(["url", "cluster"]), default="url", show_default=True)
@click.option("--seed", default=0, show_default=True)
def forge_split(dataset_dir, ratios, key_kind, seed):
    """Assign train/val/test splits by grouping key."""
    dataset_dir = Path(dataset_dir)
    ratio_values = tuple(float(r) for r in ratios.split(","))
    samples = forge.read_samples(dataset_dir / "samples.jsonl")
    pairs_path = dataset_dir / "pairs.jsonl"
    pairs = forge.read_pairs(pairs_path) if pairs_path.exists() else []
    samples, pairs = forge.assign_splits(samples, pairs, ratio_values, seed)
    forge.write_samples(samples, dataset_dir / "samples.jsonl")
    if pairs:
        forge.write_pairs(pairs, pairs_path)
    counts = {split: sum(1 for s in samples if s.split == split) for split in forge.SPLITS}
    click.echo(f"split by {key_kind}: {counts}")


def _load_dataset(dataset_dir):
    dataset_dir = Path(dataset_dir)
    samples = forge.read_samples(dataset_dir / "samples.jsonl")
    pairs_path = dataset_dir / "pairs.jsonl"
    pairs = forge.read_pairs(pairs_path) if pairs_path.exists() else []
    return dataset_dir, samples, pairs


@main.command("train")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--stage", default=1, show_default=True, type=click.IntRange(1, 4))
@click.option("--preset", type=click.Choice(["desk", "paper"]), default="desk", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--init", "init_path", default=None, type=click.Path(exists=True), help="starting checkpoint")
@click.option("--split", default="train", show_default=True)
def train_cmd(dataset_dir, stage, preset, seed, out_path, init_path, split):
    """Run one training stage and write a checkpoint."""
    dataset_dir, samples, pairs = _load_dataset(dataset_dir)
    params = load_checkpoint(init_path) if init_path else init_params(EncoderConfig(), seed)
    objective = training.STAGE_OBJECTIVES[stage]
    preset_name = preset if preset == "desk" else ("paper-stage1" if stage == 1 else "paper-stage2+")
    config = training.preset_config(preset_name, objective, seed)
    use = [s for s in samples if s.split in (split, "unassigned")] if split else samples
    cfg = params.config
    if objective == "batch_contrastive":
        view = training.ContrastiveView(use, dataset_dir, cfg.vocab_size, cfg.max_tokens, cfg.image_size)
    else:
        by_id = {s.id: s for s in samples}
        use_pairs = [p for p in pairs if p.split in (split, "unassigned")] if split else pairs
        view = training.PairwiseView(use_pairs, by_id, dataset_dir, cfg.vocab_size, cfg.max_tokens, cfg.image_size)
    params, trace = training.train_stage(params, view, config)
    save_checkpoint(params, out_path)
    click.echo(f"stage {stage} ({objective}): {len(trace)} steps, "
               f"loss {trace[0]:.4f} -> {trace[-1]:.4f}; wrote {out_path}")


@main.command("score")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--caption", required=True)
def score_cmd(model_path, image_path, caption):
    """Design-quality score of a screenshot against a caption."""
    params = load_checkpoint(model_path)
    score = assess.quality_score(params, load_png(image_path), caption)
    click.echo(f"{score:.6f}")


@main.command("suggest")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--caption", required=True)
@click.option("--crap-only", is_flag=True, default=False, help="project onto the four design principles")
def suggest_cmd(model_path, image_path, caption, crap_only):
    """Surface likely design defects above the dynamic threshold."""
    params = load_checkpoint(model_path)
    tags = assess.suggest_defects(params, load_png(image_path), caption, crap_only=crap_only)
    if not tags:
        click.echo("no defects above threshold")
    for tag, value in tags:
        click.echo(f"{tag}\t{value:.6f}")


@main.command("index")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--split", default=None)
def index_cmd(model_path, dataset_dir, out_path, split):
    """Embed dataset screenshots into a search index."""
    params = load_checkpoint(model_path)
    dataset_dir, samples, _ = _load_dataset(dataset_dir)
    if split:
        samples = [s for s in samples if s.split == split]
    entries = [(s.id, s.image) for s in samples]
    index = assess.build_index(params, entries, dataset_dir)
    assess.save_index(index, out_path)
    click.echo(f"indexed {len(index.ids)} screenshots into {out_path}")


@main.command("search")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--query", required=True)
@click.option("--negative", default=None)
@click.option("--lambda", "lam", default=0.5, show_default=True)
@click.option("--k", default=10, show_default=True)
def search_cmd(model_path, index_path, query, negative, lam, k):
    """Quality-aware retrieval with an optional negative prompt."""
    params = load_checkpoint(model_path)
    index = assess.load_index(index_path)
    for sample_id, value in assess.search(params, index, query, k=k, negative=negative, lam=lam):
        click.echo(f"{sample_id}\t{value:.6f}")


@main.command("rank")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--caption", required=True)
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True))
def rank_cmd(model_path, caption, images):
    """Best-of-n: rank candidate screenshots by score, descending."""
    params = load_checkpoint(model_path)
    bitmaps = [load_png(p) for p in images]
    order = assess.rank_candidates(params, bitmaps, caption)
    for position, idx in enumerate(order, start=1):
        click.echo(f"{position}\t{images[idx]}")


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", default=None, type=click.Path(exists=True))
@click.option("--tasks", default="choice,suggest,mrr", show_default=True)
@click.option("--split", default="test", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--model-name", default="uiq", show_default=True)
@click.option("--dataset-name", default="dataset", show_default=True)
def eval_cmd(model_path, dataset_dir, pairs_path, tasks, split, out_path, model_name, dataset_name):
    """Evaluate design choice, suggestions, and retrieval; emit a report."""
    params = load_checkpoint(model_path)
    dataset_dir, samples, pairs = _load_dataset(dataset_dir)
    if pairs_path:
        pairs = forge.read_pairs(pairs_path)
    by_id = {s.id: s for s in samples}
    if split:
        samples_eval = [s for s in samples if s.split == split]
        pairs_eval = [p for p in pairs if p.split == split]
    else:
        samples_eval, pairs_eval = samples, pairs
    task_set = {t.strip() for t in tasks.split(",") if t.strip()}
    report = evalharness.EvalReport(config={
        "model": str(model_path), "dataset": str(dataset_dir), "split": split, "tasks": sorted(task_set),
    })

    choice_result = None
    bitmaps: dict[str, object] = {}

    def bitmap_of(sample_id):
        if sample_id not in bitmaps:
            bitmaps[sample_id] = load_png(dataset_dir / by_id[sample_id].image)
        return bitmaps[sample_id]

    if "choice" in task_set and pairs_eval:
        def chooser(pair):
            return assess.choose_better(params, bitmap_of(pair.a), bitmap_of(pair.b),
                                        pair.caption or by_id[pair.a].caption)

        choice_result = evalharness.design_choice_accuracy(
            pairs_eval, chooser, group_of=lambda p: by_id[p.a].source
        )
        report.design_choice = {
            "overall": choice_result.overall,
            "groups": choice_result.groups,
            "count": choice_result.count,
        }
    if "suggest" in task_set and pairs_eval:
        strict = [p for p in pairs_eval if p.preferred in ("A", "B")]
        gold = [set(p.principles) for p in strict]
        rated = [(p, g) for p, g in zip(strict, gold) if g]
        if rated:
            predicted = []
            for pair, _ in rated:
                loser = pair.b if pair.preferred == "A" else pair.a
                caption = pair.caption or by_id[loser].caption
                tags = assess.suggest_defects(params, bitmap_of(loser), caption, crap_only=True)
                predicted.append({t.removeprefix("bad ") for t, _ in tags})
            flags = None
            if choice_result is not None:
                flag_by_pair = {p.pair_id: ok for p, ok in zip(
                    [p for p in pairs_eval if p.preferred in ("A", "B")], choice_result.correct_flags)}
                flags = [flag_by_pair[p.pair_id] for p, _ in rated]
            scores = evalharness.suggestion_f1(predicted, [g for _, g in rated], flags)
            report.suggestion = {
                "macro_f1": scores.macro_f1,
                "choice_adjusted_macro_f1": scores.choice_adjusted_macro_f1,
                "macro_recall": scores.macro_recall,
                "choice_adjusted_macro_recall": scores.choice_adjusted_macro_recall,
                "per_principle": scores.per_principle,
                "count": scores.count,
            }
    if "mrr" in task_set:
        preferred = [s for s in samples_eval if s.origin_id == s.id]
        if len(preferred) >= 2:
            entries = [(s.id, forge.build_description("well-designed", [], s.caption)) for s in preferred]
            value = evalharness.retrieval_mrr(
                entries,
                image_embedding=lambda sid: assess.embed_screenshot(params, bitmap_of(sid)),
                text_embedding=lambda text: assess.embed_text_description(params, text),
            )
            report.mrr = {model_name: {dataset_name: value}}

    report.counts = {"samples": len(samples_eval), "pairs": len(pairs_eval)}
    written = evalharness.emit_report(report, out_path)
    click.echo(json.dumps(report.to_json(), indent=2))
    click.echo(f"wrote {', '.join(str(p) for p in written)}")


@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--index", "index_path", default=None, type=click.Path(exists=True))
@click.option("--data-dir", "data_dir", required=True, type=click.Path())
@click.option("--calibration", default=None, type=click.Path(exists=True))
def serve_cmd(port, host, model_path, index_path, data_dir, calibration):
    """Run the rating studio service."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir, model=model_path, index=index_path, calibration=calibration)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
