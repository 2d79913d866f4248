"""End-to-end batch pipeline: configuration, stages, and on-disk artifacts.

Every stage writes plot-ready CSVs plus small JSON reports into the output
directory; ``run_pipeline`` chains all stages and writes a manifest. Outputs
contain no timestamps or absolute paths, so reruns with identical inputs and
configuration are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from rtscope import community as community_mod
from rtscope import graph as graph_mod
from rtscope import metrics as metrics_mod
from rtscope import stats as stats_mod
from rtscope.errors import ConfigError, DomainError, InputError, ToolkitError
from rtscope.ingest.botscores import BotScoreClient, BotScoreTable, load_bot_scores
from rtscope.ingest.catalog import load_source_catalog
from rtscope.ingest.records import ParseReport, TweetRecord, parse_tweet_stream
from rtscope.metrics import UserProfile

log = logging.getLogger(__name__)

CACHE_DIR_ENV = "RTSCOPE_SERVICE_CACHE"


@dataclass
class RunConfig:
    tweets: Path | None = None
    unreliable_sources: Path | None = None
    reliable_sources: Path | None = None
    bot_scores: Path | None = None
    service_endpoint: str | None = None
    service_token_env: str = "RTSCOPE_SERVICE_TOKEN"
    service_rpm: float = 30.0
    service_cache_dir: Path | None = None
    louvain_seed: int = 0
    null_seed: int = 0
    n_reshuffles: int = 100
    top_k: int = 5
    min_shares: int = 100
    entropy_low: float = 0.4
    entropy_high: float = 0.9
    success_quantile: float = 0.75
    op_bs_cutoff: float = 0.75
    curve_points: int = 100
    out_dir: Path = Path("rtscope-out")

    def validate(self) -> None:
        problems: list[str] = []
        if not 0.0 <= self.entropy_low < self.entropy_high:
            problems.append(
                f"entropy thresholds must satisfy 0 <= low < high, got "
                f"({self.entropy_low}, {self.entropy_high})"
            )
        if not 0.0 < self.success_quantile < 1.0:
            problems.append(f"success_quantile {self.success_quantile} outside (0, 1)")
        if not 0.0 <= self.op_bs_cutoff <= 1.0:
            problems.append(f"op_bs_cutoff {self.op_bs_cutoff} outside [0, 1]")
        if self.service_rpm <= 0:
            problems.append(f"service_rpm {self.service_rpm} must be positive")
        if self.n_reshuffles < 1:
            problems.append("n_reshuffles must be at least 1")
        if self.top_k < 1:
            problems.append("top_k must be at least 1")
        if self.min_shares < 0:
            problems.append("min_shares must be non-negative")
        if self.curve_points < 2:
            problems.append("curve_points must be at least 2")
        if problems:
            raise ConfigError("; ".join(problems))

    def echo(self) -> dict[str, Any]:
        """Config as JSON-able dict; out_dir is excluded so reruns stay comparable."""
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name == "out_dir":
                continue
            value = getattr(self, f.name)
            out[f.name] = str(value) if isinstance(value, Path) else value
        return out


_PATH_KEYS = {
    "tweets",
    "unreliable_sources",
    "reliable_sources",
    "bot_scores",
    "service_cache_dir",
    "out_dir",
}
_INT_KEYS = {"louvain_seed", "null_seed", "n_reshuffles", "top_k", "min_shares", "curve_points"}
_FLOAT_KEYS = {
    "service_rpm",
    "entropy_low",
    "entropy_high",
    "success_quantile",
    "op_bs_cutoff",
}
_STR_KEYS = {"service_endpoint", "service_token_env"}
CONFIG_KEYS = _PATH_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def _coerce(key: str, value: str) -> Any:
    try:
        if key in _PATH_KEYS:
            return Path(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}: {exc}") from exc


def load_config_file(path: Path | str) -> dict[str, Any]:
    """Parse a flat ``key = value`` file (# comments, blank lines allowed)."""
    values: dict[str, Any] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def config_from_sources(
    file_values: Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Build a RunConfig: defaults, then config-file values, then CLI overrides."""
    merged: dict[str, Any] = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = _coerce(key, value) if isinstance(value, str) else value
    config = RunConfig(**merged)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# helpers


def _stage_error(stage: str, exc: ToolkitError) -> ToolkitError:
    wrapped = type(exc)(f"{stage}: {exc}")
    wrapped.exit_code = exc.exit_code
    return wrapped


def _require(config: RunConfig, key: str) -> Path:
    value = getattr(config, key)
    if value is None:
        raise ConfigError(f"config key {key!r} is required for this stage")
    path = Path(value)
    if not path.exists():
        raise InputError(f"{key} file {path} does not exist")
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(obj: Any, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# stage primitives (in-memory cores shared by standalone stages and `all`)


def _load_records(config: RunConfig) -> tuple[list[TweetRecord], ParseReport]:
    tweets_path = _require(config, "tweets")
    report = ParseReport()
    try:
        with open(tweets_path, "rb") as fh:
            records = list(parse_tweet_stream(fh, report))
    except OSError as exc:
        raise InputError(f"cannot read tweet file {tweets_path}: {exc}") from exc
    return records, report


def _load_bot_table(config: RunConfig, author_ids: list[str]) -> tuple[BotScoreTable | None, int]:
    """Bot scores from the file table and/or the scoring service; None if neither."""
    table: BotScoreTable | None = None
    unavailable = 0
    if config.bot_scores is not None:
        table = load_bot_scores(_require(config, "bot_scores"))
    if config.service_endpoint:
        if table is None:
            table = BotScoreTable()
        cache_dir = config.service_cache_dir or os.environ.get(CACHE_DIR_ENV)
        client = BotScoreClient(
            endpoint=config.service_endpoint,
            token=os.environ.get(config.service_token_env),
            cache_dir=cache_dir,
            requests_per_minute=config.service_rpm,
        )
        unavailable = client.fetch_into(table, author_ids)
    return table, unavailable


def _build_graph(records: list[TweetRecord]) -> graph_mod.RetweetGraph:
    graph = graph_mod.build_retweet_graph(records)
    if graph.n_edges == 0:
        raise DomainError("edgeless graph: no retweet records to build links from")
    return graph


def _load_graph_cache(config: RunConfig) -> graph_mod.RetweetGraph:
    out = _out(config)
    nodes_path = out / "nodes.csv"
    edges_path = out / "edges.csv"
    if not nodes_path.exists() or not edges_path.exists():
        raise InputError("graph cache not found; run the 'graph' stage first")
    return graph_mod.load_graph(nodes_path, edges_path)


def _load_partition_cache(
    config: RunConfig, nodes: graph_mod.NodeTable
) -> community_mod.Partition:
    path = _out(config) / "partition.csv"
    if not path.exists():
        raise InputError("partition.csv not found; run the 'communities' stage first")
    return community_mod.load_partition(path, nodes)


USER_SCORE_COLUMNS = [
    "author_id",
    "catalog_tweets",
    "unreliable_tweets",
    "reliable_tweets",
    "unreliable_ratio",
    "untrustworthiness",
    "bot_score",
]


def _write_user_scores(
    path: Path,
    profiles: Mapping[int, UserProfile],
    nodes: graph_mod.NodeTable,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(USER_SCORE_COLUMNS)
        for idx in sorted(profiles):
            p = profiles[idx]
            writer.writerow(
                [
                    nodes.name(idx),
                    p.total,
                    p.unreliable,
                    p.reliable,
                    repr(p.ratio),
                    repr(p.untrustworthiness),
                    "" if p.bot_score is None else repr(p.bot_score),
                ]
            )


def _load_user_scores(
    config: RunConfig, nodes: graph_mod.NodeTable
) -> dict[int, UserProfile]:
    path = _out(config) / "user_scores.csv"
    if not path.exists():
        raise InputError("user_scores.csv not found; run the 'scores' stage first")
    profiles: dict[int, UserProfile] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != USER_SCORE_COLUMNS:
            raise InputError(f"{path}: unexpected header {header}")
        for row in reader:
            idx = nodes.get(row[0])
            if idx is None:
                raise InputError(f"{path}: author {row[0]!r} not in the node table")
            profiles[idx] = UserProfile(
                user=idx,
                total=int(row[1]),
                unreliable=int(row[2]),
                reliable=int(row[3]),
                ratio=float(row[4]),
                untrustworthiness=float(row[5]),
                bot_score=float(row[6]) if row[6] else None,
            )
    return profiles


def _compute_profiles(
    config: RunConfig, records: list[TweetRecord], nodes: graph_mod.NodeTable
) -> tuple[dict[int, UserProfile], BotScoreTable | None, dict[str, Any]]:
    catalog = load_source_catalog(
        _require(config, "unreliable_sources"), _require(config, "reliable_sources")
    )
    tallies = metrics_mod.user_tallies(records, catalog)
    bot_table, unavailable = _load_bot_table(config, list(nodes.names))
    profiles = metrics_mod.build_profiles(tallies, nodes, bot_table)
    counts = {
        "scored_users": len(profiles),
        "catalog_unreliable_domains": len(catalog.unreliable),
        "catalog_reliable_domains": len(catalog.reliable),
        "bot_scores_available": sum(1 for p in profiles.values() if p.bot_score is not None),
        "bot_scores_unavailable": unavailable,
        "max_catalog_tweets": max((p.total for p in profiles.values()), default=0),
    }
    return profiles, bot_table, counts


def _compute_url_table(
    config: RunConfig,
    records: list[TweetRecord],
    partition: community_mod.Partition,
    nodes: graph_mod.NodeTable,
    profiles: Mapping[int, UserProfile],
    bot_table: BotScoreTable | None = None,
) -> tuple[list[metrics_mod.UrlDiffusionRecord], list[metrics_mod.UrlDiffusionRecord], dict]:
    if bot_table is None and (config.bot_scores is not None or config.service_endpoint):
        bot_table, _ = _load_bot_table(config, list(nodes.names))
    table = metrics_mod.build_url_table(
        records,
        partition,
        nodes,
        profiles,
        bot_table,
        entropy_low=config.entropy_low,
        entropy_high=config.entropy_high,
    )
    filtered = metrics_mod.filter_urls(table, config.min_shares)
    threshold = None
    if len(filtered) >= 4:
        threshold = stats_mod.success_threshold(
            [r.retweets for r in filtered], config.success_quantile
        )
        metrics_mod.mark_successful(filtered, threshold)
    else:
        log.warning(
            "only %d URL(s) above the share threshold; success marking skipped",
            len(filtered),
        )
    counts = {
        "urls_total": len(table),
        "urls_filtered": len(filtered),
        "success_threshold": threshold,
        "urls_successful": sum(1 for r in filtered if r.successful),
    }
    return table, filtered, counts


# ---------------------------------------------------------------------------
# standalone stages


def stage_ingest(config: RunConfig) -> dict:
    try:
        records, report = _load_records(config)
    except ToolkitError as exc:
        raise _stage_error("ingest", exc) from exc
    out = _out(config)
    counts = report.as_dict()
    counts["retweet_records"] = sum(1 for r in records if r.is_retweet)
    counts["original_records"] = report.parsed - counts["retweet_records"]
    _write_json(counts, out / "parse_report.json")
    return counts


def stage_graph(config: RunConfig) -> dict:
    try:
        records, _ = _load_records(config)
        graph = _build_graph(records)
    except ToolkitError as exc:
        raise _stage_error("graph", exc) from exc
    out = _out(config)
    graph_mod.save_graph(graph, out / "nodes.csv", out / "edges.csv")
    summary = graph_mod.degree_stats(graph).summary()
    counts = {
        "nodes": graph.n_nodes,
        "edges": graph.n_edges,
        "total_weight": graph.total_weight,
        "self_retweets_skipped": graph.self_retweets_skipped,
        "degree_summary": summary,
    }
    _write_json(counts, out / "graph_report.json")
    return counts


def stage_communities(config: RunConfig) -> dict:
    try:
        graph = _load_graph_cache(config)
        counts = _communities_core(config, graph)
    except ToolkitError as exc:
        raise _stage_error("communities", exc) from exc
    return counts


def _communities_core(config: RunConfig, graph: graph_mod.RetweetGraph) -> dict:
    undirected = graph_mod.to_undirected(graph)
    partition = community_mod.louvain(undirected, config.louvain_seed)
    out = _out(config)
    community_mod.save_partition(partition, graph.nodes, out / "partition.csv")
    names = community_mod.community_names(partition, config.top_k)
    sizes = partition.sizes()
    with open(out / "communities.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["community_label", "name", "size", "internal_link_density"])
        for label in community_mod.top_community_labels(partition):
            members = partition.members(label)
            density = (
                graph_mod.internal_link_density(graph, members) if members.size >= 2 else ""
            )
            writer.writerow(
                [label, names[label], int(sizes[label]), repr(density) if density != "" else ""]
            )
    counts = {
        "n_communities": partition.n_communities,
        "modularity": partition.modularity,
        "louvain_seed": config.louvain_seed,
        "top_sizes": [int(sizes[label]) for label in
                      community_mod.top_community_labels(partition, config.top_k)],
    }
    _write_json(counts, out / "communities_report.json")
    return counts


def stage_scores(config: RunConfig) -> dict:
    try:
        records, _ = _load_records(config)
        graph = _load_graph_cache(config)
        profiles, _, counts = _compute_profiles(config, records, graph.nodes)
    except ToolkitError as exc:
        raise _stage_error("scores", exc) from exc
    _write_user_scores(_out(config) / "user_scores.csv", profiles, graph.nodes)
    _write_json(counts, _out(config) / "scores_report.json")
    return counts


def stage_urls(config: RunConfig) -> dict:
    try:
        records, _ = _load_records(config)
        graph = _load_graph_cache(config)
        partition = _load_partition_cache(config, graph.nodes)
        profiles = _load_user_scores(config, graph.nodes)
        _, filtered, counts = _compute_url_table(config, records, partition, graph.nodes, profiles)
    except ToolkitError as exc:
        raise _stage_error("urls", exc) from exc
    _write_url_outputs(config, filtered)
    _write_json(counts, _out(config) / "urls_report.json")
    return counts


def _write_url_outputs(config: RunConfig, filtered: list[metrics_mod.UrlDiffusionRecord]) -> None:
    out = _out(config)
    metrics_mod.write_url_report(filtered, out / "url_report.csv")
    high_bs = [
        r
        for r in filtered
        if r.avg_bs_ops is not None and r.avg_bs_ops > config.op_bs_cutoff
    ]
    metrics_mod.write_url_report(high_bs, out / "url_report_high_bs_ops.csv")


def stage_nulltest(config: RunConfig) -> dict:
    try:
        graph = _load_graph_cache(config)
        partition = _load_partition_cache(config, graph.nodes)
        profiles = _load_user_scores(config, graph.nodes)
        counts = _nulltest_core(config, partition, profiles)
    except ToolkitError as exc:
        raise _stage_error("nulltest", exc) from exc
    return counts


def _nulltest_core(
    config: RunConfig,
    partition: community_mod.Partition,
    profiles: Mapping[int, UserProfile],
) -> dict:
    out = _out(config)
    u_values = {idx: p.untrustworthiness for idx, p in profiles.items()}
    report_u = stats_mod.null_model_report(
        u_values,
        partition,
        n_reshuffles=config.n_reshuffles,
        seed=config.null_seed,
        top_k=config.top_k,
    )
    stats_mod.write_nulltest_csv(report_u, out / "nulltest_u.csv")
    counts = {
        "feature_u": [
            {
                "community": c.name,
                "p_value": None if c.result is None else c.result.p_value,
                "skipped": c.skipped,
            }
            for c in report_u
        ]
    }
    bs_values = {
        idx: p.bot_score for idx, p in profiles.items() if p.bot_score is not None
    }
    if len(bs_values) >= 2:
        report_bs = stats_mod.null_model_report(
            bs_values,
            partition,
            n_reshuffles=config.n_reshuffles,
            seed=config.null_seed,
            top_k=config.top_k,
        )
        stats_mod.write_nulltest_csv(report_bs, out / "nulltest_bs.csv")
        counts["feature_bs"] = [
            {
                "community": c.name,
                "p_value": None if c.result is None else c.result.p_value,
                "skipped": c.skipped,
            }
            for c in report_bs
        ]
    _write_json(counts, out / "nulltest_report.json")
    return counts


def stage_curves(config: RunConfig) -> dict:
    try:
        records, _ = _load_records(config)
        graph = _load_graph_cache(config)
        partition = _load_partition_cache(config, graph.nodes)
        profiles = _load_user_scores(config, graph.nodes)
        _, filtered, url_counts = _compute_url_table(
            config, records, partition, graph.nodes, profiles
        )
        counts = _curves_core(config, filtered, url_counts)
    except ToolkitError as exc:
        raise _stage_error("curves", exc) from exc
    return counts


def _curves_core(
    config: RunConfig,
    filtered: list[metrics_mod.UrlDiffusionRecord],
    url_counts: Mapping[str, Any],
) -> dict:
    out = _out(config)
    threshold = url_counts.get("success_threshold")
    if threshold is None:
        raise DomainError(
            "success threshold unavailable (fewer than 4 URLs above the share threshold)"
        )
    curve_sets = []
    for feature in ("bs", "u"):
        curve_sets.append(
            stats_mod.success_curves(
                filtered,
                feature,
                t=threshold,
                class_thresholds=(config.entropy_low, config.entropy_high),
                n_points=config.curve_points,
            )
        )
    stats_mod.write_curves_csv(curve_sets, out / "curves.csv", zero_fill=False)
    stats_mod.write_curves_csv(curve_sets, out / "curves_zero_filled.csv", zero_fill=True)
    with open(out / "curve_feature_hist.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "entropy_class", "bin_left", "bin_right", "count"])
        for curves in curve_sets:
            for cls in metrics_mod.EntropyClass:
                curve = curves[cls]
                if not curve.feature_values:
                    continue
                hist, edges = np.histogram(curve.feature_values, bins=20, range=(0.0, 1.0))
                for i, count in enumerate(hist.tolist()):
                    writer.writerow(
                        [curve.feature, cls.value, repr(float(edges[i])),
                         repr(float(edges[i + 1])), count]
                    )
    counts = {
        "success_threshold": threshold,
        "curve_points": config.curve_points,
        "features": ["bs", "u"],
    }
    _write_json(counts, out / "curves_report.json")
    return counts


def stage_synth(spec_path: Path, seed: int, out_dir: Path) -> dict:
    from rtscope.synth import SyntheticSpec, generate_synthetic

    try:
        text = Path(spec_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read synthetic spec {spec_path}: {exc}") from exc
    try:
        spec = SyntheticSpec.from_json(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid synthetic spec {spec_path}: {exc}") from exc
    paths = generate_synthetic(spec, seed, out_dir)
    return {name: str(path) for name, path in paths.items()}


# ---------------------------------------------------------------------------
# full pipeline


def run_pipeline(config: RunConfig) -> dict:
    """Run every stage in memory and write the manifest; deterministic end to end."""
    config.validate()
    out = _out(config)
    manifest: dict[str, Any] = {"config": config.echo(), "stages": {}}

    inputs = {}
    for key in ("tweets", "unreliable_sources", "reliable_sources", "bot_scores"):
        value = getattr(config, key)
        if value is not None:
            path = Path(value)
            if path.exists():
                inputs[key] = {"name": path.name, "sha256": _sha256(path)}
    manifest["inputs"] = inputs

    try:
        records, report = _load_records(config)
        ingest_counts = report.as_dict()
        ingest_counts["retweet_records"] = sum(1 for r in records if r.is_retweet)
        ingest_counts["original_records"] = report.parsed - ingest_counts["retweet_records"]
        _write_json(ingest_counts, out / "parse_report.json")
        manifest["stages"]["ingest"] = ingest_counts
    except ToolkitError as exc:
        raise _stage_error("ingest", exc) from exc

    try:
        graph = _build_graph(records)
        graph_mod.save_graph(graph, out / "nodes.csv", out / "edges.csv")
        graph_counts = {
            "nodes": graph.n_nodes,
            "edges": graph.n_edges,
            "total_weight": graph.total_weight,
            "self_retweets_skipped": graph.self_retweets_skipped,
            "degree_summary": graph_mod.degree_stats(graph).summary(),
        }
        _write_json(graph_counts, out / "graph_report.json")
        manifest["stages"]["graph"] = graph_counts
    except ToolkitError as exc:
        raise _stage_error("graph", exc) from exc

    try:
        manifest["stages"]["communities"] = _communities_core(config, graph)
        partition = _load_partition_cache(config, graph.nodes)
    except ToolkitError as exc:
        raise _stage_error("communities", exc) from exc

    try:
        profiles, bot_table, score_counts = _compute_profiles(config, records, graph.nodes)
        _write_user_scores(out / "user_scores.csv", profiles, graph.nodes)
        _write_json(score_counts, out / "scores_report.json")
        manifest["stages"]["scores"] = score_counts
    except ToolkitError as exc:
        raise _stage_error("scores", exc) from exc

    try:
        _, filtered, url_counts = _compute_url_table(
            config, records, partition, graph.nodes, profiles, bot_table
        )
        _write_url_outputs(config, filtered)
        _write_json(url_counts, out / "urls_report.json")
        manifest["stages"]["urls"] = url_counts
    except ToolkitError as exc:
        raise _stage_error("urls", exc) from exc

    try:
        manifest["stages"]["nulltest"] = _nulltest_core(config, partition, profiles)
    except ToolkitError as exc:
        raise _stage_error("nulltest", exc) from exc

    try:
        manifest["stages"]["curves"] = _curves_core(config, filtered, url_counts)
    except ToolkitError as exc:
        raise _stage_error("curves", exc) from exc

    # Reconciliation: accepted records = retweet edges' weight + originals + skips.
    reconciled = (
        graph.total_weight
        + graph.self_retweets_skipped
        + manifest["stages"]["ingest"]["original_records"]
    )
    manifest["reconciliation"] = {
        "parsed_records": report.parsed,
        "edge_weight_plus_originals_plus_skips": reconciled,
        "consistent": reconciled == report.parsed,
    }
    _write_json(manifest, out / "manifest.json")
    return manifest
