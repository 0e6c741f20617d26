"""
End-to-end pipeline orchestration.

Stages run in a fixed order and share one PipelineRun:

    ingest -> graph -> metrics -> cohort -> anova -> predict -> report

Each stage writes its artifacts as soon as they exist. Whatever happens,
manifest.json lists every written file with its SHA-256, the run status
and the stage that failed, if any.
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import pandas as pd
import structlog

from ..cohort.anova import anova_report
from ..cohort.groups import CohortTable, assign_cohorts
from ..core.config import RunConfig, config
from ..core.errors import CultureGraphError
from ..graph.snapshot import SnapshotGraph, build_snapshot
from ..ingest.expenditure import WardExpenditure, align_periods, apportion_expenditure
from ..ingest.readers import InputBundle, load_inputs
from ..ingest.spatial import VenueWardIndex, assign_venues_to_wards
from ..metrics.panel import WardMetricsPanel, build_metrics_panel, write_panel_csv
from ..predict.dataset import LabeledDataset, assemble_dataset
from ..predict.evaluation import ablation_by_class, run_subset_evaluation
from ..predict.learners import forest_importance, train_classifier
from .emit import (
    emit_borough_overview,
    emit_change_distribution,
    emit_graph_summaries,
    emit_group_means,
    emit_scatter_data,
    write_csv,
    write_json,
)

logger = structlog.get_logger(__name__)

STAGES = ("ingest", "graph", "metrics", "cohort", "anova", "predict", "report")
MANIFEST_NAME = "manifest.json"


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class PipelineRun:
    """Intermediate results and written artifacts of one run."""
    config: RunConfig
    inputs: Optional[InputBundle] = None
    index: Optional[VenueWardIndex] = None
    expenditure: Optional[WardExpenditure] = None
    graphs: Dict[int, SnapshotGraph] = field(default_factory=dict)
    panel: Optional[WardMetricsPanel] = None
    cohorts: Optional[CohortTable] = None
    anova: Optional[Dict] = None
    dataset: Optional[LabeledDataset] = None
    artifacts: List[Path] = field(default_factory=list)
    completed: List[str] = field(default_factory=list)

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output_dir)

    def record(self, path: Path) -> Path:
        self.artifacts.append(Path(path))
        return path

    def manifest(self, failed_stage: Optional[str] = None, error: Optional[str] = None) -> Dict:
        return {
            'spec_version': config.SPEC_VERSION,
            'status': "failed" if failed_stage else "ok",
            'failed_stage': failed_stage,
            'error': error,
            'stages_completed': list(self.completed),
            'artifacts': [
                {'name': path.relative_to(self.output_dir).as_posix(),
                 'sha256': sha256_of(path),
                 'bytes': path.stat().st_size}
                for path in self.artifacts
            ],
        }


def stage_ingest(run: PipelineRun) -> None:
    run.inputs = load_inputs(**run.config.input_paths())
    wards = run.inputs.wards.wards
    run.index = assign_venues_to_wards(run.inputs.venues.frame, wards)
    run.expenditure = apportion_expenditure(run.inputs.expenditure.frame, wards)
    logger.info("ingest_done", rejections=run.inputs.rejection_summary(),
                unassigned=run.index.unassigned_count)


def _period_map(run: PipelineRun):
    return align_periods(run.inputs.expenditure.fiscal_years, run.config.fiscal_offset)


def stage_graph(run: PipelineRun) -> None:
    for year in _period_map(run).calendar_years:
        run.graphs[year] = build_snapshot(run.inputs.transitions, year)
    if run.config.extended_reports:
        for path in emit_graph_summaries(run.graphs, run.output_dir):
            run.record(path)


def stage_metrics(run: PipelineRun) -> None:
    run.panel = build_metrics_panel(run.graphs, run.index, run.inputs.venues.frame, run.expenditure,
                                    run.inputs.wards.wards, _period_map(run))
    run.record(write_panel_csv(run.panel, run.output_dir / "panel.csv"))


def stage_cohort(run: PipelineRun) -> None:
    run.cohorts = assign_cohorts(run.panel, run.inputs.imd, run.config.deprivation_basis)
    run.record(write_csv(run.cohorts.to_frame(), run.output_dir / "cohorts.csv"))


def stage_anova(run: PipelineRun) -> None:
    run.anova = anova_report(run.panel, run.cohorts, run.config.anova_variables, run.config.alpha)
    run.anova['cohort_exclusions'] = run.cohorts.exclusions.to_dict()
    run.anova['cutoff'] = {'basis': run.cohorts.basis, 'percentile': run.cohorts.cutoff}
    run.record(write_json(run.anova, run.output_dir / "anova.json"))


def stage_predict(run: PipelineRun) -> None:
    cfg = run.config
    run.dataset = assemble_dataset(run.panel, run.inputs.imd, run.inputs.wards.wards, cfg.centre)
    report, skipped = run_subset_evaluation(run.dataset, cfg.classifier_kinds, cfg.subset_thresholds,
                                            cfg.folds, cfg.seed)
    run.record(write_json({
        'samples': len(run.dataset),
        'classes': run.dataset.class_counts(),
        'exclusions': run.dataset.exclusions.to_dict(),
        'folds': cfg.folds,
        'seed': cfg.seed,
        'rows': report.to_dict()['rows'],
        'skipped_thresholds': {str(t): reason for t, reason in skipped.items()},
    }, run.output_dir / "evaluation.json"))

    forest = train_classifier("random_forest", run.dataset.features("full"), run.dataset.labels(),
                              seed=cfg.seed)
    importance = forest_importance(forest)
    run.record(write_csv(
        pd.DataFrame({'feature': importance.index, 'importance': importance.to_numpy()}),
        run.output_dir / "importance.csv",
    ))

    ablation = ablation_by_class(run.dataset, cfg.classifier_kinds, cfg.folds, cfg.seed)
    run.record(write_csv(ablation.to_frame(), run.output_dir / "ablation.csv"))


def stage_report(run: PipelineRun) -> None:
    run.record(write_csv(emit_scatter_data(run.panel, run.inputs.imd), run.output_dir / "scatter.csv"))
    if not run.config.extended_reports:
        return
    run.record(write_csv(emit_group_means(run.panel, run.cohorts, run.config.anova_variables),
                         run.output_dir / "group_means.csv"))
    if run.anova is not None:
        run.record(write_csv(
            emit_group_means(run.panel, run.cohorts, run.config.anova_variables, anova=run.anova),
            run.output_dir / "group_means_significant.csv",
        ))
    run.record(write_csv(emit_borough_overview(run.panel, run.inputs.imd, run.inputs.wards.wards),
                         run.output_dir / "borough_overview.csv"))
    if run.dataset is not None:
        bins, summary = emit_change_distribution(run.dataset, run.config.subset_thresholds)
        run.record(write_csv(bins, run.output_dir / "change_distribution.csv"))
        run.record(write_json(summary, run.output_dir / "change_summary.json"))


STAGE_FUNCTIONS: Dict[str, Callable[[PipelineRun], None]] = {
    "ingest": stage_ingest,
    "graph": stage_graph,
    "metrics": stage_metrics,
    "cohort": stage_cohort,
    "anova": stage_anova,
    "predict": stage_predict,
    "report": stage_report,
}


def run_pipeline(run_config: RunConfig, until: Optional[str] = None) -> Tuple[int, Dict[str, Any]]:
    """
    Run the pipeline and write manifest.json.

    Args:
        run_config: Validated run configuration
        until: Last stage to run (defaults to all stages)

    Returns:
        (exit code, manifest). The exit code is 0 on success, otherwise the
        failing error's exit_code (3 for unexpected errors).
    """
    if until is not None and until not in STAGES:
        raise ValueError(f"unknown stage {until!r}; expected one of {STAGES}")
    stages = STAGES[: STAGES.index(until) + 1] if until else STAGES
    run = PipelineRun(run_config)
    run.output_dir.mkdir(parents=True, exist_ok=True)

    failed_stage, error, exit_code = None, None, 0
    for stage in stages:
        log = logger.bind(stage=stage)
        log.info("stage_started")
        try:
            STAGE_FUNCTIONS[stage](run)
        except CultureGraphError as e:
            failed_stage, error, exit_code = stage, str(e), e.exit_code
            log.error("stage_failed", error=str(e), exit_code=e.exit_code)
            break
        except Exception as e:
            failed_stage, error, exit_code = stage, f"{type(e).__name__}: {e}", 3
            log.exception("stage_crashed")
            break
        run.completed.append(stage)
        log.info("stage_finished")

    manifest = run.manifest(failed_stage, error)
    write_json(manifest, run.output_dir / MANIFEST_NAME)
    logger.info("pipeline_finished", status=manifest['status'], artifacts=len(manifest['artifacts']),
                exit_code=exit_code)
    return exit_code, manifest
