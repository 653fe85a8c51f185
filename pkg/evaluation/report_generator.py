"""Generate human-readable experiment reports."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


def _fmt(value: Optional[float], digits: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _save(content: str, output_file: Optional[str], label: str) -> None:
    if output_file:
        output_path = Path(output_file)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(content, encoding="utf-8")
        logger.info(f"{label} saved to {output_path}")


class ReportGenerator:
    """Render experiment reports (JSON dictionaries) as markdown."""

    @staticmethod
    def load_report(path: str) -> Dict[str, Any]:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def generate_experiment_report(report: Dict[str, Any], output_file: Optional[str] = None) -> str:
        """
        Generate a markdown report for one experiment.

        Args:
            report: Report dictionary written by ``run_experiment``
            output_file: Optional file path to save report

        Returns:
            Markdown report string
        """
        splits: List[str] = report.get("eval_splits", [])
        report_lines = []

        # Header
        report_lines.append(f"# Experiment Report: {report['name']}")
        report_lines.append(f"\n**Kind:** {report['kind']}  ")
        report_lines.append(f"**Seed:** {report['seed']}  ")
        corpus = report.get("corpus", {})
        sizes = ", ".join(f"{split} {count}" for split, count in corpus.get("utterances", {}).items())
        report_lines.append(f"**Corpus:** {corpus.get('source', 'unknown')} ({sizes}), "
                            f"vocabulary {corpus.get('vocab_size', '?')}")

        rows = report.get("rows", [])
        kind = report["kind"]
        wer_columns = " | ".join(f"WER {split}" for split in splits)
        separator = "|---" * (len(splits) + 2) + "|"

        report_lines.append("\n## Results\n")
        if kind == "main":
            report_lines.append(f"| Features | Preset | {wer_columns} | Status |")
            report_lines.append(separator + "---|")
            for row in rows:
                wers = " | ".join(_fmt(row.get("wer", {}).get(split)) for split in splits)
                report_lines.append(f"| {row['features']} | {row['preset']} | {wers} | {row['status']} |")
            best = report.get("summary", {}).get("best_downstream", {})
            if best:
                report_lines.append("\n## Best Downstream Model per Feature Source\n")
                for features, entry in sorted(best.items()):
                    report_lines.append(f"- **{features}:** {entry['preset']} "
                                        f"({entry['split']} WER {entry['wer']:.2f}%)")
        elif kind == "lm-ablation":
            acoustic = report.get("summary", {}).get("acoustic_model", {})
            report_lines.append(f"Acoustic model: {acoustic.get('preset', '?')} on {acoustic.get('features', '?')}"
                                + (f" (failed: {acoustic['error']})" if "error" in acoustic else "") + "\n")
            report_lines.append(f"| Language model | {wer_columns} | Dev perplexity | Status |")
            report_lines.append(separator + "---|")
            for row in rows:
                wers = " | ".join(_fmt(row.get("wer", {}).get(split)) for split in splits)
                report_lines.append(f"| {row['lm']} | {wers} | {_fmt(row.get('dev_perplexity'), 3)} | "
                                    f"{row['status']} |")
        else:
            summary = report.get("summary", {})
            report_lines.append(f"Training condition: {summary.get('train_condition', '?')}\n")
            first = splits[0] if splits else None
            report_lines.append(f"| Condition | {wer_columns} | Collapsed ({first}) | Max column mass | Status |")
            report_lines.append(separator + "---|---|---|")
            for row in rows:
                wers = " | ".join(_fmt(row.get("wer", {}).get(split)) for split in splits)
                attention = row.get("attention", {}).get(first, {})
                collapsed = (f"{attention['collapsed']}/{attention['utterances']}" if attention else "n/a")
                report_lines.append(f"| {row['condition']} | {wers} | {collapsed} | "
                                    f"{_fmt(attention.get('mean_max_column_mass'), 3)} | {row['status']} |")
            paired = summary.get("paired", [])
            if paired:
                report_lines.append("\n## WER Change against Clean\n")
                for entry in paired:
                    deltas = ", ".join(f"{split} {delta:+.2f}" for split, delta in entry["wer_delta"].items())
                    report_lines.append(f"- **{entry['condition']}:** {deltas}")

        # Failed rows details
        failed_rows = [row for row in rows if row.get("status") == "failed"]
        if failed_rows:
            report_lines.append(f"\n## Failed Rows ({len(failed_rows)})\n")
            for row in failed_rows:
                report_lines.append(f"- **{row['row']}:** {row.get('error', 'unknown error')}")

        assumed = {preset: fields for preset, fields in report.get("assumed_fields", {}).items() if fields}
        if assumed:
            report_lines.append("\n## Assumed Hyperparameters\n")
            for preset, fields in sorted(assumed.items()):
                report_lines.append(f"- **{preset}:** {', '.join(fields)}")

        report_content = "\n".join(report_lines) + "\n"
        _save(report_content, output_file, "Markdown report")
        return report_content

    @staticmethod
    def generate_comparison_report(reports: List[Dict[str, Any]], output_file: Optional[str] = None) -> str:
        """
        Generate a comparison table across experiment reports.

        Args:
            reports: Report dictionaries
            output_file: Optional file path to save report

        Returns:
            Markdown comparison report string
        """
        if not reports:
            return "No experiment reports provided for comparison.\n"

        report_lines = ["# Experiment Comparison Report", f"\n**Comparing {len(reports)} experiments**\n"]
        report_lines.append("| Experiment | Kind | Seed | Row | Split | WER | Status |")
        report_lines.append("|---|---|---|---|---|---|---|")
        for report in reports:
            for row in report.get("rows", []):
                wers = row.get("wer") or {None: None}
                for split, value in wers.items():
                    report_lines.append(f"| {report['name']} | {report['kind']} | {report['seed']} | "
                                        f"{row['row']} | {split or '-'} | {_fmt(value)} | {row['status']} |")

        report_content = "\n".join(report_lines) + "\n"
        _save(report_content, output_file, "Comparison report")
        return report_content
