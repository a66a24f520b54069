"""
Report Generator
Writes laboratory results as versioned JSON reports, CSV tables through pandas,
or a one-page PDF summary built with reportlab
"""

import json
import math
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from reportlab.lib import colors as rl_colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

SCHEMA_VERSION = "1.0"
REPORT_KEYS = ('schema_version', 'command', 'config_digest', 'seed', 'results', 'timings')


def jsonable(value: Any) -> Any:
    """numpy scalars and arrays to plain Python; non-finite floats to strings"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def build_report(command: str, results: Dict[str, Any], config_digest: Optional[str],
                 seed: Optional[int], timings: Dict[str, float]) -> Dict[str, Any]:
    return {
        'schema_version': SCHEMA_VERSION,
        'command': command,
        'config_digest': config_digest,
        'seed': seed,
        'results': jsonable(results),
        'timings': jsonable(timings),
    }


def validate_report(report: Dict[str, Any]) -> List[str]:
    """Problems with a report dict; empty when it matches the schema"""
    problems = [f"missing '{key}'" for key in REPORT_KEYS if key not in report]
    if report.get('schema_version') != SCHEMA_VERSION:
        problems.append(f"schema_version is {report.get('schema_version')!r}, expected {SCHEMA_VERSION!r}")
    if 'results' in report and not isinstance(report['results'], dict):
        problems.append("'results' must be an object")
    return problems


def report_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def results_frame(report: Dict[str, Any]) -> pd.DataFrame:
    """Tabular view: the 'rows' table when the results carry one, else flattened key/value pairs"""
    results = report['results']
    if isinstance(results.get('rows'), list) and results['rows']:
        return pd.DataFrame(results['rows'])
    flat = pd.json_normalize(results, sep='.')
    return pd.DataFrame({'field': flat.columns, 'value': [_cell(v) for v in flat.iloc[0].tolist()]})


def _cell(value: Any) -> Any:
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return value


def write_csv(report: Dict[str, Any], path: Optional[str]) -> str:
    text = results_frame(report).to_csv(index=False)
    if path:
        with open(path, 'w', newline='') as handle:
            handle.write(text)
    return text


def write_json(report: Dict[str, Any], path: Optional[str]) -> str:
    text = report_json(report)
    if path:
        with open(path, 'w') as handle:
            handle.write(text + "\n")
    return text


class PdfSummaryGenerator:
    """One-page PDF summary of a laboratory report"""

    def __init__(self, report: Dict[str, Any]):
        self.report = report
        self.color_scheme = {
            'primary': '#2E86AB',
            'dark': '#2B2D42',
            'light': '#f8f9fa',
            'grid': '#dee2e6',
        }

    def generate(self, output_filename: Optional[str] = None) -> str:
        if not output_filename:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            output_filename = f"mixnorm_{self.report['command']}_{timestamp}.pdf"

        doc = SimpleDocTemplate(output_filename, pagesize=letter, rightMargin=0.5 * inch,
                                leftMargin=0.5 * inch, topMargin=0.5 * inch, bottomMargin=0.5 * inch)
        styles = getSampleStyleSheet()
        title_style = ParagraphStyle('MixnormTitle', parent=styles['Heading1'], fontSize=20,
                                     textColor=rl_colors.HexColor(self.color_scheme['dark']),
                                     spaceAfter=18, alignment=TA_CENTER, fontName='Helvetica-Bold')

        story = [
            Paragraph(f"MIXED NORM LABORATORY: {self.report['command'].upper()}", title_style),
            Paragraph(f"Config digest: {self.report.get('config_digest') or 'none'}", styles['Normal']),
            Paragraph(f"Seed: {self.report.get('seed')}", styles['Normal']),
            Spacer(1, 0.2 * inch),
            self._results_table(),
        ]
        doc.build(story)
        return output_filename

    def _results_table(self) -> Table:
        frame = results_frame(self.report)
        data = [list(frame.columns)] + [[_shorten(v) for v in row] for row in frame.itertuples(index=False)]
        table = Table(data, repeatRows=1)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), rl_colors.HexColor(self.color_scheme['primary'])),
            ('TEXTCOLOR', (0, 0), (-1, 0), rl_colors.whitesmoke),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
            ('GRID', (0, 0), (-1, -1), 1, rl_colors.HexColor(self.color_scheme['grid'])),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [rl_colors.white, rl_colors.HexColor(self.color_scheme['light'])]),
        ]))
        return table


def _shorten(value: Any, width: int = 80) -> str:
    text = f"{value:.10g}" if isinstance(value, float) else str(value)
    return text if len(text) <= width else text[:width - 3] + "..."


def write_report(report: Dict[str, Any], fmt: str, path: Optional[str]) -> Optional[str]:
    """Write in the requested format; returns the text for json/csv, the file name for pdf"""
    if fmt == 'json':
        return write_json(report, path)
    if fmt == 'csv':
        return write_csv(report, path)
    return PdfSummaryGenerator(report).generate(path)
