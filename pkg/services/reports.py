# services/reports.py
"""
Report emission in json, csv and text formats

A report is a kind plus named sections, each a result record (or a list of
records) exposing to_dict / to_row. JSON output wraps the sections in a
versioned envelope; CSV writes the rows of the first section.
"""
import csv
import io
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from config.settings import REPORT_SCHEMA_VERSION
from models.report import Alpha0Estimate
from services.certifier import print_certificate

logger = logging.getLogger(__name__)

KINDS = ('certify', 'test', 'classify', 'alpha0', 'asymcheck')
CLASSIFY_COLUMNS = ('index', 'family', 'interval', 'status', 'condition_id', 'citation')


def _payload(section):
    if section is None:
        return None
    if isinstance(section, (list, tuple)):
        return [_payload(item) for item in section]
    if isinstance(section, dict):
        return section
    if hasattr(section, 'to_dict'):
        return section.to_dict()
    return str(section)


def _flatten(row):
    """CSV-safe copy of a dict: nested values become compact JSON"""
    return {key: json.dumps(value, sort_keys=True) if isinstance(value, (dict, list)) else value
            for key, value in row.items()}


def _rows(section):
    if isinstance(section, (list, tuple)):
        return [item.to_row() if hasattr(item, 'to_row')
                else _flatten(item if isinstance(item, dict) else item.to_dict()) for item in section]
    if hasattr(section, 'to_rows'):
        return section.to_rows()
    if hasattr(section, 'walk'):
        return [{'depth': depth, 'class': node.conclusion.kind, 'subject': node.subject, 'rule': node.rule,
                 'citation': node.citation, 'strict': node.strict}
                for depth, node in _walk_with_depth(section)]
    if hasattr(section, 'to_row'):
        return [section.to_row()]
    return [_flatten(section.to_dict())]


def _walk_with_depth(certificate, depth=0):
    yield depth, certificate
    for premise in certificate.premises:
        yield from _walk_with_depth(premise, depth + 1)


def render_json(kind, sections, timestamp=True, config=None):
    envelope = {'schema_version': REPORT_SCHEMA_VERSION, 'kind': kind}
    if timestamp:
        envelope['generated_at'] = datetime.now(timezone.utc).isoformat(timespec='seconds')
    if config is not None:
        envelope['config'] = {'precision_bits': config.precision, 'order': config.order,
                              'grid_size': config.grid_size, 'tol': config.tol, 'seed': config.seed}
    envelope.update({name: _payload(section) for name, section in sections.items()})
    return json.dumps(envelope, indent=2) + '\n'


def render_csv(sections, columns=None):
    section = next(iter(sections.values()))
    rows = _rows(section)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(key for key in row if key not in columns)
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator='\n', extrasaction='ignore')
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def _table(rows, columns):
    widths = {c: max([len(c)] + [len(str(row.get(c, ''))) for row in rows]) for c in columns}
    lines = ['  '.join(c.ljust(widths[c]) for c in columns)]
    lines += ['  '.join(str(row.get(c, '')).ljust(widths[c]) for c in columns) for row in rows]
    return '\n'.join(line.rstrip() for line in lines)


def _text_test(sections):
    report = sections['report']
    verdict = report.verdict
    lines = [
        f"expression: {report.expression}",
        f"interval:   {report.interval}",
        f"mode:       {report.mode}  N={report.order}  P={report.precision_bits}  points={len(report.grid)}",
        f"verdict:    {verdict.status}",
    ]
    if verdict.order is not None:
        worst = verdict.to_dict()
        lines.append(f"worst cell: n={worst['order']} x={worst['point']} margin={worst['margin']}")
    if report.skipped:
        lines.append(f"skipped:    {len(report.skipped)} points")
    strictness = sections.get('strictness')
    if strictness is not None:
        lines.append(f"min margin: {strictness}")
    witness = sections.get('witness')
    if witness is not None:
        if witness.found:
            data = witness.to_dict()
            lines.append(f"witness:    n={data['order']} x={data['point']} margin={data['confirmed_margin']} "
                         f"(confirmed at {2 * data['precision_bits']} bits)")
        else:
            lines.append(f"witness:    none within {witness.budget} evaluations")
    return '\n'.join(lines)


def _text_classify(sections):
    verdict = sections['verdict']
    lines = [f"family:     {sections['family']}", f"status:     {verdict.status}",
             f"condition:  {verdict.condition_id}", f"citation:   {verdict.citation}"]
    if verdict.reason:
        lines.append(f"reason:     {verdict.reason}")
    if verdict.is_monotone:
        lines.append(f"strict:     {'yes' if verdict.strict else 'no'}")
    for name, value in verdict.thresholds.items():
        lines.append(f"threshold:  {name} = {value}")
    return '\n'.join(lines)


def render_text(kind, sections):
    if kind == 'certify':
        return print_certificate(sections['certificate']) + '\n'
    if kind == 'test':
        return _text_test(sections) + '\n'
    if kind == 'classify' and 'verdict' in sections:
        return _text_classify(sections) + '\n'
    section = next(iter(sections.values()))
    rows = _rows(section)
    if kind == 'alpha0':
        return _table(rows, Alpha0Estimate.CSV_COLUMNS) + '\n'
    if kind == 'classify':
        return _table(rows, CLASSIFY_COLUMNS) + '\n'
    columns = list(rows[0]) if rows else []
    return _table(rows, columns) + '\n'


def render(kind, sections, output_format='text', timestamp=True, config=None):
    """Report text in the requested format"""
    if kind not in KINDS:
        raise ValueError(f"Unknown report kind: {kind}")
    if output_format == 'json':
        return render_json(kind, sections, timestamp, config)
    if output_format == 'csv':
        columns = None
        if kind == 'alpha0':
            columns = Alpha0Estimate.CSV_COLUMNS
        return render_csv(sections, columns)
    return render_text(kind, sections)


def write_report(text, output_path=None):
    """Write report text to output_path, or to stdout when none is given"""
    if output_path is None:
        sys.stdout.write(text)
        return
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    logger.info(f"Wrote report to {path}")
