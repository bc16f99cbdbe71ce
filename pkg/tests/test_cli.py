# tests/test_cli.py
import json
import logging
from fractions import Fraction

import pytest

import cmono
from config.settings import ENV_KEYS
from models.report import Alpha0Estimate, SlopeFit
from services import alpha0, asymptotics
from utils.errors import Alpha0Aborted

F = Fraction


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setattr(cmono, 'load_env', lambda: None)


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def run(*argv):
    return cmono.main([*argv, '--threads', '1', '--log-level', 'WARNING'])


def estimate(status='EMPIRICAL'):
    lo, hi = (F(3, 2), F(25, 16)) if status == 'EMPIRICAL' else (None, None)
    return Alpha0Estimate(a=F(0), b=F(1, 2), beta=F(1, 2), alpha_lo=lo, alpha_hi=hi, order=14,
                          grid_points=100, precision_bits=112, status=status)


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------

def test_certify_success(capsys):
    assert run('certify', 'exp(-x) on (0, inf)') == cmono.EXIT_OK
    assert 'CM' in capsys.readouterr().out


def test_certify_without_rule_is_inconclusive():
    assert run('certify', 'log((x + 1)/(x + 2)) on (0, inf)') == cmono.EXIT_INCONCLUSIVE


def test_certify_parse_error(capsys):
    assert run('certify', 'x + * 2') == cmono.EXIT_ERROR
    err = capsys.readouterr().err
    assert 'position 4' in err
    assert '    ^' in err


def test_certify_unsupported_primitive():
    assert run('certify', 'sin(x) on (0, inf)') == cmono.EXIT_ERROR


def test_report_written_to_file(tmp_path, capsys):
    path = tmp_path / 'out' / 'report.json'
    assert run('certify', 'exp(-x) on (0, inf)', '--format', 'json', '--out', str(path)) == cmono.EXIT_OK
    assert capsys.readouterr().out == ''
    data = json.loads(path.read_text(encoding='utf-8'))
    assert data['kind'] == 'certify'
    assert data['schema_version'] == '1'


def test_invalid_order_is_a_config_error(capsys):
    assert run('certify', 'exp(-x)', '--order', '99') == cmono.EXIT_ERROR
    assert 'error' in capsys.readouterr().err


# ---------------------------------------------------------------------------
# test
# ---------------------------------------------------------------------------

def test_sign_test_pass(capsys):
    assert run('test', 'exp(-x) on (0, inf)', '--order', '6', '--grid', '12') == cmono.EXIT_OK
    out = capsys.readouterr().out
    assert 'verdict:    PASS' in out
    assert 'min margin' in out


def test_sign_test_fail_reports_witness(capsys):
    code = run('test', 'x^2 on (0, inf)', '--order', '6', '--grid', '12', '--format', 'json',
               '--no-timestamp', '--seed', '7')
    assert code == cmono.EXIT_FAIL
    data = json.loads(capsys.readouterr().out)
    assert 'generated_at' not in data
    assert data['config']['seed'] == 7
    assert data['report']['verdict']['status'] == 'FAIL'
    assert data['witness']['status'] == 'FAIL'


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('target, code, status', [
    ('psi-gap a=0 b=0.5 alpha=1 beta=0.5', cmono.EXIT_OK, 'CM'),
    ('linfraclog a=0 b=1 c=0 d=2', cmono.EXIT_FAIL, 'NOT'),
    ('psi-gap a=0 b=0.3 alpha=2 beta=0.3', cmono.EXIT_INCONCLUSIVE, 'UNKNOWN'),
])
def test_classify_spec(capsys, target, code, status):
    assert run('classify', target) == code
    assert f"status:     {status}" in capsys.readouterr().out


def test_classify_file_csv(tmp_path, capsys):
    path = tmp_path / 'families.json'
    path.write_text(json.dumps([
        {'family': 'psi-gap', 'params': {'a': 0, 'b': 0.5, 'alpha': 1, 'beta': 0.5}},
        {'family': 'linfraclog', 'params': {'a': 0, 'b': 2, 'c': 0, 'd': 1}, 'interval': '(0, inf)'},
        {'family': 'psi-gap'},
    ]), encoding='utf-8')
    assert run('classify', '--file', str(path), '--format', 'csv') == cmono.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith('index,family,interval,status')
    assert len(lines) == 3
    assert lines[1].startswith('0,')
    assert lines[2].startswith('1,')


def test_classify_needs_target(capsys):
    assert run('classify') == cmono.EXIT_ERROR
    assert 'position 0' in capsys.readouterr().err


@pytest.mark.parametrize('target', ['nosuchfamily a=1', 'psi-gap a=0', 'psi-gap a=-1 b=0 alpha=1 beta=0'])
def test_classify_bad_family_is_an_error(target):
    assert run('classify', target) == cmono.EXIT_ERROR


# ---------------------------------------------------------------------------
# alpha0 and asymcheck
# ---------------------------------------------------------------------------

def test_alpha0_single_cell_csv(monkeypatch, capsys):
    calls = []

    def fake(*args):
        calls.append(args)
        return estimate()

    monkeypatch.setattr(alpha0, 'estimate_alpha0', fake)
    assert run('alpha0', '--a', '0', '--b', '0.5', '--format', 'csv') == cmono.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ','.join(Alpha0Estimate.CSV_COLUMNS)
    assert lines[1] == '0,0.5,0.5,1.5,1.5625,14,112,100,EMPIRICAL'
    assert calls[0][:3] == ('0', '0.5', 14)


def test_alpha0_sweep_with_aborted_cell(monkeypatch):
    monkeypatch.setattr(alpha0, 'sweep_alpha0', lambda *args: [estimate(), estimate(alpha0.ABORTED)])
    assert run('alpha0') == cmono.EXIT_INCONCLUSIVE


def test_alpha0_single_cell_abort_is_inconclusive(monkeypatch, capsys):
    def fake(*args):
        raise Alpha0Aborted("alpha=1.0 does not pass the sign test", [{'alpha': '1.0', 'status': 'FAIL'}])

    monkeypatch.setattr(alpha0, 'estimate_alpha0', fake)
    code = run('alpha0', '--a', '0', '--b', '0.5', '--format', 'json', '--no-timestamp')
    assert code == cmono.EXIT_INCONCLUSIVE
    row = json.loads(capsys.readouterr().out)['estimates'][0]
    assert row['status'] == alpha0.ABORTED
    assert row['alpha_lo'] is None
    assert row['trace'][-1] == {'error': 'alpha=1.0 does not pass the sign test'}


@pytest.mark.parametrize('slope, code', [(-2.05, cmono.EXIT_OK), (-1.0, cmono.EXIT_FAIL)])
def test_asymcheck_exit_code(monkeypatch, capsys, slope, code):
    calls = []

    def fake(**kwargs):
        calls.append(kwargs)
        return [SlopeFit('psi depth 1', -2.0, slope, 0.2, 16)]

    monkeypatch.setattr(asymptotics, 'asymptotic_checks', fake)
    assert run('asymcheck', '--gap', '0', '0.8') == code
    assert calls[0]['gap'] == ('0', '0.8')
    assert 'psi depth 1' in capsys.readouterr().out
