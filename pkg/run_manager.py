"""Run directory management shared by the harness commands"""
import os
import json
import tempfile

from errors import ConfigError

CONFIG_FILE = 'config.toml'
REPORT_FILE = 'report.json'
STEPS_FILE = 'steps.jsonl'
CHECKPOINT_FILE = 'checkpoint.hgd'
PLAN_FILE = 'match_plan.txt'
EVAL_FILE = 'eval.json'


def atomic_write_bytes(path, data):
    """Write a file through a temporary sibling and rename it into place"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode('utf-8'))


def atomic_write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + '\n')


def validate_run_name(run_name):
    """Validate run name format

    Run names may nest with '/', each part made of letters, digits, '_', '-' or '.'

    Args:
        run_name: Name to validate

    Returns:
        True if valid, False otherwise
    """
    if not run_name:
        return False
    return all(part and part not in ('.', '..') and all(c.isalnum() or c in ('_', '-', '.') for c in part)
               for part in run_name.split('/'))


def get_run_dir(output_dir, run_name):
    """Get directory path for a run"""
    if not validate_run_name(run_name):
        raise ConfigError(f"Invalid run name '{run_name}'. Use letters, numbers, '_', '-', '.' and '/'")
    return os.path.join(output_dir, *run_name.split('/'))


def ensure_run_dir(output_dir, run_name, exclusive=False):
    """Create the run directory

    Args:
        output_dir: Root of all runs
        run_name: Run name, may be nested (e.g. 'ablate/all/seed0')
        exclusive: Refuse a directory that already holds files

    Returns:
        Path of the run directory

    Raises:
        ConfigError: If exclusive and the directory is not empty
    """
    run_dir = get_run_dir(output_dir, run_name)
    if exclusive and os.path.isdir(run_dir) and os.listdir(run_dir):
        raise ConfigError(f"Run directory '{run_dir}' already exists and is not empty; refusing to overwrite it")
    os.makedirs(run_dir, exist_ok=True)
    return run_dir


def list_runs(output_dir):
    """List run names (relative paths) that hold a report"""
    runs = []
    if not os.path.isdir(output_dir):
        return runs
    for root, _dirs, files in os.walk(output_dir):
        if REPORT_FILE in files:
            runs.append(os.path.relpath(root, output_dir).replace(os.sep, '/'))
    return sorted(runs)


def append_jsonl(path, record):
    """Append one JSON record to a JSON-lines log"""
    with open(path, 'a', encoding='utf-8') as f:
        f.write(json.dumps(record, sort_keys=True) + '\n')
