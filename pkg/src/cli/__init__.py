"""Command layer: run orchestration, manifests and the verification suite."""

from .commands import (
    apply_overrides,
    cmd_ablate,
    cmd_edit,
    cmd_gen,
    cmd_report,
    cmd_verify,
    parse_seeds,
)
from .manifest import RunManifest, read_manifest, write_manifest
from .verify import CheckResult, run_verify_suite

__all__ = [
    'CheckResult',
    'RunManifest',
    'apply_overrides',
    'cmd_ablate',
    'cmd_edit',
    'cmd_gen',
    'cmd_report',
    'cmd_verify',
    'parse_seeds',
    'read_manifest',
    'run_verify_suite',
    'write_manifest',
]
