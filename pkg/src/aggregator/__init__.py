"""Aggregator package for per-seed metric reports."""

from .data_aggregator import MetricsAggregator, VariantSummary, load_reports, write_report

__all__ = ['MetricsAggregator', 'VariantSummary', 'load_reports', 'write_report']
