"""Dashboard package for console output display."""

from .console_display import ReportDisplay

__all__ = ['ReportDisplay']
