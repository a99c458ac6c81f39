from utils.statistics import Statistics
from utils.format_utils import format_float, format_cell, parse_ratios, format_duration


__all__ = [
    'Statistics',
    'format_float',
    'format_cell',
    'parse_ratios',
    'format_duration',
]
