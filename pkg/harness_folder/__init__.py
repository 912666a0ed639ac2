from .columns import ReportColumns
from .generator import GeneratorConfig, generate_instance, value_set
from .documents import (ParseError, parse, parse_market, parse_outcome, parse_rounding,
                        read_document, serialize, serialize_market, serialize_outcome,
                        serialize_rounding, write_document)
from .pipeline import PipelineResult, StageTimings, run_pipeline
from .experiment import (DEFAULT_AGENT_COUNTS, ExperimentReport, ExperimentRow, TrialRecord,
                         run_experiment, run_trial)

__all__ = [
    'ReportColumns', 'GeneratorConfig', 'generate_instance', 'value_set',
    'ParseError', 'parse', 'parse_market', 'parse_outcome', 'parse_rounding', 'read_document',
    'serialize', 'serialize_market', 'serialize_outcome', 'serialize_rounding', 'write_document',
    'PipelineResult', 'StageTimings', 'run_pipeline',
    'DEFAULT_AGENT_COUNTS', 'ExperimentReport', 'ExperimentRow', 'TrialRecord', 'run_experiment',
    'run_trial',
]
